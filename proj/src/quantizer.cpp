#include "tokviz/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include <fmt/format.h>

namespace tokviz {

const std::vector<ConfigField>& config_fields() {
    static const GridConfig d{};
    static const std::vector<ConfigField> fields = {
        {"positionsPerBeat", "integer", static_cast<double>(d.positionsPerBeat), 1, 96},
        {"numVelocityBins", "integer", static_cast<double>(d.numVelocityBins), 1, 127},
        {"maxDurationBeats", "integer", static_cast<double>(d.maxDurationBeats), 1, 64},
        {"pitchMin", "integer", static_cast<double>(d.pitchMin), 0, 127},
        {"pitchMax", "integer", static_cast<double>(d.pitchMax), 0, 127},
        {"numTempoBins", "integer", static_cast<double>(d.numTempoBins), 1, 256},
        {"tempoMinBpm", "number", d.tempoMinBpm, 1, 1000},
        {"tempoMaxBpm", "number", d.tempoMaxBpm, 1, 1000},
    };
    return fields;
}

ConfigError::ConfigError(std::string field, const std::string& reason)
    : std::runtime_error(fmt::format("{}: {}", field, reason)), field_(std::move(field)) {}

void validate(const GridConfig& c) {
    auto check = [](const char* name, double value) {
        for (const auto& f : config_fields()) {
            if (std::string_view(f.name) != name) continue;
            if (!(value >= f.min && value <= f.max)) {
                throw ConfigError(name, fmt::format("must be between {} and {}, got {}", f.min, f.max, value));
            }
        }
    };
    check("positionsPerBeat", c.positionsPerBeat);
    check("numVelocityBins", c.numVelocityBins);
    check("maxDurationBeats", c.maxDurationBeats);
    check("pitchMin", c.pitchMin);
    check("pitchMax", c.pitchMax);
    check("numTempoBins", c.numTempoBins);
    check("tempoMinBpm", c.tempoMinBpm);
    check("tempoMaxBpm", c.tempoMaxBpm);
    if (c.pitchMin >= c.pitchMax) throw ConfigError("pitchMin", "must be lower than pitchMax");
    if (c.tempoMinBpm >= c.tempoMaxBpm) throw ConfigError("tempoMinBpm", "must be lower than tempoMaxBpm");
}

const QuantizedTrack* QuantizedScore::find_track(int trackIndex) const {
    for (const auto& t : tracks) {
        if (t.trackIndex == trackIndex) return &t;
    }
    return nullptr;
}

int velocity_bin(int velocity, int numBins) {
    auto binValue = [numBins](Units i) { return static_cast<int>(round_div(i * 127, numBins)); };
    // The nearest bin index is within one of velocity * n / 127.
    const Units guess = static_cast<Units>(velocity) * numBins / 127;
    int best = binValue(std::clamp<Units>(guess, 1, numBins));
    for (Units i = std::max<Units>(1, guess - 1); i <= std::min<Units>(numBins, guess + 2); ++i) {
        const int v = binValue(i);
        const int d = std::abs(v - velocity);
        const int bestD = std::abs(best - velocity);
        if (d < bestD || (d == bestD && v > best)) best = v;
    }
    return best;
}

int tempo_bin(double bpm, const GridConfig& c) {
    double value = c.tempoMinBpm;
    if (c.numTempoBins > 1) {
        const double step = (c.tempoMaxBpm - c.tempoMinBpm) / (c.numTempoBins - 1);
        const double x = std::clamp(bpm, c.tempoMinBpm, c.tempoMaxBpm);
        const double pos = (x - c.tempoMinBpm) / step;
        auto index = static_cast<int>(std::floor(pos));
        if (pos - index >= 0.5) ++index;
        index = std::clamp(index, 0, c.numTempoBins - 1);
        value = c.tempoMinBpm + index * (c.tempoMaxBpm - c.tempoMinBpm) / (c.numTempoBins - 1);
    }
    return static_cast<int>(std::floor(value + 0.5));
}

bool note_order(const QuantizedNote& a, const QuantizedNote& b) {
    return std::tie(a.onsetUnits, a.pitch, a.durationUnits, a.noteId) <
           std::tie(b.onsetUnits, b.pitch, b.durationUnits, b.noteId);
}

BarEntry bar_at(const BarMap& barMap, Units bar) {
    if (bar < static_cast<Units>(barMap.size())) return barMap[static_cast<std::size_t>(bar)];
    BarEntry e = barMap.back();
    e.startUnits += (bar - e.bar) * e.unitsPerBar;
    e.bar = bar;
    return e;
}

BarPosition units_to_bar_position(const BarMap& barMap, Units units) {
    auto it = std::upper_bound(barMap.begin(), barMap.end(), units,
                               [](Units u, const BarEntry& b) { return u < b.startUnits; });
    const BarEntry& bar = it == barMap.begin() ? barMap.front() : *std::prev(it);
    const Units offset = units - bar.startUnits;
    return {bar.bar + offset / bar.unitsPerBar, offset % bar.unitsPerBar};
}

BarPosition units_to_bar_position(const QuantizedScore& q, Units units) {
    return units_to_bar_position(q.barMap, units);
}

namespace {

Units ticks_to_units(Tick tick, int tpq, int ppb) {
    return round_div(tick * ppb, tpq);
}

Units units_per_bar(const TimeSigEntry& ts, int ppb) {
    const Units quarterUnits = static_cast<Units>(ts.numerator) * ppb * 4;
    if (quarterUnits % ts.denominator != 0) {
        throw ConfigError("positionsPerBeat",
                          fmt::format("time signature {}/{} gives a non-integer bar length at {} positions per beat",
                                      ts.numerator, ts.denominator, ppb));
    }
    return quarterUnits / ts.denominator;
}

BarMap build_bar_map(const std::vector<TimeSigEntry>& timeSigs, int tpq, int ppb, Units lastOnset,
                     std::vector<std::string>& warnings) {
    for (const auto& ts : timeSigs) units_per_bar(ts, ppb);

    BarMap bars;
    TimeSigEntry current = timeSigs.front();
    std::size_t next = 1;
    Units start = 0;
    std::size_t snapped = 0;
    while (start <= lastOnset) {
        while (next < timeSigs.size() && ticks_to_units(timeSigs[next].tick, tpq, ppb) <= start) {
            if (ticks_to_units(timeSigs[next].tick, tpq, ppb) < start) ++snapped;
            current = timeSigs[next++];
        }
        if (static_cast<Units>(bars.size()) >= kMaxBars) {
            throw ConfigError("positionsPerBeat", fmt::format("score spans more than {} bars", kMaxBars));
        }
        const Units length = units_per_bar(current, ppb);
        bars.push_back({static_cast<Units>(bars.size()), start, length, current.numerator, current.denominator});
        start += length;
    }
    if (snapped > 0) {
        warnings.push_back(fmt::format("{} time signature change(s) inside a bar moved to the next bar line", snapped));
    }
    return bars;
}

}  // namespace

QuantizedScore quantize(const Score& score, const GridConfig& config) {
    validate(config);
    QuantizedScore q;
    q.config = config;
    const int tpq = score.ticksPerQuarter;
    const int ppb = config.positionsPerBeat;
    const Units maxDur = config.maxDurationUnits();

    Score maps;
    maps.tempoMap = score.tempoMap;
    maps.timeSigMap = score.timeSigMap;
    normalize_maps(maps);

    Units lastOnset = 0;
    for (const auto& track : score.tracks) {
        for (const auto& n : track.notes) {
            if (n.pitch >= config.pitchMin && n.pitch <= config.pitchMax) {
                lastOnset = std::max(lastOnset, ticks_to_units(n.onsetTick, tpq, ppb));
            }
        }
    }
    q.barMap = build_bar_map(maps.timeSigMap, tpq, ppb, lastOnset, q.warnings);

    for (const auto& track : score.tracks) {
        QuantizedTrack qt{track.index, track.program, track.drums, {}};
        std::size_t dropped = 0;
        for (const auto& n : track.notes) {
            if (n.pitch < config.pitchMin || n.pitch > config.pitchMax) {
                ++dropped;
                continue;
            }
            QuantizedNote qn;
            qn.noteId = n.id;
            qn.pitch = n.pitch;
            qn.velocityBin = velocity_bin(n.velocity, config.numVelocityBins);
            qn.onsetUnits = ticks_to_units(n.onsetTick, tpq, ppb);
            qn.durationUnits = std::clamp<Units>(ticks_to_units(n.durationTicks, tpq, ppb), 1, maxDur);
            const auto bp = units_to_bar_position(q.barMap, qn.onsetUnits);
            qn.bar = bp.bar;
            qn.positionInBar = bp.position;
            qt.notes.push_back(qn);
        }
        if (dropped > 0) {
            q.warnings.push_back(fmt::format("track {}: {} note(s) outside pitch range {}-{} dropped", track.index,
                                             dropped, config.pitchMin, config.pitchMax));
        }
        std::sort(qt.notes.begin(), qt.notes.end(), note_order);
        q.tracks.push_back(std::move(qt));
    }

    for (const auto& e : maps.tempoMap) {
        const TempoBinEntry entry{ticks_to_units(e.tick, tpq, ppb), tempo_bin(e.bpm, config)};
        if (!q.tempoBinMap.empty() && q.tempoBinMap.back().startUnits == entry.startUnits) {
            q.tempoBinMap.back() = entry;
        } else {
            q.tempoBinMap.push_back(entry);
        }
    }
    std::vector<TempoBinEntry> dedup;
    for (const auto& e : q.tempoBinMap) {
        if (dedup.empty() || dedup.back().bpm != e.bpm) dedup.push_back(e);
    }
    q.tempoBinMap = std::move(dedup);
    return q;
}

Score reconstruct_score(const QuantizedScore& q) {
    Score s;
    s.ticksPerQuarter = q.config.positionsPerBeat;
    for (const auto& qt : q.tracks) {
        Track t{qt.trackIndex, {}, qt.program, qt.drums, {}};
        for (const auto& n : qt.notes) {
            t.notes.push_back({n.noteId, n.pitch, n.velocityBin, n.onsetUnits, n.durationUnits, qt.trackIndex});
        }
        std::stable_sort(t.notes.begin(), t.notes.end(), [](const Note& a, const Note& b) {
            return std::tie(a.onsetTick, a.pitch) < std::tie(b.onsetTick, b.pitch);
        });
        s.tracks.push_back(std::move(t));
    }
    for (const auto& e : q.tempoBinMap) s.tempoMap.push_back({e.startUnits, static_cast<double>(e.bpm)});
    for (const auto& b : q.barMap) s.timeSigMap.push_back({b.startUnits, b.numerator, b.denominator});
    normalize_maps(s);
    return s;
}

}  // namespace tokviz

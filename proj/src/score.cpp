#include "tokviz/score.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <map>

#include <fmt/format.h>

namespace tokviz {

namespace {

constexpr int kDrumChannel = 9;

struct PendingNote {
    Tick onset;
    int velocity;
    std::size_t seq;
};

struct SortableNote {
    Note note;
    std::size_t occurrence;
};

// Latin-1 to UTF-8; track names in the wild are rarely valid UTF-8.
std::string latin1_to_utf8(const midi::Bytes& data) {
    std::string out;
    for (std::uint8_t c : data) {
        if (c < 0x20) continue;
        if (c < 0x80) {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back(static_cast<char>(0xC0 | (c >> 6)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
        }
    }
    return out;
}

template <typename Entry, typename SameValue>
void normalize_map(std::vector<Entry>& map, const Entry& fallback, SameValue same) {
    std::stable_sort(map.begin(), map.end(), [](const Entry& a, const Entry& b) { return a.tick < b.tick; });
    std::vector<Entry> out;
    for (const auto& e : map) {
        if (!out.empty() && out.back().tick == e.tick) {
            out.back() = e;
        } else {
            out.push_back(e);
        }
    }
    if (out.empty() || out.front().tick > 0) out.insert(out.begin(), fallback);
    std::vector<Entry> dedup;
    for (const auto& e : out) {
        if (dedup.empty() || !same(dedup.back(), e)) dedup.push_back(e);
    }
    map = std::move(dedup);
}


}  // namespace

SecondsClock::SecondsClock(const Score& score) : tpq_(score.ticksPerQuarter) {
    double acc = 0.0;
    for (const auto& e : score.tempoMap) {
        if (!segments_.empty()) {
            const auto& prev = segments_.back();
            acc += static_cast<double>(e.tick - prev.tick) * seconds_per_tick(prev.bpm);
        }
        segments_.push_back({e.tick, e.bpm, acc});
    }
    if (segments_.empty() || segments_.front().tick > 0) segments_.insert(segments_.begin(), {0, kDefaultBpm, 0.0});
}

double SecondsClock::operator()(Tick tick) const {
    auto it = std::upper_bound(segments_.begin(), segments_.end(), tick,
                               [](Tick t, const Segment& s) { return t < s.tick; });
    if (it == segments_.begin()) return 0.0;
    --it;
    return it->start + static_cast<double>(tick - it->tick) * seconds_per_tick(it->bpm);
}

void normalize_maps(Score& score) {
    normalize_map(score.tempoMap, TempoEntry{0, kDefaultBpm},
                  [](const TempoEntry& a, const TempoEntry& b) { return a.bpm == b.bpm; });
    normalize_map(score.timeSigMap, TimeSigEntry{0, 4, 4}, [](const TimeSigEntry& a, const TimeSigEntry& b) {
        return a.numerator == b.numerator && a.denominator == b.denominator;
    });
    normalize_map(score.keySigMap, KeySigEntry{0, 0, midi::Mode::Major}, [](const KeySigEntry& a, const KeySigEntry& b) {
        return a.sharpsFlats == b.sharpsFlats && a.mode == b.mode;
    });
}

Score build_score(const midi::RawMidiFile& raw) {
    Score score;
    score.ticksPerQuarter = raw.ticksPerQuarter;
    score.warnings = raw.warnings;

    std::size_t emptyTracks = 0;
    for (std::size_t t = 0; t < raw.tracks.size(); ++t) {
        const auto& rawTrack = raw.tracks[t];
        Track track;
        track.index = static_cast<int>(t);
        bool haveProgram = false;
        bool haveName = false;

        std::map<std::pair<int, int>, std::deque<PendingNote>> open;
        std::vector<SortableNote> notes;
        std::vector<int> noteChannels;
        std::size_t strayOffs = 0;
        std::size_t zeroLength = 0;
        std::size_t onCount = 0;

        auto emit = [&](int channel, int pitch, const PendingNote& on, Tick end) {
            notes.push_back({Note{0, pitch, on.velocity, on.onset, end - on.onset, track.index}, on.seq});
            noteChannels.push_back(channel);
        };

        for (const auto& ev : rawTrack.events) {
            if (const auto* on = std::get_if<midi::NoteOn>(&ev.payload)) {
                open[{on->channel, on->pitch}].push_back({ev.tick, on->velocity, onCount++});
            } else if (const auto* off = std::get_if<midi::NoteOff>(&ev.payload)) {
                auto it = open.find({off->channel, off->pitch});
                if (it == open.end() || it->second.empty()) {
                    ++strayOffs;
                    continue;
                }
                const PendingNote pending = it->second.front();
                it->second.pop_front();
                if (ev.tick == pending.onset) {
                    ++zeroLength;
                    continue;
                }
                emit(off->channel, off->pitch, pending, ev.tick);
            } else if (const auto* tempo = std::get_if<midi::Tempo>(&ev.payload)) {
                score.tempoMap.push_back({ev.tick, 60000000.0 / tempo->microsPerQuarter});
            } else if (const auto* ts = std::get_if<midi::TimeSignature>(&ev.payload)) {
                score.timeSigMap.push_back({ev.tick, ts->numerator, ts->denominator});
            } else if (const auto* ks = std::get_if<midi::KeySignature>(&ev.payload)) {
                score.keySigMap.push_back({ev.tick, ks->sharpsFlats, ks->mode});
            } else if (const auto* pc = std::get_if<midi::ProgramChange>(&ev.payload)) {
                if (!haveProgram) track.program = pc->program;
                haveProgram = true;
            } else if (const auto* other = std::get_if<midi::OtherEvent>(&ev.payload)) {
                if (!haveName && other->status == 0xFF && other->metaType == midi::kMetaTrackName) {
                    track.name = latin1_to_utf8(other->data);
                    haveName = true;
                }
            }
        }

        std::size_t orphans = 0;
        for (auto& [key, queue] : open) {
            for (const auto& pending : queue) {
                emit(key.first, key.second, pending, std::max(rawTrack.endTick, pending.onset + 1));
                ++orphans;
            }
        }
        if (orphans > 0) {
            score.warnings.push_back(fmt::format("track {}: {} note(s) without NoteOff closed at tick {}", t, orphans,
                                                 rawTrack.endTick));
        }
        if (strayOffs > 0) score.warnings.push_back(fmt::format("track {}: {} unmatched NoteOff event(s) ignored", t, strayOffs));
        if (zeroLength > 0) score.warnings.push_back(fmt::format("track {}: {} zero-length note(s) dropped", t, zeroLength));

        if (notes.empty()) {
            ++emptyTracks;
            continue;
        }
        track.drums = std::all_of(noteChannels.begin(), noteChannels.end(), [](int c) { return c == kDrumChannel; });

        std::sort(notes.begin(), notes.end(), [](const SortableNote& a, const SortableNote& b) {
            return std::tie(a.note.onsetTick, a.note.pitch, a.occurrence) < std::tie(b.note.onsetTick, b.note.pitch, b.occurrence);
        });
        track.notes.reserve(notes.size());
        for (auto& n : notes) track.notes.push_back(n.note);
        score.tracks.push_back(std::move(track));
    }
    if (emptyTracks > 0) score.warnings.push_back(fmt::format("{} track(s) without notes dropped", emptyTracks));

    NoteId next = 0;
    for (auto& track : score.tracks) {
        for (auto& note : track.notes) note.id = next++;
    }
    normalize_maps(score);
    return score;
}

double tick_to_seconds(const Score& score, Tick tick) {
    return SecondsClock(score)(tick);
}

ScoreMetadata extract_metadata(const Score& score) {
    ScoreMetadata meta;
    meta.ticksPerQuarter = score.ticksPerQuarter;
    const SecondsClock clock(score);

    Tick end = 0;
    for (const auto& track : score.tracks) {
        PitchRange range{track.index, static_cast<int>(track.notes.size()), std::nullopt, std::nullopt};
        for (const auto& n : track.notes) {
            range.pitchMin = std::min(range.pitchMin.value_or(n.pitch), n.pitch);
            range.pitchMax = std::max(range.pitchMax.value_or(n.pitch), n.pitch);
            end = std::max(end, n.endTick());
        }
        meta.noteCount += range.noteCount;
        if (range.pitchMin) {
            meta.pitchMin = std::min(meta.pitchMin.value_or(*range.pitchMin), *range.pitchMin);
            meta.pitchMax = std::max(meta.pitchMax.value_or(*range.pitchMax), *range.pitchMax);
        }
        meta.trackRanges.push_back(range);
    }
    meta.durationSeconds = clock(end);
    for (const auto& e : score.tempoMap) meta.tempoMap.emplace_back(e, clock(e.tick));
    for (const auto& e : score.timeSigMap) meta.timeSigMap.emplace_back(e, clock(e.tick));
    for (const auto& e : score.keySigMap) meta.keySigMap.emplace_back(e, clock(e.tick));
    return meta;
}

std::string key_name(int sharpsFlats, midi::Mode mode) {
    static constexpr std::array<const char*, 15> kMajor = {"Cb", "Gb", "Db", "Ab", "Eb", "Bb", "F", "C",
                                                           "G",  "D",  "A",  "E",  "B",  "F#", "C#"};
    static constexpr std::array<const char*, 15> kMinor = {"Ab", "Eb", "Bb", "F",  "C",  "G",  "D", "A",
                                                           "E",  "B",  "F#", "C#", "G#", "D#", "A#"};
    const int idx = std::clamp(sharpsFlats, -7, 7) + 7;
    return mode == midi::Mode::Minor ? fmt::format("{} minor", kMinor[idx]) : fmt::format("{} major", kMajor[idx]);
}

}  // namespace tokviz

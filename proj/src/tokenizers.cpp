#include "tokviz/tokenizers.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <deque>
#include <set>
#include <tuple>

#include <fmt/format.h>

namespace tokviz {

std::string_view scheme_name(Scheme scheme) {
    switch (scheme) {
        case Scheme::REMI: return "REMI";
        case Scheme::TSD: return "TSD";
        case Scheme::MIDILike: return "MIDILike";
        case Scheme::Structured: return "Structured";
        case Scheme::CPWord: return "CPWord";
        case Scheme::Octuple: return "Octuple";
    }
    return "";
}

std::optional<Scheme> parse_scheme(std::string_view text) {
    auto fold = [](std::string_view s) {
        std::string out;
        for (char c : s) {
            if (c == '-' || c == '_') continue;
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
        return out;
    };
    const std::string wanted = fold(text);
    for (Scheme s : kAllSchemes) {
        if (fold(scheme_name(s)) == wanted) return s;
    }
    return std::nullopt;
}

int compound_width(Scheme scheme) {
    switch (scheme) {
        case Scheme::CPWord: return 5;
        case Scheme::Octuple: return 8;
        default: return 0;
    }
}

const std::vector<std::string>& token_types(Scheme scheme) {
    static const std::vector<std::string> remi = {"Bar", "Position", "Pitch", "Velocity", "Duration"};
    static const std::vector<std::string> tsd = {"TimeShift", "Pitch", "Velocity", "Duration"};
    static const std::vector<std::string> midilike = {"NoteOn", "Velocity", "NoteOff", "TimeShift"};
    static const std::vector<std::string> structured = {"TimeShift", "Pitch", "Velocity", "Duration"};
    static const std::vector<std::string> cpword = {"Family", "Bar", "Position", "Pitch", "Velocity", "Duration", "Ignore"};
    static const std::vector<std::string> octuple = {"Pitch", "Velocity", "Duration", "Position",
                                                     "Bar",   "Program",  "Tempo",    "TimeSig"};
    switch (scheme) {
        case Scheme::REMI: return remi;
        case Scheme::TSD: return tsd;
        case Scheme::MIDILike: return midilike;
        case Scheme::Structured: return structured;
        case Scheme::CPWord: return cpword;
        case Scheme::Octuple: return octuple;
    }
    return remi;
}

UnknownTrack::UnknownTrack(int trackIndex) : std::runtime_error(fmt::format("no track with index {}", trackIndex)) {}

MalformedStream::MalformedStream(std::size_t index, const std::string& what)
    : std::runtime_error(fmt::format("token {}: {}", index, what)), index_(index) {}

std::vector<Units> split_time_shift(Units gap, Units maxShift) {
    std::vector<Units> out;
    for (; gap > 0; gap -= std::min(gap, maxShift)) out.push_back(std::min(gap, maxShift));
    return out;
}

namespace {

const Cell kIgnore{"Ignore", "Ignore"};

std::string num(Units v) {
    return std::to_string(v);
}

class StreamBuilder {
public:
    StreamBuilder(Scheme scheme, int trackIndex) { out_.stream = {scheme, trackIndex, {}, {}, {}}; }

    void add(std::string type, std::string value, std::optional<NoteId> note = std::nullopt) {
        const std::size_t index = out_.stream.tokens.size();
        out_.stream.tokens.push_back({index, {std::move(type), std::move(value)}, note});
        link(index, note);
    }

    void add(std::vector<Cell> cells, std::optional<NoteId> note = std::nullopt) {
        const std::size_t index = out_.stream.compounds.size();
        out_.stream.compounds.push_back({index, std::move(cells), note});
        link(index, note);
    }

    void warn(std::string message) { out_.warnings.push_back(std::move(message)); }

    Tokenization finish() {
        std::set<Cell> seen;
        auto visit = [&](const Cell& c) {
            if (seen.insert(c).second) out_.stream.vocabulary.push_back(c);
        };
        for (const auto& t : out_.stream.tokens) visit(t.cell);
        for (const auto& t : out_.stream.compounds) {
            for (const auto& c : t.cells) visit(c);
        }
        return std::move(out_);
    }

private:
    void link(std::size_t index, std::optional<NoteId> note) {
        if (!note) return;
        out_.map.tokenToNote[index] = *note;
        out_.map.noteToTokens[*note].push_back(index);
    }

    Tokenization out_;
};

const QuantizedTrack& require_track(const QuantizedScore& q, int trackIndex) {
    const auto* track = q.find_track(trackIndex);
    if (track == nullptr) throw UnknownTrack(trackIndex);
    return *track;
}

// Calls onBar(bar) for every bar from 0 to the last occupied one, onPosition(pos)
// once per occupied position and onNote(note) for each note, in stream order.
template <typename OnBar, typename OnPosition, typename OnNote>
void walk_bars(const QuantizedTrack& track, OnBar onBar, OnPosition onPosition, OnNote onNote) {
    const auto& notes = track.notes;
    if (notes.empty()) return;
    const Units lastBar = notes.back().bar;
    std::size_t i = 0;
    for (Units bar = 0; bar <= lastBar; ++bar) {
        onBar(bar);
        while (i < notes.size() && notes[i].bar == bar) {
            const Units pos = notes[i].positionInBar;
            onPosition(pos);
            for (; i < notes.size() && notes[i].bar == bar && notes[i].positionInBar == pos; ++i) onNote(notes[i]);
        }
    }
}

void add_note_triple(StreamBuilder& b, const QuantizedNote& n) {
    b.add("Pitch", num(n.pitch), n.noteId);
    b.add("Velocity", num(n.velocityBin), n.noteId);
    b.add("Duration", num(n.durationUnits), n.noteId);
}

void add_time_shifts(StreamBuilder& b, Units gap, Units maxShift) {
    for (Units d : split_time_shift(gap, maxShift)) b.add("TimeShift", num(d));
}

}  // namespace

Tokenization tokenize_remi(const QuantizedScore& q, int trackIndex) {
    const auto& track = require_track(q, trackIndex);
    StreamBuilder b(Scheme::REMI, trackIndex);
    walk_bars(
        track, [&](Units) { b.add("Bar", "None"); }, [&](Units pos) { b.add("Position", num(pos)); },
        [&](const QuantizedNote& n) { add_note_triple(b, n); });
    return b.finish();
}

Tokenization tokenize_tsd(const QuantizedScore& q, int trackIndex) {
    const auto& track = require_track(q, trackIndex);
    StreamBuilder b(Scheme::TSD, trackIndex);
    Units cursor = 0;
    for (const auto& n : track.notes) {
        if (n.onsetUnits > cursor) {
            add_time_shifts(b, n.onsetUnits - cursor, q.config.maxDurationUnits());
            cursor = n.onsetUnits;
        }
        add_note_triple(b, n);
    }
    return b.finish();
}

Tokenization tokenize_midilike(const QuantizedScore& q, int trackIndex) {
    const auto& track = require_track(q, trackIndex);
    StreamBuilder b(Scheme::MIDILike, trackIndex);

    struct Event {
        Units time;
        int kind;  // 0 = off, 1 = on
        int pitch;
        std::size_t note;
    };
    std::vector<Event> events;
    events.reserve(track.notes.size() * 2);
    for (std::size_t i = 0; i < track.notes.size(); ++i) {
        const auto& n = track.notes[i];
        events.push_back({n.onsetUnits, 1, n.pitch, i});
        events.push_back({n.onsetUnits + n.durationUnits, 0, n.pitch, i});
    }
    std::sort(events.begin(), events.end(), [](const Event& x, const Event& y) {
        return std::tie(x.time, x.kind, x.pitch, x.note) < std::tie(y.time, y.kind, y.pitch, y.note);
    });

    Units cursor = 0;
    for (const auto& e : events) {
        if (e.time > cursor) {
            add_time_shifts(b, e.time - cursor, q.config.maxDurationUnits());
            cursor = e.time;
        }
        const auto& n = track.notes[e.note];
        if (e.kind == 1) {
            b.add("NoteOn", num(n.pitch), n.noteId);
            b.add("Velocity", num(n.velocityBin), n.noteId);
        } else {
            b.add("NoteOff", num(n.pitch), n.noteId);
        }
    }
    return b.finish();
}

Tokenization tokenize_structured(const QuantizedScore& q, int trackIndex) {
    const auto& track = require_track(q, trackIndex);
    StreamBuilder b(Scheme::Structured, trackIndex);
    const Units maxShift = q.config.maxDurationUnits();
    Units previous = 0;
    std::size_t clamped = 0;
    for (const auto& n : track.notes) {
        Units shift = n.onsetUnits - previous;
        if (shift > maxShift) {
            shift = maxShift;
            ++clamped;
        }
        previous = n.onsetUnits;
        b.add("TimeShift", num(shift), n.noteId);
        add_note_triple(b, n);
    }
    if (clamped > 0) {
        b.warn(fmt::format("track {}: {} Structured time shift(s) clamped to {} units", trackIndex, clamped, maxShift));
    }
    return b.finish();
}

Tokenization tokenize_cpword(const QuantizedScore& q, int trackIndex) {
    const auto& track = require_track(q, trackIndex);
    StreamBuilder b(Scheme::CPWord, trackIndex);
    walk_bars(
        track, [&](Units) { b.add({{"Family", "Metric"}, {"Bar", "None"}, kIgnore, kIgnore, kIgnore}); },
        [&](Units pos) { b.add({{"Family", "Metric"}, {"Position", num(pos)}, kIgnore, kIgnore, kIgnore}); },
        [&](const QuantizedNote& n) {
            b.add({{"Family", "Note"},
                   kIgnore,
                   {"Pitch", num(n.pitch)},
                   {"Velocity", num(n.velocityBin)},
                   {"Duration", num(n.durationUnits)}},
                  n.noteId);
        });
    return b.finish();
}

Tokenization tokenize_octuple(const QuantizedScore& q, int trackIndex) {
    const auto& track = require_track(q, trackIndex);
    StreamBuilder b(Scheme::Octuple, trackIndex);
    const std::string program = track.drums ? "Drums" : num(track.program);
    std::size_t tempoIdx = 0;
    for (const auto& n : track.notes) {
        while (tempoIdx + 1 < q.tempoBinMap.size() && q.tempoBinMap[tempoIdx + 1].startUnits <= n.onsetUnits) ++tempoIdx;
        const int tempo = q.tempoBinMap.empty() ? tempo_bin(kDefaultBpm, q.config) : q.tempoBinMap[tempoIdx].bpm;
        const BarEntry bar = bar_at(q.barMap, n.bar);
        b.add({{"Pitch", num(n.pitch)},
               {"Velocity", num(n.velocityBin)},
               {"Duration", num(n.durationUnits)},
               {"Position", num(n.positionInBar)},
               {"Bar", num(n.bar)},
               {"Program", program},
               {"Tempo", num(tempo)},
               {"TimeSig", fmt::format("{}/{}", bar.numerator, bar.denominator)}},
              n.noteId);
    }
    return b.finish();
}

Tokenization tokenize(Scheme scheme, const QuantizedScore& q, int trackIndex) {
    switch (scheme) {
        case Scheme::REMI: return tokenize_remi(q, trackIndex);
        case Scheme::TSD: return tokenize_tsd(q, trackIndex);
        case Scheme::MIDILike: return tokenize_midilike(q, trackIndex);
        case Scheme::Structured: return tokenize_structured(q, trackIndex);
        case Scheme::CPWord: return tokenize_cpword(q, trackIndex);
        case Scheme::Octuple: return tokenize_octuple(q, trackIndex);
    }
    throw std::logic_error("unhandled scheme");
}

namespace {

class Decoder {
public:
    Decoder(const GridConfig& config, const BarMap& barMap) : config_(config), barMap_(barMap) {
        if (barMap_.empty()) {
            const Units len = Units{4} * config.positionsPerBeat;
            barMap_.push_back({0, 0, len, 4, 4});
        }
    }

    Units value(const Cell& cell, std::size_t index, std::string_view type, Units lo, Units hi) const {
        if (cell.type != type) {
            throw MalformedStream(index, fmt::format("expected {} but found {}_{}", type, cell.type, cell.value));
        }
        Units v = 0;
        const char* first = cell.value.data();
        const char* last = first + cell.value.size();
        const auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc{} || ptr != last || v < lo || v > hi) {
            throw MalformedStream(index, fmt::format("bad {} value '{}'", type, cell.value));
        }
        return v;
    }

    Units pitch(const Cell& c, std::size_t i) const { return value(c, i, "Pitch", 0, 127); }
    Units velocity(const Cell& c, std::size_t i) const { return value(c, i, "Velocity", 1, 127); }
    Units duration(const Cell& c, std::size_t i) const { return value(c, i, "Duration", 1, config_.maxDurationUnits()); }
    Units shift(const Cell& c, std::size_t i, Units lo) const { return value(c, i, "TimeShift", lo, config_.maxDurationUnits()); }

    BarEntry bar(Units index) const { return bar_at(barMap_, index); }

    Units position(const Cell& c, std::size_t i, Units barIndex) const {
        if (barIndex < 0) throw MalformedStream(i, "Position before the first Bar");
        return value(c, i, "Position", 0, bar(barIndex).unitsPerBar - 1);
    }

    void note(NoteId id, Units pitch, Units velocity, Units onset, Units duration) {
        QuantizedNote n;
        n.noteId = id;
        n.pitch = static_cast<int>(pitch);
        n.velocityBin = static_cast<int>(velocity);
        n.onsetUnits = onset;
        n.durationUnits = duration;
        notes_.push_back(n);
    }

    std::vector<QuantizedNote> finish() {
        for (auto& n : notes_) {
            const auto bp = units_to_bar_position(barMap_, n.onsetUnits);
            n.bar = bp.bar;
            n.positionInBar = bp.position;
        }
        std::sort(notes_.begin(), notes_.end(), note_order);
        return std::move(notes_);
    }

private:
    const GridConfig& config_;
    BarMap barMap_;
    std::vector<QuantizedNote> notes_;
};

const Cell& cell_at(const std::vector<Token>& tokens, std::size_t i, std::string_view after) {
    if (i >= tokens.size()) throw MalformedStream(i, fmt::format("stream ends after {}", after));
    return tokens[i].cell;
}

NoteId id_of(const std::optional<NoteId>& id, std::size_t index) {
    return id.value_or(static_cast<NoteId>(index));
}

std::vector<QuantizedNote> decode_bar_based(const std::vector<Token>& tokens, Decoder& d) {
    Units bar = -1;
    Units pos = -1;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const Cell& c = tokens[i].cell;
        if (c.type == "Bar") {
            ++bar;
            pos = -1;
        } else if (c.type == "Position") {
            pos = d.position(c, i, bar);
        } else if (c.type == "Pitch") {
            if (pos < 0) throw MalformedStream(i, "Pitch before any Position in the bar");
            const Units p = d.pitch(c, i);
            const Units v = d.velocity(cell_at(tokens, i + 1, "Pitch"), i + 1);
            const Units dur = d.duration(cell_at(tokens, i + 2, "Velocity"), i + 2);
            d.note(id_of(tokens[i].noteId, i), p, v, d.bar(bar).startUnits + pos, dur);
            i += 2;
        } else {
            throw MalformedStream(i, fmt::format("unexpected {} token", c.type));
        }
    }
    return d.finish();
}

std::vector<QuantizedNote> decode_tsd(const std::vector<Token>& tokens, Decoder& d) {
    Units cursor = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const Cell& c = tokens[i].cell;
        if (c.type == "TimeShift") {
            cursor += d.shift(c, i, 1);
        } else if (c.type == "Pitch") {
            const Units p = d.pitch(c, i);
            const Units v = d.velocity(cell_at(tokens, i + 1, "Pitch"), i + 1);
            const Units dur = d.duration(cell_at(tokens, i + 2, "Velocity"), i + 2);
            d.note(id_of(tokens[i].noteId, i), p, v, cursor, dur);
            i += 2;
        } else {
            throw MalformedStream(i, fmt::format("unexpected {} token", c.type));
        }
    }
    return d.finish();
}

std::vector<QuantizedNote> decode_midilike(const std::vector<Token>& tokens, Decoder& d) {
    struct Open {
        std::size_t index;
        NoteId id;
        Units onset;
        Units velocity;
    };
    std::map<Units, std::deque<Open>> open;
    Units cursor = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const Cell& c = tokens[i].cell;
        if (c.type == "TimeShift") {
            cursor += d.shift(c, i, 1);
        } else if (c.type == "NoteOn") {
            const Units p = d.value(c, i, "NoteOn", 0, 127);
            const Units v = d.velocity(cell_at(tokens, i + 1, "NoteOn"), i + 1);
            open[p].push_back({i, id_of(tokens[i].noteId, i), cursor, v});
            ++i;
        } else if (c.type == "NoteOff") {
            const Units p = d.value(c, i, "NoteOff", 0, 127);
            auto it = open.find(p);
            if (it == open.end() || it->second.empty()) throw MalformedStream(i, fmt::format("NoteOff_{} without an open NoteOn", p));
            const Open on = it->second.front();
            it->second.pop_front();
            if (cursor == on.onset) throw MalformedStream(i, "NoteOff at the same time as its NoteOn");
            d.note(on.id, p, on.velocity, on.onset, cursor - on.onset);
        } else {
            throw MalformedStream(i, fmt::format("unexpected {} token", c.type));
        }
    }
    for (const auto& [pitch, queue] : open) {
        if (!queue.empty()) throw MalformedStream(queue.front().index, fmt::format("NoteOn_{} is never closed", pitch));
    }
    return d.finish();
}

std::vector<QuantizedNote> decode_structured(const std::vector<Token>& tokens, Decoder& d) {
    if (tokens.size() % 4 != 0) throw MalformedStream(tokens.size() - tokens.size() % 4, "incomplete note group");
    Units cursor = 0;
    for (std::size_t i = 0; i < tokens.size(); i += 4) {
        cursor += d.shift(tokens[i].cell, i, 0);
        const Units p = d.pitch(tokens[i + 1].cell, i + 1);
        const Units v = d.velocity(tokens[i + 2].cell, i + 2);
        const Units dur = d.duration(tokens[i + 3].cell, i + 3);
        d.note(id_of(tokens[i + 1].noteId, i), p, v, cursor, dur);
    }
    return d.finish();
}

void require_width(const CompoundToken& t, std::size_t width) {
    if (t.cells.size() != width) {
        throw MalformedStream(t.index, fmt::format("compound has width {}, expected {}", t.cells.size(), width));
    }
}

void require_ignore(const Cell& c, std::size_t index) {
    if (c != kIgnore) throw MalformedStream(index, fmt::format("expected Ignore filler, found {}_{}", c.type, c.value));
}

std::vector<QuantizedNote> decode_cpword(const std::vector<CompoundToken>& compounds, Decoder& d) {
    Units bar = -1;
    Units pos = -1;
    for (std::size_t i = 0; i < compounds.size(); ++i) {
        const auto& t = compounds[i];
        require_width(t, 5);
        const auto& cells = t.cells;
        const Cell& family = cells[0];
        if (family == Cell{"Family", "Metric"}) {
            if (cells[1].type == "Bar") {
                if (cells[1].value != "None") throw MalformedStream(i, "Bar cell carries a value");
                ++bar;
                pos = -1;
            } else {
                pos = d.position(cells[1], i, bar);
            }
            for (int k = 2; k < 5; ++k) require_ignore(cells[k], i);
        } else if (family == Cell{"Family", "Note"}) {
            if (pos < 0) throw MalformedStream(i, "note compound before any Position in the bar");
            require_ignore(cells[1], i);
            d.note(id_of(t.noteId, i), d.pitch(cells[2], i), d.velocity(cells[3], i), d.bar(bar).startUnits + pos,
                   d.duration(cells[4], i));
        } else {
            throw MalformedStream(i, fmt::format("unknown family {}_{}", family.type, family.value));
        }
    }
    return d.finish();
}

std::vector<QuantizedNote> decode_octuple(const std::vector<CompoundToken>& compounds, Decoder& d) {
    for (std::size_t i = 0; i < compounds.size(); ++i) {
        const auto& t = compounds[i];
        require_width(t, 8);
        const auto& c = t.cells;
        const Units bar = d.value(c[4], i, "Bar", 0, kMaxBars);
        const Units pos = d.position(c[3], i, bar);
        const BarEntry entry = d.bar(bar);
        if (c[7] != Cell{"TimeSig", fmt::format("{}/{}", entry.numerator, entry.denominator)}) {
            throw MalformedStream(i, fmt::format("time signature {} disagrees with bar {}", c[7].value, bar));
        }
        if (c[5].type != "Program" || c[6].type != "Tempo") throw MalformedStream(i, "Program/Tempo cells out of place");
        d.note(id_of(t.noteId, i), d.pitch(c[0], i), d.velocity(c[1], i), entry.startUnits + pos, d.duration(c[2], i));
    }
    return d.finish();
}

}  // namespace

std::vector<QuantizedNote> detokenize(const TokenStream& stream, const GridConfig& config, const BarMap& barMap) {
    Decoder d(config, barMap);
    if (stream.compound()) {
        if (!stream.tokens.empty()) throw MalformedStream(0, "simple tokens in a compound stream");
    } else if (!stream.compounds.empty()) {
        throw MalformedStream(0, "compound tokens in a simple stream");
    }
    switch (stream.scheme) {
        case Scheme::REMI: return decode_bar_based(stream.tokens, d);
        case Scheme::TSD: return decode_tsd(stream.tokens, d);
        case Scheme::MIDILike: return decode_midilike(stream.tokens, d);
        case Scheme::Structured: return decode_structured(stream.tokens, d);
        case Scheme::CPWord: return decode_cpword(stream.compounds, d);
        case Scheme::Octuple: return decode_octuple(stream.compounds, d);
    }
    throw std::logic_error("unhandled scheme");
}

std::vector<VocabularyCount> vocabulary_summary(const TokenStream& stream) {
    std::vector<VocabularyCount> out;
    std::map<Cell, std::size_t> slot;
    auto count = [&](const Cell& c) {
        auto [it, fresh] = slot.try_emplace(c, out.size());
        if (fresh) out.push_back({c, 0});
        ++out[it->second].count;
    };
    for (const auto& t : stream.tokens) count(t.cell);
    for (const auto& t : stream.compounds) {
        for (const auto& c : t.cells) count(c);
    }
    return out;
}

}  // namespace tokviz

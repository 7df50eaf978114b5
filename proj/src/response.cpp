#include "tokviz/response.hpp"

#include <charconv>
#include <cstdlib>
#include <functional>
#include <unordered_map>

#include <fmt/format.h>

#include "tokviz/midi.hpp"

#ifndef TOKVIZ_VERSION
#define TOKVIZ_VERSION "0.0.0"
#endif

namespace tokviz {

std::string_view version() {
    return TOKVIZ_VERSION;
}

namespace {

struct FieldAccess {
    bool integer;
    std::function<void(GridConfig&, double)> set;
};

const std::unordered_map<std::string, FieldAccess>& field_access() {
    static const std::unordered_map<std::string, FieldAccess> access = {
        {"positionsPerBeat", {true, [](GridConfig& c, double v) { c.positionsPerBeat = static_cast<int>(v); }}},
        {"numVelocityBins", {true, [](GridConfig& c, double v) { c.numVelocityBins = static_cast<int>(v); }}},
        {"maxDurationBeats", {true, [](GridConfig& c, double v) { c.maxDurationBeats = static_cast<int>(v); }}},
        {"pitchMin", {true, [](GridConfig& c, double v) { c.pitchMin = static_cast<int>(v); }}},
        {"pitchMax", {true, [](GridConfig& c, double v) { c.pitchMax = static_cast<int>(v); }}},
        {"numTempoBins", {true, [](GridConfig& c, double v) { c.numTempoBins = static_cast<int>(v); }}},
        {"tempoMinBpm", {false, [](GridConfig& c, double v) { c.tempoMinBpm = v; }}},
        {"tempoMaxBpm", {false, [](GridConfig& c, double v) { c.tempoMaxBpm = v; }}},
    };
    return access;
}

const FieldAccess& access_for(const std::string& key) {
    const auto& table = field_access();
    auto it = table.find(key);
    if (it == table.end()) throw ConfigError(key, "unknown configuration field");
    return it->second;
}

// Integer fields are range-checked here so huge values cannot wrap before validate() sees them.
void set_field(GridConfig& config, const std::string& key, const FieldAccess& f, double value) {
    if (f.integer && (value < -1e9 || value > 1e9)) throw ConfigError(key, "value out of range");
    f.set(config, value);
}

Json nullable(const std::optional<int>& v) {
    return v ? Json(*v) : Json(nullptr);
}

Json program_json(bool drums, int program) {
    return drums ? Json("Drums") : Json(program);
}

}  // namespace

GridConfig parse_config(const Json& doc) {
    GridConfig config;
    if (doc.is_null()) return config;
    if (!doc.is_object()) throw ConfigError("config", "must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
        const auto& f = access_for(key);
        if (f.integer ? !value.is_number_integer() : !value.is_number()) {
            throw ConfigError(key, f.integer ? "must be an integer" : "must be a number");
        }
        set_field(config, key, f, value.get<double>());
    }
    validate(config);
    return config;
}

void apply_override(GridConfig& config, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) {
        throw ConfigError(std::string(assignment), "expected key=value");
    }
    const std::string key(assignment.substr(0, eq));
    const std::string text(assignment.substr(eq + 1));
    const auto& f = access_for(key);
    double value = 0;
    if (f.integer) {
        long long v = 0;
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec != std::errc{} || ptr != text.data() + text.size()) throw ConfigError(key, "must be an integer");
        value = static_cast<double>(v);
    } else {
        char* end = nullptr;
        value = std::strtod(text.c_str(), &end);
        if (text.empty() || end != text.c_str() + text.size()) throw ConfigError(key, "must be a number");
    }
    set_field(config, key, f, value);
}

Json config_json(const GridConfig& c) {
    return Json{{"positionsPerBeat", c.positionsPerBeat}, {"numVelocityBins", c.numVelocityBins},
                {"maxDurationBeats", c.maxDurationBeats}, {"pitchMin", c.pitchMin},
                {"pitchMax", c.pitchMax},                 {"numTempoBins", c.numTempoBins},
                {"tempoMinBpm", c.tempoMinBpm},           {"tempoMaxBpm", c.tempoMaxBpm}};
}

Json metadata_json(const ScoreMetadata& meta) {
    Json tempo = Json::array();
    for (const auto& [e, s] : meta.tempoMap) tempo.push_back({{"tick", e.tick}, {"seconds", s}, {"bpm", e.bpm}});
    Json timeSig = Json::array();
    for (const auto& [e, s] : meta.timeSigMap) {
        timeSig.push_back({{"tick", e.tick}, {"seconds", s}, {"numerator", e.numerator}, {"denominator", e.denominator}});
    }
    Json keySig = Json::array();
    for (const auto& [e, s] : meta.keySigMap) {
        keySig.push_back({{"tick", e.tick},
                          {"seconds", s},
                          {"sharpsFlats", e.sharpsFlats},
                          {"mode", e.mode == midi::Mode::Minor ? "minor" : "major"},
                          {"name", key_name(e.sharpsFlats, e.mode)}});
    }
    Json tracks = Json::array();
    for (const auto& r : meta.trackRanges) {
        tracks.push_back({{"trackIndex", r.trackIndex},
                          {"noteCount", r.noteCount},
                          {"pitchMin", nullable(r.pitchMin)},
                          {"pitchMax", nullable(r.pitchMax)}});
    }
    return Json{{"ticksPerQuarter", meta.ticksPerQuarter},
                {"noteCount", meta.noteCount},
                {"pitchMin", nullable(meta.pitchMin)},
                {"pitchMax", nullable(meta.pitchMax)},
                {"durationSeconds", meta.durationSeconds},
                {"tempoMap", tempo},
                {"timeSigMap", timeSig},
                {"keySigMap", keySig},
                {"tracks", tracks}};
}

Json stream_json(const TokenStream& stream) {
    Json out = Json::array();
    auto noteId = [](const std::optional<NoteId>& id) { return id ? Json(*id) : Json(nullptr); };
    for (const auto& t : stream.tokens) {
        out.push_back({{"index", t.index}, {"type", t.cell.type}, {"value", t.cell.value}, {"noteId", noteId(t.noteId)}});
    }
    for (const auto& t : stream.compounds) {
        Json cells = Json::array();
        for (const auto& c : t.cells) cells.push_back({{"type", c.type}, {"value", c.value}});
        out.push_back({{"index", t.index}, {"cells", cells}, {"noteId", noteId(t.noteId)}});
    }
    return out;
}

Json descriptors_json() {
    Json fields = Json::array();
    for (const auto& f : config_fields()) {
        const bool integer = std::string_view(f.type) == "integer";
        auto num = [integer](double v) { return integer ? Json(static_cast<long long>(v)) : Json(v); };
        fields.push_back(
            {{"name", f.name}, {"type", f.type}, {"default", num(f.defaultValue)}, {"min", num(f.min)}, {"max", num(f.max)}});
    }
    Json out = Json::array();
    for (Scheme s : kAllSchemes) {
        out.push_back({{"scheme", scheme_name(s)},
                       {"tokenTypes", token_types(s)},
                       {"compoundWidth", compound_width(s)},
                       {"config", fields}});
    }
    return out;
}

Json health_json() {
    return Json{{"status", "ok"}, {"version", version()}};
}

Json tokenize_document(std::span<const std::uint8_t> midiBytes, Scheme scheme, const GridConfig& config) {
    validate(config);
    const auto raw = midi::parse_smf(midiBytes);
    const Score score = build_score(raw);
    const ScoreMetadata meta = extract_metadata(score);
    const QuantizedScore q = quantize(score, config);

    Json warnings = Json::array();
    for (const auto& w : score.warnings) warnings.push_back(w);
    for (const auto& w : q.warnings) warnings.push_back(w);

    const SecondsClock clock(score);
    std::unordered_map<NoteId, const Note*> byId;
    for (const auto& t : score.tracks) {
        for (const auto& n : t.notes) byId[n.id] = &n;
    }

    Json tracks = Json::array();
    for (const auto& track : score.tracks) {
        const auto* qt = q.find_track(track.index);
        const Tokenization tok = tokenize(scheme, q, track.index);
        for (const auto& w : tok.warnings) warnings.push_back(w);

        Json notes = Json::array();
        for (const auto& qn : qt->notes) {
            const Note& n = *byId.at(qn.noteId);
            notes.push_back({{"id", n.id},
                             {"pitch", n.pitch},
                             {"velocity", n.velocity},
                             {"velocityBin", qn.velocityBin},
                             {"startSeconds", clock(n.onsetTick)},
                             {"endSeconds", clock(n.endTick())},
                             {"startUnits", qn.onsetUnits},
                             {"durationUnits", qn.durationUnits},
                             {"bar", qn.bar},
                             {"position", qn.positionInBar}});
        }
        Json noteToTokens = Json::object();
        for (const auto& [id, indices] : tok.map.noteToTokens) noteToTokens[std::to_string(id)] = indices;
        Json tokenToNote = Json::object();
        for (const auto& [index, id] : tok.map.tokenToNote) tokenToNote[std::to_string(index)] = id;
        Json vocabulary = Json::array();
        for (const auto& v : vocabulary_summary(tok.stream)) {
            vocabulary.push_back({{"type", v.cell.type}, {"value", v.cell.value}, {"count", v.count}});
        }
        tracks.push_back({{"trackIndex", track.index},
                          {"name", track.name},
                          {"program", program_json(track.drums, track.program)},
                          {"notes", notes},
                          {"tokens", stream_json(tok.stream)},
                          {"noteToTokens", noteToTokens},
                          {"tokenToNote", tokenToNote},
                          {"vocabulary", vocabulary}});
    }

    Json bars = Json::array();
    for (const auto& b : q.barMap) {
        bars.push_back({{"bar", b.bar},
                        {"startUnits", b.startUnits},
                        {"unitsPerBar", b.unitsPerBar},
                        {"numerator", b.numerator},
                        {"denominator", b.denominator}});
    }
    Json tempoBins = Json::array();
    for (const auto& e : q.tempoBinMap) tempoBins.push_back({{"startUnits", e.startUnits}, {"bpm", e.bpm}});

    return Json{{"scheme", scheme_name(scheme)},
                {"config", config_json(config)},
                {"metadata", metadata_json(meta)},
                {"barMap", bars},
                {"tempoBinMap", tempoBins},
                {"tracks", tracks},
                {"warnings", warnings}};
}

std::string tokenize_body(std::span<const std::uint8_t> midiBytes, Scheme scheme, const GridConfig& config) {
    return tokenize_document(midiBytes, scheme, config).dump();
}

}  // namespace tokviz

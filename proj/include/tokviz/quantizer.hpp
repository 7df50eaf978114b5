#pragma once

// Grid quantization shared by every tokenization scheme.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "tokviz/score.hpp"

namespace tokviz {

using Units = std::int64_t;

struct GridConfig {
    int positionsPerBeat{8};
    int numVelocityBins{32};
    int maxDurationBeats{16};
    int pitchMin{21};
    int pitchMax{108};
    int numTempoBins{32};
    double tempoMinBpm{40.0};
    double tempoMaxBpm{250.0};

    int maxDurationUnits() const { return maxDurationBeats * positionsPerBeat; }
    bool operator==(const GridConfig&) const = default;
};

/// Bounds for one GridConfig field, as published to clients.
struct ConfigField {
    const char* name;
    const char* type;  // "integer" or "number"
    double defaultValue;
    double min;
    double max;
};

const std::vector<ConfigField>& config_fields();

/// A GridConfig (or a config/file pair) the grid cannot represent.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& reason);
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

void validate(const GridConfig& config);

struct QuantizedNote {
    NoteId noteId{};
    int pitch{};
    int velocityBin{};
    Units onsetUnits{};
    Units durationUnits{};
    Units bar{};
    Units positionInBar{};
    bool operator==(const QuantizedNote&) const = default;
};

struct QuantizedTrack {
    int trackIndex{};
    int program{};
    bool drums{};
    std::vector<QuantizedNote> notes;
    bool operator==(const QuantizedTrack&) const = default;
};

struct BarEntry {
    Units bar{};
    Units startUnits{};
    Units unitsPerBar{};
    int numerator{4};
    int denominator{4};
    bool operator==(const BarEntry&) const = default;
};

struct TempoBinEntry {
    Units startUnits{};
    int bpm{};
    bool operator==(const TempoBinEntry&) const = default;
};

using BarMap = std::vector<BarEntry>;

struct QuantizedScore {
    GridConfig config;
    std::vector<QuantizedTrack> tracks;
    BarMap barMap;
    std::vector<TempoBinEntry> tempoBinMap;
    std::vector<std::string> warnings;

    const QuantizedTrack* find_track(int trackIndex) const;
    bool operator==(const QuantizedScore&) const = default;
};

/// Upper bound on bars in one quantized score; longer inputs are rejected.
inline constexpr Units kMaxBars = Units{1} << 20;

/// Round-half-up of num/den for nonnegative num and positive den.
constexpr Units round_div(Units num, Units den) { return (2 * num + den) / (2 * den); }

QuantizedScore quantize(const Score& score, const GridConfig& config);

int velocity_bin(int velocity, int numBins);
int tempo_bin(double bpm, const GridConfig& config);

struct BarPosition {
    Units bar{};
    Units position{};
    bool operator==(const BarPosition&) const = default;
};

/// Bars past the end of the map continue with the last bar's length.
BarPosition units_to_bar_position(const BarMap& barMap, Units units);
BarPosition units_to_bar_position(const QuantizedScore& q, Units units);
BarEntry bar_at(const BarMap& barMap, Units bar);

/// Canonical note order inside a quantized track.
bool note_order(const QuantizedNote& a, const QuantizedNote& b);

/// A Score on a one-tick-per-unit grid that quantizes back to `q`.
Score reconstruct_score(const QuantizedScore& q);

}  // namespace tokviz

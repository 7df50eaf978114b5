#pragma once

// Normalized score: paired notes per track plus global tempo, meter and key maps.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tokviz/midi.hpp"

namespace tokviz {

using Tick = midi::Tick;
using NoteId = std::int64_t;

struct Note {
    NoteId id{};
    int pitch{};
    int velocity{};
    Tick onsetTick{};
    Tick durationTicks{};
    int trackIndex{};

    Tick endTick() const { return onsetTick + durationTicks; }
    bool operator==(const Note&) const = default;
};

struct Track {
    int index{};
    std::string name;
    int program{};
    bool drums{};
    std::vector<Note> notes;
    bool operator==(const Track&) const = default;
};

struct TempoEntry {
    Tick tick{};
    double bpm{};
    bool operator==(const TempoEntry&) const = default;
};

struct TimeSigEntry {
    Tick tick{};
    int numerator{4};
    int denominator{4};
    bool operator==(const TimeSigEntry&) const = default;
};

struct KeySigEntry {
    Tick tick{};
    int sharpsFlats{};
    midi::Mode mode{midi::Mode::Major};
    bool operator==(const KeySigEntry&) const = default;
};

inline constexpr double kDefaultBpm = 120.0;

struct Score {
    int ticksPerQuarter{480};
    std::vector<Track> tracks;
    std::vector<TempoEntry> tempoMap;
    std::vector<TimeSigEntry> timeSigMap;
    std::vector<KeySigEntry> keySigMap;
    std::vector<std::string> warnings;

    bool operator==(const Score&) const = default;
};

struct PitchRange {
    int trackIndex{};
    int noteCount{};
    std::optional<int> pitchMin;
    std::optional<int> pitchMax;
};

struct ScoreMetadata {
    int ticksPerQuarter{};
    int noteCount{};
    std::optional<int> pitchMin;
    std::optional<int> pitchMax;
    double durationSeconds{};
    std::vector<std::pair<TempoEntry, double>> tempoMap;
    std::vector<std::pair<TimeSigEntry, double>> timeSigMap;
    std::vector<std::pair<KeySigEntry, double>> keySigMap;
    std::vector<PitchRange> trackRanges;
};

Score build_score(const midi::RawMidiFile& raw);

/// Fills in defaults at tick 0 and collapses repeated values, in place.
void normalize_maps(Score& score);

ScoreMetadata extract_metadata(const Score& score);

double tick_to_seconds(const Score& score, Tick tick);

/// Precomputed tempo segments for repeated tick_to_seconds lookups.
class SecondsClock {
public:
    explicit SecondsClock(const Score& score);
    double operator()(Tick tick) const;

private:
    struct Segment {
        Tick tick;
        double bpm;
        double start;
    };

    double seconds_per_tick(double bpm) const { return 60.0 / (bpm * tpq_); }

    int tpq_;
    std::vector<Segment> segments_;
};

/// "G major", "E minor", "C# major"...
std::string key_name(int sharpsFlats, midi::Mode mode);

}  // namespace tokviz

#pragma once

// Standard MIDI File decoding into a flat, absolute-tick event model.

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace tokviz::midi {

using Bytes = std::vector<std::uint8_t>;
using Tick = std::int64_t;

enum class SmfErrorCode {
    UnterminatedVlq,
    VlqOverflow,
    BadHeader,
    SmpteUnsupported,
    TruncatedChunk,
    BadEvent,
};

const char* to_string(SmfErrorCode code);

class SmfError : public std::runtime_error {
public:
    SmfError(SmfErrorCode code, std::size_t offset, const std::string& what);

    SmfErrorCode code() const noexcept { return code_; }
    // Byte offset into the input where decoding stopped (0 for encode errors).
    std::size_t offset() const noexcept { return offset_; }

private:
    SmfErrorCode code_;
    std::size_t offset_;
};

struct NoteOn {
    std::uint8_t channel{};
    std::uint8_t pitch{};
    std::uint8_t velocity{};
    bool operator==(const NoteOn&) const = default;
};

struct NoteOff {
    std::uint8_t channel{};
    std::uint8_t pitch{};
    std::uint8_t velocity{};
    bool operator==(const NoteOff&) const = default;
};

struct Tempo {
    std::uint32_t microsPerQuarter{500000};
    bool operator==(const Tempo&) const = default;
};

struct TimeSignature {
    std::uint8_t numerator{4};
    std::uint8_t denominator{4};
    std::uint8_t clocksPerClick{24};
    std::uint8_t thirtySecondsPerQuarter{8};
    bool operator==(const TimeSignature&) const = default;
};

enum class Mode : std::uint8_t { Major = 0, Minor = 1 };

struct KeySignature {
    std::int8_t sharpsFlats{};
    Mode mode{Mode::Major};
    bool operator==(const KeySignature&) const = default;
};

struct ProgramChange {
    std::uint8_t channel{};
    std::uint8_t program{};
    bool operator==(const ProgramChange&) const = default;
};

/// Anything the model does not interpret, kept verbatim so it can be re-encoded.
/// status is 0xFF for meta events (metaType set), 0xF0/0xF7 for sysex, or a
/// channel status byte for other channel messages.
struct OtherEvent {
    std::uint8_t status{};
    std::uint8_t metaType{};
    Bytes data;
    bool operator==(const OtherEvent&) const = default;
};

enum class EventKind { NoteOn, NoteOff, Tempo, TimeSignature, KeySignature, ProgramChange, Other };

using Payload = std::variant<NoteOn, NoteOff, Tempo, TimeSignature, KeySignature, ProgramChange, OtherEvent>;

struct RawEvent {
    Tick tick{};
    Payload payload;

    EventKind kind() const noexcept { return static_cast<EventKind>(payload.index()); }
    bool operator==(const RawEvent&) const = default;
};

struct RawTrack {
    std::vector<RawEvent> events;
    // Tick of the end-of-track meta event; never before the last event.
    Tick endTick{};
};

struct RawMidiFile {
    int format{1};
    int ticksPerQuarter{480};
    std::vector<RawTrack> tracks;
    std::vector<std::string> warnings;
};

inline constexpr std::uint32_t kVlqLimit = 1u << 28;
inline constexpr std::uint8_t kMetaTrackName = 0x03;
inline constexpr std::uint8_t kMetaEndOfTrack = 0x2F;
inline constexpr std::uint8_t kMetaTempo = 0x51;
inline constexpr std::uint8_t kMetaTimeSignature = 0x58;
inline constexpr std::uint8_t kMetaKeySignature = 0x59;

struct VlqResult {
    std::uint32_t value{};
    std::size_t consumed{};
};

VlqResult decode_vlq(std::span<const std::uint8_t> bytes, std::size_t offset);
void encode_vlq(std::uint32_t value, Bytes& out);

RawMidiFile parse_smf(std::span<const std::uint8_t> bytes);
Bytes encode_smf(const RawMidiFile& file);

/// Same kinds, ticks and payloads on every track, in order.
bool event_equivalent(const RawMidiFile& a, const RawMidiFile& b);

Bytes read_file(const std::string& path);

}  // namespace tokviz::midi

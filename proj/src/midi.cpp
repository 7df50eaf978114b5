#include "tokviz/midi.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

namespace tokviz::midi {

const char* to_string(SmfErrorCode code) {
    switch (code) {
        case SmfErrorCode::UnterminatedVlq: return "UnterminatedVlq";
        case SmfErrorCode::VlqOverflow: return "VlqOverflow";
        case SmfErrorCode::BadHeader: return "BadHeader";
        case SmfErrorCode::SmpteUnsupported: return "SmpteUnsupported";
        case SmfErrorCode::TruncatedChunk: return "TruncatedChunk";
        case SmfErrorCode::BadEvent: return "BadEvent";
    }
    return "Unknown";
}

SmfError::SmfError(SmfErrorCode code, std::size_t offset, const std::string& what)
    : std::runtime_error(what), code_(code), offset_(offset) {}

VlqResult decode_vlq(std::span<const std::uint8_t> bytes, std::size_t offset) {
    std::uint32_t value = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        if (offset + i >= bytes.size()) {
            throw SmfError(SmfErrorCode::UnterminatedVlq, offset + i, "input ends inside a variable-length quantity");
        }
        const std::uint8_t b = bytes[offset + i];
        value = (value << 7) | (b & 0x7F);
        if ((b & 0x80) == 0) return {value, i + 1};
    }
    throw SmfError(SmfErrorCode::UnterminatedVlq, offset, "variable-length quantity longer than 4 bytes");
}

void encode_vlq(std::uint32_t value, Bytes& out) {
    if (value >= kVlqLimit) {
        throw SmfError(SmfErrorCode::VlqOverflow, 0, fmt::format("value {} does not fit in a 4-byte VLQ", value));
    }
    std::uint8_t groups[4];
    int n = 0;
    do {
        groups[n++] = static_cast<std::uint8_t>(value & 0x7F);
        value >>= 7;
    } while (value != 0);
    while (n > 1) out.push_back(groups[--n] | 0x80);
    out.push_back(groups[0]);
}

namespace {

// Bounds-checked cursor over one region of the input. Offsets reported in
// errors are absolute into the whole file.
class Reader {
public:
    Reader(std::span<const std::uint8_t> all, std::size_t begin, std::size_t end, SmfErrorCode overrun)
        : all_(all), pos_(begin), end_(end), overrun_(overrun) {}

    bool done() const { return pos_ >= end_; }
    std::size_t pos() const { return pos_; }

    std::uint8_t peek() const {
        need(1);
        return all_[pos_];
    }

    std::uint8_t u8() {
        need(1);
        return all_[pos_++];
    }

    std::uint32_t be(int width) {
        need(static_cast<std::size_t>(width));
        std::uint32_t v = 0;
        for (int i = 0; i < width; ++i) v = (v << 8) | all_[pos_++];
        return v;
    }

    std::uint32_t vlq() {
        const auto r = decode_vlq(all_.first(end_), pos_);
        pos_ += r.consumed;
        return r.value;
    }

    Bytes take(std::size_t n) {
        need(n);
        Bytes out(all_.begin() + static_cast<std::ptrdiff_t>(pos_), all_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
        pos_ += n;
        return out;
    }

private:
    void need(std::size_t n) const {
        if (n > end_ - std::min(pos_, end_)) {
            throw SmfError(overrun_, pos_, fmt::format("need {} byte(s) at offset {} but the region ends at {}", n, pos_, end_));
        }
    }

    std::span<const std::uint8_t> all_;
    std::size_t pos_;
    std::size_t end_;
    SmfErrorCode overrun_;
};

Payload interpret_meta(std::uint8_t type, Bytes data, Tick tick, std::vector<std::string>& warnings) {
    switch (type) {
        case kMetaTempo:
            if (data.size() == 3) {
                const std::uint32_t us = (std::uint32_t{data[0]} << 16) | (std::uint32_t{data[1]} << 8) | data[2];
                if (us > 0) return Tempo{us};
            }
            warnings.push_back(fmt::format("malformed tempo event at tick {} kept as opaque meta", tick));
            break;
        case kMetaTimeSignature:
            if (data.size() == 4 && data[0] >= 1 && data[1] <= 5) {
                return TimeSignature{data[0], static_cast<std::uint8_t>(1u << data[1]), data[2], data[3]};
            }
            warnings.push_back(fmt::format("malformed time signature at tick {} kept as opaque meta", tick));
            break;
        case kMetaKeySignature:
            if (data.size() == 2) {
                const auto sf = static_cast<std::int8_t>(data[0]);
                if (sf >= -7 && sf <= 7 && data[1] <= 1) return KeySignature{sf, static_cast<Mode>(data[1])};
            }
            warnings.push_back(fmt::format("malformed key signature at tick {} kept as opaque meta", tick));
            break;
        default: break;
    }
    return OtherEvent{0xFF, type, std::move(data)};
}

int channel_data_length(std::uint8_t status) {
    const std::uint8_t hi = status & 0xF0;
    return (hi == 0xC0 || hi == 0xD0) ? 1 : 2;
}

RawTrack parse_track(std::span<const std::uint8_t> bytes, std::size_t begin, std::size_t end, std::size_t trackNo,
                     std::vector<std::string>& warnings) {
    Reader in(bytes, begin, end, SmfErrorCode::TruncatedChunk);
    RawTrack track;
    Tick tick = 0;
    std::uint8_t running = 0;
    bool sawEnd = false;

    while (!in.done()) {
        tick += in.vlq();
        std::uint8_t status = in.peek();
        if (status >= 0x80) {
            in.u8();
        } else if (running == 0) {
            throw SmfError(SmfErrorCode::BadEvent, in.pos(),
                           fmt::format("data byte 0x{:02X} without running status", status));
        } else {
            status = running;
        }

        if (status == 0xFF) {
            const std::uint8_t type = in.u8();
            const std::uint32_t len = in.vlq();
            Bytes data = in.take(len);
            if (type == kMetaEndOfTrack) {
                sawEnd = true;
                break;
            }
            track.events.push_back({tick, interpret_meta(type, std::move(data), tick, warnings)});
        } else if (status == 0xF0 || status == 0xF7) {
            const std::uint32_t len = in.vlq();
            track.events.push_back({tick, OtherEvent{status, 0, in.take(len)}});
        } else if (status >= 0xF0) {
            throw SmfError(SmfErrorCode::BadEvent, in.pos() - 1,
                           fmt::format("system status 0x{:02X} is not valid inside a track", status));
        } else {
            running = status;
            std::uint8_t d[2] = {0, 0};
            const int n = channel_data_length(status);
            for (int i = 0; i < n; ++i) {
                const std::size_t at = in.pos();
                d[i] = in.u8();
                if (d[i] >= 0x80) {
                    throw SmfError(SmfErrorCode::BadEvent, at, fmt::format("data byte 0x{:02X} has its high bit set", d[i]));
                }
            }
            const auto ch = static_cast<std::uint8_t>(status & 0x0F);
            switch (status & 0xF0) {
                case 0x90:
                    if (d[1] == 0) {
                        track.events.push_back({tick, NoteOff{ch, d[0], 0}});
                    } else {
                        track.events.push_back({tick, NoteOn{ch, d[0], d[1]}});
                    }
                    break;
                case 0x80: track.events.push_back({tick, NoteOff{ch, d[0], d[1]}}); break;
                case 0xC0: track.events.push_back({tick, ProgramChange{ch, d[0]}}); break;
                default: track.events.push_back({tick, OtherEvent{status, 0, Bytes(d, d + n)}}); break;
            }
        }
    }
    if (!sawEnd) warnings.push_back(fmt::format("track {} has no end-of-track event", trackNo));
    track.endTick = tick;
    if (!track.events.empty()) track.endTick = std::max(track.endTick, track.events.back().tick);
    return track;
}

}  // namespace

RawMidiFile parse_smf(std::span<const std::uint8_t> bytes) {
    RawMidiFile file;
    Reader header(bytes, 0, bytes.size(), SmfErrorCode::BadHeader);
    if (bytes.size() < 8 || !std::equal(bytes.begin(), bytes.begin() + 4, "MThd")) {
        throw SmfError(SmfErrorCode::BadHeader, 0, "missing MThd header chunk");
    }
    header.be(4);
    const std::uint32_t headerLen = header.be(4);
    if (headerLen < 6 || headerLen > bytes.size() - 8) {
        throw SmfError(SmfErrorCode::BadHeader, 4, fmt::format("MThd length {} is short or truncated", headerLen));
    }
    const std::uint32_t format = header.be(2);
    const std::uint32_t declaredTracks = header.be(2);
    const std::uint32_t division = header.be(2);
    if (format > 2) throw SmfError(SmfErrorCode::BadHeader, 8, fmt::format("unknown SMF format {}", format));
    if (division & 0x8000) {
        throw SmfError(SmfErrorCode::SmpteUnsupported, 12, "SMPTE time division is not supported");
    }
    if (division == 0) throw SmfError(SmfErrorCode::BadHeader, 12, "ticks per quarter note is zero");
    file.format = static_cast<int>(format);
    file.ticksPerQuarter = static_cast<int>(division);

    std::size_t pos = 8 + headerLen;
    while (pos < bytes.size()) {
        if (bytes.size() - pos < 8) {
            file.warnings.push_back(fmt::format("ignored {} trailing byte(s) after the last chunk", bytes.size() - pos));
            break;
        }
        Reader chunk(bytes, pos, bytes.size(), SmfErrorCode::TruncatedChunk);
        const bool isTrack = std::equal(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                        bytes.begin() + static_cast<std::ptrdiff_t>(pos + 4), "MTrk");
        chunk.be(4);
        const std::uint32_t len = chunk.be(4);
        const std::size_t body = pos + 8;
        if (len > bytes.size() - body) {
            throw SmfError(SmfErrorCode::TruncatedChunk, pos,
                           fmt::format("chunk at offset {} declares {} bytes but only {} remain", pos, len, bytes.size() - body));
        }
        if (isTrack) {
            file.tracks.push_back(parse_track(bytes, body, body + len, file.tracks.size(), file.warnings));
        } else {
            file.warnings.push_back(fmt::format("skipped unknown chunk at offset {}", pos));
        }
        pos = body + len;
    }

    if (file.tracks.size() != declaredTracks) {
        file.warnings.push_back(
            fmt::format("header declares {} track(s) but {} were found", declaredTracks, file.tracks.size()));
    }
    if (file.format == 0 && file.tracks.size() != 1) {
        file.warnings.push_back("format 0 file without exactly one track treated as format 1");
        file.format = 1;
    }
    return file;
}

namespace {

void put_be(Bytes& out, std::uint32_t v, int width) {
    for (int i = width - 1; i >= 0; --i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}

void put_meta(Bytes& out, std::uint8_t type, std::span<const std::uint8_t> data) {
    out.push_back(0xFF);
    out.push_back(type);
    encode_vlq(static_cast<std::uint32_t>(data.size()), out);
    out.insert(out.end(), data.begin(), data.end());
}

int log2_exact(std::uint8_t v) {
    for (int e = 0; e <= 5; ++e) {
        if ((1 << e) == v) return e;
    }
    return -1;
}

struct EventWriter {
    Bytes& out;
    std::uint8_t running = 0;

    void channel(std::uint8_t status, std::initializer_list<std::uint8_t> data) {
        for (auto d : data) require(d < 0x80, "channel message data byte out of range");
        if (status != running) out.push_back(status);
        running = status;
        out.insert(out.end(), data.begin(), data.end());
    }

    void operator()(const NoteOn& e) {
        require(e.channel < 16 && e.velocity >= 1, "NoteOn needs channel < 16 and velocity >= 1");
        channel(0x90 | e.channel, {e.pitch, e.velocity});
    }
    void operator()(const NoteOff& e) {
        require(e.channel < 16, "NoteOff channel out of range");
        channel(0x80 | e.channel, {e.pitch, e.velocity});
    }
    void operator()(const ProgramChange& e) {
        require(e.channel < 16, "ProgramChange channel out of range");
        channel(0xC0 | e.channel, {e.program});
    }
    void operator()(const Tempo& e) {
        require(e.microsPerQuarter >= 1 && e.microsPerQuarter <= 0xFFFFFF, "tempo out of range");
        const std::uint8_t d[3] = {static_cast<std::uint8_t>(e.microsPerQuarter >> 16),
                                   static_cast<std::uint8_t>(e.microsPerQuarter >> 8),
                                   static_cast<std::uint8_t>(e.microsPerQuarter)};
        put_meta(out, kMetaTempo, d);
        running = 0;
    }
    void operator()(const TimeSignature& e) {
        const int exp = log2_exact(e.denominator);
        require(e.numerator >= 1 && exp >= 0, "time signature out of range");
        const std::uint8_t d[4] = {e.numerator, static_cast<std::uint8_t>(exp), e.clocksPerClick, e.thirtySecondsPerQuarter};
        put_meta(out, kMetaTimeSignature, d);
        running = 0;
    }
    void operator()(const KeySignature& e) {
        require(e.sharpsFlats >= -7 && e.sharpsFlats <= 7, "key signature out of range");
        const std::uint8_t d[2] = {static_cast<std::uint8_t>(e.sharpsFlats), static_cast<std::uint8_t>(e.mode)};
        put_meta(out, kMetaKeySignature, d);
        running = 0;
    }
    void operator()(const OtherEvent& e) {
        if (e.status == 0xFF) {
            require(e.metaType != kMetaEndOfTrack, "end-of-track is implied by RawTrack::endTick");
            put_meta(out, e.metaType, e.data);
            running = 0;
        } else if (e.status == 0xF0 || e.status == 0xF7) {
            out.push_back(e.status);
            encode_vlq(static_cast<std::uint32_t>(e.data.size()), out);
            out.insert(out.end(), e.data.begin(), e.data.end());
            running = 0;
        } else {
            const std::uint8_t hi = e.status & 0xF0;
            require(e.status >= 0x80 && e.status < 0xF0 && hi != 0x80 && hi != 0x90 && hi != 0xC0,
                    "opaque channel event must not shadow a modelled kind");
            require(e.data.size() == static_cast<std::size_t>(channel_data_length(e.status)),
                    "opaque channel event has the wrong data length");
            if (e.data.size() == 1) {
                channel(e.status, {e.data[0]});
            } else {
                channel(e.status, {e.data[0], e.data[1]});
            }
        }
    }
};

}  // namespace

Bytes encode_smf(const RawMidiFile& file) {
    require(file.format >= 0 && file.format <= 2, "format must be 0, 1 or 2");
    require(file.format != 0 || file.tracks.size() == 1, "format 0 requires exactly one track");
    require(file.ticksPerQuarter >= 1 && file.ticksPerQuarter <= 0x7FFF, "ticksPerQuarter out of range");
    require(file.tracks.size() <= 0xFFFF, "too many tracks");

    Bytes out;
    out.insert(out.end(), {'M', 'T', 'h', 'd'});
    put_be(out, 6, 4);
    put_be(out, static_cast<std::uint32_t>(file.format), 2);
    put_be(out, static_cast<std::uint32_t>(file.tracks.size()), 2);
    put_be(out, static_cast<std::uint32_t>(file.ticksPerQuarter), 2);

    for (const auto& track : file.tracks) {
        Bytes body;
        EventWriter writer{body};
        Tick prev = 0;
        auto delta = [&](Tick t) {
            require(t >= prev, "event ticks must be nondecreasing and nonnegative");
            const Tick d = t - prev;
            if (d >= static_cast<Tick>(kVlqLimit)) {
                throw SmfError(SmfErrorCode::VlqOverflow, 0, fmt::format("delta time {} does not fit in a 4-byte VLQ", d));
            }
            encode_vlq(static_cast<std::uint32_t>(d), body);
            prev = t;
        };
        for (const auto& ev : track.events) {
            delta(ev.tick);
            std::visit(writer, ev.payload);
        }
        delta(std::max(track.endTick, prev));
        body.insert(body.end(), {0xFF, kMetaEndOfTrack, 0x00});

        out.insert(out.end(), {'M', 'T', 'r', 'k'});
        put_be(out, static_cast<std::uint32_t>(body.size()), 4);
        out.insert(out.end(), body.begin(), body.end());
    }
    return out;
}

bool event_equivalent(const RawMidiFile& a, const RawMidiFile& b) {
    if (a.tracks.size() != b.tracks.size()) return false;
    for (std::size_t i = 0; i < a.tracks.size(); ++i) {
        if (a.tracks[i].events != b.tracks[i].events) return false;
    }
    return true;
}

Bytes read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(fmt::format("cannot open '{}'", path));
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace tokviz::midi

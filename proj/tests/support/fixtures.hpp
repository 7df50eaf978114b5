#pragma once

#include <fstream>
#include <iterator>
#include <string>

#include "tokviz/midi.hpp"

#ifndef TOKVIZ_TEST_DATA_DIR
#error "TOKVIZ_TEST_DATA_DIR must point at tests/"
#endif

namespace tokviz::fixtures {

inline std::string path(const std::string& name) {
    return std::string(TOKVIZ_TEST_DATA_DIR) + "/fixtures/" + name;
}

inline std::string golden_path(const std::string& name) {
    return std::string(TOKVIZ_TEST_DATA_DIR) + "/golden/" + name;
}

inline std::string read_text(const std::string& file) {
    std::ifstream in(file, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Format 0, 480 ticks per quarter: tempo 500000 us, 4/4, C4 for a quarter then E4 for an eighth.
inline midi::Bytes golden_bytes() {
    return {
        'M', 'T', 'h', 'd', 0x00, 0x00, 0x00, 0x06,  // header chunk, 6-byte body
        0x00, 0x00,                                  // format 0
        0x00, 0x01,                                  // one track
        0x01, 0xE0,                                  // 480 ticks per quarter
        'M', 'T', 'r', 'k', 0x00, 0x00, 0x00, 0x25,  // 37-byte track
        0x00, 0xFF, 0x51, 0x03, 0x07, 0xA1, 0x20,    // tempo 500000
        0x00, 0xFF, 0x58, 0x04, 0x04, 0x02, 0x18, 0x08,  // 4/4
        0x00, 0x90, 0x3C, 0x64,                      // NoteOn 60 @0
        0x83, 0x60, 0x80, 0x3C, 0x40,                // NoteOff 60 @480
        0x00, 0x90, 0x40, 0x64,                      // NoteOn 64 @480
        0x81, 0x70, 0x80, 0x40, 0x40,                // NoteOff 64 @720
        0x00, 0xFF, 0x2F, 0x00,                      // end of track
    };
}

}  // namespace tokviz::fixtures

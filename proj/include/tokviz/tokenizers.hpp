#pragma once

// The six tokenization schemes, their detokenizers and token/note cross references.

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tokviz/quantizer.hpp"

namespace tokviz {

enum class Scheme { REMI, TSD, MIDILike, Structured, CPWord, Octuple };

inline constexpr Scheme kAllSchemes[] = {Scheme::REMI,       Scheme::TSD,    Scheme::MIDILike,
                                         Scheme::Structured, Scheme::CPWord, Scheme::Octuple};

std::string_view scheme_name(Scheme scheme);
/// Case-insensitive; ignores '-' and '_' ("midi-like", "MIDI_Like" both work).
std::optional<Scheme> parse_scheme(std::string_view text);

/// 0 for simple schemes.
int compound_width(Scheme scheme);
const std::vector<std::string>& token_types(Scheme scheme);

struct Cell {
    std::string type;
    std::string value;
    bool operator==(const Cell&) const = default;
    bool operator<(const Cell& o) const { return std::tie(type, value) < std::tie(o.type, o.value); }
};

struct Token {
    std::size_t index{};
    Cell cell;
    std::optional<NoteId> noteId;
    bool operator==(const Token&) const = default;
};

struct CompoundToken {
    std::size_t index{};
    std::vector<Cell> cells;
    std::optional<NoteId> noteId;
    bool operator==(const CompoundToken&) const = default;
};

struct TokenStream {
    Scheme scheme{Scheme::REMI};
    int trackIndex{};
    // Exactly one of these is used, depending on compound_width(scheme).
    std::vector<Token> tokens;
    std::vector<CompoundToken> compounds;
    std::vector<Cell> vocabulary;

    bool compound() const { return compound_width(scheme) > 0; }
    std::size_t size() const { return compound() ? compounds.size() : tokens.size(); }
    bool operator==(const TokenStream&) const = default;
};

struct TokenNoteMap {
    std::map<std::size_t, NoteId> tokenToNote;
    std::map<NoteId, std::vector<std::size_t>> noteToTokens;
    bool operator==(const TokenNoteMap&) const = default;
};

struct Tokenization {
    TokenStream stream;
    TokenNoteMap map;
    std::vector<std::string> warnings;
};

class UnknownTrack : public std::runtime_error {
public:
    explicit UnknownTrack(int trackIndex);
};

class MalformedStream : public std::runtime_error {
public:
    MalformedStream(std::size_t index, const std::string& what);
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

Tokenization tokenize_remi(const QuantizedScore& q, int trackIndex);
Tokenization tokenize_tsd(const QuantizedScore& q, int trackIndex);
Tokenization tokenize_midilike(const QuantizedScore& q, int trackIndex);
Tokenization tokenize_structured(const QuantizedScore& q, int trackIndex);
Tokenization tokenize_cpword(const QuantizedScore& q, int trackIndex);
Tokenization tokenize_octuple(const QuantizedScore& q, int trackIndex);

Tokenization tokenize(Scheme scheme, const QuantizedScore& q, int trackIndex);

/// Rebuilds the quantized notes of one track. REMI, CPWord and Octuple
/// address bars, so the bar map the stream was produced against is required.
std::vector<QuantizedNote> detokenize(const TokenStream& stream, const GridConfig& config, const BarMap& barMap);

struct VocabularyCount {
    Cell cell;
    std::size_t count{};
    bool operator==(const VocabularyCount&) const = default;
};

/// First-appearance order; compound cells are counted one by one.
std::vector<VocabularyCount> vocabulary_summary(const TokenStream& stream);

/// Greedy largest-first split of a positive gap into shifts of at most maxShift.
std::vector<Units> split_time_shift(Units gap, Units maxShift);

}  // namespace tokviz

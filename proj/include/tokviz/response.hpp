#pragma once

// JSON documents shared by the HTTP service and the command line.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

#include "tokviz/quantizer.hpp"
#include "tokviz/score.hpp"
#include "tokviz/tokenizers.hpp"

namespace tokviz {

using Json = nlohmann::ordered_json;

std::string_view version();

/// Missing fields keep their defaults; unknown fields and wrong types throw ConfigError.
GridConfig parse_config(const Json& doc);
/// One "key=value" override as given on the command line.
void apply_override(GridConfig& config, std::string_view assignment);

Json config_json(const GridConfig& config);
Json metadata_json(const ScoreMetadata& meta);
Json stream_json(const TokenStream& stream);
Json descriptors_json();
Json health_json();

/// parse -> score -> quantize -> tokenize every track with `scheme`.
/// Throws midi::SmfError for undecodable bytes and ConfigError for configs the file cannot use.
Json tokenize_document(std::span<const std::uint8_t> midiBytes, Scheme scheme, const GridConfig& config);

/// The exact response body; CLI and HTTP both write these bytes.
std::string tokenize_body(std::span<const std::uint8_t> midiBytes, Scheme scheme, const GridConfig& config);

}  // namespace tokviz

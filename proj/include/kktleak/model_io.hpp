#pragma once

#include "kktleak/network.hpp"

#include <filesystem>
#include <string>

namespace kktleak {

inline constexpr int kModelFormatVersion = 1;

/**
 * JSON model document:
 *
 *   {"format_version": 1, "input_dim": d, "width": k,
 *    "neurons": [{"w": [...], "b": ..., "v": ...}, ...]}
 *
 * Numbers are written with shortest round-trip precision.
 */
std::string model_to_json(const NetworkParams& net);

/// Throws ParseError on malformed documents, unknown versions, or fields
/// that disagree with input_dim/width.
NetworkParams model_from_json(const std::string& text);

void write_model(const std::filesystem::path& path, const NetworkParams& net);
NetworkParams read_model(const std::filesystem::path& path);

/// Whole-file helpers; both throw Error on I/O failure.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace kktleak

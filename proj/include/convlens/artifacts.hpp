#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace convlens {

uint64_t fnv1a64(std::span<const uint8_t> bytes);
uint64_t hash_file(const std::string& path);
std::string hash_hex(uint64_t hash);

// Every JSON artifact is wrapped in the same envelope:
//   {"schema": "convlens/<kind>/1", "inputs": {path: hash}, "data": ...}
nlohmann::json make_envelope(const std::string& schema,
                             const std::vector<std::string>& input_paths,
                             nlohmann::json data);

void write_artifact(const std::string& path, const nlohmann::json& envelope);

// Parses and checks the envelope shape and schema string.
nlohmann::json read_artifact(const std::string& path,
                             const std::string& expected_schema);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace convlens

#include "convlens/artifacts.hpp"

#include <cstdio>
#include <fstream>

#include "convlens/error.hpp"

namespace convlens {

uint64_t fnv1a64(std::span<const uint8_t> bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open " + path);
  }
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  if (in.bad()) {
    throw DataError("read failed for " + path);
  }
  return content;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot open " + path + " for writing");
  }
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) {
    throw DataError("write failed for " + path);
  }
}

uint64_t hash_file(const std::string& path) {
  std::string content = read_text_file(path);
  return fnv1a64(std::span<const uint8_t>(
      reinterpret_cast<const uint8_t*>(content.data()), content.size()));
}

std::string hash_hex(uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

nlohmann::json make_envelope(const std::string& schema,
                             const std::vector<std::string>& input_paths,
                             nlohmann::json data) {
  nlohmann::json inputs = nlohmann::json::object();
  for (const auto& path : input_paths) {
    inputs[path] = hash_hex(hash_file(path));
  }
  nlohmann::json envelope;
  envelope["schema"] = schema;
  envelope["inputs"] = std::move(inputs);
  envelope["data"] = std::move(data);
  return envelope;
}

void write_artifact(const std::string& path, const nlohmann::json& envelope) {
  write_text_file(path, envelope.dump(2) + "\n");
}

nlohmann::json read_artifact(const std::string& path,
                             const std::string& expected_schema) {
  std::string content = read_text_file(path);
  nlohmann::json envelope = nlohmann::json::parse(content, nullptr, false);
  if (envelope.is_discarded()) {
    throw DataError(path + ": not valid JSON");
  }
  if (!envelope.is_object() || !envelope.contains("schema") ||
      !envelope.contains("inputs") || !envelope.contains("data")) {
    throw DataError(path + ": missing artifact envelope");
  }
  if (!envelope["schema"].is_string() ||
      envelope["schema"].get<std::string>() != expected_schema) {
    throw DataError(path + ": expected schema " + expected_schema);
  }
  return envelope;
}

}  // namespace convlens

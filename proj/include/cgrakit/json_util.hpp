#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cgrakit/diagnostics.hpp"

namespace cgrakit {

using json = nlohmann::json;

// Parses text, rethrowing nlohmann's error as ParseError with byte position.
json parse_json_text(const std::string& text, const std::string& what);

// Rejects keys not in `allowed`; `where` names the object for the message.
void reject_unknown_keys(const json& obj, const std::vector<std::string>& allowed,
                         const std::string& where);

// Typed field access with ParseError on absence/type mismatch.
int require_int(const json& obj, const std::string& key, const std::string& where);
std::string require_string(const json& obj, const std::string& key, const std::string& where);
int get_int_or(const json& obj, const std::string& key, int fallback);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

std::string base64_encode(const std::vector<uint8_t>& data);
std::vector<uint8_t> base64_decode(const std::string& text);

// FNV-1a over bytes; used for content hashes embedded in config files.
uint64_t fnv1a64(const std::string& data);
std::string hex64(uint64_t value);

}  // namespace cgrakit

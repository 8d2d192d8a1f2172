#pragma once

// JSON helpers shared by the persistence code. Not installed.

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "plabel/annotations.hpp"

namespace plabel::jsonio {

using ordered_json = nlohmann::ordered_json;

ordered_json annotation_to_json(const Annotation& a);

// Parses the (x, y, w, h, c, confidence, origin, round) record. Returns
// nullopt with `reason` set for record-level rejections; throws
// Error(Format) for schema violations.
std::optional<Annotation> annotation_from_json(const nlohmann::json& j,
                                               const std::string& where,
                                               std::string& reason);

// Parses text, converting nlohmann parse errors into Error(Format) with the
// source name and line/column.
nlohmann::json parse_text(std::string_view text, std::string_view source);

std::string read_file(const std::filesystem::path& path);
// Writes through a temporary file and rename.
void write_file(const std::filesystem::path& path, std::string_view body);

double number_field(const nlohmann::json& j, const char* key,
                    const std::string& where);
std::int64_t int_field(const nlohmann::json& j, const char* key,
                       const std::string& where);
std::string string_field(const nlohmann::json& j, const char* key,
                         const std::string& where);

}  // namespace plabel::jsonio

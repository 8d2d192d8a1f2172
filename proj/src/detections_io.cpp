#include <sstream>

#include "json_util.hpp"
#include "plabel/error.hpp"
#include "plabel/selection.hpp"

namespace plabel {

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  fail(ErrorKind::Protocol, where + ": " + what);
}

double num(const nlohmann::json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_number()) {
    bad(where, std::string("field '") + key + "' missing or not a number");
  }
  return it->get<double>();
}

Detection parse_line(const std::string& line, const std::string& where) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    bad(where, e.what());
  }
  if (!j.is_object()) bad(where, "expected a JSON object");
  auto id = j.find("image_id");
  if (id == j.end() || !id->is_string()) bad(where, "image_id missing or not a string");
  const BBox box{num(j, "x", where), num(j, "y", where), num(j, "w", where),
                 num(j, "h", where)};
  if (!box.valid()) bad(where, "invalid box");
  auto c = j.find("c");
  if (c == j.end() || !c->is_number_integer()) bad(where, "c missing or not an integer");
  const auto category = CategoryId::from_int(
      static_cast<int>(std::clamp<std::int64_t>(c->get<std::int64_t>(), -1, 99)));
  if (!category) bad(where, "category outside 1..4");
  const double score = num(j, "score", where);
  if (!(score > 0.0 && score < 1.0)) {
    bad(where, "score " + std::to_string(score) + " outside (0, 1)");
  }
  return Detection{id->get<std::string>(), box, *category, score};
}

}  // namespace

std::vector<Detection> parse_detections(std::string_view text,
                                        std::string_view source) {
  std::vector<Detection> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_line(
        line, std::string(source) + ": line " + std::to_string(line_no)));
  }
  return out;
}

std::vector<Detection> read_detections(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    fail(ErrorKind::Protocol, "detection file missing: " + path.string());
  }
  return parse_detections(jsonio::read_file(path), path.string());
}

std::string detections_to_jsonl(std::span<const Detection> detections) {
  std::string out;
  for (const Detection& d : detections) {
    jsonio::ordered_json j;
    j["image_id"] = d.image_id;
    j["x"] = d.box.x;
    j["y"] = d.box.y;
    j["w"] = d.box.w;
    j["h"] = d.box.h;
    j["c"] = d.category.value();
    j["score"] = d.score;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void write_detections(const std::filesystem::path& path,
                      std::span<const Detection> detections) {
  jsonio::write_file(path, detections_to_jsonl(detections));
}

}  // namespace plabel

#include "plabel/annotations.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <set>
#include <sstream>

#include "json_util.hpp"
#include "plabel/error.hpp"
#include "plabel/rng.hpp"

namespace plabel {

// ---- CategoryId / Annotation ---------------------------------------------

std::optional<CategoryId> CategoryId::from_int(int value) {
  if (value < 1 || value > kNumCategories) return std::nullopt;
  return CategoryId(value);
}

CategoryId CategoryId::of(int value) {
  auto c = from_int(value);
  if (!c) {
    fail(ErrorKind::Format,
         "category " + std::to_string(value) + " outside 1.." +
             std::to_string(kNumCategories));
  }
  return *c;
}

Annotation Annotation::manual(const BBox& box, CategoryId category) {
  return Annotation{box, category, 1.0, OriginKind::Manual, 0};
}

Annotation Annotation::pseudo(const BBox& box, CategoryId category,
                              double score, int round) {
  Annotation a{box, category, score, OriginKind::Pseudo, round};
  a.validate();
  return a;
}

void Annotation::validate() const {
  if (!box.valid()) fail(ErrorKind::Invariant, "annotation box is not valid");
  if (origin == OriginKind::Manual) {
    if (confidence != 1.0 || round != 0) {
      fail(ErrorKind::Invariant,
           "manual annotation must have confidence 1 and round 0");
    }
  } else if (!(confidence > 0.0 && confidence < 1.0) || round < 1) {
    fail(ErrorKind::Invariant,
         "pseudo annotation needs confidence in (0,1) and round >= 1");
  }
}

std::string_view to_string(Split split) {
  return split == Split::Train ? "train" : "validation";
}

// ---- DatasetSnapshot -----------------------------------------------------

namespace {

bool within(const BBox& b, int width, int height) {
  const double tol = 1e-9 * std::max(1, std::max(width, height));
  return b.x >= -tol && b.y >= -tol && b.right() <= width + tol &&
         b.bottom() <= height + tol;
}

void check_image(const ImageRecord& img) {
  const std::string where = "image '" + img.image_id + "'";
  if (img.image_id.empty()) fail(ErrorKind::Invariant, "empty image_id");
  if (img.width <= 0 || img.height <= 0) {
    fail(ErrorKind::Invariant, where + ": width and height must be positive");
  }
  auto check_list = [&](const std::vector<Annotation>& list,
                        const char* what) {
    for (std::size_t i = 0; i < list.size(); ++i) {
      const Annotation& a = list[i];
      a.validate();
      if (!within(a.box, img.width, img.height)) {
        fail(ErrorKind::Invariant, where + ": " + what + "[" +
                                       std::to_string(i) +
                                       "] lies outside the image");
      }
    }
  };
  check_list(img.annotations, "annotations");
  if (img.hidden_truth) check_list(*img.hidden_truth, "hidden_truth");

  for (const Annotation& m : img.annotations) {
    if (!m.is_manual()) continue;
    for (const Annotation& p : img.annotations) {
      if (p.is_manual() || p.category != m.category) continue;
      if (iou(m.box, p.box) >= DatasetSnapshot::kLgtOverlapCeiling) {
        fail(ErrorKind::Invariant,
             where + ": pseudo-label overlaps a manual label of category " +
                 std::to_string(m.category.value()));
      }
    }
  }
}

}  // namespace

DatasetSnapshot::DatasetSnapshot(std::vector<ImageRecord> images, Split split,
                                 int round_index)
    : split_(split), round_index_(round_index) {
  if (round_index < 0) fail(ErrorKind::Invariant, "negative round index");
  auto index = std::make_shared<std::unordered_map<std::string, std::size_t>>();
  index->reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    check_image(images[i]);
    if (!index->emplace(images[i].image_id, i).second) {
      fail(ErrorKind::Invariant,
           "duplicate image_id '" + images[i].image_id + "'");
    }
  }
  images_ = std::make_shared<const std::vector<ImageRecord>>(std::move(images));
  index_ = std::move(index);
}

const ImageRecord* DatasetSnapshot::find(std::string_view image_id) const {
  auto i = index_of(image_id);
  return i ? &(*images_)[*i] : nullptr;
}

std::optional<std::size_t> DatasetSnapshot::index_of(
    std::string_view image_id) const {
  auto it = index_->find(std::string(image_id));
  if (it == index_->end()) return std::nullopt;
  return it->second;
}

std::size_t DatasetSnapshot::annotation_count() const {
  std::size_t n = 0;
  for (const auto& img : *images_) n += img.annotations.size();
  return n;
}

bool DatasetSnapshot::has_hidden_truth() const {
  return std::any_of(images_->begin(), images_->end(),
                     [](const ImageRecord& r) { return r.hidden_truth.has_value(); });
}

DatasetSnapshot DatasetSnapshot::without_hidden_truth() const {
  std::vector<ImageRecord> copy = *images_;
  for (auto& img : copy) img.hidden_truth.reset();
  return DatasetSnapshot(std::move(copy), split_, round_index_);
}

DatasetSnapshot DatasetSnapshot::with_round_index(int round_index) const {
  DatasetSnapshot s = *this;
  if (round_index < 0) fail(ErrorKind::Invariant, "negative round index");
  s.round_index_ = round_index;
  return s;
}

DatasetSnapshot DatasetSnapshot::with_split(Split split) const {
  DatasetSnapshot s = *this;
  s.split_ = split;
  return s;
}

bool operator==(const DatasetSnapshot& a, const DatasetSnapshot& b) {
  return a.split_ == b.split_ && a.round_index_ == b.round_index_ &&
         *a.images_ == *b.images_;
}

// ---- JSON helpers ----------------------------------------------------------

namespace jsonio {

nlohmann::json parse_text(std::string_view text, std::string_view source) {
  try {
    return nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    // Locate the line of the failing byte for the message.
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + upto, '\n');
    fail(ErrorKind::Format, std::string(source) + ": line " +
                                std::to_string(line) + ": " + e.what());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::string body{std::istreambuf_iterator<char>(in), {}};
  if (in.bad()) fail(ErrorKind::Io, "read failed: " + path.string());
  return body;
}

void write_file(const std::filesystem::path& path, std::string_view body) {
  std::error_code ec;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) {
      fail(ErrorKind::Io, "cannot create directory " +
                              path.parent_path().string() + ": " + ec.message());
    }
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write " + tmp.string());
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!out) fail(ErrorKind::Io, "write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    fail(ErrorKind::Io,
         "cannot move " + tmp.string() + " to " + path.string() + ": " +
             ec.message());
  }
}

double number_field(const nlohmann::json& j, const char* key,
                    const std::string& where) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_number()) {
    fail(ErrorKind::Format,
         where + ": field '" + key + "' missing or not a number");
  }
  return it->get<double>();
}

std::int64_t int_field(const nlohmann::json& j, const char* key,
                       const std::string& where) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_number_integer()) {
    fail(ErrorKind::Format,
         where + ": field '" + key + "' missing or not an integer");
  }
  return it->get<std::int64_t>();
}

std::string string_field(const nlohmann::json& j, const char* key,
                         const std::string& where) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    fail(ErrorKind::Format,
         where + ": field '" + key + "' missing or not a string");
  }
  return it->get<std::string>();
}

ordered_json annotation_to_json(const Annotation& a) {
  ordered_json j;
  j["x"] = a.box.x;
  j["y"] = a.box.y;
  j["w"] = a.box.w;
  j["h"] = a.box.h;
  j["c"] = a.category.value();
  j["confidence"] = a.confidence;
  j["origin"] = a.is_manual() ? "manual" : "pseudo";
  if (!a.is_manual()) j["round"] = a.round;
  return j;
}

std::optional<Annotation> annotation_from_json(const nlohmann::json& j,
                                               const std::string& where,
                                               std::string& reason) {
  if (!j.is_object()) fail(ErrorKind::Format, where + ": expected an object");
  const BBox box{number_field(j, "x", where), number_field(j, "y", where),
                 number_field(j, "w", where), number_field(j, "h", where)};
  const auto c = int_field(j, "c", where);
  std::string origin = "manual";
  if (auto it = j.find("origin"); it != j.end()) {
    if (!it->is_string()) {
      fail(ErrorKind::Format, where + ": field 'origin' must be a string");
    }
    origin = it->get<std::string>();
  }
  if (origin != "manual" && origin != "pseudo") {
    fail(ErrorKind::Format, where + ": unknown origin '" + origin + "'");
  }
  const bool manual = origin == "manual";
  double confidence = 1.0;
  if (j.contains("confidence")) confidence = number_field(j, "confidence", where);
  if (manual && confidence != 1.0) {
    fail(ErrorKind::Format, where + ": manual annotation confidence must be 1");
  }
  int round = 0;
  if (!manual) {
    round = static_cast<int>(int_field(j, "round", where));
    if (round < 1 || !(confidence > 0.0 && confidence < 1.0)) {
      fail(ErrorKind::Format,
           where + ": pseudo annotation needs round >= 1 and confidence in (0,1)");
    }
  }
  const auto category =
      CategoryId::from_int(static_cast<int>(std::clamp<std::int64_t>(c, -1, 99)));
  if (!category) {
    reason = "category_out_of_range";
    return std::nullopt;
  }
  if (!box.valid()) {
    reason = "invalid_box";
    return std::nullopt;
  }
  return Annotation{box, *category, confidence,
                    manual ? OriginKind::Manual : OriginKind::Pseudo, round};
}

}  // namespace jsonio

// ---- load / save -----------------------------------------------------------

std::int64_t LoadReport::rejected() const {
  std::int64_t n = 0;
  for (const auto& [reason, count] : rejected_by_reason) n += count;
  return n;
}

std::string LoadReport::to_json() const {
  jsonio::ordered_json j;
  j["accepted"] = accepted;
  j["rejected_by_reason"] = jsonio::ordered_json::object();
  for (const auto& [reason, count] : rejected_by_reason) {
    j["rejected_by_reason"][reason] = count;
  }
  j["clamped"] = clamped;
  return j.dump();
}

namespace detail {

// Clamps overhanging boxes in place; returns false when nothing of the box
// remains inside the image.
bool admit_box(BBox& box, int width, int height, LoadReport& report) {
  if (within(box, width, height)) return true;
  const BBox c = clamp_to(box, width, height);
  if (!(c.w > 0.0 && c.h > 0.0)) {
    ++report.rejected_by_reason["outside_image"];
    return false;
  }
  box = c;
  ++report.clamped;
  return true;
}

}  // namespace detail

namespace {

std::vector<Annotation> parse_annotation_list(const nlohmann::json& list,
                                              const std::string& where,
                                              int width, int height,
                                              LoadReport& report) {
  if (!list.is_array()) fail(ErrorKind::Format, where + ": expected an array");
  std::vector<Annotation> out;
  out.reserve(list.size());
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string at = where + "[" + std::to_string(i) + "]";
    std::string reason;
    auto a = jsonio::annotation_from_json(list[i], at, reason);
    if (!a) {
      ++report.rejected_by_reason[reason];
      continue;
    }
    if (!detail::admit_box(a->box, width, height, report)) continue;
    ++report.accepted;
    out.push_back(*a);
  }
  return out;
}

LoadResult parse_native(const nlohmann::json& root, std::string_view source) {
  const std::string src(source);
  if (!root.is_object()) fail(ErrorKind::Format, src + ": top level must be an object");
  const auto version = jsonio::int_field(root, "schema_version", src);
  if (version != kSchemaVersion) {
    fail(ErrorKind::Format,
         src + ": unsupported schema_version " + std::to_string(version));
  }
  Split split = Split::Train;
  if (auto it = root.find("split"); it != root.end()) {
    const std::string s = it->is_string() ? it->get<std::string>() : "";
    if (s == "train") {
      split = Split::Train;
    } else if (s == "validation") {
      split = Split::Validation;
    } else {
      fail(ErrorKind::Format, src + ": split must be 'train' or 'validation'");
    }
  }
  int round_index = 0;
  if (root.contains("round_index")) {
    round_index = static_cast<int>(jsonio::int_field(root, "round_index", src));
  }
  auto images_it = root.find("images");
  if (images_it == root.end() || !images_it->is_array()) {
    fail(ErrorKind::Format, src + ": 'images' missing or not an array");
  }
  LoadReport report;
  std::vector<ImageRecord> images;
  images.reserve(images_it->size());
  for (std::size_t i = 0; i < images_it->size(); ++i) {
    const auto& j = (*images_it)[i];
    const std::string where = src + ": images[" + std::to_string(i) + "]";
    if (!j.is_object()) fail(ErrorKind::Format, where + ": expected an object");
    ImageRecord img;
    img.image_id = jsonio::string_field(j, "image_id", where);
    img.width = static_cast<int>(jsonio::int_field(j, "width", where));
    img.height = static_cast<int>(jsonio::int_field(j, "height", where));
    if (img.width <= 0 || img.height <= 0) {
      fail(ErrorKind::Format, where + ": width and height must be positive");
    }
    auto ann = j.find("annotations");
    if (ann == j.end()) fail(ErrorKind::Format, where + ": 'annotations' missing");
    img.annotations = parse_annotation_list(*ann, where + ".annotations",
                                            img.width, img.height, report);
    if (auto hidden = j.find("hidden_truth"); hidden != j.end()) {
      LoadReport hidden_report;
      img.hidden_truth = parse_annotation_list(
          *hidden, where + ".hidden_truth", img.width, img.height, hidden_report);
    }
    if (auto g = j.find("group"); g != j.end()) {
      img.group = jsonio::string_field(j, "group", where);
    }
    images.push_back(std::move(img));
  }
  return LoadResult{DatasetSnapshot(std::move(images), split, round_index),
                    std::move(report)};
}

}  // namespace

LoadResult parse_coco(const nlohmann::json& root, std::string_view source);

LoadResult parse_dataset(std::string_view text, DatasetFormat format,
                         std::string_view source) {
  const nlohmann::json root = jsonio::parse_text(text, source);
  return format == DatasetFormat::NativeJson ? parse_native(root, source)
                                             : parse_coco(root, source);
}

LoadResult load_dataset(const std::filesystem::path& path,
                        DatasetFormat format) {
  const std::string text = jsonio::read_file(path);
  return parse_dataset(text, format, path.string());
}

std::string dataset_to_json(const DatasetSnapshot& snapshot,
                            const SaveOptions& options) {
  using jsonio::ordered_json;
  ordered_json root;
  root["schema_version"] = kSchemaVersion;
  root["split"] = to_string(snapshot.split());
  root["round_index"] = snapshot.round_index();
  ordered_json images = ordered_json::array();
  for (const ImageRecord& img : snapshot.images()) {
    ordered_json j;
    j["image_id"] = img.image_id;
    j["width"] = img.width;
    j["height"] = img.height;
    if (img.group) j["group"] = *img.group;
    ordered_json anns = ordered_json::array();
    for (const Annotation& a : img.annotations) {
      anns.push_back(jsonio::annotation_to_json(a));
    }
    j["annotations"] = std::move(anns);
    if (options.include_hidden && img.hidden_truth) {
      ordered_json hidden = ordered_json::array();
      for (const Annotation& a : *img.hidden_truth) {
        hidden.push_back(jsonio::annotation_to_json(a));
      }
      j["hidden_truth"] = std::move(hidden);
    }
    images.push_back(std::move(j));
  }
  root["images"] = std::move(images);
  return root.dump(1) + "\n";
}

void save_dataset(const DatasetSnapshot& snapshot,
                  const std::filesystem::path& path,
                  const SaveOptions& options) {
  jsonio::write_file(path, dataset_to_json(snapshot, options));
}

// ---- transforms -------------------------------------------------------------

std::pair<DatasetSnapshot, DatasetSnapshot> split_dataset(
    const DatasetSnapshot& snapshot, double ratio, std::uint64_t seed,
    const SplitOptions& options) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    fail(ErrorKind::Config, "split ratio must lie in (0, 1)");
  }
  const std::size_t n = snapshot.size();
  const auto target = static_cast<std::size_t>(std::llround(ratio * n));
  if (target == 0 || target >= n) {
    fail(ErrorKind::Config, "split of " + std::to_string(n) +
                                " images at ratio " + std::to_string(ratio) +
                                " leaves one side empty");
  }

  // Units are single images, or groups of images sharing a group key.
  std::vector<std::vector<std::size_t>> units;
  if (options.by_group) {
    std::map<std::string, std::size_t> unit_of;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& img = snapshot.images()[i];
      const std::string key = img.group ? "g:" + *img.group : "i:" + img.image_id;
      auto [it, inserted] = unit_of.emplace(key, units.size());
      if (inserted) units.emplace_back();
      units[it->second].push_back(i);
    }
  } else {
    units.resize(n);
    for (std::size_t i = 0; i < n; ++i) units[i] = {i};
  }

  Rng rng(seed);
  for (std::size_t i = units.size(); i > 1; --i) {
    std::swap(units[i - 1], units[rng.uniform_int(i)]);
  }

  std::vector<bool> in_train(n, false);
  std::size_t taken = 0;
  for (const auto& unit : units) {
    if (taken >= target) break;
    for (std::size_t i : unit) in_train[i] = true;
    taken += unit.size();
  }
  std::vector<ImageRecord> train, val;
  for (std::size_t i = 0; i < n; ++i) {
    (in_train[i] ? train : val).push_back(snapshot.images()[i]);
  }
  if (train.empty() || val.empty()) {
    fail(ErrorKind::Config, "grouped split leaves one side empty");
  }
  return {DatasetSnapshot(std::move(train), Split::Train, snapshot.round_index()),
          DatasetSnapshot(std::move(val), Split::Validation,
                          snapshot.round_index())};
}

CropWindow center_square_crop(int width, int height) {
  const int side = std::min(width, height);
  return CropWindow{(width - side) / 2, (height - side) / 2, side, side};
}

CropResult apply_crop_transform(const DatasetSnapshot& snapshot,
                                const CropWindow& crop) {
  if (crop.left < 0 || crop.top < 0 || crop.width <= 0 || crop.height <= 0) {
    fail(ErrorKind::Config, "crop window must have non-negative offsets and "
                            "positive size");
  }
  std::int64_t dropped = 0;
  std::int64_t clamped = 0;
  auto transform = [&](const std::vector<Annotation>& list) {
    std::vector<Annotation> out;
    out.reserve(list.size());
    for (Annotation a : list) {
      BBox shifted = translated(a.box, -crop.left, -crop.top);
      if (crop.left == 0 && crop.top == 0) shifted = a.box;
      if (!within(shifted, crop.width, crop.height)) {
        const BBox c = clamp_to(shifted, crop.width, crop.height);
        if (!(c.w > 0.0 && c.h > 0.0)) {
          ++dropped;
          continue;
        }
        shifted = c;
        ++clamped;
      }
      a.box = shifted;
      out.push_back(a);
    }
    return out;
  };
  std::vector<ImageRecord> images;
  images.reserve(snapshot.size());
  for (const ImageRecord& img : snapshot.images()) {
    if (crop.left + crop.width > img.width ||
        crop.top + crop.height > img.height) {
      fail(ErrorKind::Config,
           "crop window exceeds image '" + img.image_id + "' (" +
               std::to_string(img.width) + "x" + std::to_string(img.height) +
               ")");
    }
    ImageRecord out = img;
    out.width = crop.width;
    out.height = crop.height;
    out.annotations = transform(img.annotations);
    if (img.hidden_truth) out.hidden_truth = transform(*img.hidden_truth);
    images.push_back(std::move(out));
  }
  return CropResult{DatasetSnapshot(std::move(images), snapshot.split(),
                                    snapshot.round_index()),
                    dropped, clamped};
}

CategoryCounts count_by_category(const DatasetSnapshot& snapshot,
                                 std::optional<OriginKind> origin_filter) {
  CategoryCounts counts{};
  for (const ImageRecord& img : snapshot.images()) {
    for (const Annotation& a : img.annotations) {
      if (origin_filter && a.origin != *origin_filter) continue;
      ++counts[a.category.index()];
    }
  }
  return counts;
}

CategoryCounts add_counts(const CategoryCounts& a, const CategoryCounts& b) {
  CategoryCounts out{};
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

std::int64_t total(const CategoryCounts& counts) {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

}  // namespace plabel

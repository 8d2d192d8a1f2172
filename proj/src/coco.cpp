// COCO-like reader: {images: [{id, width, height, file_name?}],
// annotations: [{image_id, bbox: [x, y, w, h], category_id}]}. Everything it
// admits is Manual.

#include <map>
#include <string>
#include <vector>

#include "json_util.hpp"
#include "plabel/annotations.hpp"
#include "plabel/error.hpp"

namespace plabel {

namespace detail {
bool admit_box(BBox& box, int width, int height, LoadReport& report);
}

namespace {

std::string id_string(const nlohmann::json& v, const std::string& where) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  fail(ErrorKind::Format, where + ": id must be a string or an integer");
}

}  // namespace

LoadResult parse_coco(const nlohmann::json& root, std::string_view source) {
  const std::string src(source);
  if (!root.is_object()) fail(ErrorKind::Format, src + ": top level must be an object");
  auto images_it = root.find("images");
  auto anns_it = root.find("annotations");
  if (images_it == root.end() || !images_it->is_array()) {
    fail(ErrorKind::Format, src + ": 'images' missing or not an array");
  }
  if (anns_it == root.end() || !anns_it->is_array()) {
    fail(ErrorKind::Format, src + ": 'annotations' missing or not an array");
  }

  std::vector<ImageRecord> images;
  std::map<std::string, std::size_t> slot;
  for (std::size_t i = 0; i < images_it->size(); ++i) {
    const auto& j = (*images_it)[i];
    const std::string where = src + ": images[" + std::to_string(i) + "]";
    if (!j.is_object() || !j.contains("id")) {
      fail(ErrorKind::Format, where + ": expected an object with 'id'");
    }
    ImageRecord img;
    img.image_id = id_string(j["id"], where);
    img.width = static_cast<int>(jsonio::int_field(j, "width", where));
    img.height = static_cast<int>(jsonio::int_field(j, "height", where));
    if (img.width <= 0 || img.height <= 0) {
      fail(ErrorKind::Format, where + ": width and height must be positive");
    }
    if (!slot.emplace(img.image_id, images.size()).second) {
      fail(ErrorKind::Format, where + ": duplicate image id '" + img.image_id + "'");
    }
    images.push_back(std::move(img));
  }

  LoadReport report;
  for (std::size_t i = 0; i < anns_it->size(); ++i) {
    const auto& j = (*anns_it)[i];
    const std::string where = src + ": annotations[" + std::to_string(i) + "]";
    if (!j.is_object() || !j.contains("image_id")) {
      fail(ErrorKind::Format, where + ": expected an object with 'image_id'");
    }
    const std::string image_id = id_string(j["image_id"], where);
    auto it = slot.find(image_id);
    if (it == slot.end()) {
      fail(ErrorKind::Format, where + ": unknown image_id '" + image_id + "'");
    }
    auto bbox = j.find("bbox");
    if (bbox == j.end() || !bbox->is_array() || bbox->size() != 4) {
      fail(ErrorKind::Format, where + ": 'bbox' must be [x, y, w, h]");
    }
    for (const auto& v : *bbox) {
      if (!v.is_number()) fail(ErrorKind::Format, where + ": non-numeric bbox");
    }
    BBox box{(*bbox)[0].get<double>(), (*bbox)[1].get<double>(),
             (*bbox)[2].get<double>(), (*bbox)[3].get<double>()};
    const auto c = jsonio::int_field(j, "category_id", where);
    auto category = CategoryId::from_int(
        static_cast<int>(std::clamp<std::int64_t>(c, -1, 99)));
    if (!category) {
      ++report.rejected_by_reason["category_out_of_range"];
      continue;
    }
    if (!box.valid()) {
      ++report.rejected_by_reason["invalid_box"];
      continue;
    }
    ImageRecord& img = images[it->second];
    if (!detail::admit_box(box, img.width, img.height, report)) continue;
    ++report.accepted;
    img.annotations.push_back(Annotation::manual(box, *category));
  }
  return LoadResult{DatasetSnapshot(std::move(images)), std::move(report)};
}

}  // namespace plabel

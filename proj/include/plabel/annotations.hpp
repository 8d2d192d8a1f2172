#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "plabel/geometry.hpp"

namespace plabel {

inline constexpr int kNumCategories = 4;

// Lesion category: 1 blot hemorrhage, 2 microaneurysm, 3 hard exudate,
// 4 cotton wool spot. Nothing else is admitted.
class CategoryId {
 public:
  static std::optional<CategoryId> from_int(int value);
  // Throws Error(Format) outside 1..4.
  static CategoryId of(int value);

  int value() const { return value_; }
  std::size_t index() const { return static_cast<std::size_t>(value_ - 1); }

  friend auto operator<=>(const CategoryId&, const CategoryId&) = default;

 private:
  explicit CategoryId(int value) : value_(value) {}
  int value_;
};

using CategoryCounts = std::array<std::int64_t, kNumCategories>;

enum class OriginKind { Manual, Pseudo };

// One lesion instance. Manual (labeled) annotations carry confidence 1;
// pseudo-labels carry the detector score and the round that accepted them.
struct Annotation {
  BBox box;
  CategoryId category;
  double confidence;
  OriginKind origin;
  int round;  // 0 for Manual, >= 1 for Pseudo

  static Annotation manual(const BBox& box, CategoryId category);
  static Annotation pseudo(const BBox& box, CategoryId category, double score,
                           int round);

  bool is_manual() const { return origin == OriginKind::Manual; }
  // Throws Error(Invariant) when the origin/confidence contract is broken.
  void validate() const;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct ImageRecord {
  std::string image_id;
  int width = 0;
  int height = 0;
  std::vector<Annotation> annotations;
  // Complete lesion list; simulation only, never handed to detector adapters.
  std::optional<std::vector<Annotation>> hidden_truth;
  // Optional grouping key (e.g. patient) honored by grouped splits.
  std::optional<std::string> group;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

enum class Split { Train, Validation };

std::string_view to_string(Split split);

// Immutable view of a dataset at one round. Every constructor path checks
// the record invariants: valid in-bounds boxes, origin/confidence contract,
// unique image ids and no Manual/Pseudo pair of one category overlapping at
// IoU >= kLgtOverlapCeiling.
class DatasetSnapshot {
 public:
  static constexpr double kLgtOverlapCeiling = 0.05;

  explicit DatasetSnapshot(std::vector<ImageRecord> images,
                           Split split = Split::Train, int round_index = 0);

  int round_index() const { return round_index_; }
  Split split() const { return split_; }
  const std::vector<ImageRecord>& images() const { return *images_; }
  std::size_t size() const { return images_->size(); }

  const ImageRecord* find(std::string_view image_id) const;
  std::optional<std::size_t> index_of(std::string_view image_id) const;

  std::size_t annotation_count() const;
  bool has_hidden_truth() const;

  DatasetSnapshot without_hidden_truth() const;
  DatasetSnapshot with_round_index(int round_index) const;
  DatasetSnapshot with_split(Split split) const;

  friend bool operator==(const DatasetSnapshot& a, const DatasetSnapshot& b);

 private:
  std::shared_ptr<const std::vector<ImageRecord>> images_;
  std::shared_ptr<const std::unordered_map<std::string, std::size_t>> index_;
  Split split_;
  int round_index_;
};

// ---- persistence -------------------------------------------------------

enum class DatasetFormat { NativeJson, CocoLikeJson };

struct LoadReport {
  std::int64_t accepted = 0;
  std::map<std::string, std::int64_t> rejected_by_reason;
  std::int64_t clamped = 0;

  std::int64_t rejected() const;
  std::string to_json() const;
};

struct LoadResult {
  DatasetSnapshot snapshot;
  LoadReport report;
};

inline constexpr int kSchemaVersion = 1;

// Record-level problems (category outside 1..4, empty or out-of-image box)
// reject the record and are counted in the report; boxes overhanging the
// image are clamped. Unparseable input and schema violations throw
// Error(Format) naming the offending record.
LoadResult parse_dataset(std::string_view text, DatasetFormat format,
                         std::string_view source = "<memory>");
LoadResult load_dataset(const std::filesystem::path& path,
                        DatasetFormat format = DatasetFormat::NativeJson);

struct SaveOptions {
  bool include_hidden = false;
};

std::string dataset_to_json(const DatasetSnapshot& snapshot,
                            const SaveOptions& options = {});
void save_dataset(const DatasetSnapshot& snapshot,
                  const std::filesystem::path& path,
                  const SaveOptions& options = {});

// ---- transforms --------------------------------------------------------

struct SplitOptions {
  bool by_group = false;  // keep images sharing ImageRecord::group together
};

// Image-level partition; train receives llround(ratio * n) images (for
// grouped splits, whole groups until that target is reached).
std::pair<DatasetSnapshot, DatasetSnapshot> split_dataset(
    const DatasetSnapshot& snapshot, double ratio, std::uint64_t seed,
    const SplitOptions& options = {});

struct CropWindow {
  int left = 0;
  int top = 0;
  int width = 0;
  int height = 0;
};

// Centered square crop of side min(width, height).
CropWindow center_square_crop(int width, int height);

struct CropResult {
  DatasetSnapshot snapshot;
  std::int64_t dropped = 0;
  std::int64_t clamped = 0;
};

CropResult apply_crop_transform(const DatasetSnapshot& snapshot,
                                const CropWindow& crop);

CategoryCounts count_by_category(
    const DatasetSnapshot& snapshot,
    std::optional<OriginKind> origin_filter = std::nullopt);

CategoryCounts add_counts(const CategoryCounts& a, const CategoryCounts& b);
std::int64_t total(const CategoryCounts& counts);

}  // namespace plabel

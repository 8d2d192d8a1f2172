#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "plabel/annotations.hpp"
#include "plabel/geometry.hpp"

namespace plabel {

// One detector output box.
struct Detection {
  std::string image_id;
  BBox box;
  CategoryId category;
  double score;  // strictly inside (0, 1)

  friend bool operator==(const Detection&, const Detection&) = default;
};

// Processing order of the selector: descending score, ties broken by
// (image_id, x, y, category).
bool score_order(const Detection& a, const Detection& b);

struct SelectionCriterion {
  double p_threshold = 0.3;       // accept only score > P
  double lgt_iou_ceiling = 0.05;  // and IoU < this against every label
  double dedup_iou = 0.5;         // suppress later detections at IoU >= this
  // Scope of the dedup among accepted detections: same category only when
  // true, any category when false. The exclusion against existing labels is
  // spatial in both cases.
  bool category_specific = true;

  // Throws Error(Config).
  void validate() const;
};

// Threshold clause and exclusion clause for a single detection.
bool accept_one(const Detection& d, std::span<const Annotation> existing,
                const SelectionCriterion& crit);

struct PseudoLabel {
  std::string image_id;
  Annotation annotation;

  friend bool operator==(const PseudoLabel&, const PseudoLabel&) = default;
};

// Filters detections on the snapshot's images down to the accepted set.
// Each image is processed in score_order; an accepted detection joins the
// dedup set for the rest of that image. Output is grouped by image_id
// (lexicographic), acceptance order within an image. Accepted annotations
// are Pseudo with confidence = score and the given round.
// Throws Error(Protocol) listing detections whose image_id is unknown.
std::vector<PseudoLabel> select_ugt(const std::vector<Detection>& detections,
                                    const DatasetSnapshot& snapshot,
                                    const SelectionCriterion& crit,
                                    int round = 1, int threads = 1);

CategoryCounts count_by_category(std::span<const PseudoLabel> x);

struct SweepTable {
  std::vector<double> p_values;
  std::vector<CategoryCounts> counts;  // one row per p_values entry
};

// Runs select_ugt once per threshold on the same detection list, with every
// other criterion field taken from `base`. p_values must be ascending.
SweepTable sweep_thresholds(const std::vector<Detection>& detections,
                            const DatasetSnapshot& snapshot,
                            const std::vector<double>& p_values,
                            const SelectionCriterion& base = {},
                            int threads = 1);

// ---- detection files: JSON lines {image_id, x, y, w, h, c, score} --------

// Throws Error(Protocol) naming the line for records that break the
// contract (bad JSON, score outside (0,1), invalid box, unknown category).
std::vector<Detection> parse_detections(std::string_view text,
                                        std::string_view source = "<memory>");
std::vector<Detection> read_detections(const std::filesystem::path& path);
std::string detections_to_jsonl(std::span<const Detection> detections);
void write_detections(const std::filesystem::path& path,
                      std::span<const Detection> detections);

}  // namespace plabel

#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "plabel/annotations.hpp"
#include "plabel/geometry.hpp"
#include "plabel/selection.hpp"

namespace plabel {

struct EvalProtocol {
  double score_floor = 0.1;         // keep detections with score > floor
  std::size_t max_dets_per_image = 100;
  CfParams cf;

  // Throws Error(Config).
  void validate() const;
};

struct MatchPair {
  std::size_t detection;  // index into the detections passed in
  std::size_t gt;         // index into the ground truths passed in
};

struct ImageMatch {
  CategoryCounts tp{};
  CategoryCounts fn{};
  std::vector<MatchPair> matches;
};

// Greedy one-to-one matching on one image: surviving detections in
// score_order each claim the unmatched same-category ground truth with the
// highest IoU among those they CF-match (lowest index on ties).
ImageMatch match_image(std::span<const Detection> detections,
                       std::span<const Annotation> gts,
                       const EvalProtocol& protocol = {});

struct CategorySensitivity {
  std::int64_t tp = 0;
  std::int64_t fn = 0;
  // tp / (tp + fn); absent when the category has no ground truth.
  std::optional<double> sensitivity;
};

struct SensitivityTable {
  std::array<CategorySensitivity, kNumCategories> per_category{};
  EvalProtocol protocol;
};

enum class GroundTruth {
  Annotations,  // the labels present in the snapshot
  HiddenTruth,  // the complete lesion list (simulation only)
};

// Aggregates match_image over every image of the snapshot. Throws
// Error(Protocol) for detections on unknown images and Error(Config) when
// HiddenTruth is requested on a snapshot without it.
SensitivityTable sensitivity(const std::vector<Detection>& detections,
                             const DatasetSnapshot& snapshot,
                             const EvalProtocol& protocol = {},
                             GroundTruth truth = GroundTruth::Annotations,
                             int threads = 1);

// Fraction of pseudo-labels that CF-match (same category) a hidden lesion
// which no annotation of `snapshot` covers yet. Pass the snapshot the
// labels were selected against. Absent for an empty x; throws
// Error(Config) when the snapshot carries no hidden truth.
std::optional<double> ugt_precision_oracle(std::span<const PseudoLabel> x,
                                           const DatasetSnapshot& snapshot);

// Same measure for a raw detection list.
std::optional<double> detection_precision_oracle(
    std::span<const Detection> detections, const DatasetSnapshot& snapshot);

}  // namespace plabel

#pragma once

#include <array>
#include <cstdint>

#include "plabel/anchorlab.hpp"
#include "plabel/annotations.hpp"

namespace plabel {

// Synthetic fundus-like dataset: square images carrying non-overlapping
// lesion boxes, a fraction of which are labeled. Defaults follow the
// per-category labeled counts and image counts of the reference dataset.
struct ScenarioConfig {
  std::uint64_t seed = 1;
  int train_images = 4158;
  int val_images = 1040;
  int image_size = 2136;
  CategoryCounts train_labeled{14720, 6301, 7403, 537};
  CategoryCounts val_labeled{3773, 1402, 1913, 117};
  // Labeled share of all lesions; the hidden total per category is
  // round(labeled / label_fraction).
  double label_fraction = 0.85;
  std::array<double, kNumCategories> mean_area_ratio = kMeanLesionAreaRatio;
  double log_sigma = 0.5;
  // Multiplies image and lesion counts, for desk-scale runs.
  double scale = 1.0;

  // Throws Error(Config).
  void validate() const;
};

struct Scenario {
  DatasetSnapshot train;
  DatasetSnapshot val;
};

Scenario generate_scenario(const ScenarioConfig& cfg);

}  // namespace plabel

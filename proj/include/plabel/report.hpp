#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "plabel/annotations.hpp"
#include "plabel/evaluation.hpp"
#include "plabel/selection.hpp"

namespace plabel {

struct RoundState;

// "P,cat1,cat2,cat3,cat4" then one row per threshold, P printed with one
// decimal.
std::string render_sweep_csv(const SweepTable& table);

struct UgtRow {
  std::string label;
  CategoryCounts counts{};
};

// "model,cat1,cat2,cat3,cat4" then one row per entry.
std::string render_ugt_csv(const std::vector<UgtRow>& rows);

struct SensitivityRow {
  std::string label;
  std::array<std::optional<double>, kNumCategories> values{};  // fractions

  static SensitivityRow from(std::string label, const SensitivityTable& table);
};

// Percentages with two decimals ("95.83%"); "-" for an absent value.
std::string format_percent(const std::optional<double>& fraction);
std::string render_sensitivity_csv(const std::vector<SensitivityRow>& rows);
std::string render_sensitivity_markdown(const std::vector<SensitivityRow>& rows);

// Per-round table: P, |X|, X per category, D* per category and, when any
// round was evaluated, sensitivity per category.
std::string render_rounds_markdown(const std::vector<RoundState>& states);

struct CoverageRow {
  int image_size = 0;
  std::string pyramid;
  int category = 0;
  std::string matcher;
  double coverage = 0.0;
};

// "image_size,pyramid,category,matcher,coverage"; coverage with six
// decimals.
std::string render_coverage_csv(const std::vector<CoverageRow>& rows);

}  // namespace plabel

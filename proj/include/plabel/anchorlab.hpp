#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "plabel/annotations.hpp"
#include "plabel/geometry.hpp"
#include "plabel/kernels.hpp"

namespace plabel {

struct FpnLevel {
  std::string name;
  int stride = 0;
};

struct FpnConfig {
  std::string name;
  std::vector<FpnLevel> levels;

  static FpnConfig standard();  // strides 4, 8, 16, 32
  static FpnConfig deeper();    // strides 2, 4, 8, 16, 32, 64

  // Throws Error(Config) unless strides are positive and double per level.
  void validate() const;
};

struct AnchorConfig {
  std::vector<double> scales{1.0, 2.0, 4.0, 8.0};
  std::vector<double> ratios{0.5, 1.0, 2.0};
  double base_per_stride = 1.0;  // base size = stride * base_per_stride

  std::size_t per_location() const { return scales.size() * ratios.size(); }
  void validate() const;
};

// Anchor shapes of one level, in (scale, ratio) order. Ratio r gives
// w = base * scale * sqrt(r), h = base * scale / sqrt(r).
struct AnchorShape {
  double w = 0.0;
  double h = 0.0;
};
std::vector<AnchorShape> level_shapes(int stride, const AnchorConfig& anchors);

inline int grid_cells(int image_size, int stride) {
  return (image_size + stride - 1) / stride;
}

struct LevelAnchors {
  FpnLevel level;
  int grid = 0;  // grid x grid locations
  // Row-major over locations, anchors of one location contiguous. Anchors
  // are centered on ((i + 0.5) * stride, (j + 0.5) * stride) and may
  // overhang the image.
  kernels::BoxBuffer boxes;
};

std::vector<LevelAnchors> generate_anchors(int image_size, const FpnConfig& fpn,
                                           const AnchorConfig& anchors);

// Closed form: sum over levels of ceil(size / stride)^2 * per_location.
std::int64_t anchor_count(int image_size, const FpnConfig& fpn,
                          const AnchorConfig& anchors);

inline kernels::MatchRule cf_rule(const CfParams& cf = {}) {
  return {kernels::MatchRule::Kind::CenterFocus, cf.iou_floor, cf.boundary_inclusive};
}
inline kernels::MatchRule iou_rule(double threshold = 0.5) {
  return {kernels::MatchRule::Kind::IoU, threshold, true};
}
std::string matcher_name(const kernels::MatchRule& rule);

// Whether any anchor of the pyramid matches gt. Only anchors that can
// intersect gt with a feasible area are enumerated; every one of them is
// tested exactly.
bool covered(const BBox& gt, int image_size, const FpnConfig& fpn,
             const AnchorConfig& anchors, const kernels::MatchRule& rule);

// Fraction of gt boxes covered. Throws Error(Config) for an empty list.
double coverage(std::span<const BBox> gt_boxes, int image_size,
                const FpnConfig& fpn, const AnchorConfig& anchors,
                const kernels::MatchRule& rule, int threads = 1);

// Reference: tests every generated anchor against every box.
double coverage_bruteforce(std::span<const BBox> gt_boxes, int image_size,
                           const FpnConfig& fpn, const AnchorConfig& anchors,
                           const kernels::MatchRule& rule);

// Mean lesion area over image area per category (1..4).
inline constexpr std::array<double, kNumCategories> kMeanLesionAreaRatio{
    0.07244e-2, 0.05390e-2, 0.31672e-2, 0.23976e-2};

struct LesionSample {
  BBox box;
  CategoryId category;
};

// Seeded lesion boxes for a square image. Area ratios are log-normal with
// the per-category means above (mean preserved; log_sigma is the spread of
// log-area), aspect ratio drawn from {0.5, 1, 2}, position uniform inside
// the image. Boxes are drawn in unit coordinates and scaled, so one seed
// yields the same relative population at every image size.
std::vector<LesionSample> lesion_population(const CategoryCounts& counts,
                                            int image_size, std::uint64_t seed,
                                            double log_sigma = 0.5);

}  // namespace plabel

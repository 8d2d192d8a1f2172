#include "plabel/anchorlab.hpp"

#include <algorithm>
#include <cmath>

#include "plabel/error.hpp"
#include "plabel/parallel.hpp"
#include "plabel/rng.hpp"

namespace plabel {

FpnConfig FpnConfig::standard() {
  return {"standard", {{"P2", 4}, {"P3", 8}, {"P4", 16}, {"P5", 32}}};
}

FpnConfig FpnConfig::deeper() {
  return {"deeper",
          {{"F0", 2}, {"F1", 4}, {"F2", 8}, {"F3", 16}, {"F4", 32}, {"F5", 64}}};
}

void FpnConfig::validate() const {
  if (levels.empty()) fail(ErrorKind::Config, "pyramid '" + name + "' has no levels");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i].stride <= 0) {
      fail(ErrorKind::Config, "pyramid '" + name + "': stride must be positive");
    }
    if (i > 0 && levels[i].stride != 2 * levels[i - 1].stride) {
      fail(ErrorKind::Config,
           "pyramid '" + name + "': adjacent strides must differ by a factor of 2");
    }
  }
}

void AnchorConfig::validate() const {
  if (scales.empty() || ratios.empty()) {
    fail(ErrorKind::Config, "anchor scales and ratios must be non-empty");
  }
  for (double v : scales) {
    if (!(v > 0.0) || !std::isfinite(v)) fail(ErrorKind::Config, "anchor scale must be > 0");
  }
  for (double v : ratios) {
    if (!(v > 0.0) || !std::isfinite(v)) fail(ErrorKind::Config, "anchor ratio must be > 0");
  }
  if (!(base_per_stride > 0.0)) fail(ErrorKind::Config, "base_per_stride must be > 0");
}

std::vector<AnchorShape> level_shapes(int stride, const AnchorConfig& anchors) {
  std::vector<AnchorShape> out;
  const double base = stride * anchors.base_per_stride;
  for (double s : anchors.scales) {
    for (double r : anchors.ratios) {
      const double q = std::sqrt(r);
      out.push_back({base * s * q, base * s / q});
    }
  }
  return out;
}

namespace {

// Shared by enumeration and the windowed search so both see identical
// anchor coordinates.
inline void push_anchor(kernels::BoxBuffer& buf, int stride, int i, int j,
                        const AnchorShape& shape) {
  const double cx = (i + 0.5) * stride;
  const double cy = (j + 0.5) * stride;
  const double hw = shape.w * 0.5;
  const double hh = shape.h * 0.5;
  buf.push_back_edges(cx - hw, cy - hh, cx + hw, cy + hh);
}

bool area_feasible(double anchor_area, double gt_area,
                   const kernels::MatchRule& rule) {
  // IoU never exceeds the ratio of the smaller to the larger area.
  const double bound =
      std::min(anchor_area, gt_area) / std::max(anchor_area, gt_area);
  return bound >= rule.threshold * (1.0 - 1e-9);
}

}  // namespace

std::vector<LevelAnchors> generate_anchors(int image_size, const FpnConfig& fpn,
                                           const AnchorConfig& anchors) {
  if (image_size <= 0) fail(ErrorKind::Config, "image size must be positive");
  fpn.validate();
  anchors.validate();
  std::vector<LevelAnchors> out;
  for (const FpnLevel& level : fpn.levels) {
    LevelAnchors la;
    la.level = level;
    la.grid = grid_cells(image_size, level.stride);
    const auto shapes = level_shapes(level.stride, anchors);
    la.boxes.reserve(static_cast<std::size_t>(la.grid) * la.grid * shapes.size());
    for (int j = 0; j < la.grid; ++j) {
      for (int i = 0; i < la.grid; ++i) {
        for (const AnchorShape& s : shapes) push_anchor(la.boxes, level.stride, i, j, s);
      }
    }
    out.push_back(std::move(la));
  }
  return out;
}

std::int64_t anchor_count(int image_size, const FpnConfig& fpn,
                          const AnchorConfig& anchors) {
  std::int64_t n = 0;
  for (const FpnLevel& level : fpn.levels) {
    const std::int64_t g = grid_cells(image_size, level.stride);
    n += g * g * static_cast<std::int64_t>(anchors.per_location());
  }
  return n;
}

std::string matcher_name(const kernels::MatchRule& rule) {
  if (rule.kind == kernels::MatchRule::Kind::CenterFocus) return "cf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "iou%.2f", rule.threshold);
  return buf;
}

bool covered(const BBox& gt, int image_size, const FpnConfig& fpn,
             const AnchorConfig& anchors, const kernels::MatchRule& rule) {
  thread_local kernels::BoxBuffer window;
  const double gt_area = area(gt);
  for (const FpnLevel& level : fpn.levels) {
    const int s = level.stride;
    const int grid = grid_cells(image_size, s);
    for (const AnchorShape& shape : level_shapes(s, anchors)) {
      if (!area_feasible(shape.w * shape.h, gt_area, rule)) continue;
      // Anchor centers that give a positive overlap, widened by one cell.
      auto lo = [&](double edge, double half) {
        return std::clamp(static_cast<int>(std::floor((edge - half) / s - 0.5)) - 1, 0,
                          grid - 1);
      };
      auto hi = [&](double edge, double half) {
        return std::clamp(static_cast<int>(std::ceil((edge + half) / s - 0.5)) + 1, 0,
                          grid - 1);
      };
      const int i0 = lo(gt.x, shape.w * 0.5), i1 = hi(gt.right(), shape.w * 0.5);
      const int j0 = lo(gt.y, shape.h * 0.5), j1 = hi(gt.bottom(), shape.h * 0.5);
      window.clear();
      for (int j = j0; j <= j1; ++j) {
        for (int i = i0; i <= i1; ++i) push_anchor(window, s, i, j, shape);
      }
      if (window.size() > 0 && kernels::any_match(gt, window.view(), rule)) return true;
    }
  }
  return false;
}

double coverage(std::span<const BBox> gt_boxes, int image_size,
                const FpnConfig& fpn, const AnchorConfig& anchors,
                const kernels::MatchRule& rule, int threads) {
  if (gt_boxes.empty()) fail(ErrorKind::Config, "coverage of an empty box list is undefined");
  if (image_size <= 0) fail(ErrorKind::Config, "image size must be positive");
  fpn.validate();
  anchors.validate();
  std::vector<char> hit(gt_boxes.size(), 0);
  parallel_for(gt_boxes.size(), threads, [&](std::size_t i) {
    hit[i] = covered(gt_boxes[i], image_size, fpn, anchors, rule) ? 1 : 0;
  });
  const auto n = std::count(hit.begin(), hit.end(), 1);
  return static_cast<double>(n) / static_cast<double>(gt_boxes.size());
}

double coverage_bruteforce(std::span<const BBox> gt_boxes, int image_size,
                           const FpnConfig& fpn, const AnchorConfig& anchors,
                           const kernels::MatchRule& rule) {
  if (gt_boxes.empty()) fail(ErrorKind::Config, "coverage of an empty box list is undefined");
  const auto levels = generate_anchors(image_size, fpn, anchors);
  std::size_t n = 0;
  for (const BBox& g : gt_boxes) {
    for (const auto& la : levels) {
      if (kernels::table(kernels::Isa::Scalar).any_match(g, la.boxes.view(), rule)) {
        ++n;
        break;
      }
    }
  }
  return static_cast<double>(n) / static_cast<double>(gt_boxes.size());
}

std::vector<LesionSample> lesion_population(const CategoryCounts& counts,
                                            int image_size, std::uint64_t seed,
                                            double log_sigma) {
  if (image_size <= 0) fail(ErrorKind::Config, "image size must be positive");
  if (!(log_sigma >= 0.0)) fail(ErrorKind::Config, "log_sigma must be >= 0");
  static constexpr double kAspects[] = {0.5, 1.0, 2.0};
  std::vector<LesionSample> out;
  const double size = image_size;
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    if (counts[c] < 0) fail(ErrorKind::Config, "negative lesion count");
    Rng rng = Rng::keyed(seed, {"lesions"}, c + 1);
    for (std::int64_t k = 0; k < counts[c]; ++k) {
      const double ratio = kMeanLesionAreaRatio[c] *
                           std::exp(log_sigma * rng.normal() - 0.5 * log_sigma * log_sigma);
      const double aspect = kAspects[rng.uniform_int(3)];
      const double uw = std::min(1.0, std::sqrt(ratio * aspect));
      const double uh = std::min(1.0, std::sqrt(ratio / aspect));
      const double ux = rng.uniform() * (1.0 - uw);
      const double uy = rng.uniform() * (1.0 - uh);
      out.push_back({BBox{ux * size, uy * size, uw * size, uh * size},
                     CategoryId::of(static_cast<int>(c) + 1)});
    }
  }
  return out;
}

}  // namespace plabel

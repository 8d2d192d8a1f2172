#pragma once

// Batched box kernels: one query box against a structure-of-arrays batch.
//
// Every kernel has a scalar reference implementation and SIMD variants
// (AVX2 on x86-64, NEON on AArch64) chosen at runtime. The variants evaluate
// the same IEEE operations in the same order as the scalar code, so results
// are bit-identical; tests/unit/test_kernels.cpp holds them to that.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "plabel/geometry.hpp"

namespace plabel::kernels {

enum class Isa { Scalar, Avx2, Neon };

std::string_view to_string(Isa isa);

// Read-only edge-coordinate view; all spans have equal length.
struct BoxesView {
  std::span<const double> x1;
  std::span<const double> y1;
  std::span<const double> x2;
  std::span<const double> y2;

  std::size_t size() const { return x1.size(); }
};

// Owning edge-coordinate storage.
class BoxBuffer {
 public:
  void reserve(std::size_t n);
  void clear();
  void push_back(const BBox& b);
  void push_back_edges(double x1, double y1, double x2, double y2);
  std::size_t size() const { return x1_.size(); }
  BoxesView view() const { return {x1_, y1_, x2_, y2_}; }

 private:
  std::vector<double> x1_, y1_, x2_, y2_;
};

struct MatchRule {
  enum class Kind { CenterFocus, IoU };
  Kind kind = Kind::CenterFocus;
  // CenterFocus: IoU > threshold and center contained.
  // IoU: IoU >= threshold.
  double threshold = 0.1;
  bool boundary_inclusive = true;
};

struct KernelTable {
  // out[i] = iou(query, boxes[i]); out must hold boxes.size() values.
  void (*iou_many)(const BBox& query, BoxesView boxes, double* out);
  // max_i iou(query, boxes[i]), 0 for an empty batch.
  double (*max_iou)(const BBox& query, BoxesView boxes);
  // True when any box in the batch (as proposal) matches gt under rule.
  bool (*any_match)(const BBox& gt, BoxesView proposals, const MatchRule& rule);
};

bool isa_supported(Isa isa);
// Best ISA on this CPU; PLABEL_ISA=scalar|avx2|neon overrides when supported.
Isa detected_isa();
Isa active_isa();
// Throws Error(Config) for an ISA this build or CPU cannot run.
void set_active_isa(Isa isa);

const KernelTable& table(Isa isa);

inline void iou_many(const BBox& query, BoxesView boxes, double* out) {
  table(active_isa()).iou_many(query, boxes, out);
}
inline double max_iou(const BBox& query, BoxesView boxes) {
  return table(active_isa()).max_iou(query, boxes);
}
inline bool any_match(const BBox& gt, BoxesView proposals,
                      const MatchRule& rule) {
  return table(active_isa()).any_match(gt, proposals, rule);
}

namespace detail {
const KernelTable& scalar_table();
const KernelTable* avx2_table();  // nullptr when not compiled in
const KernelTable* neon_table();  // nullptr when not compiled in
}  // namespace detail

}  // namespace plabel::kernels

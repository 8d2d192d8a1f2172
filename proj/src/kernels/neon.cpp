#include "plabel/kernels.hpp"

#if defined(__aarch64__) && defined(__ARM_NEON)
#include <arm_neon.h>
#define PLABEL_HAVE_NEON_KERNELS 1
#endif

namespace plabel::kernels {

#if PLABEL_HAVE_NEON_KERNELS
namespace {

// vminq/vmaxq differ from std::min/std::max only on signed zeros and NaN;
// the explicit selects below keep the scalar tie semantics.
inline float64x2_t min_like_std(float64x2_t a, float64x2_t b) {
  return vbslq_f64(vcltq_f64(b, a), b, a);
}
inline float64x2_t max_like_std(float64x2_t a, float64x2_t b) {
  return vbslq_f64(vcltq_f64(a, b), b, a);
}

struct Query2 {
  float64x2_t x1, y1, x2, y2, area;
};

inline Query2 broadcast(const BBox& q) {
  const double qx2 = q.right();
  const double qy2 = q.bottom();
  return {vdupq_n_f64(q.x), vdupq_n_f64(q.y), vdupq_n_f64(qx2),
          vdupq_n_f64(qy2), vdupq_n_f64((qx2 - q.x) * (qy2 - q.y))};
}

inline float64x2_t iou2(const Query2& q, float64x2_t bx1, float64x2_t by1,
                        float64x2_t bx2, float64x2_t by2) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  const float64x2_t iw = max_like_std(
      zero, vsubq_f64(min_like_std(q.x2, bx2), max_like_std(q.x1, bx1)));
  const float64x2_t ih = max_like_std(
      zero, vsubq_f64(min_like_std(q.y2, by2), max_like_std(q.y1, by1)));
  const float64x2_t inter = vmulq_f64(iw, ih);
  const float64x2_t area_b =
      vmulq_f64(vsubq_f64(bx2, bx1), vsubq_f64(by2, by1));
  const float64x2_t uni = vsubq_f64(vaddq_f64(q.area, area_b), inter);
  const float64x2_t ratio = vdivq_f64(inter, uni);
  return vbslq_f64(vcgtq_f64(uni, zero), ratio, zero);
}

void iou_many_neon(const BBox& q, BoxesView b, double* out) {
  const Query2 q2 = broadcast(q);
  const std::size_t n = b.size();
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(out + i, iou2(q2, vld1q_f64(&b.x1[i]), vld1q_f64(&b.y1[i]),
                            vld1q_f64(&b.x2[i]), vld1q_f64(&b.y2[i])));
  }
  for (; i < n; ++i) {
    out[i] = iou_edges(q.x, q.y, q.right(), q.bottom(), b.x1[i], b.y1[i],
                       b.x2[i], b.y2[i]);
  }
}

double max_iou_neon(const BBox& q, BoxesView b) {
  const Query2 q2 = broadcast(q);
  const std::size_t n = b.size();
  std::size_t i = 0;
  float64x2_t best2 = vdupq_n_f64(0.0);
  for (; i + 2 <= n; i += 2) {
    best2 = max_like_std(best2, iou2(q2, vld1q_f64(&b.x1[i]),
                                     vld1q_f64(&b.y1[i]), vld1q_f64(&b.x2[i]),
                                     vld1q_f64(&b.y2[i])));
  }
  double best = std::max(vgetq_lane_f64(best2, 0), vgetq_lane_f64(best2, 1));
  for (; i < n; ++i) {
    best = std::max(best, iou_edges(q.x, q.y, q.right(), q.bottom(), b.x1[i],
                                    b.y1[i], b.x2[i], b.y2[i]));
  }
  return best;
}

bool any_match_neon(const BBox& gt, BoxesView p, const MatchRule& rule) {
  const Query2 q2 = broadcast(gt);
  const float64x2_t thr = vdupq_n_f64(rule.threshold);
  const float64x2_t cx = vdupq_n_f64(gt.center_x());
  const float64x2_t cy = vdupq_n_f64(gt.center_y());
  const std::size_t n = p.size();
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t x1 = vld1q_f64(&p.x1[i]);
    const float64x2_t y1 = vld1q_f64(&p.y1[i]);
    const float64x2_t x2 = vld1q_f64(&p.x2[i]);
    const float64x2_t y2 = vld1q_f64(&p.y2[i]);
    const float64x2_t v = iou2(q2, x1, y1, x2, y2);
    uint64x2_t hit;
    if (rule.kind == MatchRule::Kind::IoU) {
      hit = vcgeq_f64(v, thr);
    } else {
      uint64x2_t inside;
      if (rule.boundary_inclusive) {
        inside = vandq_u64(vandq_u64(vcleq_f64(x1, cx), vcleq_f64(cx, x2)),
                           vandq_u64(vcleq_f64(y1, cy), vcleq_f64(cy, y2)));
      } else {
        inside = vandq_u64(vandq_u64(vcltq_f64(x1, cx), vcltq_f64(cx, x2)),
                           vandq_u64(vcltq_f64(y1, cy), vcltq_f64(cy, y2)));
      }
      hit = vandq_u64(vcgtq_f64(v, thr), inside);
    }
    if ((vgetq_lane_u64(hit, 0) | vgetq_lane_u64(hit, 1)) != 0) return true;
  }
  if (i == n) return false;
  const BoxesView tail{p.x1.subspan(i), p.y1.subspan(i), p.x2.subspan(i),
                       p.y2.subspan(i)};
  return detail::scalar_table().any_match(gt, tail, rule);
}

}  // namespace

namespace detail {
const KernelTable* neon_table() {
  static const KernelTable t{iou_many_neon, max_iou_neon, any_match_neon};
  return &t;
}
}  // namespace detail

#else

namespace detail {
const KernelTable* neon_table() { return nullptr; }
}  // namespace detail

#endif

}  // namespace plabel::kernels

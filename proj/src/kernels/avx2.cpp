#include "plabel/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>
#define PLABEL_HAVE_AVX2_KERNELS 1
#endif

namespace plabel::kernels {

#if PLABEL_HAVE_AVX2_KERNELS
namespace {

#define PLABEL_AVX2 __attribute__((target("avx2")))

// std::min(a, b) == (b < a ? b : a)  ->  _mm256_min_pd(b, a)
// std::max(a, b) == (a < b ? b : a)  ->  _mm256_max_pd(b, a)
struct Query4 {
  __m256d x1, y1, x2, y2, area;
};

PLABEL_AVX2 inline Query4 broadcast(const BBox& q) {
  const double qx2 = q.right();
  const double qy2 = q.bottom();
  return {_mm256_set1_pd(q.x), _mm256_set1_pd(q.y), _mm256_set1_pd(qx2),
          _mm256_set1_pd(qy2), _mm256_set1_pd((qx2 - q.x) * (qy2 - q.y))};
}

PLABEL_AVX2 inline __m256d iou4(const Query4& q, __m256d bx1, __m256d by1,
                                __m256d bx2, __m256d by2) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d iw = _mm256_max_pd(
      _mm256_sub_pd(_mm256_min_pd(bx2, q.x2), _mm256_max_pd(bx1, q.x1)), zero);
  const __m256d ih = _mm256_max_pd(
      _mm256_sub_pd(_mm256_min_pd(by2, q.y2), _mm256_max_pd(by1, q.y1)), zero);
  const __m256d inter = _mm256_mul_pd(iw, ih);
  const __m256d area_b =
      _mm256_mul_pd(_mm256_sub_pd(bx2, bx1), _mm256_sub_pd(by2, by1));
  const __m256d uni = _mm256_sub_pd(_mm256_add_pd(q.area, area_b), inter);
  const __m256d ratio = _mm256_div_pd(inter, uni);
  const __m256d positive = _mm256_cmp_pd(uni, zero, _CMP_GT_OQ);
  return _mm256_and_pd(ratio, positive);
}

PLABEL_AVX2 void iou_many_avx2(const BBox& q, BoxesView b, double* out) {
  const Query4 q4 = broadcast(q);
  const std::size_t n = b.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v =
        iou4(q4, _mm256_loadu_pd(&b.x1[i]), _mm256_loadu_pd(&b.y1[i]),
             _mm256_loadu_pd(&b.x2[i]), _mm256_loadu_pd(&b.y2[i]));
    _mm256_storeu_pd(out + i, v);
  }
  const double qx2 = q.right();
  const double qy2 = q.bottom();
  for (; i < n; ++i) {
    out[i] = iou_edges(q.x, q.y, qx2, qy2, b.x1[i], b.y1[i], b.x2[i], b.y2[i]);
  }
}

PLABEL_AVX2 double max_iou_avx2(const BBox& q, BoxesView b) {
  const Query4 q4 = broadcast(q);
  const std::size_t n = b.size();
  std::size_t i = 0;
  __m256d best4 = _mm256_setzero_pd();
  for (; i + 4 <= n; i += 4) {
    const __m256d v =
        iou4(q4, _mm256_loadu_pd(&b.x1[i]), _mm256_loadu_pd(&b.y1[i]),
             _mm256_loadu_pd(&b.x2[i]), _mm256_loadu_pd(&b.y2[i]));
    best4 = _mm256_max_pd(v, best4);
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, best4);
  double best = 0.0;
  for (double v : lanes) best = std::max(best, v);
  const double qx2 = q.right();
  const double qy2 = q.bottom();
  for (; i < n; ++i) {
    best = std::max(best, iou_edges(q.x, q.y, qx2, qy2, b.x1[i], b.y1[i],
                                    b.x2[i], b.y2[i]));
  }
  return best;
}

PLABEL_AVX2 bool any_match_avx2(const BBox& gt, BoxesView p,
                                const MatchRule& rule) {
  const Query4 q4 = broadcast(gt);
  const __m256d thr = _mm256_set1_pd(rule.threshold);
  const __m256d cx = _mm256_set1_pd(gt.center_x());
  const __m256d cy = _mm256_set1_pd(gt.center_y());
  const bool iou_rule = rule.kind == MatchRule::Kind::IoU;
  const std::size_t n = p.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d x1 = _mm256_loadu_pd(&p.x1[i]);
    const __m256d y1 = _mm256_loadu_pd(&p.y1[i]);
    const __m256d x2 = _mm256_loadu_pd(&p.x2[i]);
    const __m256d y2 = _mm256_loadu_pd(&p.y2[i]);
    const __m256d v = iou4(q4, x1, y1, x2, y2);
    __m256d hit;
    if (iou_rule) {
      hit = _mm256_cmp_pd(v, thr, _CMP_GE_OQ);
    } else {
      hit = _mm256_cmp_pd(v, thr, _CMP_GT_OQ);
      // The comparison predicate must be an immediate.
      __m256d inside;
      if (rule.boundary_inclusive) {
        inside = _mm256_and_pd(
            _mm256_and_pd(_mm256_cmp_pd(x1, cx, _CMP_LE_OQ),
                          _mm256_cmp_pd(cx, x2, _CMP_LE_OQ)),
            _mm256_and_pd(_mm256_cmp_pd(y1, cy, _CMP_LE_OQ),
                          _mm256_cmp_pd(cy, y2, _CMP_LE_OQ)));
      } else {
        inside = _mm256_and_pd(
            _mm256_and_pd(_mm256_cmp_pd(x1, cx, _CMP_LT_OQ),
                          _mm256_cmp_pd(cx, x2, _CMP_LT_OQ)),
            _mm256_and_pd(_mm256_cmp_pd(y1, cy, _CMP_LT_OQ),
                          _mm256_cmp_pd(cy, y2, _CMP_LT_OQ)));
      }
      hit = _mm256_and_pd(hit, inside);
    }
    if (_mm256_movemask_pd(hit) != 0) return true;
  }
  if (i == n) return false;
  const BoxesView tail{p.x1.subspan(i), p.y1.subspan(i), p.x2.subspan(i),
                       p.y2.subspan(i)};
  return detail::scalar_table().any_match(gt, tail, rule);
}

#undef PLABEL_AVX2

}  // namespace

namespace detail {
const KernelTable* avx2_table() {
  static const KernelTable t{iou_many_avx2, max_iou_avx2, any_match_avx2};
  return &t;
}
}  // namespace detail

#else

namespace detail {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace detail

#endif

}  // namespace plabel::kernels

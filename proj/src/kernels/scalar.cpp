#include "plabel/kernels.hpp"

namespace plabel::kernels {
namespace {

void iou_many_scalar(const BBox& q, BoxesView b, double* out) {
  const double qx2 = q.right();
  const double qy2 = q.bottom();
  for (std::size_t i = 0; i < b.size(); ++i) {
    out[i] = iou_edges(q.x, q.y, qx2, qy2, b.x1[i], b.y1[i], b.x2[i], b.y2[i]);
  }
}

double max_iou_scalar(const BBox& q, BoxesView b) {
  const double qx2 = q.right();
  const double qy2 = q.bottom();
  double best = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    best = std::max(best, iou_edges(q.x, q.y, qx2, qy2, b.x1[i], b.y1[i],
                                    b.x2[i], b.y2[i]));
  }
  return best;
}

bool any_match_scalar(const BBox& gt, BoxesView p, const MatchRule& rule) {
  const double gx2 = gt.right();
  const double gy2 = gt.bottom();
  const double cx = gt.center_x();
  const double cy = gt.center_y();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double v =
        iou_edges(gt.x, gt.y, gx2, gy2, p.x1[i], p.y1[i], p.x2[i], p.y2[i]);
    if (rule.kind == MatchRule::Kind::IoU) {
      if (v >= rule.threshold) return true;
      continue;
    }
    if (!(v > rule.threshold)) continue;
    const bool inside =
        rule.boundary_inclusive
            ? (p.x1[i] <= cx && cx <= p.x2[i] && p.y1[i] <= cy && cy <= p.y2[i])
            : (p.x1[i] < cx && cx < p.x2[i] && p.y1[i] < cy && cy < p.y2[i]);
    if (inside) return true;
  }
  return false;
}

}  // namespace

namespace detail {
const KernelTable& scalar_table() {
  static const KernelTable t{iou_many_scalar, max_iou_scalar, any_match_scalar};
  return t;
}
}  // namespace detail

}  // namespace plabel::kernels

#include "plabel/geometry.hpp"

#include <sstream>

#include "plabel/error.hpp"

namespace plabel {

BBox make_box(double x, double y, double w, double h) {
  BBox b{x, y, w, h};
  if (!b.valid()) {
    std::ostringstream msg;
    msg << "invalid box (" << x << ", " << y << ", " << w << ", " << h
        << "): fields must be finite with w > 0 and h > 0";
    fail(ErrorKind::Format, msg.str());
  }
  return b;
}

BBox translated(const BBox& b, double dx, double dy) {
  return BBox{b.x + dx, b.y + dy, b.w, b.h};
}

void CfParams::validate() const {
  if (!(iou_floor >= 0.0 && iou_floor < 1.0)) {
    fail(ErrorKind::Config, "cf iou_floor must lie in [0, 1)");
  }
}

double area(const BBox& b) { return b.w * b.h; }

double iou(const BBox& a, const BBox& b) {
  return iou_edges(a.x, a.y, a.right(), a.bottom(), b.x, b.y, b.right(),
                   b.bottom());
}

bool contains_center(const BBox& proposal, const BBox& gt,
                     const CfParams& params) {
  const double cx = gt.center_x();
  const double cy = gt.center_y();
  if (params.boundary_inclusive) {
    return proposal.x <= cx && cx <= proposal.right() && proposal.y <= cy &&
           cy <= proposal.bottom();
  }
  return proposal.x < cx && cx < proposal.right() && proposal.y < cy &&
         cy < proposal.bottom();
}

bool cf_match(const BBox& proposal, const BBox& gt, const CfParams& params) {
  return iou(proposal, gt) > params.iou_floor &&
         contains_center(proposal, gt, params);
}

BBox clamp_to(const BBox& b, double width, double height) {
  const double x1 = std::clamp(b.x, 0.0, width);
  const double y1 = std::clamp(b.y, 0.0, height);
  const double x2 = std::clamp(b.right(), 0.0, width);
  const double y2 = std::clamp(b.bottom(), 0.0, height);
  return BBox{x1, y1, x2 - x1, y2 - y1};
}

}  // namespace plabel

#pragma once

#include <algorithm>
#include <cmath>

namespace plabel {

// Axis-aligned box in continuous pixel coordinates. (x, y) is the top-left
// corner, origin at the image top-left. A valid box has finite fields and
// strictly positive extent.
struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double right() const { return x + w; }
  double bottom() const { return y + h; }
  double center_x() const { return x + w / 2.0; }
  double center_y() const { return y + h / 2.0; }

  bool valid() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) &&
           std::isfinite(h) && w > 0.0 && h > 0.0;
  }

  friend bool operator==(const BBox&, const BBox&) = default;
};

// Throws Error(Format) when the box is not valid.
BBox make_box(double x, double y, double w, double h);

BBox translated(const BBox& b, double dx, double dy);

// Center-focus matching parameters.
struct CfParams {
  double iou_floor = 0.1;          // match needs IoU strictly above this
  bool boundary_inclusive = true;  // center on the proposal edge counts

  void validate() const;
};

double area(const BBox& b);

// Intersection-over-union on geometric area. Areas are taken from the edge
// coordinates so that iou(a, a) == 1 exactly.
inline double iou_edges(double ax1, double ay1, double ax2, double ay2,
                        double bx1, double by1, double bx2, double by2) {
  const double iw = std::max(0.0, std::min(ax2, bx2) - std::max(ax1, bx1));
  const double ih = std::max(0.0, std::min(ay2, by2) - std::max(ay1, by1));
  const double inter = iw * ih;
  const double area_a = (ax2 - ax1) * (ay2 - ay1);
  const double area_b = (bx2 - bx1) * (by2 - by1);
  const double uni = area_a + area_b - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

double iou(const BBox& a, const BBox& b);

bool contains_center(const BBox& proposal, const BBox& gt,
                     const CfParams& params = {});

// Positive match under the center-focus criterion: IoU above the floor and
// the proposal contains the ground-truth center.
bool cf_match(const BBox& proposal, const BBox& gt,
              const CfParams& params = {});

// Intersection of the box with [0,width]x[0,height]; w or h may end up <= 0
// when the box lies outside.
BBox clamp_to(const BBox& b, double width, double height);

}  // namespace plabel

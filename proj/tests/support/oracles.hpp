#pragma once

// Test-side reference implementations. They share no code with the library
// beyond the plain data types.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "plabel/annotations.hpp"
#include "plabel/selection.hpp"

namespace plabel::oracle {

inline double overlap(const BBox& a, const BBox& b) {
  const double ix = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
  const double iy = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
  if (ix <= 0 || iy <= 0) return 0.0;
  const double inter = ix * iy;
  return inter / (a.w * a.h + b.w * b.h - inter);
}

inline bool center_inside(const BBox& proposal, const BBox& gt) {
  const double cx = gt.x + gt.w / 2, cy = gt.y + gt.h / 2;
  return cx >= proposal.x && cx <= proposal.x + proposal.w && cy >= proposal.y &&
         cy <= proposal.y + proposal.h;
}

inline bool cf(const BBox& proposal, const BBox& gt) {
  return overlap(proposal, gt) > 0.1 && center_inside(proposal, gt);
}

// Applies the selection clauses one detection at a time in descending score
// order: threshold, exclusion against every existing label, dedup against
// the already accepted ones.
inline std::vector<PseudoLabel> select(std::vector<Detection> dets,
                                       const DatasetSnapshot& snap,
                                       const SelectionCriterion& crit, int round) {
  std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
    return std::make_tuple(-a.score, a.image_id, a.box.x, a.box.y, a.category.value()) <
           std::make_tuple(-b.score, b.image_id, b.box.x, b.box.y, b.category.value());
  });
  std::map<std::string, std::vector<PseudoLabel>> accepted;
  for (const Detection& d : dets) {
    if (!(d.score > crit.p_threshold)) continue;
    const ImageRecord* img = snap.find(d.image_id);
    bool ok = true;
    for (const Annotation& a : img->annotations) {
      if (overlap(d.box, a.box) >= crit.lgt_iou_ceiling) ok = false;
    }
    for (const PseudoLabel& p : accepted[d.image_id]) {
      const bool same_scope =
          !crit.category_specific || p.annotation.category == d.category;
      if (same_scope && overlap(d.box, p.annotation.box) >= crit.dedup_iou) ok = false;
    }
    if (ok) {
      accepted[d.image_id].push_back(
          {d.image_id, Annotation::pseudo(d.box, d.category, d.score, round)});
    }
  }
  std::vector<PseudoLabel> out;
  for (auto& [id, list] : accepted) out.insert(out.end(), list.begin(), list.end());
  return out;
}

// Maximum bipartite matching size between detections (rows) and gts
// (columns) by exhaustive augmenting search; edges given by `edge`.
inline int max_matching(std::size_t rows, std::size_t cols,
                        const std::function<bool(std::size_t, std::size_t)>& edge) {
  std::vector<int> col_owner(cols, -1);
  int size = 0;
  std::function<bool(std::size_t, std::vector<bool>&)> augment =
      [&](std::size_t r, std::vector<bool>& seen) {
        for (std::size_t c = 0; c < cols; ++c) {
          if (!edge(r, c) || seen[c]) continue;
          seen[c] = true;
          if (col_owner[c] < 0 || augment(static_cast<std::size_t>(col_owner[c]), seen)) {
            col_owner[c] = static_cast<int>(r);
            return true;
          }
        }
        return false;
      };
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<bool> seen(cols, false);
    if (augment(r, seen)) ++size;
  }
  return size;
}

struct MicroCase {
  std::vector<Detection> detections;
  std::vector<Annotation> gts;
};

// Lesion-like matching case on one 240 px image: up to 6 non-overlapping
// ground truths (one per 80 px cell), up to 6 detections that are jittered
// copies of them or stray boxes, categories 1-2, pairwise distinct scores.
inline MicroCase micro_case(std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> count(0, 6), cat(1, 2);
  MicroCase mc;
  std::vector<int> cells{0, 1, 2, 3, 4, 5, 6, 7, 8};
  std::shuffle(cells.begin(), cells.end(), g);
  const int n_gt = count(g);
  for (int i = 0; i < n_gt; ++i) {
    const double w = 8 + 24 * unit(g), h = 8 + 24 * unit(g);
    const double x = 80.0 * (cells[i] % 3) + (80 - w) * unit(g);
    const double y = 80.0 * (cells[i] / 3) + (80 - h) * unit(g);
    mc.gts.push_back(Annotation::manual({x, y, w, h}, CategoryId::of(cat(g))));
  }
  const int n_det = count(g);
  std::vector<double> scores;
  for (int i = 0; i < n_det; ++i) scores.push_back(0.11 + 0.88 * (i + unit(g)) / n_det);
  std::shuffle(scores.begin(), scores.end(), g);
  for (int i = 0; i < n_det; ++i) {
    BBox b;
    CategoryId c = CategoryId::of(cat(g));
    if (!mc.gts.empty() && unit(g) < 0.8) {
      const Annotation& t = mc.gts[g() % mc.gts.size()];
      const double s = 0.6 + 0.9 * unit(g);
      b = {t.box.center_x() - t.box.w * s / 2 + (unit(g) - 0.5) * t.box.w * 0.6,
           t.box.center_y() - t.box.h * s / 2 + (unit(g) - 0.5) * t.box.h * 0.6,
           t.box.w * s, t.box.h * s};
      if (unit(g) < 0.8) c = t.category;
    } else {
      b = {200 * unit(g), 200 * unit(g), 8 + 24 * unit(g), 8 + 24 * unit(g)};
    }
    mc.detections.push_back({"micro", b, c, scores[i]});
  }
  return mc;
}

}  // namespace plabel::oracle

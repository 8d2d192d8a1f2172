#include "plabel/selection.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "plabel/error.hpp"
#include "plabel/kernels.hpp"
#include "plabel/parallel.hpp"

namespace plabel {

bool score_order(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.image_id != b.image_id) return a.image_id < b.image_id;
  if (a.box.x != b.box.x) return a.box.x < b.box.x;
  if (a.box.y != b.box.y) return a.box.y < b.box.y;
  return a.category < b.category;
}

void SelectionCriterion::validate() const {
  if (!(p_threshold >= 0.0 && p_threshold < 1.0)) {
    fail(ErrorKind::Config, "selection threshold P must lie in [0, 1)");
  }
  if (!(lgt_iou_ceiling > 0.0 && lgt_iou_ceiling < 1.0)) {
    fail(ErrorKind::Config, "lgt_iou_ceiling must lie in (0, 1)");
  }
  if (!(dedup_iou > 0.0 && dedup_iou <= 1.0)) {
    fail(ErrorKind::Config, "dedup_iou must lie in (0, 1]");
  }
}

bool accept_one(const Detection& d, std::span<const Annotation> existing,
                const SelectionCriterion& crit) {
  if (!(d.score > crit.p_threshold)) return false;
  for (const Annotation& a : existing) {
    if (iou(d.box, a.box) >= crit.lgt_iou_ceiling) return false;
  }
  return true;
}

namespace {

// Selection on one image; `dets` is already in score_order.
std::vector<Annotation> select_image(const std::vector<const Detection*>& dets,
                                     const ImageRecord& img,
                                     const SelectionCriterion& crit,
                                     int round) {
  kernels::BoxBuffer existing;
  existing.reserve(img.annotations.size());
  for (const Annotation& a : img.annotations) existing.push_back(a.box);

  std::vector<Annotation> accepted;
  for (const Detection* d : dets) {
    if (!(d->score > crit.p_threshold)) break;  // sorted: the rest are lower
    if (existing.size() > 0 &&
        kernels::max_iou(d->box, existing.view()) >= crit.lgt_iou_ceiling) {
      continue;
    }
    bool duplicate = false;
    for (const Annotation& a : accepted) {
      if (crit.category_specific && a.category != d->category) continue;
      if (iou(d->box, a.box) >= crit.dedup_iou) {
        duplicate = true;
        break;
      }
    }
    if (duplicate) continue;
    accepted.push_back(Annotation::pseudo(d->box, d->category, d->score, round));
  }
  return accepted;
}

}  // namespace

std::vector<PseudoLabel> select_ugt(const std::vector<Detection>& detections,
                                    const DatasetSnapshot& snapshot,
                                    const SelectionCriterion& crit, int round,
                                    int threads) {
  crit.validate();
  if (round < 1) fail(ErrorKind::Config, "pseudo-label round must be >= 1");

  std::vector<std::vector<const Detection*>> per_image(snapshot.size());
  std::set<std::string> unknown;
  for (const Detection& d : detections) {
    auto i = snapshot.index_of(d.image_id);
    if (!i) {
      unknown.insert(d.image_id);
      continue;
    }
    per_image[*i].push_back(&d);
  }
  if (!unknown.empty()) {
    std::string list;
    std::size_t shown = 0;
    for (const auto& id : unknown) {
      if (shown++ == 10) {
        list += ", ...";
        break;
      }
      list += (list.empty() ? "" : ", ") + id;
    }
    fail(ErrorKind::Protocol, std::to_string(unknown.size()) +
                                  " detection image_id(s) not in the dataset: " +
                                  list);
  }

  std::vector<std::vector<Annotation>> accepted(snapshot.size());
  parallel_for(snapshot.size(), threads, [&](std::size_t i) {
    auto& dets = per_image[i];
    if (dets.empty()) return;
    std::sort(dets.begin(), dets.end(),
              [](const Detection* a, const Detection* b) {
                return score_order(*a, *b);
              });
    accepted[i] = select_image(dets, snapshot.images()[i], crit, round);
  });

  std::vector<std::size_t> order(snapshot.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return snapshot.images()[a].image_id < snapshot.images()[b].image_id;
  });
  std::vector<PseudoLabel> out;
  for (std::size_t i : order) {
    for (const Annotation& a : accepted[i]) {
      out.push_back(PseudoLabel{snapshot.images()[i].image_id, a});
    }
  }
  return out;
}

CategoryCounts count_by_category(std::span<const PseudoLabel> x) {
  CategoryCounts counts{};
  for (const PseudoLabel& p : x) ++counts[p.annotation.category.index()];
  return counts;
}

SweepTable sweep_thresholds(const std::vector<Detection>& detections,
                            const DatasetSnapshot& snapshot,
                            const std::vector<double>& p_values,
                            const SelectionCriterion& base, int threads) {
  if (!std::is_sorted(p_values.begin(), p_values.end())) {
    fail(ErrorKind::Config, "sweep thresholds must be ascending");
  }
  SweepTable table;
  table.p_values = p_values;
  for (double p : p_values) {
    SelectionCriterion crit = base;
    crit.p_threshold = p;
    table.counts.push_back(
        count_by_category(select_ugt(detections, snapshot, crit, 1, threads)));
  }
  return table;
}

}  // namespace plabel

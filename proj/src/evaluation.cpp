#include "plabel/evaluation.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "plabel/error.hpp"
#include "plabel/parallel.hpp"

namespace plabel {

void EvalProtocol::validate() const {
  if (!(score_floor >= 0.0 && score_floor < 1.0)) {
    fail(ErrorKind::Config, "score_floor must lie in [0, 1)");
  }
  if (max_dets_per_image < 1) {
    fail(ErrorKind::Config, "max_dets_per_image must be >= 1");
  }
  cf.validate();
}

ImageMatch match_image(std::span<const Detection> detections,
                       std::span<const Annotation> gts,
                       const EvalProtocol& protocol) {
  std::vector<std::size_t> order;
  order.reserve(detections.size());
  for (std::size_t i = 0; i < detections.size(); ++i) {
    if (detections[i].score > protocol.score_floor) order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return score_order(detections[a], detections[b]);
  });
  if (order.size() > protocol.max_dets_per_image) {
    order.resize(protocol.max_dets_per_image);
  }

  ImageMatch result;
  std::vector<bool> taken(gts.size(), false);
  for (std::size_t di : order) {
    const Detection& d = detections[di];
    std::size_t best = gts.size();
    double best_iou = -1.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g] || gts[g].category != d.category) continue;
      if (!cf_match(d.box, gts[g].box, protocol.cf)) continue;
      const double v = iou(d.box, gts[g].box);
      if (v > best_iou) {
        best_iou = v;
        best = g;
      }
    }
    if (best == gts.size()) continue;
    taken[best] = true;
    result.matches.push_back({di, best});
    ++result.tp[d.category.index()];
  }
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (!taken[g]) ++result.fn[gts[g].category.index()];
  }
  return result;
}

namespace {

std::vector<std::vector<std::size_t>> group_by_image(
    std::span<const Detection> detections, const DatasetSnapshot& snapshot) {
  std::vector<std::vector<std::size_t>> groups(snapshot.size());
  std::set<std::string> unknown;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    auto idx = snapshot.index_of(detections[i].image_id);
    if (!idx) {
      unknown.insert(detections[i].image_id);
      continue;
    }
    groups[*idx].push_back(i);
  }
  if (!unknown.empty()) {
    fail(ErrorKind::Protocol, std::to_string(unknown.size()) +
                                  " detection image_id(s) not in the dataset, "
                                  "first: " + *unknown.begin());
  }
  return groups;
}

void require_hidden(const DatasetSnapshot& snapshot) {
  if (!snapshot.has_hidden_truth()) {
    fail(ErrorKind::Config,
         "the precision oracle requires simulation mode (hidden_truth)");
  }
}

// Hidden lesions of the image that no current annotation covers.
std::vector<Annotation> unlabeled_lesions(const ImageRecord& img) {
  std::vector<Annotation> out;
  if (!img.hidden_truth) return out;
  for (const Annotation& g : *img.hidden_truth) {
    const bool covered = std::any_of(
        img.annotations.begin(), img.annotations.end(), [&](const Annotation& a) {
          return a.category == g.category && cf_match(a.box, g.box);
        });
    if (!covered) out.push_back(g);
  }
  return out;
}

template <typename Item, typename Id, typename Box>
std::optional<double> precision_of(std::span<const Item> items,
                                   const DatasetSnapshot& snapshot, Id id_of,
                                   Box box_of) {
  require_hidden(snapshot);
  if (items.empty()) return std::nullopt;
  std::vector<std::optional<std::vector<Annotation>>> cache(snapshot.size());
  std::size_t hits = 0;
  for (const Item& item : items) {
    auto idx = snapshot.index_of(id_of(item));
    if (!idx) {
      fail(ErrorKind::Protocol, "image_id '" + id_of(item) + "' not in the dataset");
    }
    if (!cache[*idx]) cache[*idx] = unlabeled_lesions(snapshot.images()[*idx]);
    const auto [box, category] = box_of(item);
    const bool hit = std::any_of(cache[*idx]->begin(), cache[*idx]->end(),
                                 [&](const Annotation& g) {
                                   return g.category == category &&
                                          cf_match(box, g.box);
                                 });
    if (hit) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(items.size());
}

}  // namespace

SensitivityTable sensitivity(const std::vector<Detection>& detections,
                             const DatasetSnapshot& snapshot,
                             const EvalProtocol& protocol, GroundTruth truth,
                             int threads) {
  protocol.validate();
  if (truth == GroundTruth::HiddenTruth && !snapshot.has_hidden_truth()) {
    fail(ErrorKind::Config, "hidden-truth evaluation needs simulation data");
  }
  const auto groups = group_by_image(detections, snapshot);
  std::vector<ImageMatch> per_image(snapshot.size());
  parallel_for(snapshot.size(), threads, [&](std::size_t i) {
    std::vector<Detection> dets;
    dets.reserve(groups[i].size());
    for (std::size_t k : groups[i]) dets.push_back(detections[k]);
    const ImageRecord& img = snapshot.images()[i];
    const auto& gts = truth == GroundTruth::HiddenTruth && img.hidden_truth
                          ? *img.hidden_truth
                          : img.annotations;
    per_image[i] = match_image(dets, gts, protocol);
  });

  SensitivityTable table;
  table.protocol = protocol;
  for (const ImageMatch& m : per_image) {
    for (std::size_t c = 0; c < kNumCategories; ++c) {
      table.per_category[c].tp += m.tp[c];
      table.per_category[c].fn += m.fn[c];
    }
  }
  for (auto& row : table.per_category) {
    const auto n = row.tp + row.fn;
    if (n > 0) row.sensitivity = static_cast<double>(row.tp) / static_cast<double>(n);
  }
  return table;
}

std::optional<double> ugt_precision_oracle(std::span<const PseudoLabel> x,
                                           const DatasetSnapshot& snapshot) {
  return precision_of(
      x, snapshot, [](const PseudoLabel& p) { return p.image_id; },
      [](const PseudoLabel& p) {
        return std::pair{p.annotation.box, p.annotation.category};
      });
}

std::optional<double> detection_precision_oracle(
    std::span<const Detection> detections, const DatasetSnapshot& snapshot) {
  return precision_of(
      detections, snapshot, [](const Detection& d) { return d.image_id; },
      [](const Detection& d) { return std::pair{d.box, d.category}; });
}

}  // namespace plabel

#include <algorithm>
#include <cmath>

#include "plabel/detector.hpp"
#include "plabel/error.hpp"
#include "plabel/parallel.hpp"
#include "plabel/rng.hpp"

namespace plabel {

namespace {

constexpr double kScoreMin = 1e-6;
constexpr double kScoreMax = 1.0 - 1e-6;
// Spread of false-positive sizes in log-area.
constexpr double kFpLogAreaSigma = 0.5;
constexpr double kFallbackAreaRatio = 5e-4;
constexpr int kFpPlacementAttempts = 32;

double clamp_score(double s) { return std::clamp(s, kScoreMin, kScoreMax); }

const std::vector<Annotation>& truth_of(const ImageRecord& img) {
  return img.hidden_truth ? *img.hidden_truth : img.annotations;
}

bool overlaps_any(const BBox& b, const std::vector<Annotation>& list) {
  for (const Annotation& a : list) {
    const double iw = std::min(b.right(), a.box.right()) - std::max(b.x, a.box.x);
    const double ih =
        std::min(b.bottom(), a.box.bottom()) - std::max(b.y, a.box.y);
    if (iw > 0.0 && ih > 0.0) return true;
  }
  return false;
}

struct ImageTally {
  std::array<std::int64_t, kNumCategories> n_true{};
  std::array<std::int64_t, kNumCategories> n_false{};
  std::array<std::int64_t, kNumCategories> n_missing{};
  std::array<double, kNumCategories> area_ratio_sum{};
};

ImageTally tally_image(const ImageRecord& img) {
  ImageTally t;
  const double image_area = static_cast<double>(img.width) * img.height;
  for (const Annotation& a : img.annotations) {
    t.area_ratio_sum[a.category.index()] += area(a.box) / image_area;
  }
  if (!img.hidden_truth) {
    for (const Annotation& a : img.annotations) ++t.n_true[a.category.index()];
    return t;
  }
  const auto& hidden = *img.hidden_truth;
  for (const Annotation& a : img.annotations) {
    const bool hit = std::any_of(hidden.begin(), hidden.end(), [&](const Annotation& g) {
      return g.category == a.category && cf_match(a.box, g.box);
    });
    ++(hit ? t.n_true : t.n_false)[a.category.index()];
  }
  for (const Annotation& g : hidden) {
    const bool labeled = std::any_of(
        img.annotations.begin(), img.annotations.end(), [&](const Annotation& a) {
          return a.category == g.category && cf_match(a.box, g.box);
        });
    if (!labeled) ++t.n_missing[g.category.index()];
  }
  return t;
}

}  // namespace

void SyntheticModel::validate() const {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(recall_base) || !finite(recall_gain)) {
    fail(ErrorKind::Config, "synthetic recall parameters must be finite");
  }
  if (!(fp_rate >= 0.0) || !finite(fp_rate) || !(localization_jitter >= 0.0) ||
      !finite(localization_jitter) || !(missing_label_penalty >= 0.0) ||
      !(false_label_penalty >= 0.0)) {
    fail(ErrorKind::Config,
         "synthetic fp_rate, jitter and penalties must be finite and >= 0");
  }
  for (const BetaShape& s : {tp_score_shape, fp_score_shape}) {
    if (!(s.alpha > 0.0 && s.beta > 0.0) || !finite(s.alpha) || !finite(s.beta)) {
      fail(ErrorKind::Config, "Beta score shapes must be positive");
    }
  }
}

SyntheticState fit_synthetic(const SyntheticModel& model,
                             const DatasetSnapshot& train_set, int threads) {
  model.validate();
  std::vector<ImageTally> tallies(train_set.size());
  parallel_for(train_set.size(), threads, [&](std::size_t i) {
    tallies[i] = tally_image(train_set.images()[i]);
  });

  SyntheticState s;
  s.counts = count_by_category(train_set);
  std::array<double, kNumCategories> area_sum{};
  for (const ImageTally& t : tallies) {
    for (std::size_t c = 0; c < kNumCategories; ++c) {
      s.n_true[c] += static_cast<double>(t.n_true[c]);
      s.n_false[c] += static_cast<double>(t.n_false[c]);
      s.n_missing[c] += static_cast<double>(t.n_missing[c]);
      area_sum[c] += t.area_ratio_sum[c];
    }
  }
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    s.n_effective[c] = std::max(0.0, s.n_true[c] -
                                         model.missing_label_penalty * s.n_missing[c] -
                                         model.false_label_penalty * s.n_false[c]);
    s.recall[c] = std::clamp(
        model.recall_base + model.recall_gain * std::log1p(s.n_effective[c]), 0.0,
        1.0);
    s.mean_area_ratio[c] =
        s.counts[c] > 0 ? area_sum[c] / static_cast<double>(s.counts[c]) : 0.0;
  }
  return s;
}

namespace detail {

namespace {

std::vector<Detection> infer_image(const SyntheticModel& m,
                                   const SyntheticState& s,
                                   const std::string& tag,
                                   const ImageRecord& img) {
  std::vector<Detection> out;
  const auto& truth = truth_of(img);
  const double W = img.width;
  const double H = img.height;

  // True positives. The stream of a lesion does not depend on the trained
  // state, so a better-trained model finds a superset of the lesions an
  // earlier one found, with the same boxes and scores.
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const Annotation& g = truth[k];
    Rng rng = Rng::keyed(m.seed, {"tp", img.image_id}, k);
    const double u = rng.uniform();
    const double score = clamp_score(rng.beta(m.tp_score_shape.alpha,
                                              m.tp_score_shape.beta));
    const double zx = rng.normal();
    const double zy = rng.normal();
    const double zw = rng.normal();
    const double zh = rng.normal();
    if (!(u < s.recall[g.category.index()])) continue;
    BBox box = g.box;
    if (m.localization_jitter > 0.0) {
      const double j = m.localization_jitter;
      const double w = g.box.w * std::exp(j * zw / g.box.w);
      const double h = g.box.h * std::exp(j * zh / g.box.h);
      const double cx = g.box.center_x() + j * zx;
      const double cy = g.box.center_y() + j * zy;
      box = BBox{cx - w / 2.0, cy - h / 2.0, w, h};
      if (box.x < 0.0 || box.y < 0.0 || box.right() > W || box.bottom() > H) {
        box = clamp_to(box, W, H);
      }
      if (!box.valid()) continue;
    }
    out.push_back(Detection{img.image_id, box, g.category, score});
  }

  // False positives, placed clear of every true lesion.
  Rng rng = Rng::keyed(m.seed, {"fp", tag, img.image_id});
  const std::uint64_t n = rng.poisson(m.fp_rate);
  double weight_total = 0.0;
  for (auto c : s.counts) weight_total += 1.0 + static_cast<double>(c);
  for (std::uint64_t i = 0; i < n; ++i) {
    double pick = rng.uniform() * weight_total;
    std::size_t c = 0;
    while (c + 1 < kNumCategories) {
      pick -= 1.0 + static_cast<double>(s.counts[c]);
      if (pick < 0.0) break;
      ++c;
    }
    const double mean_ratio =
        s.mean_area_ratio[c] > 0.0 ? s.mean_area_ratio[c] : kFallbackAreaRatio;
    const double ratio =
        mean_ratio * std::exp(kFpLogAreaSigma * rng.normal() -
                              0.5 * kFpLogAreaSigma * kFpLogAreaSigma);
    static constexpr double kAspects[] = {0.5, 1.0, 2.0};
    const double aspect = kAspects[rng.uniform_int(3)];
    const double a = ratio * W * H;
    const double w = std::min(W, std::sqrt(a * aspect));
    const double h = std::min(H, std::sqrt(a / aspect));
    const double score =
        clamp_score(rng.beta(m.fp_score_shape.alpha, m.fp_score_shape.beta));
    for (int attempt = 0; attempt < kFpPlacementAttempts; ++attempt) {
      const BBox box{rng.uniform() * (W - w), rng.uniform() * (H - h), w, h};
      if (!box.valid() || overlaps_any(box, truth)) continue;
      out.push_back(Detection{img.image_id, box,
                              CategoryId::of(static_cast<int>(c) + 1), score});
      break;
    }
  }
  return out;
}

}  // namespace

std::vector<Detection> synthetic_infer(const SyntheticModel& model,
                                       const SyntheticState& state,
                                       const std::string& artifact_tag,
                                       const DatasetSnapshot& images,
                                       int threads) {
  std::vector<std::vector<Detection>> per_image(images.size());
  parallel_for(images.size(), threads, [&](std::size_t i) {
    per_image[i] = infer_image(model, state, artifact_tag, images.images()[i]);
  });
  std::vector<Detection> out;
  std::size_t n = 0;
  for (const auto& v : per_image) n += v.size();
  out.reserve(n);
  for (auto& v : per_image) {
    std::move(v.begin(), v.end(), std::back_inserter(out));
  }
  return out;
}

}  // namespace detail

}  // namespace plabel

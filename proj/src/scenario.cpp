#include "plabel/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "plabel/error.hpp"
#include "plabel/rng.hpp"

namespace plabel {

void ScenarioConfig::validate() const {
  if (train_images < 1 || val_images < 1) {
    fail(ErrorKind::Config, "scenario needs at least one image per split");
  }
  if (image_size < 16) fail(ErrorKind::Config, "scenario image_size must be >= 16");
  if (!(label_fraction > 0.0 && label_fraction <= 1.0)) {
    fail(ErrorKind::Config, "label_fraction must lie in (0, 1]");
  }
  if (!(scale > 0.0)) fail(ErrorKind::Config, "scenario scale must be > 0");
  if (!(log_sigma >= 0.0)) fail(ErrorKind::Config, "log_sigma must be >= 0");
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    if (train_labeled[c] < 0 || val_labeled[c] < 0) {
      fail(ErrorKind::Config, "labeled counts must be >= 0");
    }
    if (!(mean_area_ratio[c] > 0.0 && mean_area_ratio[c] < 0.05)) {
      fail(ErrorKind::Config, "mean_area_ratio must lie in (0, 0.05)");
    }
  }
}

namespace {

constexpr int kPlacementAttempts = 200;

bool intersects(const BBox& a, const BBox& b) {
  return std::min(a.right(), b.right()) > std::max(a.x, b.x) &&
         std::min(a.bottom(), b.bottom()) > std::max(a.y, b.y);
}

DatasetSnapshot make_split(const ScenarioConfig& cfg, const char* prefix,
                           int n_images, const CategoryCounts& labeled_full,
                           Split split) {
  const auto scaled = [&](double v) {
    return static_cast<std::int64_t>(std::llround(v * cfg.scale));
  };
  const int images_n = std::max<int>(1, static_cast<int>(scaled(n_images)));
  std::vector<ImageRecord> images(images_n);
  for (int i = 0; i < images_n; ++i) {
    char id[64];
    std::snprintf(id, sizeof id, "%s-%05d", prefix, i + 1);
    images[i].image_id = id;
    images[i].width = cfg.image_size;
    images[i].height = cfg.image_size;
    images[i].hidden_truth.emplace();
  }

  static constexpr double kAspects[] = {0.5, 1.0, 2.0};
  const double size = cfg.image_size;
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    const std::int64_t labeled = scaled(static_cast<double>(labeled_full[c]));
    const std::int64_t hidden = static_cast<std::int64_t>(
        std::llround(static_cast<double>(labeled) / cfg.label_fraction));
    Rng rng = Rng::keyed(cfg.seed, {"scenario", prefix}, c + 1);

    // Which lesions carry a label: a seeded shuffle, first `labeled` win.
    std::vector<std::int64_t> order(static_cast<std::size_t>(hidden));
    std::iota(order.begin(), order.end(), std::int64_t{0});
    for (std::size_t k = order.size(); k > 1; --k) {
      std::swap(order[k - 1], order[rng.uniform_int(k)]);
    }
    std::vector<bool> is_labeled(order.size(), false);
    for (std::int64_t k = 0; k < labeled; ++k) is_labeled[order[k]] = true;

    const CategoryId category = CategoryId::of(static_cast<int>(c) + 1);
    for (std::int64_t k = 0; k < hidden; ++k) {
      const double ratio =
          cfg.mean_area_ratio[c] *
          std::exp(cfg.log_sigma * rng.normal() - 0.5 * cfg.log_sigma * cfg.log_sigma);
      const double aspect = kAspects[rng.uniform_int(3)];
      const double w = std::min(size / 4, std::sqrt(ratio * aspect) * size);
      const double h = std::min(size / 4, std::sqrt(ratio / aspect) * size);
      bool placed = false;
      for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
        ImageRecord& img = images[rng.uniform_int(images.size())];
        const BBox box{rng.uniform() * (size - w), rng.uniform() * (size - h), w, h};
        bool clear = true;
        for (const Annotation& a : *img.hidden_truth) {
          if (intersects(a.box, box)) {
            clear = false;
            break;
          }
        }
        if (!clear) continue;
        const Annotation lesion = Annotation::manual(box, category);
        img.hidden_truth->push_back(lesion);
        if (is_labeled[k]) img.annotations.push_back(lesion);
        placed = true;
      }
      if (!placed) {
        fail(ErrorKind::Config, "scenario too dense: could not place a lesion");
      }
    }
  }
  return DatasetSnapshot(std::move(images), split, 0);
}

}  // namespace

Scenario generate_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  return Scenario{
      make_split(cfg, "train", cfg.train_images, cfg.train_labeled, Split::Train),
      make_split(cfg, "val", cfg.val_images, cfg.val_labeled, Split::Validation)};
}

}  // namespace plabel

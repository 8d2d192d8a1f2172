#pragma once

#include <array>
#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "plabel/annotations.hpp"
#include "plabel/selection.hpp"

namespace plabel {

struct BetaShape {
  double alpha = 1.0;
  double beta = 1.0;
};

// Seeded stand-in for a trained detector. It sees the hidden ground truth
// and finds each lesion with a per-category recall that grows with the
// amount of useful training signal:
//
//   r_c = clamp(recall_base + recall_gain * log(1 + n_eff_c), 0, 1)
//   n_eff_c = max(0, n_true_c - missing_label_penalty * n_missing_c
//                            - false_label_penalty * n_false_c)
//
// n_true counts training annotations that match a hidden lesion, n_false
// those that match none, and n_missing the hidden lesions left without a
// label. With both penalties at 0 (or no hidden truth) n_eff is just the
// training annotation count.
struct SyntheticModel {
  std::uint64_t seed = 0;
  double recall_base = 0.0;
  double recall_gain = 0.085;
  BetaShape tp_score_shape{4.0, 2.0};
  double fp_rate = 0.77;  // Poisson mean of false positives per image
  BetaShape fp_score_shape{1.0, 6.0};
  double localization_jitter = 2.0;  // pixels, std of center and size noise
  double missing_label_penalty = 0.0;
  double false_label_penalty = 0.0;

  // Throws Error(Config).
  void validate() const;
};

// What a synthetic train call learned from its training set.
struct SyntheticState {
  CategoryCounts counts{};
  std::array<double, kNumCategories> n_true{};
  std::array<double, kNumCategories> n_false{};
  std::array<double, kNumCategories> n_missing{};
  std::array<double, kNumCategories> n_effective{};
  std::array<double, kNumCategories> recall{};
  // Mean box area over image area per category; sizes the false positives.
  std::array<double, kNumCategories> mean_area_ratio{};
};

SyntheticState fit_synthetic(const SyntheticModel& model,
                             const DatasetSnapshot& train_set,
                             int threads = 1);

// Subprocess adapter: `<command...> train --data <dataset.json> --out <dir>`
// and `<command...> infer --data <dataset.json> --out <detections.jsonl>`.
// The child runs in workdir with only the allowlisted environment variables
// plus PLABEL_MODEL_DIR, which names the output directory of the latest
// train call.
struct ExternalSpec {
  std::vector<std::string> command;
  std::filesystem::path workdir;
  std::chrono::milliseconds timeout{std::chrono::hours(24)};
  std::vector<std::string> env_allowlist{"PATH", "HOME", "LANG", "TMPDIR"};
};

enum class DetectorKind { External, Synthetic };

struct DetectorHandle {
  DetectorKind kind = DetectorKind::Synthetic;
  std::optional<SyntheticModel> model;
  std::optional<ExternalSpec> external;
  // Changes on every train call; empty before the first one.
  std::string artifact_tag;
  int generation = 0;
  SyntheticState state;                 // Synthetic only
  std::filesystem::path model_dir;      // External only
  // Serializes subprocesses of one external handle and its copies.
  std::shared_ptr<std::mutex> process_lock = std::make_shared<std::mutex>();

  static DetectorHandle synthetic(const SyntheticModel& model);
  static DetectorHandle external_adapter(const ExternalSpec& spec);

  bool trained() const { return generation > 0; }
};

// Throws Error(Detector) on a failing adapter, Error(Timeout) when it
// exceeds its budget.
DetectorHandle train(const DetectorHandle& handle,
                     const DatasetSnapshot& train_set, int threads = 1);

// Throws Error(Protocol) for a missing or malformed detection file and
// Error(Config) when the handle was never trained.
std::vector<Detection> infer(const DetectorHandle& handle,
                             const DatasetSnapshot& images, int threads = 1);

namespace detail {

std::vector<Detection> synthetic_infer(const SyntheticModel& model,
                                       const SyntheticState& state,
                                       const std::string& artifact_tag,
                                       const DatasetSnapshot& images,
                                       int threads);

struct ProcessResult {
  int exit_status = 0;
  std::string stderr_text;
};

// Runs argv in workdir with the given environment ("KEY=value" entries).
// stdout and stderr go to files next to `log_stem`. Throws Error(Detector)
// when the program cannot be started and Error(Timeout) after killing it.
ProcessResult run_process(const std::vector<std::string>& argv,
                          const std::filesystem::path& workdir,
                          const std::vector<std::string>& env,
                          std::chrono::milliseconds timeout,
                          const std::filesystem::path& log_stem);

}  // namespace detail

}  // namespace plabel

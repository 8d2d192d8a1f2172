#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "plabel/annotations.hpp"
#include "plabel/detector.hpp"
#include "plabel/evaluation.hpp"
#include "plabel/selection.hpp"

namespace plabel {

struct RoundConfig {
  double p_initial = 0.3;
  double p_step = 0.1;
  std::int64_t m_stop = 100;  // stop once a round selects at most this many
  // The last scheduled threshold p_initial + p_step * (max_rounds - 1) must
  // stay below 1, which caps the default schedule at seven rounds.
  int max_rounds = 7;
  SelectionCriterion criterion;  // p_threshold is overwritten per round

  // Evaluate each round's detector on the validation split.
  bool evaluate = false;
  EvalProtocol protocol;
  GroundTruth eval_truth = GroundTruth::Annotations;

  int threads = 1;
  // When set, rounds/<k>/ artifacts are written below this directory as
  // each round completes.
  std::optional<std::filesystem::path> log_dir;
  bool log_hidden = false;  // include hidden_truth in logged datasets

  // Throws Error(Config).
  void validate() const;
  // Threshold of round k (1-based), rounded to 1e-9.
  double p_for_round(int k) const;
};

struct RoundState {
  int round_index = 0;
  double p_used = 0.0;
  std::vector<PseudoLabel> x_selected;
  std::int64_t l_x = 0;
  CategoryCounts x_counts{};
  CategoryCounts dstar_counts{};   // after merging x_selected
  CategoryCounts pseudo_counts{};  // Pseudo part of dstar_counts
  std::string detector_tag;
  std::size_t detections = 0;  // |T|
  std::optional<SensitivityTable> eval_summary;
  // Simulation only: oracle precision of X and of the unfiltered T.
  std::optional<double> x_precision;
  std::optional<double> t_precision;
};

struct RunResult {
  std::vector<RoundState> states;
  DatasetSnapshot final_train;
  DetectorHandle detector;
  bool stopped_by_rule = false;  // false when max_rounds ended the loop
};

using RoundObserver = std::function<void(const RoundState&)>;

// The multi-round loop: D* <- D; repeat { train on D*, infer on the D*
// images, select X at P_k, merge X into D* } until |X| <= m_stop or
// max_rounds. The final small X is merged; no further training follows.
RunResult run_rounds(const DatasetSnapshot& train_set,
                     const DatasetSnapshot& val_set,
                     const DetectorHandle& detector, const RoundConfig& cfg,
                     const RoundObserver& observer = {});

// Appends x to the owning images and bumps round_index. Throws
// Error(Invariant) for a non-Pseudo member, an unknown image, or a member
// overlapping an existing annotation at IoU >= lgt_iou_ceiling.
DatasetSnapshot merge_pseudo(const DatasetSnapshot& snapshot,
                             std::span<const PseudoLabel> x,
                             double lgt_iou_ceiling = 0.05);

std::string round_state_json(const RoundState& state);
std::string pseudo_labels_json(std::span<const PseudoLabel> x);

// Inverses of the two writers above, for rebuilding reports from a round
// directory. Throw Error(Format).
RoundState parse_round_state(std::string_view text,
                             std::string_view source = "<memory>");
std::vector<PseudoLabel> parse_pseudo_labels(std::string_view text,
                                             std::string_view source = "<memory>");

// Writes round_<k>.json per state, summary.md and final_ugt.csv into dir.
// final_ugt.csv holds the pseudo-labels the last trained model saw, i.e.
// the Pseudo counts of D* before the final merge.
void round_report(const std::vector<RoundState>& states,
                  const std::filesystem::path& dir);

}  // namespace plabel

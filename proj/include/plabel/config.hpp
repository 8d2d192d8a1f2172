#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "plabel/detector.hpp"
#include "plabel/orchestrator.hpp"
#include "plabel/scenario.hpp"

namespace plabel {

// Run configuration file (JSON):
//   {seed, threads, p_initial, p_step, m_stop, max_rounds,
//    criterion: {lgt_iou_ceiling, dedup_iou, category_specific},
//    evaluate, protocol: {score_floor, max_dets_per_image, iou_floor,
//                         boundary_inclusive},
//    detector: {kind: "synthetic", synthetic_params: {...}}
//            | {kind: "external", command: [...], workdir, timeout_seconds,
//               env_allowlist: [...]},
//    scenario: {...}, paths: {train, val, out}}
// Every key is optional; unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 1;
  RoundConfig rounds;
  DetectorKind detector_kind = DetectorKind::Synthetic;
  SyntheticModel synthetic;
  ExternalSpec external;
  ScenarioConfig scenario;
  std::optional<std::filesystem::path> train_path;
  std::optional<std::filesystem::path> val_path;
  std::optional<std::filesystem::path> out_path;

  // Copies `seed` into the scenario and synthetic detector.
  void apply_seed(std::uint64_t value);
  void validate() const;
};

// Throws Error(Config) for invalid values or unknown keys and Error(Format)
// for unparseable text.
RunConfig parse_run_config(std::string_view text,
                           std::string_view source = "<memory>");
RunConfig load_run_config(const std::filesystem::path& path);

// Canonical serialization; the manifest digest is taken over this.
std::string run_config_json(const RunConfig& cfg);

}  // namespace plabel

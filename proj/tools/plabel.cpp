// plabel: command-line front end for the pseudo-labeling toolkit.
//
//   plabel ingest   --input F [--format native|coco] [--crop center|L,T,W,H] --out DIR
//   plabel simulate --config F --out DIR
//   plabel round    --config F --train F --val F --out DIR
//   plabel evaluate --detections F --data F [--truth annotations|hidden] --out DIR
//   plabel sweep    --detections F --data F [--p-min --p-max --p-step] --out DIR
//   plabel coverage [--sizes 800:2000:200] [--matcher cf|iou:T] --out DIR
//   plabel report   --rounds DIR --out DIR
//
// Every command writes manifest.json into its output directory. Exit codes:
// 0 ok, 1 I/O, 2 format, 3 detector/protocol, 4 config.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "plabel/anchorlab.hpp"
#include "plabel/annotations.hpp"
#include "plabel/config.hpp"
#include "plabel/digest.hpp"
#include "plabel/error.hpp"
#include "plabel/evaluation.hpp"
#include "plabel/orchestrator.hpp"
#include "plabel/report.hpp"
#include "plabel/scenario.hpp"
#include "plabel/selection.hpp"

namespace fs = std::filesystem;
using plabel::ErrorKind;
using plabel::fail;
using ordered_json = nlohmann::ordered_json;

namespace {

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string out;
  bool include_hidden = false;
};

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& body) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << body;
  if (!out) fail(ErrorKind::Io, "write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), {}};
}

class Manifest {
 public:
  Manifest(std::string command, std::string config_digest)
      : command_(std::move(command)),
        digest_(std::move(config_digest)),
        started_(utc_now()) {}

  void seed(const std::string& name, std::uint64_t value) { seeds_[name] = value; }

  void write(const fs::path& dir) const {
    ordered_json j;
    j["tool_version"] = PLABEL_VERSION;
    j["command"] = command_;
    j["config_digest"] = digest_;
    j["seeds"] = ordered_json::object();
    for (const auto& [k, v] : seeds_) j["seeds"][k] = v;
    j["started_at"] = started_;
    j["finished_at"] = utc_now();
    write_text(dir / "manifest.json", j.dump(1) + "\n");
  }

 private:
  std::string command_;
  std::string digest_;
  std::string started_;
  std::map<std::string, std::uint64_t> seeds_;
};

fs::path require_out(const GlobalOptions& g) {
  if (g.out.empty()) fail(ErrorKind::Config, "--out is required");
  fs::path out(g.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + out.string() + ": " + ec.message());
  return out;
}

plabel::RunConfig run_config(const GlobalOptions& g) {
  plabel::RunConfig cfg =
      g.config.empty() ? plabel::RunConfig{} : plabel::load_run_config(g.config);
  if (g.seed) cfg.apply_seed(*g.seed);
  cfg.rounds.threads = g.threads;
  cfg.validate();
  return cfg;
}

// "lo:hi:step" with integer fields.
std::vector<int> parse_size_grid(const std::string& spec) {
  int lo = 0, hi = 0, step = 0;
  char a = 0, b = 0;
  std::istringstream in(spec);
  if (!(in >> lo >> a >> hi >> b >> step) || a != ':' || b != ':' || step <= 0 ||
      lo <= 0 || hi < lo) {
    fail(ErrorKind::Config, "size grid must look like 800:2000:200");
  }
  std::vector<int> sizes;
  for (int s = lo; s <= hi; s += step) sizes.push_back(s);
  return sizes;
}

plabel::kernels::MatchRule parse_matcher(const std::string& spec) {
  if (spec == "cf") return plabel::cf_rule();
  if (spec.rfind("iou:", 0) == 0) {
    try {
      const double t = std::stod(spec.substr(4));
      if (t > 0.0 && t <= 1.0) return plabel::iou_rule(t);
    } catch (const std::exception&) {
    }
  }
  fail(ErrorKind::Config, "matcher must be 'cf' or 'iou:<threshold>'");
}

plabel::DatasetSnapshot load_native(const std::string& path) {
  return plabel::load_dataset(path, plabel::DatasetFormat::NativeJson).snapshot;
}

void print_summary(const std::vector<plabel::RoundState>& states, bool by_rule) {
  for (const auto& s : states) {
    std::cout << "round " << s.round_index << "  P=" << s.p_used << "  L(X)=" << s.l_x
              << "\n";
  }
  std::cout << (by_rule ? "stopped: L(X) <= M" : "stopped: round cap") << "\n";
}

std::vector<plabel::SensitivityRow> sensitivity_rows(
    const std::vector<plabel::RoundState>& states) {
  std::vector<plabel::SensitivityRow> rows;
  for (const auto& s : states) {
    if (s.eval_summary) {
      rows.push_back(plabel::SensitivityRow::from(
          "round" + std::to_string(s.round_index), *s.eval_summary));
    }
  }
  return rows;
}

void write_round_outputs(const fs::path& out, const plabel::RunResult& result) {
  plabel::round_report(result.states, out / "report");
  const auto rows = sensitivity_rows(result.states);
  if (!rows.empty()) {
    write_text(out / "report" / "sensitivity.csv", plabel::render_sensitivity_csv(rows));
    write_text(out / "report" / "sensitivity.md",
               plabel::render_sensitivity_markdown(rows));
  }
}

// ---- commands ----------------------------------------------------------

struct IngestArgs {
  std::string input;
  std::string format = "native";
  std::string crop = "none";
};

int cmd_ingest(const GlobalOptions& g, const IngestArgs& a) {
  const fs::path out = require_out(g);
  const auto format = a.format == "coco"     ? plabel::DatasetFormat::CocoLikeJson
                      : a.format == "native" ? plabel::DatasetFormat::NativeJson
                                             : (fail(ErrorKind::Config,
                                                     "--format must be native or coco"),
                                                plabel::DatasetFormat::NativeJson);
  Manifest manifest("ingest", plabel::sha256_hex(a.input + "|" + a.format + "|" + a.crop));
  auto loaded = plabel::load_dataset(a.input, format);
  plabel::DatasetSnapshot snapshot = loaded.snapshot;
  ordered_json report = ordered_json::parse(loaded.report.to_json());

  if (a.crop != "none") {
    plabel::CropWindow window;
    if (a.crop == "center") {
      if (snapshot.size() == 0) fail(ErrorKind::Config, "center crop of an empty dataset");
      const auto& first = snapshot.images().front();
      for (const auto& img : snapshot.images()) {
        if (img.width != first.width || img.height != first.height) {
          fail(ErrorKind::Config, "center crop needs images of one size");
        }
      }
      window = plabel::center_square_crop(first.width, first.height);
    } else {
      char c1 = 0, c2 = 0, c3 = 0;
      std::istringstream in(a.crop);
      if (!(in >> window.left >> c1 >> window.top >> c2 >> window.width >> c3 >>
            window.height) ||
          c1 != ',' || c2 != ',' || c3 != ',') {
        fail(ErrorKind::Config, "--crop must be none, center or L,T,W,H");
      }
    }
    auto cropped = plabel::apply_crop_transform(snapshot, window);
    snapshot = cropped.snapshot;
    report["crop"] = {{"left", window.left},
                      {"top", window.top},
                      {"width", window.width},
                      {"height", window.height},
                      {"dropped", cropped.dropped},
                      {"clamped", cropped.clamped}};
  }
  plabel::save_dataset(snapshot, out / "dataset.json",
                       plabel::SaveOptions{g.include_hidden});
  write_text(out / "load_report.json", report.dump(1) + "\n");
  manifest.write(out);
  std::cout << report.dump() << "\n";
  return 0;
}

int cmd_simulate(const GlobalOptions& g) {
  const fs::path out = require_out(g);
  plabel::RunConfig cfg = run_config(g);
  if (cfg.detector_kind != plabel::DetectorKind::Synthetic) {
    fail(ErrorKind::Config, "simulate needs the synthetic detector");
  }
  const std::string canonical = plabel::run_config_json(cfg);
  Manifest manifest("simulate", plabel::sha256_hex(canonical));
  manifest.seed("scenario", cfg.scenario.seed);
  manifest.seed("detector", cfg.synthetic.seed);
  write_text(out / "config.json", canonical);

  const auto scenario = plabel::generate_scenario(cfg.scenario);
  const plabel::SaveOptions save{g.include_hidden};
  plabel::save_dataset(scenario.train, out / "train.json", save);
  plabel::save_dataset(scenario.val, out / "val.json", save);

  plabel::RoundConfig rounds = cfg.rounds;
  rounds.log_dir = out;
  rounds.log_hidden = g.include_hidden;
  const auto result = plabel::run_rounds(scenario.train, scenario.val,
                                         plabel::DetectorHandle::synthetic(cfg.synthetic),
                                         rounds);
  write_round_outputs(out, result);
  manifest.write(out);
  print_summary(result.states, result.stopped_by_rule);
  return 0;
}

struct RoundArgs {
  std::string train;
  std::string val;
};

int cmd_round(const GlobalOptions& g, const RoundArgs& a) {
  const fs::path out = require_out(g);
  plabel::RunConfig cfg = run_config(g);
  const std::string train_path =
      !a.train.empty() ? a.train : (cfg.train_path ? cfg.train_path->string() : "");
  const std::string val_path =
      !a.val.empty() ? a.val : (cfg.val_path ? cfg.val_path->string() : "");
  if (train_path.empty() || val_path.empty()) {
    fail(ErrorKind::Config, "round needs --train and --val (or paths in the config)");
  }
  Manifest manifest("round", plabel::sha256_hex(plabel::run_config_json(cfg)));
  manifest.seed("detector", cfg.synthetic.seed);

  const auto train = load_native(train_path).with_split(plabel::Split::Train);
  const auto val = load_native(val_path).with_split(plabel::Split::Validation);
  plabel::DetectorHandle handle;
  if (cfg.detector_kind == plabel::DetectorKind::External) {
    plabel::ExternalSpec spec = cfg.external;
    if (spec.workdir.empty()) spec.workdir = out / "detector";
    handle = plabel::DetectorHandle::external_adapter(spec);
  } else {
    handle = plabel::DetectorHandle::synthetic(cfg.synthetic);
  }
  plabel::RoundConfig rounds = cfg.rounds;
  rounds.log_dir = out;
  rounds.log_hidden = g.include_hidden;
  const auto result = plabel::run_rounds(train, val, handle, rounds);
  write_round_outputs(out, result);
  manifest.write(out);
  print_summary(result.states, result.stopped_by_rule);
  return 0;
}

struct EvalArgs {
  std::string detections;
  std::string data;
  std::string truth = "annotations";
};

int cmd_evaluate(const GlobalOptions& g, const EvalArgs& a) {
  const fs::path out = require_out(g);
  plabel::RunConfig cfg = run_config(g);
  Manifest manifest("evaluate",
                    plabel::sha256_hex(plabel::run_config_json(cfg) + a.detections + "|" +
                                       a.data + "|" + a.truth));
  const auto truth = a.truth == "hidden"        ? plabel::GroundTruth::HiddenTruth
                     : a.truth == "annotations" ? plabel::GroundTruth::Annotations
                                                : (fail(ErrorKind::Config,
                                                        "--truth must be annotations or hidden"),
                                                   plabel::GroundTruth::Annotations);
  const auto data = load_native(a.data);
  const auto dets = plabel::read_detections(a.detections);
  const auto table =
      plabel::sensitivity(dets, data, cfg.rounds.protocol, truth, cfg.rounds.threads);

  ordered_json j = ordered_json::array();
  for (std::size_t c = 0; c < plabel::kNumCategories; ++c) {
    const auto& r = table.per_category[c];
    j.push_back({{"category", static_cast<int>(c) + 1},
                 {"tp", r.tp},
                 {"fn", r.fn},
                 {"sensitivity", r.sensitivity ? ordered_json(*r.sensitivity)
                                               : ordered_json(nullptr)}});
  }
  const std::vector<plabel::SensitivityRow> rows{
      plabel::SensitivityRow::from("detector", table)};
  write_text(out / "sensitivity.json", j.dump(1) + "\n");
  write_text(out / "sensitivity.csv", plabel::render_sensitivity_csv(rows));
  write_text(out / "sensitivity.md", plabel::render_sensitivity_markdown(rows));
  manifest.write(out);
  std::cout << plabel::render_sensitivity_csv(rows);
  return 0;
}

struct SweepArgs {
  std::string detections;
  std::string data;
  double p_min = 0.0;
  double p_max = 0.9;
  double p_step = 0.1;
};

int cmd_sweep(const GlobalOptions& g, const SweepArgs& a) {
  const fs::path out = require_out(g);
  plabel::RunConfig cfg = run_config(g);
  if (!(a.p_step > 0.0) || a.p_min < 0.0 || a.p_max >= 1.0 || a.p_max < a.p_min) {
    fail(ErrorKind::Config, "sweep grid needs 0 <= p-min <= p-max < 1 and p-step > 0");
  }
  Manifest manifest("sweep", plabel::sha256_hex(plabel::run_config_json(cfg) +
                                                a.detections + "|" + a.data));
  std::vector<double> grid;
  const int n = static_cast<int>(std::floor((a.p_max - a.p_min) / a.p_step + 1e-9)) + 1;
  for (int i = 0; i < n; ++i) {
    grid.push_back(std::round((a.p_min + a.p_step * i) * 1e9) / 1e9);
  }
  const auto data = load_native(a.data);
  const auto dets = plabel::read_detections(a.detections);
  const auto table = plabel::sweep_thresholds(dets, data, grid, cfg.rounds.criterion,
                                              cfg.rounds.threads);
  const std::string csv = plabel::render_sweep_csv(table);
  write_text(out / "sweep.csv", csv);
  manifest.write(out);
  std::cout << csv;
  return 0;
}

struct CoverageArgs {
  std::string sizes = "800:2000:200";
  std::string matcher = "iou:0.5";
  std::vector<std::int64_t> counts{14720, 6301, 7403, 537};
  double log_sigma = 0.5;
};

int cmd_coverage(const GlobalOptions& g, const CoverageArgs& a) {
  const fs::path out = require_out(g);
  const std::uint64_t seed = g.seed.value_or(1);
  if (a.counts.size() != plabel::kNumCategories) {
    fail(ErrorKind::Config, "--counts needs four values");
  }
  plabel::CategoryCounts counts{};
  std::copy(a.counts.begin(), a.counts.end(), counts.begin());
  Manifest manifest("coverage", plabel::sha256_hex(a.sizes + "|" + a.matcher + "|" +
                                                   std::to_string(a.log_sigma)));
  manifest.seed("population", seed);
  const auto rule = parse_matcher(a.matcher);
  std::vector<plabel::CoverageRow> rows;
  for (const auto& fpn : {plabel::FpnConfig::standard(), plabel::FpnConfig::deeper()}) {
    for (std::size_t c = 0; c < plabel::kNumCategories; ++c) {
      for (int size : parse_size_grid(a.sizes)) {
        if (counts[c] == 0) continue;
        plabel::CategoryCounts only{};
        only[c] = counts[c];
        const auto pop = plabel::lesion_population(only, size, seed, a.log_sigma);
        std::vector<plabel::BBox> boxes;
        for (const auto& s : pop) boxes.push_back(s.box);
        rows.push_back({size, fpn.name, static_cast<int>(c) + 1, plabel::matcher_name(rule),
                        plabel::coverage(boxes, size, fpn, plabel::AnchorConfig{}, rule,
                                         g.threads)});
      }
    }
  }
  const std::string csv = plabel::render_coverage_csv(rows);
  write_text(out / "coverage.csv", csv);
  manifest.write(out);
  std::cout << csv;
  return 0;
}

int cmd_report(const GlobalOptions& g, const std::string& rounds_dir) {
  const fs::path out = require_out(g);
  Manifest manifest("report", plabel::sha256_hex(rounds_dir));
  std::vector<std::pair<int, fs::path>> dirs;
  const fs::path root = fs::path(rounds_dir) / "rounds";
  if (!fs::is_directory(root)) fail(ErrorKind::Io, "no rounds directory under " + rounds_dir);
  for (const auto& entry : fs::directory_iterator(root)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_directory() && !name.empty() &&
        std::all_of(name.begin(), name.end(), ::isdigit)) {
      dirs.emplace_back(std::stoi(name), entry.path());
    }
  }
  if (dirs.empty()) fail(ErrorKind::Format, "no round directories under " + root.string());
  std::sort(dirs.begin(), dirs.end());
  std::vector<plabel::RoundState> states;
  for (const auto& [k, dir] : dirs) {
    auto s = plabel::parse_round_state(read_text(dir / "state.json"),
                                       (dir / "state.json").string());
    if (fs::exists(dir / "x_selected.json")) {
      s.x_selected = plabel::parse_pseudo_labels(read_text(dir / "x_selected.json"),
                                                 (dir / "x_selected.json").string());
    }
    states.push_back(std::move(s));
  }
  plabel::round_report(states, out);
  const auto rows = sensitivity_rows(states);
  if (!rows.empty()) {
    write_text(out / "sensitivity.csv", plabel::render_sensitivity_csv(rows));
    write_text(out / "sensitivity.md", plabel::render_sensitivity_markdown(rows));
  }
  manifest.write(out);
  std::cout << plabel::render_rounds_markdown(states);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Iterative pseudo-labeling toolkit for partially labeled detection data"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(PLABEL_VERSION));

  GlobalOptions g;
  app.add_option("--config", g.config, "Run configuration (JSON)");
  app.add_option("--seed", g.seed, "Seed for every random stream");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::Range(1, 1024));
  app.add_option("--out", g.out, "Output directory");
  app.add_flag("--include-hidden", g.include_hidden,
               "Keep hidden ground truth in written datasets");

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Load, validate and convert a dataset");
  c_ingest->add_option("--input", ingest.input)->required();
  c_ingest->add_option("--format", ingest.format)->check(CLI::IsMember({"native", "coco"}));
  c_ingest->add_option("--crop", ingest.crop, "none, center or L,T,W,H");

  app.add_subcommand("simulate", "Synthesize a dataset and run the rounds");

  RoundArgs round;
  auto* c_round = app.add_subcommand("round", "Run the rounds on existing datasets");
  c_round->add_option("--train", round.train);
  c_round->add_option("--val", round.val);

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("evaluate", "Per-category sensitivity");
  c_eval->add_option("--detections", eval.detections)->required();
  c_eval->add_option("--data", eval.data)->required();
  c_eval->add_option("--truth", eval.truth)->check(CLI::IsMember({"annotations", "hidden"}));

  SweepArgs sweep;
  auto* c_sweep = app.add_subcommand("sweep", "Pseudo-label counts over a threshold grid");
  c_sweep->add_option("--detections", sweep.detections)->required();
  c_sweep->add_option("--data", sweep.data)->required();
  c_sweep->add_option("--p-min", sweep.p_min);
  c_sweep->add_option("--p-max", sweep.p_max);
  c_sweep->add_option("--p-step", sweep.p_step);

  CoverageArgs cov;
  auto* c_cov = app.add_subcommand("coverage", "Anchor coverage of sampled lesions");
  c_cov->add_option("--sizes", cov.sizes, "lo:hi:step");
  c_cov->add_option("--matcher", cov.matcher, "cf or iou:<threshold>");
  c_cov->add_option("--counts", cov.counts, "Lesions per category")->expected(4);
  c_cov->add_option("--sigma", cov.log_sigma, "Spread of log lesion area");

  std::string rounds_dir;
  auto* c_report = app.add_subcommand("report", "Rebuild reports from a round directory");
  c_report->add_option("--rounds", rounds_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : plabel::exit_code(ErrorKind::Config);
  }

  try {
    if (*c_ingest) return cmd_ingest(g, ingest);
    if (app.got_subcommand("simulate")) return cmd_simulate(g);
    if (*c_round) return cmd_round(g, round);
    if (*c_eval) return cmd_evaluate(g, eval);
    if (*c_sweep) return cmd_sweep(g, sweep);
    if (*c_cov) return cmd_coverage(g, cov);
    if (*c_report) return cmd_report(g, rounds_dir);
  } catch (const plabel::Error& e) {
    std::cerr << "plabel: " << plabel::to_string(e.kind()) << " error: " << e.what()
              << "\n";
    return plabel::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "plabel: " << e.what() << "\n";
    return plabel::exit_code(ErrorKind::Io);
  }
  return 0;
}

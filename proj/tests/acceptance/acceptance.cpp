// Acceptance run: one PASS/FAIL line per criterion AC1..AC11.
//
//   plabel_acceptance [--only AC5] [--expect-fail AC8 ...]
//
// Exit status is 0 when the set of failing criteria equals the --expect-fail
// set (empty by default), 1 otherwise. Tolerances and runtime budgets are
// the constants next to each check.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <CLI11.hpp>

#include "plabel/anchorlab.hpp"
#include "plabel/config.hpp"
#include "plabel/evaluation.hpp"
#include "plabel/geometry.hpp"
#include "plabel/orchestrator.hpp"
#include "plabel/report.hpp"
#include "plabel/scenario.hpp"
#include "plabel/selection.hpp"
#include "support/builders.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace plabel;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string id;
  double budget_seconds;
  std::function<Outcome()> run;
};

int worker_threads() {
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---- AC1 ---------------------------------------------------------------

constexpr double kAc1Tolerance = 1e-6;

double raster_iou(const BBox& a, const BBox& b) {
  const int x0 = static_cast<int>(std::min(a.x, b.x));
  const int y0 = static_cast<int>(std::min(a.y, b.y));
  const int x1 = static_cast<int>(std::max(a.right(), b.right()));
  const int y1 = static_cast<int>(std::max(a.bottom(), b.bottom()));
  long inter = 0, uni = 0;
  for (int py = y0; py < y1; ++py) {
    for (int px = x0; px < x1; ++px) {
      const bool in_a = px >= a.x && px < a.right() && py >= a.y && py < a.bottom();
      const bool in_b = px >= b.x && px < b.right() && py >= b.y && py < b.bottom();
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  }
  return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

BBox integer_box(std::mt19937_64& g) {
  std::uniform_int_distribution<int> c(0, 512);
  int xa = c(g), xb = c(g), ya = c(g), yb = c(g);
  while (xa == xb) xb = c(g);
  while (ya == yb) yb = c(g);
  return {double(std::min(xa, xb)), double(std::min(ya, yb)), double(std::abs(xa - xb)),
          double(std::abs(ya - yb))};
}

Outcome ac1() {
  std::mt19937_64 g(1);
  double worst = 0.0;
  int overlapping = 0;
  for (int i = 0; i < 1000; ++i) {
    const BBox a = integer_box(g), b = integer_box(g);
    const double analytic = iou(a, b);
    worst = std::max(worst, std::abs(analytic - raster_iou(a, b)));
    overlapping += analytic > 0.0;
  }
  return {worst <= kAc1Tolerance, "1000 pairs, " + std::to_string(overlapping) +
                                      " overlapping, max |diff| " + fmt("%.3g", worst)};
}

// ---- AC2 ---------------------------------------------------------------

Outcome ac2() {
  const BBox gt{0, 0, 10, 10};
  const bool ex1 = cf_match(gt, gt);
  const bool ex2 = !cf_match({6, 0, 10, 10}, gt) && iou({6, 0, 10, 10}, gt) == 0.25;
  const bool ex3 = cf_match({5, 5, 10, 10}, gt) && std::abs(iou({5, 5, 10, 10}, gt) - 1.0 / 7) < 1e-12;
  std::mt19937_64 g(2);
  std::uniform_real_distribution<double> pos(0.0, 100.0), len(0.5, 40.0);
  int matches = 0, violations = 0;
  for (int i = 0; i < 10000; ++i) {
    const BBox p{pos(g), pos(g), len(g), len(g)};
    const BBox q = i % 2 ? BBox{p.x + (pos(g) - 50) / 5, p.y + (pos(g) - 50) / 5, len(g), len(g)}
                         : BBox{pos(g), pos(g), len(g), len(g)};
    if (cf_match(p, q)) {
      ++matches;
      if (!(iou(p, q) > 0.1)) ++violations;
    }
  }
  return {ex1 && ex2 && ex3 && violations == 0,
          std::string("examples ") + (ex1 ? "T" : "F") + (ex2 ? "T" : "F") + (ex3 ? "T" : "F") +
              ", " + std::to_string(matches) + "/10000 random pairs match, " +
              std::to_string(violations) + " violate IoU > 0.1"};
}

// ---- AC3 ---------------------------------------------------------------

constexpr std::size_t kAc3MinDetections = 5000;

Outcome ac3() {
  ScenarioConfig sc;
  sc.seed = 3;
  sc.scale = 0.25;
  const Scenario s = generate_scenario(sc);
  SyntheticModel m;
  m.seed = 3;
  const auto h = train(DetectorHandle::synthetic(m), s.train, worker_threads());
  const auto dets = infer(h, s.train, worker_threads());

  using Key = std::tuple<std::string, double, double, double, double, int>;
  std::vector<std::set<Key>> sets;
  std::vector<CategoryCounts> counts;
  for (int i = 0; i <= 9; ++i) {
    SelectionCriterion crit;
    crit.p_threshold = i / 10.0;
    const auto x = select_ugt(dets, s.train, crit, 1, worker_threads());
    std::set<Key> keys;
    for (const auto& p : x) {
      const auto& b = p.annotation.box;
      keys.insert({p.image_id, b.x, b.y, b.w, b.h, p.annotation.category.value()});
    }
    sets.push_back(std::move(keys));
    counts.push_back(count_by_category(x));
  }
  bool contained = true, monotone = true;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    for (std::size_t j = i + 1; j < sets.size(); ++j) {
      contained = contained && std::includes(sets[i].begin(), sets[i].end(), sets[j].begin(),
                                             sets[j].end());
    }
    if (i > 0) {
      for (std::size_t c = 0; c < kNumCategories; ++c) {
        monotone = monotone && counts[i][c] <= counts[i - 1][c];
      }
    }
  }
  std::ostringstream d;
  d << dets.size() << " detections; |X| at P=0.0.." << "0.9: ";
  for (const auto& c : counts) d << total(c) << " ";
  d << "; containment " << (contained ? "holds" : "BROKEN") << ", counts "
    << (monotone ? "non-increasing" : "NOT monotone");
  return {dets.size() >= kAc3MinDetections && contained && monotone, d.str()};
}

// ---- AC4 ---------------------------------------------------------------

// One or two images, at most 20 detections and 10 existing labels in total,
// detections clustered around labels so every clause fires.
Outcome ac4() {
  int mismatches = 0;
  std::size_t accepted = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    std::mt19937_64 g(1000 + seed);
    std::uniform_real_distribution<double> pos(0.0, 110.0), len(3.0, 16.0), score(0.01, 0.99),
        jitter(-5.0, 5.0);
    std::uniform_int_distribution<int> cat(1, 4), n_labels(0, 5), n_dets(0, 10);
    std::vector<ImageRecord> images;
    std::vector<Detection> dets;
    for (int i = 0; i < 2; ++i) {
      ImageRecord r = testing::image("m" + std::to_string(i), 128, 128);
      const int nl = n_labels(g);
      for (int k = 0; k < nl; ++k) {
        const Annotation a = k % 2 ? testing::pseudo(pos(g), pos(g), len(g), len(g), cat(g),
                                                     score(g))
                                   : testing::manual(pos(g), pos(g), len(g), len(g), cat(g));
        bool clash = false;  // keep the snapshot invariant
        for (const auto& b : r.annotations) {
          clash = clash || (a.category == b.category && a.origin != b.origin &&
                            iou(a.box, b.box) >= 0.05);
        }
        if (!clash) r.annotations.push_back(a);
      }
      std::vector<BBox> anchors;
      for (const auto& a : r.annotations) anchors.push_back(a.box);
      anchors.push_back({pos(g), pos(g), len(g), len(g)});
      const int nd = n_dets(g);
      for (int k = 0; k < nd; ++k) {
        const BBox& a = anchors[g() % anchors.size()];
        dets.push_back(testing::det(r.image_id, std::clamp(a.x + jitter(g), 0.0, 110.0),
                                    std::clamp(a.y + jitter(g), 0.0, 110.0), a.w, a.h, cat(g),
                                    score(g)));
      }
      images.push_back(std::move(r));
    }
    const DatasetSnapshot snap(std::move(images));
    SelectionCriterion crit;
    crit.p_threshold = (seed % 5) / 10.0;
    const auto got = select_ugt(dets, snap, crit);
    accepted += got.size();
    if (got != oracle::select(dets, snap, crit, 1)) ++mismatches;
  }
  return {mismatches == 0, "200 instances, " + std::to_string(accepted) + " accepted in total, " +
                               std::to_string(mismatches) + " mismatches"};
}

// ---- AC5 / AC7: shared reference-scenario runs ------------------------------

constexpr int kSeeds = 10;
constexpr int kMinRounds = 2;
constexpr int kMaxRounds = 6;

RunConfig reference_config() {
  return load_run_config(fs::path(PLABEL_SOURCE_DIR) / "configs" / "reference_scenario.json");
}

struct ReferenceRun {
  std::uint64_t seed;
  RunResult result;
};

const std::vector<ReferenceRun>& reference_runs() {
  static const std::vector<ReferenceRun> runs = [] {
    std::vector<ReferenceRun> out;
    for (int seed = 1; seed <= kSeeds; ++seed) {
      RunConfig cfg = reference_config();
      cfg.apply_seed(seed);
      cfg.rounds.threads = worker_threads();
      const Scenario s = generate_scenario(cfg.scenario);
      out.push_back({static_cast<std::uint64_t>(seed),
                     run_rounds(s.train, s.val, DetectorHandle::synthetic(cfg.synthetic),
                                cfg.rounds)});
    }
    return out;
  }();
  return runs;
}

Outcome ac5() {
  bool ok = true;
  std::ostringstream d;
  d << "rounds per seed:";
  for (const auto& r : reference_runs()) {
    const int k = static_cast<int>(r.result.states.size());
    d << " " << k << (r.result.stopped_by_rule ? "" : "(cap)");
    ok = ok && r.result.stopped_by_rule && k >= kMinRounds && k <= kMaxRounds;
  }
  return {ok, d.str()};
}

Outcome ac7() {
  int bad_seeds = 0;
  std::ostringstream d;
  for (const auto& r : reference_runs()) {
    bool ok = true;
    const auto& st = r.result.states;
    for (std::size_t k = 1; k < st.size(); ++k) {
      for (std::size_t c = 0; c < kNumCategories; ++c) {
        ok = ok && st[k].eval_summary->per_category[c].sensitivity.value_or(0) >=
                       st[k - 1].eval_summary->per_category[c].sensitivity.value_or(0);
      }
    }
    if (!ok) {
      ++bad_seeds;
      d << " seed " << r.seed << " decreases;";
    }
  }
  const auto& first = reference_runs().front().result.states;
  d << " seed 1 cat1:";
  for (const auto& s : first) d << " " << format_percent(s.eval_summary->per_category[0].sensitivity);
  return {bad_seeds == 0, std::to_string(kSeeds - bad_seeds) + "/" + std::to_string(kSeeds) +
                              " seeds non-decreasing;" + d.str()};
}

// ---- AC6 ---------------------------------------------------------------

constexpr int kAc6Seeds = 5;
constexpr int kAc6MinCategories = 3;

Outcome ac6() {
  int ok_seeds = 0;
  std::ostringstream d;
  for (int seed = 1; seed <= kAc6Seeds; ++seed) {
    RunConfig cfg = reference_config();
    cfg.apply_seed(seed);
    const Scenario s = generate_scenario(cfg.scenario);
    std::map<double, RunResult> by_p;
    for (double p : {0.0, 0.3, 0.9}) {
      RoundConfig rc = cfg.rounds;
      rc.p_initial = p;
      rc.p_step = 0.0;
      rc.max_rounds = 2;
      rc.m_stop = 0;  // run the second round unless X is empty
      rc.threads = worker_threads();
      by_p.emplace(p, run_rounds(s.train, s.val, DetectorHandle::synthetic(cfg.synthetic), rc));
    }
    for (const auto& [p, r] : by_p) {
      if (r.states.size() < 2) return {false, "no second round at P=" + fmt("%.1f", p)};
    }
    const double prec0 = by_p.at(0.0).states[0].x_precision.value_or(0);
    const double prec3 = by_p.at(0.3).states[0].x_precision.value_or(0);
    int categories = 0;
    for (std::size_t c = 0; c < kNumCategories; ++c) {
      const auto sens = [&](double p) {
        return by_p.at(p).states[1].eval_summary->per_category[c].sensitivity.value_or(0);
      };
      categories += sens(0.3) >= sens(0.0) && sens(0.3) >= sens(0.9);
    }
    const bool ok = prec3 > prec0 && categories >= kAc6MinCategories;
    ok_seeds += ok;
    d << " seed " << seed << ": prec " << fmt("%.3f", prec3) << " vs " << fmt("%.3f", prec0)
      << ", " << categories << "/4 categories;";
  }
  return {ok_seeds == kAc6Seeds, std::to_string(ok_seeds) + "/" + std::to_string(kAc6Seeds) +
                                     " seeds hold;" + d.str()};
}

// ---- AC8 ---------------------------------------------------------------

constexpr std::uint64_t kAc8Seed = 7;
constexpr double kAc8LogSigma = 0.5;

Outcome ac8() {
  const CategoryCounts counts{14720, 6301, 7403, 537};
  const auto rule = iou_rule(0.5);
  std::vector<int> sizes;
  for (int s = 800; s <= 2000; s += 200) sizes.push_back(s);
  sizes.push_back(2136);

  // Windowed enumeration spot-checked against the full anchor scan.
  {
    const auto pop = lesion_population({100, 100, 100, 100}, 800, kAc8Seed, kAc8LogSigma);
    std::vector<BBox> boxes;
    for (const auto& p : pop) boxes.push_back(p.box);
    for (const auto& fpn : {FpnConfig::standard(), FpnConfig::deeper()}) {
      if (coverage(boxes, 800, fpn, {}, rule) != coverage_bruteforce(boxes, 800, fpn, {}, rule)) {
        return {false, "windowed coverage disagrees with the full anchor scan"};
      }
    }
  }

  // cov[pyramid][category][size index]
  std::map<std::string, std::array<std::vector<double>, kNumCategories>> cov;
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    for (int size : sizes) {
      CategoryCounts only{};
      only[c] = counts[c];
      std::vector<BBox> boxes;
      for (const auto& p : lesion_population(only, size, kAc8Seed, kAc8LogSigma)) {
        boxes.push_back(p.box);
      }
      for (const auto& fpn : {FpnConfig::standard(), FpnConfig::deeper()}) {
        cov[fpn.name][c].push_back(coverage(boxes, size, fpn, {}, rule, worker_threads()));
      }
    }
  }
  bool size_monotone = true, deeper_ge = true, strict = true;
  std::ostringstream d;
  for (const auto& [name, per_cat] : cov) {
    for (std::size_t c = 0; c < kNumCategories; ++c) {
      for (std::size_t i = 1; i + 1 < sizes.size(); ++i) {  // 800..2000
        size_monotone = size_monotone && per_cat[c][i] >= per_cat[c][i - 1];
      }
    }
  }
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      deeper_ge = deeper_ge && cov["deeper"][c][i] >= cov["standard"][c][i];
    }
  }
  const std::size_t last = sizes.size() - 1;
  for (std::size_t c = 0; c < 2; ++c) {
    strict = strict && cov["deeper"][c][last] > cov["standard"][c][last];
    d << "cat" << c + 1 << "@2136 standard " << fmt("%.5f", cov["standard"][c][last])
      << " deeper " << fmt("%.5f", cov["deeper"][c][last]) << "; ";
  }
  d << "standard cat1 800..2000:";
  for (std::size_t i = 0; i < last; ++i) d << " " << fmt("%.5f", cov["standard"][0][i]);
  d << "; (a) size-monotone " << (size_monotone ? "yes" : "NO") << ", (b) deeper>=standard "
    << (deeper_ge ? "yes" : "NO") << ", strict cat1-2@2136 " << (strict ? "yes" : "NO");
  return {size_monotone && deeper_ge && strict, d.str()};
}

// ---- AC9 ---------------------------------------------------------------

Outcome ac9() {
  int discrepancies = 0, tp = 0;
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    const auto mc = oracle::micro_case(90000 + seed);
    const auto m = match_image(mc.detections, mc.gts);
    const int best = oracle::max_matching(
        mc.detections.size(), mc.gts.size(), [&](std::size_t d, std::size_t g) {
          return mc.detections[d].score > 0.1 &&
                 mc.detections[d].category == mc.gts[g].category &&
                 oracle::cf(mc.detections[d].box, mc.gts[g].box);
        });
    tp += static_cast<int>(m.matches.size());
    if (static_cast<int>(m.matches.size()) != best) ++discrepancies;
  }
  return {discrepancies == 0, "500 cases, " + std::to_string(tp) + " matches, " +
                                  std::to_string(discrepancies) + " greedy-suboptimal"};
}

// ---- AC10 --------------------------------------------------------------

Outcome ac10() {
  const std::string sweep = render_sweep_csv({{0.3}, {{805, 431, 490, 303}}});
  const std::string ugt = render_ugt_csv({{"F", {1043, 632, 612, 417}}});
  const bool a = sweep == "P,cat1,cat2,cat3,cat4\n0.3,805,431,490,303\n";
  const bool b = ugt == "model,cat1,cat2,cat3,cat4\nF,1043,632,612,417\n";
  return {a && b, std::string("sweep row ") + (a ? "exact" : "DIFFERS") + ", final UGT row " +
                      (b ? "exact" : "DIFFERS")};
}

// ---- AC11 --------------------------------------------------------------

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PLABEL_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Relative path -> bytes, for every file below dir/rounds.
std::map<std::string, std::string> round_files(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir / "rounds")) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = testing::slurp(e.path());
  }
  return out;
}

Outcome ac11() {
  testing::TempDir tmp;
  const std::string cfg = (fs::path(PLABEL_SOURCE_DIR) / "configs" / "reference_scenario.json").string();
  const std::vector<std::pair<std::string, std::string>> runs{
      {"a", "--threads 1"}, {"b", "--threads 1"}, {"c", "--threads 8"}};
  for (const auto& [name, flags] : runs) {
    const int code = run_cli("simulate --config " + cfg + " " + flags + " --out " +
                             (tmp.path() / name).string());
    if (code != 0) return {false, "simulate exited with " + std::to_string(code)};
  }
  const auto a = round_files(tmp.path() / "a");
  int states = 0;
  for (const auto& [rel, _] : a) states += fs::path(rel).filename() == "state.json";
  const bool rerun = a == round_files(tmp.path() / "b");
  const bool threads = a == round_files(tmp.path() / "c");
  return {states > 0 && rerun && threads,
          std::to_string(states) + " state files; rerun " + (rerun ? "identical" : "DIFFERS") +
              ", threads 1 vs 8 " + (threads ? "identical" : "DIFFERS")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<std::string> only, expect_fail;
  app.add_option("--only", only, "Run just these criteria");
  app.add_option("--expect-fail", expect_fail, "Criteria known to fail");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {"AC1", 5, ac1},   {"AC2", 5, ac2},    {"AC3", 10, ac3},  {"AC4", 10, ac4},
      {"AC5", 120, ac5}, {"AC6", 180, ac6},  {"AC7", 180, ac7}, {"AC8", 120, ac8},
      {"AC9", 10, ac9},  {"AC10", 1, ac10},  {"AC11", 240, ac11}};

  std::set<std::string> failed;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.budget_seconds) {
      o.pass = false;
      o.detail += "; over the " + fmt("%.0f", c.budget_seconds) + " s budget";
    }
    if (!o.pass) failed.insert(c.id);
    std::cout << c.id << " " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << "  ["
              << fmt("%.2f", secs) << " s]" << std::endl;
  }

  const std::set<std::string> expected(expect_fail.begin(), expect_fail.end());
  std::set<std::string> expected_run;
  for (const auto& id : expected) {
    if (only.empty() || std::find(only.begin(), only.end(), id) != only.end()) {
      expected_run.insert(id);
    }
  }
  if (failed == expected_run) {
    if (!failed.empty()) {
      std::cout << "known failures only:";
      for (const auto& id : failed) std::cout << " " << id;
      std::cout << "\n";
    }
    return 0;
  }
  std::cout << "unexpected result: failed {";
  for (const auto& id : failed) std::cout << " " << id;
  std::cout << " } expected {";
  for (const auto& id : expected_run) std::cout << " " << id;
  std::cout << " }\n";
  return 1;
}

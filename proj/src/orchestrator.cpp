#include "plabel/orchestrator.hpp"

#include <cmath>

#include "json_util.hpp"
#include "plabel/error.hpp"
#include "plabel/kernels.hpp"
#include "plabel/report.hpp"

namespace plabel {

void RoundConfig::validate() const {
  if (!std::isfinite(p_initial) || !std::isfinite(p_step)) {
    fail(ErrorKind::Config, "P schedule must be finite");
  }
  if (max_rounds < 1) fail(ErrorKind::Config, "max_rounds must be >= 1");
  if (m_stop < 0) fail(ErrorKind::Config, "m_stop must be >= 0");
  if (!(p_initial >= 0.0) || !(p_step >= 0.0)) {
    fail(ErrorKind::Config, "p_initial and p_step must be >= 0");
  }
  if (!(p_for_round(max_rounds) < 1.0)) {
    fail(ErrorKind::Config, "P schedule reaches " +
                                std::to_string(p_for_round(max_rounds)) +
                                " by round " + std::to_string(max_rounds) +
                                "; it must stay below 1");
  }
  if (threads < 1) fail(ErrorKind::Config, "threads must be >= 1");
  criterion.validate();
  if (evaluate) protocol.validate();
}

double RoundConfig::p_for_round(int k) const {
  const double p = p_initial + p_step * static_cast<double>(k - 1);
  return std::round(p * 1e9) / 1e9;
}

DatasetSnapshot merge_pseudo(const DatasetSnapshot& snapshot,
                             std::span<const PseudoLabel> x,
                             double lgt_iou_ceiling) {
  std::vector<ImageRecord> images = snapshot.images();
  for (const PseudoLabel& p : x) {
    if (p.annotation.is_manual()) {
      fail(ErrorKind::Invariant, "merge received a Manual annotation");
    }
    auto idx = snapshot.index_of(p.image_id);
    if (!idx) {
      fail(ErrorKind::Invariant, "merge received unknown image '" + p.image_id + "'");
    }
    // Checked against the labels present before this merge.
    for (const Annotation& a : snapshot.images()[*idx].annotations) {
      if (iou(p.annotation.box, a.box) >= lgt_iou_ceiling) {
        fail(ErrorKind::Invariant,
             "pseudo-label on image '" + p.image_id +
                 "' overlaps an existing annotation at IoU " +
                 std::to_string(iou(p.annotation.box, a.box)));
      }
    }
    images[*idx].annotations.push_back(p.annotation);
  }
  return DatasetSnapshot(std::move(images), snapshot.split(),
                         snapshot.round_index() + 1);
}

namespace {

jsonio::ordered_json counts_json(const CategoryCounts& c) {
  jsonio::ordered_json j = jsonio::ordered_json::array();
  for (auto v : c) j.push_back(v);
  return j;
}

jsonio::ordered_json optional_json(const std::optional<double>& v) {
  return v ? jsonio::ordered_json(*v) : jsonio::ordered_json(nullptr);
}

}  // namespace

std::string round_state_json(const RoundState& s) {
  jsonio::ordered_json j;
  j["round_index"] = s.round_index;
  j["p_used"] = s.p_used;
  j["l_x"] = s.l_x;
  j["x_counts"] = counts_json(s.x_counts);
  j["dstar_counts"] = counts_json(s.dstar_counts);
  j["pseudo_counts"] = counts_json(s.pseudo_counts);
  j["detector_tag"] = s.detector_tag;
  j["detections"] = s.detections;
  j["x_precision"] = optional_json(s.x_precision);
  j["t_precision"] = optional_json(s.t_precision);
  if (s.eval_summary) {
    jsonio::ordered_json rows = jsonio::ordered_json::array();
    for (std::size_t c = 0; c < kNumCategories; ++c) {
      const auto& r = s.eval_summary->per_category[c];
      jsonio::ordered_json row;
      row["category"] = static_cast<int>(c) + 1;
      row["tp"] = r.tp;
      row["fn"] = r.fn;
      row["sensitivity"] = optional_json(r.sensitivity);
      rows.push_back(std::move(row));
    }
    j["eval"] = std::move(rows);
  } else {
    j["eval"] = nullptr;
  }
  return j.dump(1) + "\n";
}

std::string pseudo_labels_json(std::span<const PseudoLabel> x) {
  jsonio::ordered_json arr = jsonio::ordered_json::array();
  for (const PseudoLabel& p : x) {
    jsonio::ordered_json j;
    j["image_id"] = p.image_id;
    const jsonio::ordered_json a = jsonio::annotation_to_json(p.annotation);
    for (auto& [k, v] : a.items()) j[k] = v;
    arr.push_back(std::move(j));
  }
  return arr.dump(1) + "\n";
}

namespace {

CategoryCounts counts_from(const nlohmann::json& j, const char* key,
                           const std::string& where) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_array() || it->size() != kNumCategories) {
    fail(ErrorKind::Format, where + ": '" + key + "' must hold 4 counts");
  }
  CategoryCounts c{};
  for (std::size_t i = 0; i < kNumCategories; ++i) {
    if (!(*it)[i].is_number_integer()) {
      fail(ErrorKind::Format, where + ": '" + key + "' must hold integers");
    }
    c[i] = (*it)[i].get<std::int64_t>();
  }
  return c;
}

std::optional<double> optional_from(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}

}  // namespace

RoundState parse_round_state(std::string_view text, std::string_view source) {
  const std::string where(source);
  const nlohmann::json j = jsonio::parse_text(text, source);
  if (!j.is_object()) fail(ErrorKind::Format, where + ": expected an object");
  RoundState s;
  s.round_index = static_cast<int>(jsonio::int_field(j, "round_index", where));
  s.p_used = jsonio::number_field(j, "p_used", where);
  s.l_x = jsonio::int_field(j, "l_x", where);
  s.x_counts = counts_from(j, "x_counts", where);
  s.dstar_counts = counts_from(j, "dstar_counts", where);
  s.pseudo_counts = counts_from(j, "pseudo_counts", where);
  s.detector_tag = jsonio::string_field(j, "detector_tag", where);
  s.detections = static_cast<std::size_t>(jsonio::int_field(j, "detections", where));
  s.x_precision = optional_from(j, "x_precision");
  s.t_precision = optional_from(j, "t_precision");
  if (auto e = j.find("eval"); e != j.end() && !e->is_null()) {
    if (!e->is_array() || e->size() != kNumCategories) {
      fail(ErrorKind::Format, where + ": 'eval' must hold 4 rows");
    }
    SensitivityTable t;
    for (std::size_t c = 0; c < kNumCategories; ++c) {
      const auto& row = (*e)[c];
      t.per_category[c].tp = jsonio::int_field(row, "tp", where);
      t.per_category[c].fn = jsonio::int_field(row, "fn", where);
      t.per_category[c].sensitivity = optional_from(row, "sensitivity");
    }
    s.eval_summary = t;
  }
  return s;
}

std::vector<PseudoLabel> parse_pseudo_labels(std::string_view text,
                                             std::string_view source) {
  const std::string where(source);
  const nlohmann::json arr = jsonio::parse_text(text, source);
  if (!arr.is_array()) fail(ErrorKind::Format, where + ": expected an array");
  std::vector<PseudoLabel> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string at = where + "[" + std::to_string(i) + "]";
    std::string reason;
    auto a = jsonio::annotation_from_json(arr[i], at, reason);
    if (!a) fail(ErrorKind::Format, at + ": " + reason);
    out.push_back({jsonio::string_field(arr[i], "image_id", at), *a});
  }
  return out;
}

RunResult run_rounds(const DatasetSnapshot& train_set,
                     const DatasetSnapshot& val_set,
                     const DetectorHandle& detector, const RoundConfig& cfg,
                     const RoundObserver& observer) {
  cfg.validate();
  for (const ImageRecord& img : val_set.images()) {
    if (train_set.find(img.image_id)) {
      fail(ErrorKind::Config,
           "image '" + img.image_id + "' is in both train and validation sets");
    }
  }

  DatasetSnapshot dstar = train_set.with_split(Split::Train);
  DetectorHandle handle = detector;
  std::vector<RoundState> states;
  bool stopped = false;

  for (int k = 1; k <= cfg.max_rounds; ++k) {
    RoundState s;
    s.round_index = k;
    s.p_used = cfg.p_for_round(k);

    handle = train(handle, dstar, cfg.threads);
    s.detector_tag = handle.artifact_tag;
    const std::vector<Detection> t = infer(handle, dstar, cfg.threads);
    s.detections = t.size();

    SelectionCriterion crit = cfg.criterion;
    crit.p_threshold = s.p_used;
    s.x_selected = select_ugt(t, dstar, crit, k, cfg.threads);
    s.l_x = static_cast<std::int64_t>(s.x_selected.size());
    s.x_counts = count_by_category(s.x_selected);
    if (dstar.has_hidden_truth()) {
      s.x_precision = ugt_precision_oracle(s.x_selected, dstar);
      s.t_precision = detection_precision_oracle(t, dstar);
    }

    if (cfg.evaluate) {
      const auto val_dets = infer(handle, val_set, cfg.threads);
      s.eval_summary =
          sensitivity(val_dets, val_set, cfg.protocol, cfg.eval_truth, cfg.threads);
    }

    dstar = merge_pseudo(dstar, s.x_selected, crit.lgt_iou_ceiling);
    s.dstar_counts = count_by_category(dstar);
    s.pseudo_counts = count_by_category(dstar, OriginKind::Pseudo);

    if (cfg.log_dir) {
      const auto dir = *cfg.log_dir / "rounds" / std::to_string(k);
      save_dataset(dstar, dir / "dataset.json", SaveOptions{cfg.log_hidden});
      write_detections(dir / "detections.jsonl", t);
      jsonio::write_file(dir / "x_selected.json", pseudo_labels_json(s.x_selected));
      jsonio::write_file(dir / "state.json", round_state_json(s));
    }
    if (observer) observer(s);
    const bool done = s.l_x <= cfg.m_stop;
    states.push_back(std::move(s));
    if (done) {
      stopped = true;
      break;
    }
  }
  return RunResult{std::move(states), std::move(dstar), std::move(handle), stopped};
}

void round_report(const std::vector<RoundState>& states,
                  const std::filesystem::path& dir) {
  if (states.empty()) fail(ErrorKind::Config, "round_report needs at least one state");
  for (const RoundState& s : states) {
    jsonio::write_file(dir / ("round_" + std::to_string(s.round_index) + ".json"),
                       round_state_json(s));
  }
  jsonio::write_file(dir / "summary.md", render_rounds_markdown(states));
  CategoryCounts trained_on{};
  if (states.size() >= 2) trained_on = states[states.size() - 2].pseudo_counts;
  jsonio::write_file(dir / "final_ugt.csv", render_ugt_csv({{"final", trained_on}}));
}

}  // namespace plabel

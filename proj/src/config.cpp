#include "plabel/config.hpp"

#include <set>

#include "json_util.hpp"
#include "plabel/error.hpp"

namespace plabel {

namespace {

using nlohmann::json;
using jsonio::ordered_json;

// Reads known keys from one object and rejects the rest.
class Section {
 public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) fail(ErrorKind::Config, where_ + " must be an object");
  }

  template <typename T>
  void read(const char* key, T& target) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw std::invalid_argument("not a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw std::invalid_argument("not an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (it->is_number_integer() && !it->is_number_unsigned() &&
              it->template get<std::int64_t>() < 0) {
            throw std::invalid_argument("negative");
          }
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw std::invalid_argument("not a number");
      }
      target = it->template get<T>();
    } catch (const std::exception& e) {
      fail(ErrorKind::Config, where_ + "." + key + ": " + e.what());
    }
  }

  std::optional<Section> child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return std::nullopt;
    return Section(*it, where_ + "." + key);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) fail(ErrorKind::Config, where_ + ": unknown key '" + k + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void read_beta(Section& s, const char* key, BetaShape& shape) {
  if (auto b = s.child(key)) {
    b->read("alpha", shape.alpha);
    b->read("beta", shape.beta);
    b->finish();
  }
}

ordered_json beta_json(const BetaShape& b) {
  ordered_json j;
  j["alpha"] = b.alpha;
  j["beta"] = b.beta;
  return j;
}

}  // namespace

void RunConfig::apply_seed(std::uint64_t value) {
  seed = value;
  scenario.seed = value;
  synthetic.seed = value;
}

void RunConfig::validate() const {
  rounds.validate();
  scenario.validate();
  if (detector_kind == DetectorKind::Synthetic) {
    synthetic.validate();
  } else {
    if (external.command.empty()) {
      fail(ErrorKind::Config, "external detector needs a command");
    }
    if (external.timeout.count() <= 0) {
      fail(ErrorKind::Config, "detector timeout must be positive");
    }
  }
}

RunConfig parse_run_config(std::string_view text, std::string_view source) {
  const json root = jsonio::parse_text(text, source);
  RunConfig cfg;
  Section top(root, std::string(source));

  std::uint64_t seed = cfg.seed;
  top.read("seed", seed);
  cfg.apply_seed(seed);
  top.read("threads", cfg.rounds.threads);
  top.read("p_initial", cfg.rounds.p_initial);
  top.read("p_step", cfg.rounds.p_step);
  top.read("m_stop", cfg.rounds.m_stop);
  top.read("max_rounds", cfg.rounds.max_rounds);
  top.read("evaluate", cfg.rounds.evaluate);

  if (auto c = top.child("criterion")) {
    c->read("lgt_iou_ceiling", cfg.rounds.criterion.lgt_iou_ceiling);
    c->read("dedup_iou", cfg.rounds.criterion.dedup_iou);
    c->read("category_specific", cfg.rounds.criterion.category_specific);
    c->finish();
  }
  if (auto p = top.child("protocol")) {
    p->read("score_floor", cfg.rounds.protocol.score_floor);
    p->read("max_dets_per_image", cfg.rounds.protocol.max_dets_per_image);
    p->read("iou_floor", cfg.rounds.protocol.cf.iou_floor);
    p->read("boundary_inclusive", cfg.rounds.protocol.cf.boundary_inclusive);
    p->finish();
  }
  if (auto d = top.child("detector")) {
    std::string kind = "synthetic";
    d->read("kind", kind);
    if (kind == "synthetic") {
      cfg.detector_kind = DetectorKind::Synthetic;
    } else if (kind == "external") {
      cfg.detector_kind = DetectorKind::External;
    } else {
      fail(ErrorKind::Config, "detector.kind must be 'synthetic' or 'external'");
    }
    if (auto s = d->child("synthetic_params")) {
      SyntheticModel& m = cfg.synthetic;
      s->read("recall_base", m.recall_base);
      s->read("recall_gain", m.recall_gain);
      read_beta(*s, "tp_score_shape", m.tp_score_shape);
      s->read("fp_rate", m.fp_rate);
      read_beta(*s, "fp_score_shape", m.fp_score_shape);
      s->read("localization_jitter", m.localization_jitter);
      s->read("missing_label_penalty", m.missing_label_penalty);
      s->read("false_label_penalty", m.false_label_penalty);
      s->finish();
    }
    std::vector<std::string> command;
    d->read("command", command);
    if (!command.empty()) cfg.external.command = command;
    std::string workdir;
    d->read("workdir", workdir);
    if (!workdir.empty()) cfg.external.workdir = workdir;
    double timeout_seconds = 0.0;
    d->read("timeout_seconds", timeout_seconds);
    if (timeout_seconds > 0.0) {
      cfg.external.timeout =
          std::chrono::milliseconds(static_cast<std::int64_t>(timeout_seconds * 1000.0));
    }
    d->read("env_allowlist", cfg.external.env_allowlist);
    d->finish();
  }
  if (auto s = top.child("scenario")) {
    ScenarioConfig& sc = cfg.scenario;
    s->read("train_images", sc.train_images);
    s->read("val_images", sc.val_images);
    s->read("image_size", sc.image_size);
    s->read("train_labeled", sc.train_labeled);
    s->read("val_labeled", sc.val_labeled);
    s->read("label_fraction", sc.label_fraction);
    s->read("mean_area_ratio", sc.mean_area_ratio);
    s->read("log_sigma", sc.log_sigma);
    s->read("scale", sc.scale);
    s->finish();
  }
  if (auto p = top.child("paths")) {
    std::string v;
    p->read("train", v);
    if (!v.empty()) cfg.train_path = v;
    v.clear();
    p->read("val", v);
    if (!v.empty()) cfg.val_path = v;
    v.clear();
    p->read("out", v);
    if (!v.empty()) cfg.out_path = v;
    p->finish();
  }
  top.finish();
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(jsonio::read_file(path), path.string());
}

std::string run_config_json(const RunConfig& cfg) {
  ordered_json j;
  j["seed"] = cfg.seed;
  j["threads"] = cfg.rounds.threads;
  j["p_initial"] = cfg.rounds.p_initial;
  j["p_step"] = cfg.rounds.p_step;
  j["m_stop"] = cfg.rounds.m_stop;
  j["max_rounds"] = cfg.rounds.max_rounds;
  j["evaluate"] = cfg.rounds.evaluate;
  j["criterion"] = {{"lgt_iou_ceiling", cfg.rounds.criterion.lgt_iou_ceiling},
                    {"dedup_iou", cfg.rounds.criterion.dedup_iou},
                    {"category_specific", cfg.rounds.criterion.category_specific}};
  j["protocol"] = {{"score_floor", cfg.rounds.protocol.score_floor},
                   {"max_dets_per_image", cfg.rounds.protocol.max_dets_per_image},
                   {"iou_floor", cfg.rounds.protocol.cf.iou_floor},
                   {"boundary_inclusive", cfg.rounds.protocol.cf.boundary_inclusive}};
  ordered_json d;
  if (cfg.detector_kind == DetectorKind::Synthetic) {
    const SyntheticModel& m = cfg.synthetic;
    d["kind"] = "synthetic";
    ordered_json s;
    s["recall_base"] = m.recall_base;
    s["recall_gain"] = m.recall_gain;
    s["tp_score_shape"] = beta_json(m.tp_score_shape);
    s["fp_rate"] = m.fp_rate;
    s["fp_score_shape"] = beta_json(m.fp_score_shape);
    s["localization_jitter"] = m.localization_jitter;
    s["missing_label_penalty"] = m.missing_label_penalty;
    s["false_label_penalty"] = m.false_label_penalty;
    d["synthetic_params"] = std::move(s);
  } else {
    d["kind"] = "external";
    d["command"] = cfg.external.command;
    d["workdir"] = cfg.external.workdir.string();
    d["timeout_seconds"] = static_cast<double>(cfg.external.timeout.count()) / 1000.0;
    d["env_allowlist"] = cfg.external.env_allowlist;
  }
  j["detector"] = std::move(d);
  const ScenarioConfig& sc = cfg.scenario;
  ordered_json s;
  s["train_images"] = sc.train_images;
  s["val_images"] = sc.val_images;
  s["image_size"] = sc.image_size;
  s["train_labeled"] = sc.train_labeled;
  s["val_labeled"] = sc.val_labeled;
  s["label_fraction"] = sc.label_fraction;
  s["mean_area_ratio"] = sc.mean_area_ratio;
  s["log_sigma"] = sc.log_sigma;
  s["scale"] = sc.scale;
  j["scenario"] = std::move(s);
  ordered_json p = ordered_json::object();
  if (cfg.train_path) p["train"] = cfg.train_path->string();
  if (cfg.val_path) p["val"] = cfg.val_path->string();
  if (cfg.out_path) p["out"] = cfg.out_path->string();
  j["paths"] = std::move(p);
  return j.dump(1) + "\n";
}

}  // namespace plabel

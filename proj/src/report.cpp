#include "plabel/report.hpp"

#include <cstdio>

#include "plabel/orchestrator.hpp"

namespace plabel {

namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string counts_row(const CategoryCounts& c, char sep) {
  std::string out;
  for (std::size_t i = 0; i < c.size(); ++i) {
    out += sep;
    out += std::to_string(c[i]);
  }
  return out;
}

}  // namespace

std::string render_sweep_csv(const SweepTable& table) {
  std::string out = "P,cat1,cat2,cat3,cat4\n";
  for (std::size_t i = 0; i < table.p_values.size(); ++i) {
    out += fixed(table.p_values[i], 1) + counts_row(table.counts[i], ',') + "\n";
  }
  return out;
}

std::string render_ugt_csv(const std::vector<UgtRow>& rows) {
  std::string out = "model,cat1,cat2,cat3,cat4\n";
  for (const UgtRow& r : rows) out += r.label + counts_row(r.counts, ',') + "\n";
  return out;
}

SensitivityRow SensitivityRow::from(std::string label,
                                    const SensitivityTable& table) {
  SensitivityRow row{std::move(label), {}};
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    row.values[c] = table.per_category[c].sensitivity;
  }
  return row;
}

std::string format_percent(const std::optional<double>& fraction) {
  return fraction ? fixed(*fraction * 100.0, 2) + "%" : "-";
}

std::string render_sensitivity_csv(const std::vector<SensitivityRow>& rows) {
  std::string out = "model,cat1,cat2,cat3,cat4\n";
  for (const SensitivityRow& r : rows) {
    out += r.label;
    for (const auto& v : r.values) out += "," + format_percent(v);
    out += "\n";
  }
  return out;
}

std::string render_sensitivity_markdown(const std::vector<SensitivityRow>& rows) {
  std::string out = "| model | 1 | 2 | 3 | 4 |\n|---|---|---|---|---|\n";
  for (const SensitivityRow& r : rows) {
    out += "| " + r.label;
    for (const auto& v : r.values) out += " | " + format_percent(v);
    out += " |\n";
  }
  return out;
}

std::string render_rounds_markdown(const std::vector<RoundState>& states) {
  bool any_eval = false;
  for (const auto& s : states) any_eval = any_eval || s.eval_summary.has_value();

  std::string out =
      "| round | P | L(X) | X 1 | X 2 | X 3 | X 4 | D* 1 | D* 2 | D* 3 | D* 4 |";
  std::string rule = "|---|---|---|---|---|---|---|---|---|---|---|";
  if (any_eval) {
    out += " sens 1 | sens 2 | sens 3 | sens 4 |";
    rule += "---|---|---|---|";
  }
  out += "\n" + rule + "\n";
  for (const RoundState& s : states) {
    out += "| " + std::to_string(s.round_index) + " | " + fixed(s.p_used, 2) +
           " | " + std::to_string(s.l_x);
    for (auto v : s.x_counts) out += " | " + std::to_string(v);
    for (auto v : s.dstar_counts) out += " | " + std::to_string(v);
    if (any_eval) {
      for (std::size_t c = 0; c < kNumCategories; ++c) {
        out += " | " + (s.eval_summary
                            ? format_percent(s.eval_summary->per_category[c].sensitivity)
                            : std::string("-"));
      }
    }
    out += " |\n";
  }
  return out;
}

std::string render_coverage_csv(const std::vector<CoverageRow>& rows) {
  std::string out = "image_size,pyramid,category,matcher,coverage\n";
  for (const CoverageRow& r : rows) {
    out += std::to_string(r.image_size) + "," + r.pyramid + "," +
           std::to_string(r.category) + "," + r.matcher + "," +
           fixed(r.coverage, 6) + "\n";
  }
  return out;
}

}  // namespace plabel

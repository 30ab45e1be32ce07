#include "fairrf/report.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <array>
#include <iomanip>
#include <sstream>

#include "fairrf/error.hpp"
#include "fairrf/metrics.hpp"

namespace fairrf {

using ordered_json = nlohmann::ordered_json;

MetricSet evaluate_predictions(const Eigen::VectorXd& yhat, const Eigen::VectorXd& y, const Eigen::VectorXi& s) {
  MetricSet m;
  m.accuracy = accuracy(yhat, y);
  m.delta_eo = delta_eo(yhat, y, s);
  m.delta_dp = delta_dp(yhat, s);
  m.delta_eo_hard = delta_eo_hard(yhat, y, s);
  m.delta_dp_hard = delta_dp_hard(yhat, s);
  return m;
}

MetricSummary summarize(std::span<const double> values) {
  if (values.empty()) throw Error("summarize: no values");
  MetricSummary out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

FairnessReport aggregate(std::span<const MetricSet> per_seed, std::span<const std::uint64_t> seeds) {
  if (per_seed.empty()) throw Error("aggregate: no reports");
  if (per_seed.size() != seeds.size()) throw Error("aggregate: seeds and reports differ in length");
  FairnessReport r;
  r.seeds.assign(seeds.begin(), seeds.end());
  r.per_seed.assign(per_seed.begin(), per_seed.end());
  auto column = [&](double MetricSet::*field) {
    std::vector<double> v;
    for (const auto& m : per_seed) v.push_back(m.*field);
    return summarize(v);
  };
  r.accuracy = column(&MetricSet::accuracy);
  r.delta_eo = column(&MetricSet::delta_eo);
  r.delta_dp = column(&MetricSet::delta_dp);
  r.delta_eo_hard = column(&MetricSet::delta_eo_hard);
  r.delta_dp_hard = column(&MetricSet::delta_dp_hard);
  return r;
}

namespace {

ordered_json summary_json(const MetricSummary& s) {
  ordered_json j;
  j["mean"] = s.mean;
  if (s.std) j["std"] = *s.std;
  return j;
}

ordered_json metric_json(const MetricSet& m) {
  ordered_json j;
  j["accuracy"] = m.accuracy;
  j["delta_eo"] = m.delta_eo;
  j["delta_dp"] = m.delta_dp;
  j["delta_eo_hard"] = m.delta_eo_hard;
  j["delta_dp_hard"] = m.delta_dp_hard;
  return j;
}

std::string cell(const MetricSummary& s) {
  char buf[64];
  if (s.std) {
    std::snprintf(buf, sizeof buf, "%.3f±%.3f", s.mean, *s.std);
  } else {
    std::snprintf(buf, sizeof buf, "%.3f", s.mean);
  }
  return buf;
}

// Display width, counting the two-byte '±' as one column.
std::size_t display_width(const std::string& s) {
  std::size_t w = 0;
  for (unsigned char c : s) w += (c & 0xC0) != 0x80;
  return w;
}

}  // namespace

std::string report_json(const FairnessReport& report, const std::string& label) {
  ordered_json j;
  j["label"] = label;
  j["seeds"] = report.seeds;
  j["summary"] = {{"accuracy", summary_json(report.accuracy)},
                  {"delta_eo", summary_json(report.delta_eo)},
                  {"delta_dp", summary_json(report.delta_dp)},
                  {"delta_eo_hard", summary_json(report.delta_eo_hard)},
                  {"delta_dp_hard", summary_json(report.delta_dp_hard)}};
  ordered_json per_seed = ordered_json::array();
  for (std::size_t i = 0; i < report.per_seed.size(); ++i) {
    ordered_json row = metric_json(report.per_seed[i]);
    row["seed"] = report.seeds[i];
    per_seed.push_back(std::move(row));
  }
  j["per_seed"] = std::move(per_seed);
  return j.dump(2);
}

std::string format_table(const std::vector<std::pair<std::string, FairnessReport>>& rows) {
  std::vector<std::array<std::string, 4>> cells;
  cells.push_back({"Methods", "ACC", "dEO", "dDP"});
  for (const auto& [name, r] : rows) {
    cells.push_back({name, cell(r.accuracy), cell(r.delta_eo), cell(r.delta_dp)});
  }
  std::array<std::size_t, 4> width{};
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < 4; ++c) width[c] = std::max(width[c], display_width(row[c]));
  }
  std::ostringstream out;
  auto rule = [&] {
    for (std::size_t c = 0; c < 4; ++c) out << (c == 0 ? "" : "-+-") << std::string(width[c], '-');
    out << '\n';
  };
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t c = 0; c < 4; ++c) {
      out << (c == 0 ? "" : " | ") << cells[r][c] << std::string(width[c] - display_width(cells[r][c]), ' ');
    }
    out << '\n';
    if (r == 0) rule();
  }
  return out.str();
}

}  // namespace fairrf

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fairrf {

struct MetricSet {
  double accuracy = 0.0;
  double delta_eo = 0.0;
  double delta_dp = 0.0;
  double delta_eo_hard = 0.0;
  double delta_dp_hard = 0.0;
};

/// Soft and hard metrics of one prediction vector.
MetricSet evaluate_predictions(const Eigen::VectorXd& yhat, const Eigen::VectorXd& y, const Eigen::VectorXi& s);

struct MetricSummary {
  double mean = 0.0;
  std::optional<double> std;  // sample std (n - 1), only with >= 2 values
};

MetricSummary summarize(std::span<const double> values);

struct FairnessReport {
  std::vector<std::uint64_t> seeds;
  std::vector<MetricSet> per_seed;
  MetricSummary accuracy;
  MetricSummary delta_eo;
  MetricSummary delta_dp;
  MetricSummary delta_eo_hard;
  MetricSummary delta_dp_hard;
};

/// Requires at least one entry; seeds and per_seed must have equal length.
FairnessReport aggregate(std::span<const MetricSet> per_seed, std::span<const std::uint64_t> seeds);

/// Stable JSON text: fixed key order, no timestamps.
std::string report_json(const FairnessReport& report, const std::string& label);

/// Aligned plain-text table with "mean±std" cells (Methods | ACC | dEO | dDP).
std::string format_table(const std::vector<std::pair<std::string, FairnessReport>>& rows);

}  // namespace fairrf

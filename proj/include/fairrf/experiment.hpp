#pragma once

// Experiment configs, training variants and the run/sweep/compare drivers
// behind the command-line tool.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fairrf/classifiers.hpp"
#include "fairrf/dataset.hpp"
#include "fairrf/report.hpp"
#include "fairrf/synthetic.hpp"
#include "fairrf/trainer.hpp"

namespace fairrf {

/// Environment variable naming the default directory for relative CSV paths.
inline constexpr const char* kDataDirEnv = "FAIRRF_DATA_DIR";

enum class Variant { Vanilla, FairRF, FixLambda, RemoveR, ConstrainAll, Random, Noisy, Top1, ConstrainS };

/// Config tag: vanilla, fairrf, fix-lambda, remove-r, constrain-all, random,
/// noisy, top-1, constrain-s.
std::string_view to_string(Variant v);
/// Row label used in reports and tables.
std::string_view display_name(Variant v);
Variant parse_variant(std::string_view tag);

struct DatasetConfig {
  std::string name;
  std::filesystem::path csv;  // resolved
  TableSchema schema;
  std::vector<std::string> related;  // default related features
};

/// Relative CSV paths resolve against $FAIRRF_DATA_DIR when set, otherwise
/// against <config dir>/../data.
std::filesystem::path resolve_data_path(const std::string& csv, const std::filesystem::path& config_dir);

DatasetConfig parse_dataset_config(const std::string& text, const std::filesystem::path& config_dir);
DatasetConfig load_dataset_config(const std::filesystem::path& path);

struct SyntheticSource {
  SyntheticOptions options;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  std::optional<SyntheticSource> synthetic;  // replaces the CSV when set
  Variant variant = Variant::FairRF;
  ModelKind model = ModelKind::MLP;
  std::vector<Eigen::Index> hidden_dims{64, 32};
  TrainConfig train;
  std::vector<std::string> related;  // effective related features
  std::optional<Eigen::VectorXd> lambda0;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::filesystem::path output_dir;
  std::array<double, 3> split_ratios{5.0, 2.0, 3.0};
  int workers = 1;
  bool allow_sensitive_in_training = false;

  /// Checks everything that can be checked without training, including that
  /// the data file exists and the related features are inputs of the schema.
  void validate() const;
};

ExperimentConfig parse_experiment_config(const std::string& text, const std::filesystem::path& config_dir);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Config for the generated benchmark (related features p1, p2).
ExperimentConfig synthetic_experiment(const SyntheticOptions& options, std::uint64_t data_seed);

Dataset load_dataset(const ExperimentConfig& cfg);

/// Seeds used for one run's split, model init and batch order.
std::uint64_t split_seed(std::uint64_t seed);

struct SeedOutcome {
  std::uint64_t seed = 0;
  ModelSpec spec;
  ModelParams params;  // selected parameters
  std::vector<std::string> proxies;
  std::vector<std::string> dropped_features;
  Eigen::VectorXd lambda;
  TrainTrace trace;
  MetricSet eval;
  MetricSet test;
};

/// One variant, one seed: split, encode, train, evaluate on eval and test.
SeedOutcome run_seed(const ExperimentConfig& cfg, const Dataset& data, std::uint64_t seed);

/// Metrics of a saved checkpoint on the split rebuilt from its stored seed.
MetricSet evaluate_checkpoint(const ExperimentConfig& cfg, const Dataset& data,
                              const LoadedCheckpoint& checkpoint, std::string_view split_name = "test");

/// Writes seed_<s>/{trace.jsonl, checkpoint.json, metrics.json}, report.json,
/// report.txt and manifest.json under cfg.output_dir.
FairnessReport run_train(const ExperimentConfig& cfg);

struct SweepRow {
  double eta = 0.0;
  double beta = 0.0;
  std::uint64_t seed = 0;
  std::optional<MetricSet> test;
  std::string status;  // "ok" or the error message
};

/// One train-style run per (eta, beta) cell in its own subdirectory plus
/// sweep.tsv. Failed cells are recorded and the sweep continues.
std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, const std::vector<double>& etas,
                                const std::vector<double>& betas);
std::string sweep_cell_name(double eta, double beta);
std::string sweep_tsv(const std::vector<SweepRow>& rows);

/// One train-style run per variant (shared seeds) plus compare.txt and compare.json.
std::vector<std::pair<std::string, FairnessReport>> run_compare(const ExperimentConfig& cfg,
                                                                const std::vector<Variant>& variants);

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Rethrows the first
/// exception (by index) after all tasks finish.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace fairrf

#pragma once

// Alternating training: classification-only pretraining, then cycles of
// mini-batch theta updates on  L_cls + eta * sum_j lambda_j R_j  followed by a
// closed-form lambda refresh.
//
// Scale convention. A theta step minimizes the batch's mean classification
// loss plus eta * sum_j lambda_j R_j, with R_j summed over the batch rows.
// Full-split scores (the lambda refresh, eval objective, trace) are multiplied
// by batch_size / n so they sit on the same per-batch scale.

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fairrf/classifiers.hpp"
#include "fairrf/dataset.hpp"
#include "fairrf/fair_objective.hpp"

namespace fairrf {

struct TrainConfig {
  double eta = 0.3;
  double beta = 0.5;
  double learning_rate = 1e-3;
  int pretrain_epochs = 10;
  int max_epochs = 100;
  int batch_size = 5;
  /// Theta steps per lambda refresh; unset means one pass over the training split.
  std::optional<int> model_train_steps;
  bool learn_lambda = true;
  std::uint64_t seed = 0;
  int early_stop_patience = 3;
  double min_improvement = 1e-5;
  /// Candidate epochs for model selection must keep their eval penalty within
  /// this factor of the final epoch's.
  double selection_penalty_slack = 1.10;

  void validate() const;
  ObjectiveConfig objective() const { return {eta, beta}; }
};

/// Inputs to training. Carries no sensitive attribute.
struct TrainingData {
  LabeledData train;
  std::optional<LabeledData> eval;
  ProxyFeatures train_proxies;  // empty: no fairness penalty
  ProxyFeatures eval_proxies;
};

/// Extra per-epoch observations supplied by the caller (e.g. eval fairness
/// gaps computed with the held-out sensitive attribute).
struct EpochProbe {
  std::optional<double> delta_eo;
  std::optional<double> delta_dp;
};
using EpochMonitor = std::function<EpochProbe(const ModelParams&)>;

struct EpochRecord {
  std::string phase;  // "pretrain" or "fairrf"
  int epoch = 0;      // 1-based within the phase
  double cls_loss = 0.0;           // mean per-row loss, full training split
  double penalty = 0.0;            // lambda . scores
  Eigen::VectorXd scores;          // R_j on the training split, batch scale
  Eigen::VectorXd lambda;          // after this epoch's refresh
  std::optional<double> eval_loss;       // mean per-row classification loss
  std::optional<double> eval_accuracy;
  std::optional<double> eval_objective;  // batch scale
  Eigen::VectorXd eval_scores;           // batch scale
  std::optional<double> eval_delta_eo;
  std::optional<double> eval_delta_dp;
};

struct TrainTrace {
  std::vector<EpochRecord> epochs;
  int selected_epoch = 0;  // fairrf-phase epoch whose parameters were selected; 0 = none ran
  std::string stop_reason;
};

/// Line-per-epoch JSON; field names are fixed (see README).
std::string trace_jsonl(const TrainTrace& trace);

struct TrainResult {
  ModelParams final_params;
  ModelParams selected_params;
  Eigen::VectorXd lambda;  // final
  TrainTrace trace;
};

class Trainer {
 public:
  Trainer(ModelSpec spec, TrainConfig cfg);
  Trainer(ModelSpec spec, ModelParams params, TrainConfig cfg);

  /// Classification-only epochs with eval-loss early stopping. Appends
  /// "pretrain" records to the trace.
  void pretrain(const TrainingData& data, const EpochMonitor& monitor = {});

  /// The alternating phase, starting from lambda0 (must be on the simplex and
  /// match the proxy groups; ignored when there are no proxies).
  TrainResult train_fairrf(const TrainingData& data, const Eigen::VectorXd& lambda0,
                           const EpochMonitor& monitor = {});

  const ModelSpec& spec() const { return spec_; }
  const ModelParams& params() const { return params_; }
  const TrainConfig& config() const { return cfg_; }
  const TrainTrace& trace() const { return trace_; }

 private:
  class Adam {
   public:
    Adam() = default;
    Adam(const ModelParams& shape, double lr);
    void step(ModelParams& params, const ModelParams& grad);

   private:
    ModelParams m_, v_;
    double lr_ = 1e-3;
    long t_ = 0;
  };

  class BatchStream {
   public:
    BatchStream() = default;
    BatchStream(Eigen::Index n, Eigen::Index batch, std::uint64_t seed);
    std::vector<Eigen::Index> next();
    Eigen::Index batches_per_pass() const { return (n_ + batch_ - 1) / batch_; }

   private:
    std::vector<Eigen::Index> order_;
    Eigen::Index n_ = 0, batch_ = 1, pos_ = 0;
    std::uint64_t seed_ = 0, pass_ = 0;
    void reshuffle();
  };

  void ensure_stream(const TrainingData& data);
  void theta_step(const TrainingData& data, const Eigen::VectorXd& lambda, bool with_penalty);
  void check_finite(const char* where) const;

  ModelSpec spec_;
  ModelParams params_;
  TrainConfig cfg_;
  Adam adam_;
  BatchStream stream_;
  bool stream_ready_ = false;
  TrainTrace trace_;
};

/// Rows of a labeled set.
LabeledData take_rows(const LabeledData& data, std::span<const Eigen::Index> rows);

}  // namespace fairrf

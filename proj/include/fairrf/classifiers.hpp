#pragma once

// Base classifiers with hand-written backprop: logistic regression, a linear
// SVM trained on hinge loss, and a ReLU MLP with a sigmoid output.

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace fairrf {

enum class ModelKind { LR, SVM, MLP };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

struct ModelSpec {
  ModelKind kind = ModelKind::MLP;
  Eigen::Index input_dim = 0;
  std::vector<Eigen::Index> hidden_dims{64, 32};  // MLP only
  std::uint64_t seed = 0;

  /// Throws ConfigError when hidden_dims is non-empty for LR/SVM, empty for MLP,
  /// or input_dim < 1.
  void validate() const;
  /// Convenience: a validated spec with hidden_dims cleared for linear kinds.
  static ModelSpec make(ModelKind kind, Eigen::Index input_dim, std::uint64_t seed,
                        std::vector<Eigen::Index> hidden = {64, 32});
};

/// Affine layer mapping inputs of width W.cols() to outputs of width W.rows().
struct Layer {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
};

struct ModelParams {
  std::vector<Layer> layers;

  Eigen::Index size() const;
  bool all_finite() const;
  Eigen::VectorXd flatten() const;
  void assign(const Eigen::VectorXd& flat);
  static ModelParams zeros_like(const ModelParams& p);
};

ModelParams init(const ModelSpec& spec);

struct ForwardResult {
  Eigen::VectorXd margin;  // pre-sigmoid output (logit, or SVM score)
  Eigen::VectorXd prob;    // sigmoid(margin): the yhat used by the penalty and metrics
};

ForwardResult forward(const ModelParams& params, const ModelSpec& spec, const Eigen::MatrixXd& X);

struct LossGrad {
  double loss = 0.0;
  ModelParams grad;
  ForwardResult out;
};

/// Summed classification loss (BCE for LR/MLP, hinge for SVM) and its gradient.
/// extra_grad_on_yhat is added to dL/dyhat at the output before backprop; it is
/// how the fairness penalty enters. Probabilities are clamped to [1e-7, 1-1e-7]
/// inside the logs; the BCE gradient is taken through the logit (p - y).
LossGrad loss_and_grad(const ModelParams& params, const ModelSpec& spec, const Eigen::MatrixXd& X,
                       const Eigen::VectorXd& y, const Eigen::VectorXd& extra_grad_on_yhat);

/// Same, but the extra gradient is computed from this forward pass's yhat.
using YhatGradFn = std::function<Eigen::VectorXd(const Eigen::VectorXd& yhat)>;
LossGrad loss_and_grad(const ModelParams& params, const ModelSpec& spec, const Eigen::MatrixXd& X,
                       const Eigen::VectorXd& y, const YhatGradFn& extra_grad_fn);

/// Loss only, same definition as loss_and_grad.
double classification_loss(const ModelSpec& spec, const ForwardResult& out, const Eigen::VectorXd& y);

inline constexpr double kProbClamp = 1e-7;

// Checkpoint: a JSON document
//   {"format": "fairrf-checkpoint", "version": 1,
//    "spec": {"kind": "mlp", "input_dim": d, "hidden_dims": [...], "seed": s},
//    "layers": [{"rows": r, "cols": c, "weights": [row-major r*c], "bias": [r]}, ...],
//    "extra": {...}}
// Doubles are written in shortest round-trip form, so save/load is exact.
// extra_json must hold a serialized JSON object (or be empty).
std::string checkpoint_json(const ModelSpec& spec, const ModelParams& params,
                            const std::string& extra_json = {});
void save_checkpoint(const std::filesystem::path& path, const ModelSpec& spec,
                     const ModelParams& params, const std::string& extra_json = {});

struct LoadedCheckpoint {
  ModelSpec spec;
  ModelParams params;
  std::string extra_json;
};
LoadedCheckpoint parse_checkpoint(const std::string& text);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fairrf

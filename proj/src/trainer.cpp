#include "fairrf/trainer.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>
#include <sstream>

#include "fairrf/error.hpp"
#include "fairrf/lambda_solver.hpp"
#include "fairrf/metrics.hpp"
#include "fairrf/random.hpp"

namespace fairrf {

void TrainConfig::validate() const {
  objective().validate();
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (pretrain_epochs < 0) throw ConfigError("pretrain_epochs must be >= 0");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (model_train_steps && *model_train_steps < 1) throw ConfigError("model_train_steps must be >= 1");
  if (early_stop_patience < 1) throw ConfigError("early_stop_patience must be >= 1");
  if (!(min_improvement >= 0.0)) throw ConfigError("min_improvement must be >= 0");
  if (!(selection_penalty_slack >= 1.0)) throw ConfigError("selection_penalty_slack must be >= 1");
}

LabeledData take_rows(const LabeledData& data, std::span<const Eigen::Index> rows) {
  const std::vector<Eigen::Index> idx(rows.begin(), rows.end());
  return {data.X(idx, Eigen::all), data.y(idx)};
}

// --- Adam ------------------------------------------------------------------

Trainer::Adam::Adam(const ModelParams& shape, double lr)
    : m_(ModelParams::zeros_like(shape)), v_(ModelParams::zeros_like(shape)), lr_(lr) {}

void Trainer::Adam::step(ModelParams& params, const ModelParams& grad) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  ++t_;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  auto update = [&](auto& p, auto& m, auto& v, const auto& g) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseAbs2();
    p.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    update(params.layers[l].W, m_.layers[l].W, v_.layers[l].W, grad.layers[l].W);
    update(params.layers[l].b, m_.layers[l].b, v_.layers[l].b, grad.layers[l].b);
  }
}

// --- batches ---------------------------------------------------------------

Trainer::BatchStream::BatchStream(Eigen::Index n, Eigen::Index batch, std::uint64_t seed)
    : order_(static_cast<std::size_t>(n)), n_(n), batch_(std::min(batch, n)), seed_(seed) {
  reshuffle();
}

void Trainer::BatchStream::reshuffle() {
  for (Eigen::Index i = 0; i < n_; ++i) order_[static_cast<std::size_t>(i)] = i;
  Rng rng(derive_seed(seed_, pass_++));
  rng.shuffle(order_);
  pos_ = 0;
}

std::vector<Eigen::Index> Trainer::BatchStream::next() {
  if (pos_ >= n_) reshuffle();
  const Eigen::Index end = std::min(pos_ + batch_, n_);
  std::vector<Eigen::Index> batch(order_.begin() + pos_, order_.begin() + end);
  pos_ = end;
  return batch;
}

// --- trainer ---------------------------------------------------------------

namespace {

struct SplitEval {
  double mean_loss = 0.0;
  double accuracy = 0.0;
  Eigen::VectorXd scores;  // batch scale
};

SplitEval evaluate_split(const ModelParams& params, const ModelSpec& spec, const LabeledData& data,
                         const ProxyFeatures& proxies, double batch_scale_rows) {
  SplitEval out;
  const ForwardResult f = forward(params, spec, data.X);
  const double n = static_cast<double>(data.rows());
  out.mean_loss = classification_loss(spec, f, data.y) / n;
  out.accuracy = accuracy(f.prob, data.y);
  if (!proxies.empty()) {
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(proxies.size());
    out.scores = related_penalty(proxies.values, proxies.groups, ones, f.prob).per_feature *
                 (std::min(batch_scale_rows, n) / n);
  }
  return out;
}

}  // namespace

Trainer::Trainer(ModelSpec spec, TrainConfig cfg) : Trainer(spec, init(spec), cfg) {}

Trainer::Trainer(ModelSpec spec, ModelParams params, TrainConfig cfg)
    : spec_(std::move(spec)), params_(std::move(params)), cfg_(cfg) {
  spec_.validate();
  cfg_.validate();
  adam_ = Adam(params_, cfg_.learning_rate);
}

void Trainer::ensure_stream(const TrainingData& data) {
  if (data.train.rows() < 1) throw Error("training split is empty");
  if (data.train.X.cols() != spec_.input_dim) {
    throw DimensionError("training data width does not match the model input_dim");
  }
  if (!data.train_proxies.empty() && data.train_proxies.values.rows() != data.train.rows()) {
    throw DimensionError("training proxies and training rows differ");
  }
  if (!stream_ready_) {
    stream_ = BatchStream(data.train.rows(), cfg_.batch_size, derive_seed(cfg_.seed, 0xba7c));
    stream_ready_ = true;
  }
}

void Trainer::check_finite(const char* where) const {
  if (!params_.all_finite()) throw TrainingAborted(std::string("non-finite parameters after ") + where);
}

void Trainer::theta_step(const TrainingData& data, const Eigen::VectorXd& lambda, bool with_penalty) {
  const auto rows = stream_.next();
  const LabeledData batch = take_rows(data.train, rows);
  // loss_and_grad works with sums; scale so the step follows mean L_cls + eta * sum_j lambda_j R_j.
  const double rows_d = static_cast<double>(rows.size());
  YhatGradFn extra;
  ProxyFeatures batch_proxies;
  if (with_penalty) {
    batch_proxies = data.train_proxies.rows(rows);
    extra = [&](const Eigen::VectorXd& yhat) -> Eigen::VectorXd {
      return rows_d * cfg_.eta * penalty_grad_yhat(batch_proxies.values, batch_proxies.groups, lambda, yhat);
    };
  }
  LossGrad lg = loss_and_grad(params_, spec_, batch.X, batch.y, extra);
  if (!std::isfinite(lg.loss)) throw TrainingAborted("non-finite classification loss");
  for (auto& layer : lg.grad.layers) {
    layer.W /= rows_d;
    layer.b /= rows_d;
  }
  adam_.step(params_, lg.grad);
}

void Trainer::pretrain(const TrainingData& data, const EpochMonitor& monitor) {
  ensure_stream(data);
  double best = std::numeric_limits<double>::infinity();
  int stale = 0;
  for (int epoch = 1; epoch <= cfg_.pretrain_epochs; ++epoch) {
    for (Eigen::Index b = 0; b < stream_.batches_per_pass(); ++b) theta_step(data, {}, false);
    check_finite("pretraining");

    EpochRecord rec;
    rec.phase = "pretrain";
    rec.epoch = epoch;
    const SplitEval tr = evaluate_split(params_, spec_, data.train, {}, cfg_.batch_size);
    rec.cls_loss = tr.mean_loss;
    if (data.eval) {
      const SplitEval ev = evaluate_split(params_, spec_, *data.eval, {}, cfg_.batch_size);
      rec.eval_loss = ev.mean_loss;
      rec.eval_accuracy = ev.accuracy;
    }
    if (monitor) {
      const EpochProbe probe = monitor(params_);
      rec.eval_delta_eo = probe.delta_eo;
      rec.eval_delta_dp = probe.delta_dp;
    }
    trace_.epochs.push_back(rec);

    if (rec.eval_loss) {
      if (*rec.eval_loss < best - cfg_.min_improvement) {
        best = *rec.eval_loss;
        stale = 0;
      } else if (++stale >= cfg_.early_stop_patience) {
        break;
      }
    }
  }
}

TrainResult Trainer::train_fairrf(const TrainingData& data, const Eigen::VectorXd& lambda0,
                                  const EpochMonitor& monitor) {
  ensure_stream(data);
  const bool has_proxies = !data.train_proxies.empty();
  if (data.eval && has_proxies && data.eval_proxies.size() != data.train_proxies.size()) {
    throw DimensionError("eval proxies do not match training proxies");
  }
  Eigen::VectorXd lambda;
  if (has_proxies) {
    if (lambda0.size() != data.train_proxies.size()) throw Error("lambda0 length differs from proxy count");
    if (!on_simplex(lambda0)) throw Error("lambda0 must lie on the probability simplex");
    lambda = lambda0;
  }
  const bool with_penalty = has_proxies && cfg_.eta > 0.0;
  const int steps = cfg_.model_train_steps.value_or(static_cast<int>(stream_.batches_per_pass()));
  const ObjectiveConfig obj = cfg_.objective();

  std::vector<ModelParams> snapshots;
  std::vector<EpochRecord> records;
  double best = std::numeric_limits<double>::infinity();
  int stale = 0;
  std::string stop_reason = "max_epochs";

  for (int epoch = 1; epoch <= cfg_.max_epochs; ++epoch) {
    for (int s = 0; s < steps; ++s) theta_step(data, lambda, with_penalty);
    check_finite("a theta update");

    EpochRecord rec;
    rec.phase = "fairrf";
    rec.epoch = epoch;
    const SplitEval tr = evaluate_split(params_, spec_, data.train, data.train_proxies, cfg_.batch_size);
    rec.cls_loss = tr.mean_loss;
    rec.scores = tr.scores;

    if (has_proxies && cfg_.learn_lambda) {
      const Eigen::VectorXd effective = cfg_.eta * tr.scores;
      const auto sol = solve_lambda(effective, cfg_.beta);
      const double before = lambda_objective(effective, lambda, cfg_.beta);
      const double after = lambda_objective(effective, sol.lambda, cfg_.beta);
      if (after > before + 1e-9 * (1.0 + std::abs(before))) {
        throw TrainingAborted("lambda refresh increased its own objective");
      }
      lambda = sol.lambda;
    }
    if (has_proxies && !on_simplex(lambda, 1e-9)) throw TrainingAborted("lambda left the simplex");
    rec.lambda = lambda;
    rec.penalty = has_proxies ? tr.scores.dot(lambda) : 0.0;

    if (data.eval) {
      const SplitEval ev = evaluate_split(params_, spec_, *data.eval, data.eval_proxies, cfg_.batch_size);
      rec.eval_loss = ev.mean_loss;
      rec.eval_accuracy = ev.accuracy;
      rec.eval_scores = ev.scores;
      const double eval_penalty = has_proxies ? ev.scores.dot(lambda) : 0.0;
      rec.eval_objective = has_proxies ? total_objective(ev.mean_loss, eval_penalty, lambda, obj) : ev.mean_loss;
    }
    if (monitor) {
      const EpochProbe probe = monitor(params_);
      rec.eval_delta_eo = probe.delta_eo;
      rec.eval_delta_dp = probe.delta_dp;
    }
    snapshots.push_back(params_);
    records.push_back(rec);

    if (rec.eval_objective) {
      if (*rec.eval_objective < best - cfg_.min_improvement) {
        best = *rec.eval_objective;
        stale = 0;
      } else if (++stale >= cfg_.early_stop_patience) {
        stop_reason = "early_stop";
        break;
      }
    }
  }

  // Best eval accuracy among epochs whose eval penalty (under the final lambda)
  // stays within the slack of the final epoch's.
  std::size_t chosen = records.size() - 1;
  if (data.eval) {
    auto penalty_at = [&](std::size_t e) {
      return has_proxies ? records[e].eval_scores.dot(lambda) : 0.0;
    };
    const double limit = cfg_.selection_penalty_slack * penalty_at(records.size() - 1) + 1e-12;
    double best_acc = -1.0;
    for (std::size_t e = 0; e < records.size(); ++e) {
      if (penalty_at(e) <= limit && *records[e].eval_accuracy > best_acc) {
        best_acc = *records[e].eval_accuracy;
        chosen = e;
      }
    }
  }

  for (auto& r : records) trace_.epochs.push_back(std::move(r));
  trace_.selected_epoch = static_cast<int>(chosen) + 1;
  trace_.stop_reason = stop_reason;

  TrainResult result;
  result.final_params = params_;
  result.selected_params = snapshots[chosen];
  result.lambda = lambda;
  result.trace = trace_;
  return result;
}

std::string trace_jsonl(const TrainTrace& trace) {
  using ordered_json = nlohmann::ordered_json;
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  auto opt = [](const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
  std::ostringstream out;
  for (const auto& r : trace.epochs) {
    ordered_json j;
    j["phase"] = r.phase;
    j["epoch"] = r.epoch;
    j["cls_loss"] = r.cls_loss;
    j["penalty"] = r.penalty;
    j["scores"] = vec(r.scores);
    j["lambda"] = vec(r.lambda);
    j["eval_loss"] = opt(r.eval_loss);
    j["eval_accuracy"] = opt(r.eval_accuracy);
    j["eval_objective"] = opt(r.eval_objective);
    j["eval_delta_eo"] = opt(r.eval_delta_eo);
    j["eval_delta_dp"] = opt(r.eval_delta_dp);
    j["selected"] = r.phase == "fairrf" && r.epoch == trace.selected_epoch;
    out << j.dump() << '\n';
  }
  return out.str();
}

}  // namespace fairrf

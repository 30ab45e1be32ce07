#include <gtest/gtest.h>

#include <json.hpp>

#include <cmath>

#include "fairrf/classifiers.hpp"
#include "fairrf/error.hpp"
#include "support.hpp"

namespace fairrf {
namespace {

using test::binary_vector;
using test::normal_matrix;
using test::normal_vector;

double loss_at(const ModelParams& p, const ModelSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
               const Eigen::VectorXd& extra) {
  const ForwardResult f = forward(p, spec, X);
  return classification_loss(spec, f, y) + extra.dot(f.prob);
}

// Central differences on every parameter of the summed loss plus a linear term in yhat.
void expect_gradient_matches(const ModelSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  const Eigen::Index n = 4 + static_cast<Eigen::Index>(rng.index(12));
  const Eigen::MatrixXd X = normal_matrix(rng, n, spec.input_dim);
  const Eigen::VectorXd y = binary_vector(rng, n);
  const Eigen::VectorXd extra = 0.3 * normal_vector(rng, n);
  ModelParams p = init(spec);
  // Nonzero biases keep hidden units off the ReLU kink; smaller weights keep away from the clamp.
  for (auto& l : p.layers) {
    l.W *= 0.5;
    l.b = 0.3 * normal_vector(rng, l.b.size());
  }
  const LossGrad lg = loss_and_grad(p, spec, X, y, extra);
  EXPECT_NEAR(lg.loss, classification_loss(spec, forward(p, spec, X), y), 1e-12);
  const Eigen::VectorXd analytic = lg.grad.flatten();
  const Eigen::VectorXd theta = p.flatten();
  constexpr double h = 1e-5;
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    Eigen::VectorXd plus = theta, minus = theta;
    plus(k) += h;
    minus(k) -= h;
    ModelParams pp = p, pm = p;
    pp.assign(plus);
    pm.assign(minus);
    const double numeric = (loss_at(pp, spec, X, y, extra) - loss_at(pm, spec, X, y, extra)) / (2 * h);
    const double scale = std::max({1e-3, std::abs(numeric), std::abs(analytic(k))});
    EXPECT_LT(std::abs(numeric - analytic(k)) / scale, 1e-4) << "parameter " << k;
  }
}

TEST(ModelSpec, Validation) {
  EXPECT_THROW(ModelSpec::make(ModelKind::MLP, 0, 1), ConfigError);
  EXPECT_THROW(ModelSpec::make(ModelKind::MLP, 3, 1, {}), ConfigError);
  EXPECT_TRUE(ModelSpec::make(ModelKind::LR, 3, 1).hidden_dims.empty());
  ModelSpec bad{ModelKind::SVM, 3, {4}, 0};
  EXPECT_THROW(bad.validate(), ConfigError);
  EXPECT_EQ(parse_model_kind("svm"), ModelKind::SVM);
  EXPECT_THROW(parse_model_kind("tree"), ConfigError);
}

TEST(Init, DeterministicAndSized) {
  const ModelSpec spec = ModelSpec::make(ModelKind::MLP, 10, 9);
  const ModelParams a = init(spec), b = init(spec);
  EXPECT_EQ(a.flatten(), b.flatten());
  EXPECT_EQ(a.size(), 10 * 64 + 64 + 64 * 32 + 32 + 32 + 1);
  const ModelParams c = init(ModelSpec::make(ModelKind::MLP, 10, 10));
  EXPECT_NE(a.flatten(), c.flatten());
  EXPECT_EQ(init(ModelSpec::make(ModelKind::LR, 7, 0)).size(), 8);
}

TEST(Forward, ZeroWeightsGiveOneHalf) {
  for (ModelKind kind : {ModelKind::LR, ModelKind::SVM, ModelKind::MLP}) {
    const ModelSpec spec = ModelSpec::make(kind, 4, 3, {5});
    ModelParams p = ModelParams::zeros_like(init(spec));
    Rng rng(1);
    const ForwardResult f = forward(p, spec, normal_matrix(rng, 6, 4));
    EXPECT_TRUE((f.prob.array() == 0.5).all());
  }
}

TEST(Forward, RowsAreIndependent) {
  const ModelSpec spec = ModelSpec::make(ModelKind::MLP, 5, 4, {8, 6});
  const ModelParams p = init(spec);
  Rng rng(2);
  const Eigen::MatrixXd X = normal_matrix(rng, 9, 5);
  const Eigen::VectorXd all = forward(p, spec, X).prob;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    EXPECT_NEAR(forward(p, spec, X.row(i)).prob(0), all(i), 1e-14);
  }
  EXPECT_THROW(forward(p, spec, normal_matrix(rng, 2, 4)), DimensionError);
}

TEST(Gradient, LogisticRegression) {
  for (std::uint64_t s = 0; s < 5; ++s) expect_gradient_matches(ModelSpec::make(ModelKind::LR, 6, s), 100 + s);
}

TEST(Gradient, LinearSvm) {
  for (std::uint64_t s = 0; s < 5; ++s) expect_gradient_matches(ModelSpec::make(ModelKind::SVM, 5, s), 200 + s);
}

TEST(Gradient, Mlp) {
  for (std::uint64_t s = 0; s < 3; ++s) {
    expect_gradient_matches(ModelSpec::make(ModelKind::MLP, 8, s, {7, 5}), 300 + s);
    expect_gradient_matches(ModelSpec::make(ModelKind::MLP, 3, s, {1, 4}), 310 + s);
  }
}

TEST(LossAndGrad, ZeroHookIsNeutral) {
  const ModelSpec spec = ModelSpec::make(ModelKind::MLP, 4, 1, {6});
  const ModelParams p = init(spec);
  Rng rng(3);
  const Eigen::MatrixXd X = normal_matrix(rng, 10, 4);
  const Eigen::VectorXd y = binary_vector(rng, 10);
  const LossGrad a = loss_and_grad(p, spec, X, y, Eigen::VectorXd(Eigen::VectorXd::Zero(10)));
  const LossGrad b = loss_and_grad(p, spec, X, y, YhatGradFn{});
  EXPECT_EQ(a.grad.flatten(), b.grad.flatten());
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_THROW(loss_and_grad(p, spec, X, y, Eigen::VectorXd(Eigen::VectorXd::Zero(3))), DimensionError);
}

TEST(LossAndGrad, ConfidentCorrectPredictionHasTinyLoss) {
  const ModelSpec spec = ModelSpec::make(ModelKind::LR, 1, 0);
  ModelParams p = init(spec);
  p.layers[0].W(0, 0) = 40.0;
  p.layers[0].b(0) = 0.0;
  Eigen::MatrixXd X(2, 1);
  X << 1.0, -1.0;
  const LossGrad lg = loss_and_grad(p, spec, X, Eigen::Vector2d(1, 0), Eigen::VectorXd(Eigen::VectorXd::Zero(2)));
  EXPECT_LT(lg.loss, 1e-6);
  EXPECT_LT(lg.grad.flatten().cwiseAbs().maxCoeff(), 1e-6);
}

TEST(LossAndGrad, GradientDescentReducesLossOnSeparableData) {
  for (ModelKind kind : {ModelKind::LR, ModelKind::SVM, ModelKind::MLP}) {
    const ModelSpec spec = ModelSpec::make(kind, 3, 5, {8});
    ModelParams p = init(spec);
    Rng rng(4);
    const Eigen::MatrixXd X = normal_matrix(rng, 40, 3);
    const Eigen::VectorXd y = (X.col(0).array() + X.col(1).array() > 0).cast<double>();
    const double start = classification_loss(spec, forward(p, spec, X), y);
    for (int step = 0; step < 50; ++step) {
      const LossGrad lg = loss_and_grad(p, spec, X, y, Eigen::VectorXd(Eigen::VectorXd::Zero(40)));
      p.assign(p.flatten() - 0.05 / 40 * lg.grad.flatten());
    }
    EXPECT_LT(classification_loss(spec, forward(p, spec, X), y), start) << to_string(kind);
  }
}

TEST(Checkpoint, RoundTripIsExact) {
  const ModelSpec spec = ModelSpec::make(ModelKind::MLP, 6, 77, {5, 3});
  ModelParams p = init(spec);
  p.layers[0].W(0, 0) = 0.1 + 0.2;  // not exactly representable in short decimal
  const std::string text = checkpoint_json(spec, p, R"({"note": "x"})");
  const LoadedCheckpoint back = parse_checkpoint(text);
  EXPECT_EQ(back.params.flatten(), p.flatten());
  EXPECT_EQ(back.spec.hidden_dims, spec.hidden_dims);
  EXPECT_EQ(back.spec.seed, 77u);
  EXPECT_NE(back.extra_json.find("note"), std::string::npos);

  const auto dir = test::temp_dir("ckpt");
  save_checkpoint(dir / "c.json", spec, p);
  EXPECT_EQ(load_checkpoint(dir / "c.json").params.flatten(), p.flatten());
}

TEST(Checkpoint, MalformedInputs) {
  const ModelSpec spec = ModelSpec::make(ModelKind::LR, 2, 0);
  const std::string good = checkpoint_json(spec, init(spec));
  EXPECT_THROW(parse_checkpoint("{"), ParseError);
  EXPECT_THROW(parse_checkpoint(R"({"format": "other", "version": 1})"), ParseError);
  nlohmann::json doc = nlohmann::json::parse(good);
  doc["version"] = 9;
  EXPECT_THROW(parse_checkpoint(doc.dump()), ParseError);
  doc = nlohmann::json::parse(good);
  doc["spec"]["input_dim"] = 3;
  EXPECT_THROW(parse_checkpoint(doc.dump()), ParseError);
  doc = nlohmann::json::parse(good);
  doc["layers"][0]["weights"].erase(0);
  EXPECT_THROW(parse_checkpoint(doc.dump()), ParseError);
  EXPECT_THROW(load_checkpoint("/nonexistent/ckpt.json"), ParseError);
}

TEST(ParamsProperty, FlattenAssignRoundTrip) {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const ModelSpec spec = ModelSpec::make(ModelKind::MLP, 1 + static_cast<Eigen::Index>(rng.index(6)), t,
                                           {1 + static_cast<Eigen::Index>(rng.index(5))});
    ModelParams p = init(spec);
    const Eigen::VectorXd v = normal_vector(rng, p.size());
    p.assign(v);
    EXPECT_EQ(p.flatten(), v);
    EXPECT_THROW(p.assign(Eigen::VectorXd::Zero(p.size() + 1)), DimensionError);
  }
}

}  // namespace
}  // namespace fairrf

#include "fairrf/classifiers.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

#include "fairrf/error.hpp"
#include "fairrf/random.hpp"

namespace fairrf {

using nlohmann::json;

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::LR:
      return "lr";
    case ModelKind::SVM:
      return "svm";
    case ModelKind::MLP:
      return "mlp";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "lr") return ModelKind::LR;
  if (text == "svm") return ModelKind::SVM;
  if (text == "mlp") return ModelKind::MLP;
  throw ConfigError("unknown model kind '" + std::string(text) + "' (expected lr, svm or mlp)");
}

void ModelSpec::validate() const {
  if (input_dim < 1) throw ConfigError("model input_dim must be >= 1");
  if ((kind == ModelKind::MLP) == hidden_dims.empty()) {
    throw ConfigError("hidden_dims must be non-empty exactly when the model is an MLP");
  }
  for (auto h : hidden_dims) {
    if (h < 1) throw ConfigError("hidden layer widths must be >= 1");
  }
}

ModelSpec ModelSpec::make(ModelKind kind, Eigen::Index input_dim, std::uint64_t seed,
                          std::vector<Eigen::Index> hidden) {
  ModelSpec spec{kind, input_dim, kind == ModelKind::MLP ? std::move(hidden) : std::vector<Eigen::Index>{},
                 seed};
  spec.validate();
  return spec;
}

Eigen::Index ModelParams::size() const {
  Eigen::Index n = 0;
  for (const auto& l : layers) n += l.W.size() + l.b.size();
  return n;
}

bool ModelParams::all_finite() const {
  for (const auto& l : layers) {
    if (!l.W.allFinite() || !l.b.allFinite()) return false;
  }
  return true;
}

Eigen::VectorXd ModelParams::flatten() const {
  Eigen::VectorXd flat(size());
  Eigen::Index at = 0;
  for (const auto& l : layers) {
    for (Eigen::Index r = 0; r < l.W.rows(); ++r) {
      flat.segment(at, l.W.cols()) = l.W.row(r).transpose();
      at += l.W.cols();
    }
    flat.segment(at, l.b.size()) = l.b;
    at += l.b.size();
  }
  return flat;
}

void ModelParams::assign(const Eigen::VectorXd& flat) {
  if (flat.size() != size()) throw DimensionError("parameter vector has wrong length");
  Eigen::Index at = 0;
  for (auto& l : layers) {
    for (Eigen::Index r = 0; r < l.W.rows(); ++r) {
      l.W.row(r) = flat.segment(at, l.W.cols()).transpose();
      at += l.W.cols();
    }
    l.b = flat.segment(at, l.b.size());
    at += l.b.size();
  }
}

ModelParams ModelParams::zeros_like(const ModelParams& p) {
  ModelParams z;
  for (const auto& l : p.layers) {
    z.layers.push_back({Eigen::MatrixXd::Zero(l.W.rows(), l.W.cols()), Eigen::VectorXd::Zero(l.b.size())});
  }
  return z;
}

namespace {

std::vector<Eigen::Index> layer_widths(const ModelSpec& spec) {
  std::vector<Eigen::Index> widths{spec.input_dim};
  widths.insert(widths.end(), spec.hidden_dims.begin(), spec.hidden_dims.end());
  widths.push_back(1);
  return widths;
}

Eigen::VectorXd sigmoid(const Eigen::VectorXd& z) {
  return z.unaryExpr([](double v) {
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}

// Activations per layer input: acts[0] = X, acts[l] = relu(pre[l-1]).
struct Tape {
  std::vector<Eigen::MatrixXd> acts;
  std::vector<Eigen::MatrixXd> pre;
};

ForwardResult run_forward(const ModelParams& params, const ModelSpec& spec, const Eigen::MatrixXd& X,
                          Tape* tape) {
  if (X.cols() != spec.input_dim) {
    throw DimensionError("forward: X has " + std::to_string(X.cols()) + " columns, model expects " +
                         std::to_string(spec.input_dim));
  }
  if (params.layers.size() != spec.hidden_dims.size() + 1) {
    throw DimensionError("forward: parameter layers do not match the model spec");
  }
  Eigen::MatrixXd a = X;
  const std::size_t last = params.layers.size() - 1;
  for (std::size_t l = 0; l < last; ++l) {
    const Layer& layer = params.layers[l];
    Eigen::MatrixXd z = a * layer.W.transpose();
    z.rowwise() += layer.b.transpose();
    if (tape) {
      tape->acts.push_back(std::move(a));
      tape->pre.push_back(z);
    }
    a = z.cwiseMax(0.0);
  }
  const Layer& out_layer = params.layers[last];
  ForwardResult out;
  out.margin = (a * out_layer.W.transpose()).col(0).array() + out_layer.b(0);
  out.prob = sigmoid(out.margin);
  if (tape) tape->acts.push_back(std::move(a));
  return out;
}

}  // namespace

ModelParams init(const ModelSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, 0x1a17));
  const auto widths = layer_widths(spec);
  ModelParams params;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const Eigen::Index fan_in = widths[l];
    const Eigen::Index fan_out = widths[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Layer layer{Eigen::MatrixXd(fan_out, fan_in), Eigen::VectorXd::Zero(fan_out)};
    for (Eigen::Index r = 0; r < fan_out; ++r) {
      for (Eigen::Index c = 0; c < fan_in; ++c) layer.W(r, c) = rng.uniform(-limit, limit);
    }
    params.layers.push_back(std::move(layer));
  }
  return params;
}

ForwardResult forward(const ModelParams& params, const ModelSpec& spec, const Eigen::MatrixXd& X) {
  return run_forward(params, spec, X, nullptr);
}

double classification_loss(const ModelSpec& spec, const ForwardResult& out, const Eigen::VectorXd& y) {
  if (spec.kind == ModelKind::SVM) {
    const Eigen::ArrayXd t = 2.0 * y.array() - 1.0;
    return (1.0 - t * out.margin.array()).max(0.0).sum();
  }
  const Eigen::ArrayXd p = out.prob.array().max(kProbClamp).min(1.0 - kProbClamp);
  return -(y.array() * p.log() + (1.0 - y.array()) * (1.0 - p).log()).sum();
}

LossGrad loss_and_grad(const ModelParams& params, const ModelSpec& spec, const Eigen::MatrixXd& X,
                       const Eigen::VectorXd& y, const Eigen::VectorXd& extra_grad_on_yhat) {
  if (extra_grad_on_yhat.size() != X.rows()) {
    throw DimensionError("loss_and_grad: extra_grad_on_yhat has wrong length");
  }
  return loss_and_grad(params, spec, X, y, [&](const Eigen::VectorXd&) { return extra_grad_on_yhat; });
}

LossGrad loss_and_grad(const ModelParams& params, const ModelSpec& spec, const Eigen::MatrixXd& X,
                       const Eigen::VectorXd& y, const YhatGradFn& extra_grad_fn) {
  if (y.size() != X.rows()) throw DimensionError("loss_and_grad: X and y disagree on row count");
  Tape tape;
  LossGrad result;
  result.out = run_forward(params, spec, X, &tape);
  result.loss = classification_loss(spec, result.out, y);
  const Eigen::VectorXd extra_grad_on_yhat =
      extra_grad_fn ? extra_grad_fn(result.out.prob) : Eigen::VectorXd::Zero(X.rows());
  if (extra_grad_on_yhat.size() != X.rows()) {
    throw DimensionError("loss_and_grad: extra gradient has wrong length");
  }

  const Eigen::ArrayXd p = result.out.prob.array();
  Eigen::VectorXd d_margin;
  if (spec.kind == ModelKind::SVM) {
    const Eigen::ArrayXd t = 2.0 * y.array() - 1.0;
    d_margin = ((1.0 - t * result.out.margin.array()) > 0.0).select(-t, 0.0).matrix();
  } else {
    d_margin = (p - y.array()).matrix();
  }
  d_margin.array() += extra_grad_on_yhat.array() * p * (1.0 - p);

  result.grad = ModelParams::zeros_like(params);
  Eigen::MatrixXd delta = d_margin;  // n x 1
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const Eigen::MatrixXd& input = tape.acts[l];
    result.grad.layers[l].W = delta.transpose() * input;
    result.grad.layers[l].b = delta.colwise().sum().transpose();
    if (l == 0) break;
    Eigen::MatrixXd upstream = delta * params.layers[l].W;
    delta = (tape.pre[l - 1].array() > 0.0).select(upstream, 0.0);
  }
  return result;
}

std::string checkpoint_json(const ModelSpec& spec, const ModelParams& params, const std::string& extra_json) {
  json doc;
  doc["format"] = "fairrf-checkpoint";
  doc["version"] = 1;
  doc["spec"] = {{"kind", std::string(to_string(spec.kind))},
                 {"input_dim", spec.input_dim},
                 {"hidden_dims", spec.hidden_dims},
                 {"seed", spec.seed}};
  json layers = json::array();
  for (const auto& l : params.layers) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.W.size()));
    for (Eigen::Index r = 0; r < l.W.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.W.cols(); ++c) w.push_back(l.W(r, c));
    }
    layers.push_back({{"rows", l.W.rows()},
                      {"cols", l.W.cols()},
                      {"weights", w},
                      {"bias", std::vector<double>(l.b.data(), l.b.data() + l.b.size())}});
  }
  doc["layers"] = std::move(layers);
  doc["extra"] = extra_json.empty() ? json::object() : json::parse(extra_json);
  return doc.dump(1);
}

void save_checkpoint(const std::filesystem::path& path, const ModelSpec& spec, const ModelParams& params,
                     const std::string& extra_json) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint: " + path.string());
  out << checkpoint_json(spec, params, extra_json) << '\n';
}

LoadedCheckpoint parse_checkpoint(const std::string& text) {
  LoadedCheckpoint out;
  try {
    const json doc = json::parse(text);
    if (doc.at("format") != "fairrf-checkpoint") throw ParseError("not a fairrf checkpoint");
    if (doc.at("version") != 1) throw ParseError("unsupported checkpoint version");
    const json& spec = doc.at("spec");
    out.spec.kind = parse_model_kind(spec.at("kind").get<std::string>());
    out.spec.input_dim = spec.at("input_dim").get<Eigen::Index>();
    out.spec.hidden_dims = spec.at("hidden_dims").get<std::vector<Eigen::Index>>();
    out.spec.seed = spec.at("seed").get<std::uint64_t>();
    out.spec.validate();
    for (const json& l : doc.at("layers")) {
      const auto rows = l.at("rows").get<Eigen::Index>();
      const auto cols = l.at("cols").get<Eigen::Index>();
      const auto w = l.at("weights").get<std::vector<double>>();
      const auto b = l.at("bias").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(w.size()) != rows * cols || static_cast<Eigen::Index>(b.size()) != rows) {
        throw ParseError("checkpoint layer has inconsistent sizes");
      }
      Layer layer{Eigen::MatrixXd(rows, cols), Eigen::VectorXd(rows)};
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) layer.W(r, c) = w[static_cast<std::size_t>(r * cols + c)];
        layer.b(r) = b[static_cast<std::size_t>(r)];
      }
      out.params.layers.push_back(std::move(layer));
    }
    const auto widths = layer_widths(out.spec);
    if (out.params.layers.size() + 1 != widths.size()) throw ParseError("checkpoint layer count mismatch");
    for (std::size_t l = 0; l < out.params.layers.size(); ++l) {
      if (out.params.layers[l].W.cols() != widths[l] || out.params.layers[l].W.rows() != widths[l + 1]) {
        throw ParseError("checkpoint layer shape does not match spec");
      }
    }
    out.extra_json = doc.contains("extra") ? doc["extra"].dump() : "{}";
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what());
  }
  return out;
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open checkpoint: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str());
}

}  // namespace fairrf

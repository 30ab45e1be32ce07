#include "fairrf/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "fairrf/error.hpp"
#include "fairrf/fair_objective.hpp"
#include "fairrf/metrics.hpp"
#include "fairrf/random.hpp"

namespace fairrf {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// --- variants --------------------------------------------------------------

namespace {

struct VariantName {
  Variant v;
  std::string_view tag;
  std::string_view display;
};

constexpr VariantName kVariants[] = {
    {Variant::Vanilla, "vanilla", "Vanilla"},
    {Variant::FairRF, "fairrf", "FairRF"},
    {Variant::FixLambda, "fix-lambda", "Fix-lambda"},
    {Variant::RemoveR, "remove-r", "RemoveR"},
    {Variant::ConstrainAll, "constrain-all", "ConstrainAll"},
    {Variant::Random, "random", "Random"},
    {Variant::Noisy, "noisy", "Noisy"},
    {Variant::Top1, "top-1", "Top-1"},
    {Variant::ConstrainS, "constrain-s", "ConstrainS"},
};

const VariantName& lookup(Variant v) {
  for (const auto& e : kVariants) {
    if (e.v == v) return e;
  }
  throw Error("unknown variant");
}

bool needs_related(Variant v) {
  return v == Variant::FairRF || v == Variant::FixLambda || v == Variant::RemoveR || v == Variant::Random ||
         v == Variant::Noisy || v == Variant::Top1;
}

}  // namespace

std::string_view to_string(Variant v) { return lookup(v).tag; }
std::string_view display_name(Variant v) { return lookup(v).display; }

Variant parse_variant(std::string_view tag) {
  for (const auto& e : kVariants) {
    if (e.tag == tag) return e.v;
  }
  throw ConfigError("unknown variant '" + std::string(tag) + "'");
}

// --- config parsing --------------------------------------------------------

namespace {

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
T get(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + ": key '" + key + "' has the wrong type");
  }
}

template <typename T>
void get_opt(const json& j, const char* key, const std::string& where, T& out) {
  if (j.contains(key)) out = get<T>(j, key, where);
}

std::string read_text(const fs::path& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(std::string("cannot open ") + what + " '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json(const std::string& text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(where + ": invalid JSON (" + e.what() + ")");
  }
}

FeatureKind parse_kind(const std::string& s, const std::string& where) {
  if (s == "categorical") return FeatureKind::Categorical;
  if (s == "continuous") return FeatureKind::Continuous;
  throw ConfigError(where + ": kind must be 'categorical' or 'continuous', got '" + s + "'");
}

}  // namespace

fs::path resolve_data_path(const std::string& csv, const fs::path& config_dir) {
  const fs::path p(csv);
  if (p.is_absolute()) return p;
  if (const char* env = std::getenv(kDataDirEnv); env != nullptr && *env != '\0') return fs::path(env) / p;
  return (config_dir / ".." / "data" / p).lexically_normal();
}

DatasetConfig parse_dataset_config(const std::string& text, const fs::path& config_dir) {
  const std::string where = "dataset config";
  const json j = parse_json(text, where);
  check_keys(j, {"name", "csv", "features", "label", "sensitive", "related", "missing_tokens"}, where);

  DatasetConfig out;
  out.name = get<std::string>(j, "name", where);
  out.csv = resolve_data_path(get<std::string>(j, "csv", where), config_dir);

  const json features = j.contains("features") ? j.at("features") : json();
  if (!features.is_array() || features.empty()) throw ConfigError(where + ": 'features' must be a non-empty array");
  for (const auto& f : features) {
    check_keys(f, {"name", "kind"}, where + " feature");
    out.schema.features.push_back({get<std::string>(f, "name", where + " feature"),
                                   parse_kind(get<std::string>(f, "kind", where + " feature"), where),
                                   FeatureRole::Input});
  }

  const json label = j.contains("label") ? j.at("label") : json();
  check_keys(label, {"name", "positive", "negative"}, where + " label");
  out.schema.features.push_back({get<std::string>(label, "name", where + " label"), FeatureKind::Categorical,
                                 FeatureRole::Label});
  out.schema.label.positive = get<std::vector<std::string>>(label, "positive", where + " label");
  get_opt(label, "negative", where + " label", out.schema.label.negative);

  const json sensitive = j.contains("sensitive") ? j.at("sensitive") : json();
  check_keys(sensitive, {"name", "group_one"}, where + " sensitive");
  out.schema.features.push_back({get<std::string>(sensitive, "name", where + " sensitive"),
                                 FeatureKind::Categorical, FeatureRole::Sensitive});
  get_opt(sensitive, "group_one", where + " sensitive", out.schema.sensitive.group_one);

  get_opt(j, "related", where, out.related);
  get_opt(j, "missing_tokens", where, out.schema.missing_tokens);
  out.schema.validate();
  return out;
}

DatasetConfig load_dataset_config(const fs::path& path) {
  return parse_dataset_config(read_text(path, "dataset config"), path.parent_path());
}

void ExperimentConfig::validate() const {
  train.validate();
  dataset.schema.validate();
  if (!synthetic && !fs::exists(dataset.csv)) {
    throw ConfigError("dataset file not found: '" + dataset.csv.string() + "'");
  }
  ModelSpec::make(model, 1, 0, model == ModelKind::MLP ? hidden_dims : std::vector<Eigen::Index>{});
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ConfigError("seeds must be distinct");
  }
  if (workers < 1) throw ConfigError("workers must be >= 1");
  for (double r : split_ratios) {
    if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError("split_ratios must be positive");
  }
  if (needs_related(variant) && related.empty()) {
    throw ConfigError(std::string("variant '") + std::string(to_string(variant)) + "' needs related features");
  }
  std::set<std::string> seen;
  for (const auto& name : related) {
    const FeatureSchema* f = dataset.schema.find(name);
    if (f == nullptr) throw ConfigError("related feature '" + name + "' is not in the dataset schema");
    if (f->role != FeatureRole::Input) throw ConfigError("related feature '" + name + "' is not an input");
    if (!seen.insert(name).second) throw ConfigError("related feature '" + name + "' listed twice");
  }
  if (lambda0) {
    if (lambda0->size() != static_cast<Eigen::Index>(related.size())) {
      throw ConfigError("lambda0 length differs from the number of related features");
    }
    if (!on_simplex(*lambda0)) throw ConfigError("lambda0 must lie on the probability simplex");
  }
  if (variant == Variant::ConstrainS && !allow_sensitive_in_training) {
    throw ConfigError("variant 'constrain-s' trains on the sensitive attribute; set allow_sensitive_in_training");
  }
  if (variant == Variant::Noisy && related.size() >= dataset.schema.input_names().size()) {
    throw ConfigError("variant 'noisy' needs at least one input outside the related set");
  }
}

ExperimentConfig synthetic_experiment(const SyntheticOptions& options, std::uint64_t data_seed) {
  ExperimentConfig cfg;
  cfg.synthetic = SyntheticSource{options, data_seed};
  cfg.dataset.name = "synthetic";
  cfg.dataset.schema = synthetic_schema(options);
  cfg.dataset.related = {"p1", "p2"};
  cfg.related = cfg.dataset.related;
  return cfg;
}

ExperimentConfig parse_experiment_config(const std::string& text, const fs::path& config_dir) {
  const std::string where = "experiment config";
  const json j = parse_json(text, where);
  try {
    check_keys(j, {"dataset", "variant", "model", "train", "related", "lambda0", "seeds", "output_dir",
                   "split_ratios", "workers", "allow_sensitive_in_training"},
               where);

    ExperimentConfig cfg;
    if (!j.contains("dataset")) throw ConfigError(where + ": missing key 'dataset'");
    const json& ds = j.at("dataset");
    if (ds.is_string()) {
      fs::path p(ds.get<std::string>());
      if (p.is_relative()) p = config_dir / p;
      cfg.dataset = load_dataset_config(p);
      cfg.related = cfg.dataset.related;
    } else if (ds.is_object() && ds.contains("synthetic")) {
      check_keys(ds, {"synthetic"}, where + " dataset");
      const json& syn = ds.at("synthetic");
      check_keys(syn, {"rows", "label_shift", "case_study", "seed"}, where + " synthetic");
      SyntheticOptions opt;
      get_opt(syn, "rows", where + " synthetic", opt.rows);
      get_opt(syn, "label_shift", where + " synthetic", opt.label_shift);
      get_opt(syn, "case_study", where + " synthetic", opt.case_study);
      std::uint64_t seed = 0;
      get_opt(syn, "seed", where + " synthetic", seed);
      cfg = synthetic_experiment(opt, seed);
    } else {
      throw ConfigError(where + ": 'dataset' must be a config path or {\"synthetic\": {...}}");
    }

    if (j.contains("variant")) cfg.variant = parse_variant(get<std::string>(j, "variant", where));
    if (j.contains("model")) {
      const json& m = j.at("model");
      check_keys(m, {"kind", "hidden_dims"}, where + " model");
      if (m.contains("kind")) cfg.model = parse_model_kind(get<std::string>(m, "kind", where + " model"));
      get_opt(m, "hidden_dims", where + " model", cfg.hidden_dims);
      if (cfg.model != ModelKind::MLP && !m.contains("hidden_dims")) cfg.hidden_dims.clear();
    }
    if (j.contains("train")) {
      const json& t = j.at("train");
      const std::string tw = where + " train";
      check_keys(t, {"eta", "beta", "learning_rate", "pretrain_epochs", "max_epochs", "batch_size",
                     "model_train_steps", "learn_lambda", "early_stop_patience", "min_improvement",
                     "selection_penalty_slack"},
                 tw);
      get_opt(t, "eta", tw, cfg.train.eta);
      get_opt(t, "beta", tw, cfg.train.beta);
      get_opt(t, "learning_rate", tw, cfg.train.learning_rate);
      get_opt(t, "pretrain_epochs", tw, cfg.train.pretrain_epochs);
      get_opt(t, "max_epochs", tw, cfg.train.max_epochs);
      get_opt(t, "batch_size", tw, cfg.train.batch_size);
      if (t.contains("model_train_steps")) cfg.train.model_train_steps = get<int>(t, "model_train_steps", tw);
      get_opt(t, "learn_lambda", tw, cfg.train.learn_lambda);
      get_opt(t, "early_stop_patience", tw, cfg.train.early_stop_patience);
      get_opt(t, "min_improvement", tw, cfg.train.min_improvement);
      get_opt(t, "selection_penalty_slack", tw, cfg.train.selection_penalty_slack);
    }
    get_opt(j, "related", where, cfg.related);
    if (j.contains("lambda0")) {
      const auto v = get<std::vector<double>>(j, "lambda0", where);
      cfg.lambda0 = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    get_opt(j, "seeds", where, cfg.seeds);
    if (j.contains("output_dir")) cfg.output_dir = get<std::string>(j, "output_dir", where);
    get_opt(j, "split_ratios", where, cfg.split_ratios);
    get_opt(j, "workers", where, cfg.workers);
    get_opt(j, "allow_sensitive_in_training", where, cfg.allow_sensitive_in_training);
    if (cfg.output_dir.empty()) cfg.output_dir = fs::path("runs") / std::string(to_string(cfg.variant));
    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  return parse_experiment_config(read_text(path, "experiment config"), path.parent_path());
}

Dataset load_dataset(const ExperimentConfig& cfg) {
  if (cfg.synthetic) return make_synthetic_bias(cfg.synthetic->options, cfg.synthetic->seed);
  return load_csv(cfg.dataset.csv, cfg.dataset.schema);
}

std::uint64_t split_seed(std::uint64_t seed) { return derive_seed(seed, 1); }

// --- single run ------------------------------------------------------------

namespace {

Dataset drop_features(const Dataset& data, const std::vector<std::string>& names) {
  Dataset out = data;
  out.schema.features.clear();
  out.columns.clear();
  for (std::size_t i = 0; i < data.schema.features.size(); ++i) {
    const auto& f = data.schema.features[i];
    if (std::find(names.begin(), names.end(), f.name) != names.end()) continue;
    out.schema.features.push_back(f);
    out.columns.push_back(data.columns[i]);
  }
  return out;
}

struct Prepared {
  TableSchema schema;
  EncodedDataset train, eval, test;
};

Prepared prepare(const ExperimentConfig& cfg, const Dataset& data, std::uint64_t seed,
                 const std::vector<std::string>& dropped) {
  const Dataset base = dropped.empty() ? data : drop_features(data, dropped);
  DataSplit parts = split(base, cfg.split_ratios, split_seed(seed));
  const Dataset others[] = {parts.eval, parts.test};
  auto enc = encode(parts.train, others);
  if (!enc[0].s || !enc[1].s || !enc[2].s) throw Error("dataset has no sensitive attribute for evaluation");
  return {base.schema, std::move(enc[0]), std::move(enc[1]), std::move(enc[2])};
}

ProxyFeatures sensitive_proxy(const EncodedDataset& d, const std::string& name) {
  ProxyFeatures p;
  p.names = {name};
  const Eigen::VectorXi& s = *d.s;
  const int groups = static_cast<int>(std::max<std::size_t>(d.group_names.size(), 2));
  if (groups == 2) {
    p.values = s.cast<double>();
    p.groups = {{0}};
  } else {
    p.values = Eigen::MatrixXd::Zero(s.size(), groups);
    std::vector<Eigen::Index> cols;
    for (int g = 0; g < groups; ++g) {
      p.values.col(g) = (s.array() == g).cast<double>().matrix();
      cols.push_back(g);
    }
    p.groups = {cols};
  }
  return p;
}

std::vector<std::string> usable_inputs(const TableSchema& schema, const EncodedDataset& train) {
  std::vector<std::string> out;
  for (const auto& name : schema.input_names()) {
    if (train.group(name).count > 0) out.push_back(name);
  }
  return out;
}

struct Fit {
  ModelSpec spec;
  TrainResult result;
};

Fit fit(const ExperimentConfig& cfg, const Prepared& p, ProxyFeatures train_proxies, ProxyFeatures eval_proxies,
        const Eigen::VectorXd& lambda0, bool learn_lambda, std::uint64_t seed) {
  const ModelSpec spec = ModelSpec::make(cfg.model, p.train.data.X.cols(), derive_seed(seed, 2),
                                         cfg.model == ModelKind::MLP ? cfg.hidden_dims : std::vector<Eigen::Index>{});
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(seed, 3);
  tc.learn_lambda = learn_lambda;

  TrainingData data{p.train.data, p.eval.data, std::move(train_proxies), std::move(eval_proxies)};
  const Eigen::MatrixXd& eval_X = p.eval.data.X;
  const Eigen::VectorXd& eval_y = p.eval.data.y;
  const Eigen::VectorXi& eval_s = *p.eval.s;
  EpochMonitor monitor = [&](const ModelParams& params) {
    EpochProbe probe;
    const Eigen::VectorXd yhat = forward(params, spec, eval_X).prob;
    try {
      probe.delta_eo = delta_eo(yhat, eval_y, eval_s);
    } catch (const UndefinedMetricError&) {
    }
    try {
      probe.delta_dp = delta_dp(yhat, eval_s);
    } catch (const UndefinedMetricError&) {
    }
    return probe;
  };

  Trainer trainer(spec, tc);
  trainer.pretrain(data, monitor);
  return {spec, trainer.train_fairrf(data, lambda0, monitor)};
}

}  // namespace

SeedOutcome run_seed(const ExperimentConfig& cfg, const Dataset& data, std::uint64_t seed) {
  SeedOutcome out;
  out.seed = seed;
  if (cfg.variant == Variant::RemoveR) out.dropped_features = cfg.related;
  const Prepared p = prepare(cfg, data, seed, out.dropped_features);
  Rng rng(derive_seed(seed, 4));

  const std::vector<std::string> inputs = usable_inputs(p.schema, p.train);
  std::vector<std::string> proxies;
  bool learn = cfg.train.learn_lambda;
  std::optional<Eigen::VectorXd> lambda0 = cfg.lambda0;
  switch (cfg.variant) {
    case Variant::Vanilla:
    case Variant::RemoveR:
    case Variant::ConstrainS:
      break;
    case Variant::FairRF:
      proxies = cfg.related;
      break;
    case Variant::FixLambda:
      proxies = cfg.related;
      learn = false;
      lambda0.reset();
      break;
    case Variant::ConstrainAll:
      proxies = inputs;
      lambda0.reset();
      break;
    case Variant::Random: {
      std::vector<std::string> pool = inputs;
      rng.shuffle(pool);
      pool.resize(std::min(pool.size(), cfg.related.size()));
      proxies = pool;
      lambda0.reset();
      break;
    }
    case Variant::Noisy: {
      proxies = cfg.related;
      std::vector<std::string> others;
      for (const auto& name : inputs) {
        if (std::find(proxies.begin(), proxies.end(), name) == proxies.end()) others.push_back(name);
      }
      if (others.empty()) throw Error("noisy variant: no non-related input to swap in");
      const auto slot = rng.index(proxies.size());
      proxies[slot] = others[rng.index(others.size())];
      break;
    }
    case Variant::Top1:
      break;
  }

  Fit chosen;
  if (cfg.variant == Variant::Top1) {
    // Single-feature FairRF per candidate; keep the lowest eval dEO (ties: higher eval accuracy).
    std::optional<std::pair<double, double>> best;
    for (const auto& name : cfg.related) {
      const std::vector<std::string> one{name};
      const RelatedFeatureSet rel = resolve_related(p.schema, p.train, one);
      Fit f = fit(cfg, p, gather_proxies(p.train.data.X, rel), gather_proxies(p.eval.data.X, rel), rel.lambda0,
                  learn, seed);
      const Eigen::VectorXd yhat = forward(f.result.selected_params, f.spec, p.eval.data.X).prob;
      const double eo = delta_eo(yhat, p.eval.data.y, *p.eval.s);
      const double acc = accuracy(yhat, p.eval.data.y);
      if (!best || eo < best->first || (eo == best->first && acc > best->second)) {
        best = {eo, acc};
        chosen = std::move(f);
        proxies = one;
      }
    }
  } else if (cfg.variant == Variant::ConstrainS) {
    const std::string sname = [&] {
      for (const auto& f : p.schema.features) {
        if (f.role == FeatureRole::Sensitive) return f.name;
      }
      return std::string("s");
    }();
    ProxyFeatures tp = sensitive_proxy(p.train, sname);
    ProxyFeatures ep = sensitive_proxy(p.eval, sname);
    chosen = fit(cfg, p, std::move(tp), std::move(ep), Eigen::VectorXd::Ones(1), learn, seed);
    proxies = {sname};
  } else if (!proxies.empty()) {
    const RelatedFeatureSet rel = resolve_related(p.schema, p.train, proxies, lambda0);
    chosen = fit(cfg, p, gather_proxies(p.train.data.X, rel), gather_proxies(p.eval.data.X, rel), rel.lambda0,
                 learn, seed);
  } else {
    chosen = fit(cfg, p, {}, {}, Eigen::VectorXd(), learn, seed);
  }

  out.spec = chosen.spec;
  out.params = chosen.result.selected_params;
  out.proxies = proxies;
  out.lambda = chosen.result.lambda;
  out.trace = chosen.result.trace;
  out.eval = evaluate_predictions(forward(out.params, out.spec, p.eval.data.X).prob, p.eval.data.y, *p.eval.s);
  out.test = evaluate_predictions(forward(out.params, out.spec, p.test.data.X).prob, p.test.data.y, *p.test.s);
  return out;
}

MetricSet evaluate_checkpoint(const ExperimentConfig& cfg, const Dataset& data, const LoadedCheckpoint& ckpt,
                              std::string_view split_name) {
  json extra;
  try {
    extra = ckpt.extra_json.empty() ? json::object() : json::parse(ckpt.extra_json);
  } catch (const json::exception&) {
    throw ParseError("checkpoint: malformed extra section");
  }
  if (!extra.contains("seed")) throw ParseError("checkpoint: no seed recorded; cannot rebuild the split");
  const auto seed = extra.at("seed").get<std::uint64_t>();
  std::vector<std::string> dropped;
  if (extra.contains("dropped_features")) dropped = extra.at("dropped_features").get<std::vector<std::string>>();
  if (extra.contains("split_ratios")) {
    const auto r = extra.at("split_ratios").get<std::array<double, 3>>();
    if (r != cfg.split_ratios) throw ConfigError("checkpoint was trained with different split_ratios");
  }
  const Prepared p = prepare(cfg, data, seed, dropped);
  const EncodedDataset* d = nullptr;
  if (split_name == "test") {
    d = &p.test;
  } else if (split_name == "eval") {
    d = &p.eval;
  } else if (split_name == "train") {
    d = &p.train;
  } else {
    throw ConfigError("split must be train, eval or test");
  }
  if (d->data.X.cols() != ckpt.spec.input_dim) {
    throw DimensionError("checkpoint input_dim does not match the encoded dataset");
  }
  return evaluate_predictions(forward(ckpt.params, ckpt.spec, d->data.X).prob, d->data.y, *d->s);
}

// --- parallel --------------------------------------------------------------

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto threads = static_cast<std::size_t>(std::max(1, workers));
  if (threads == 1 || n <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(threads, n); ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// --- outputs ---------------------------------------------------------------

namespace {

void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

ordered_json metrics_json(const MetricSet& m) {
  ordered_json j;
  j["accuracy"] = m.accuracy;
  j["delta_eo"] = m.delta_eo;
  j["delta_dp"] = m.delta_dp;
  j["delta_eo_hard"] = m.delta_eo_hard;
  j["delta_dp_hard"] = m.delta_dp_hard;
  return j;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class Manifest {
 public:
  explicit Manifest(fs::path root) : root_(std::move(root)) {}

  void write(const fs::path& rel, const std::string& text) {
    write_file(root_ / rel, text);
    std::lock_guard lock(mu_);
    files_.insert(rel.generic_string());
  }

  void finish(const std::string& command) {
    files_.insert("manifest.json");
    ordered_json j;
    j["command"] = command;
    j["files"] = std::vector<std::string>(files_.begin(), files_.end());
    j["metadata"] = {{"created_utc", utc_timestamp()}};
    write_file(root_ / "manifest.json", j.dump(2) + "\n");
  }

 private:
  fs::path root_;
  std::mutex mu_;
  std::set<std::string> files_;
};

void write_seed(Manifest& manifest, const fs::path& prefix, const ExperimentConfig& cfg, const SeedOutcome& o) {
  const fs::path dir = prefix / ("seed_" + std::to_string(o.seed));
  ordered_json extra;
  extra["seed"] = o.seed;
  extra["variant"] = to_string(cfg.variant);
  extra["dataset"] = cfg.dataset.name;
  extra["proxies"] = o.proxies;
  extra["dropped_features"] = o.dropped_features;
  extra["lambda"] = to_vector(o.lambda);
  extra["split_ratios"] = cfg.split_ratios;
  manifest.write(dir / "checkpoint.json", checkpoint_json(o.spec, o.params, extra.dump()));
  manifest.write(dir / "trace.jsonl", trace_jsonl(o.trace));

  ordered_json m;
  m["seed"] = o.seed;
  m["variant"] = to_string(cfg.variant);
  m["eta"] = cfg.train.eta;
  m["beta"] = cfg.train.beta;
  m["proxies"] = o.proxies;
  m["lambda"] = to_vector(o.lambda);
  m["selected_epoch"] = o.trace.selected_epoch;
  m["stop_reason"] = o.trace.stop_reason;
  m["eval"] = metrics_json(o.eval);
  m["test"] = metrics_json(o.test);
  manifest.write(dir / "metrics.json", m.dump(2) + "\n");
}

FairnessReport write_run(Manifest& manifest, const fs::path& prefix, const ExperimentConfig& cfg,
                         const std::vector<SeedOutcome>& outcomes) {
  std::vector<MetricSet> tests;
  std::vector<std::uint64_t> seeds;
  for (const auto& o : outcomes) {
    write_seed(manifest, prefix, cfg, o);
    tests.push_back(o.test);
    seeds.push_back(o.seed);
  }
  FairnessReport report = aggregate(tests, seeds);
  const std::string label(display_name(cfg.variant));
  manifest.write(prefix / "report.json", report_json(report, label) + "\n");
  manifest.write(prefix / "report.txt", format_table({{label, report}}));
  return report;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

FairnessReport run_train(const ExperimentConfig& cfg) {
  cfg.validate();
  const Dataset data = load_dataset(cfg);
  std::vector<SeedOutcome> outcomes(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), cfg.workers,
               [&](std::size_t i) { outcomes[i] = run_seed(cfg, data, cfg.seeds[i]); });
  Manifest manifest(cfg.output_dir);
  FairnessReport report = write_run(manifest, {}, cfg, outcomes);
  manifest.finish("train");
  return report;
}

std::string sweep_cell_name(double eta, double beta) { return "eta_" + fmt(eta) + "_beta_" + fmt(beta); }

std::string sweep_tsv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "eta\tbeta\tseed\taccuracy\tdelta_eo\tdelta_dp\tstatus\n";
  for (const auto& r : rows) {
    out << fmt(r.eta) << '\t' << fmt(r.beta) << '\t' << r.seed << '\t';
    if (r.test) {
      out << fmt(r.test->accuracy) << '\t' << fmt(r.test->delta_eo) << '\t' << fmt(r.test->delta_dp);
    } else {
      out << "\t\t";
    }
    std::string status = r.status;
    std::replace(status.begin(), status.end(), '\t', ' ');
    std::replace(status.begin(), status.end(), '\n', ' ');
    out << '\t' << status << '\n';
  }
  return out.str();
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& base, const std::vector<double>& etas,
                                const std::vector<double>& betas) {
  if (etas.empty() || betas.empty()) throw ConfigError("sweep grid must not be empty");
  base.validate();
  std::vector<ExperimentConfig> cells;
  for (double eta : etas) {
    for (double beta : betas) {
      ExperimentConfig c = base;
      c.train.eta = eta;
      c.train.beta = beta;
      c.validate();
      cells.push_back(std::move(c));
    }
  }
  const Dataset data = load_dataset(base);
  const std::size_t nseeds = base.seeds.size();
  std::vector<std::optional<SeedOutcome>> outcomes(cells.size() * nseeds);
  std::vector<std::string> errors(outcomes.size());
  parallel_for(outcomes.size(), base.workers, [&](std::size_t i) {
    try {
      outcomes[i] = run_seed(cells[i / nseeds], data, base.seeds[i % nseeds]);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  Manifest manifest(base.output_dir);
  std::vector<SweepRow> rows;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    std::vector<SeedOutcome> ok;
    for (std::size_t s = 0; s < nseeds; ++s) {
      const auto& o = outcomes[c * nseeds + s];
      SweepRow row{cells[c].train.eta, cells[c].train.beta, base.seeds[s], std::nullopt, "ok"};
      if (o) {
        row.test = o->test;
        ok.push_back(*o);
      } else {
        row.status = "error: " + errors[c * nseeds + s];
      }
      rows.push_back(std::move(row));
    }
    if (!ok.empty()) write_run(manifest, sweep_cell_name(cells[c].train.eta, cells[c].train.beta), cells[c], ok);
  }
  manifest.write("sweep.tsv", sweep_tsv(rows));
  manifest.finish("sweep");
  return rows;
}

std::vector<std::pair<std::string, FairnessReport>> run_compare(const ExperimentConfig& base,
                                                                const std::vector<Variant>& variants) {
  if (variants.empty()) throw ConfigError("compare needs at least one variant");
  std::vector<ExperimentConfig> cfgs;
  for (Variant v : variants) {
    ExperimentConfig c = base;
    c.variant = v;
    c.validate();
    cfgs.push_back(std::move(c));
  }
  const Dataset data = load_dataset(base);
  const std::size_t nseeds = base.seeds.size();
  std::vector<SeedOutcome> outcomes(cfgs.size() * nseeds);
  parallel_for(outcomes.size(), base.workers, [&](std::size_t i) {
    outcomes[i] = run_seed(cfgs[i / nseeds], data, base.seeds[i % nseeds]);
  });

  Manifest manifest(base.output_dir);
  std::vector<std::pair<std::string, FairnessReport>> table;
  ordered_json all = ordered_json::array();
  for (std::size_t v = 0; v < cfgs.size(); ++v) {
    const std::vector<SeedOutcome> mine(outcomes.begin() + static_cast<std::ptrdiff_t>(v * nseeds),
                                        outcomes.begin() + static_cast<std::ptrdiff_t>((v + 1) * nseeds));
    const FairnessReport r = write_run(manifest, std::string(to_string(cfgs[v].variant)), cfgs[v], mine);
    const std::string label(display_name(cfgs[v].variant));
    table.emplace_back(label, r);
    all.push_back(ordered_json::parse(report_json(r, label)));
  }
  manifest.write("compare.txt", format_table(table));
  manifest.write("compare.json", all.dump(2) + "\n");
  manifest.finish("compare");
  return table;
}

}  // namespace fairrf

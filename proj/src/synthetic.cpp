#include "fairrf/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "fairrf/error.hpp"
#include "fairrf/random.hpp"

namespace fairrf {

namespace {

std::vector<std::string> input_names(const SyntheticOptions& options) {
  std::vector<std::string> names{"x1", "x2", "x3", "p1", "p2"};
  if (options.case_study) {
    names.push_back("a");
    names.push_back("b");
  }
  return names;
}

}  // namespace

TableSchema synthetic_schema(const SyntheticOptions& options) {
  TableSchema schema;
  for (const auto& name : input_names(options)) {
    schema.features.push_back({name, FeatureKind::Continuous, FeatureRole::Input});
  }
  schema.features.push_back({"y", FeatureKind::Categorical, FeatureRole::Label});
  schema.features.push_back({"s", FeatureKind::Categorical, FeatureRole::Sensitive});
  schema.label.positive = {"1"};
  schema.label.negative = {"0"};
  schema.sensitive.group_one = {"1"};
  return schema;
}

std::string synthetic_csv(const SyntheticOptions& options, std::uint64_t seed) {
  if (options.rows < 3) throw ConfigError("synthetic data needs at least 3 rows");
  Rng rng(seed);
  std::ostringstream out;
  for (const auto& name : input_names(options)) out << name << ',';
  out << "y,s\n";
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf << ',';
  };
  for (Eigen::Index i = 0; i < options.rows; ++i) {
    const bool s = rng.bernoulli(0.5);
    const double t = s ? 1.0 : -1.0;
    const double x1 = rng.normal(), x2 = rng.normal(), x3 = rng.normal();
    const double p1 = t + 0.7 * rng.normal();
    const double p2 = t + rng.normal();
    const double logit = 1.5 * x1 + x2 - 0.5 * x3 + options.label_shift * t;
    const bool y = rng.bernoulli(1.0 / (1.0 + std::exp(-logit)));
    put(x1);
    put(x2);
    put(x3);
    put(p1);
    put(p2);
    if (options.case_study) {
      put(x1 + 0.2 * t + 0.5 * rng.normal());
      put(t + 0.5 * rng.normal());
    }
    out << (y ? '1' : '0') << ',' << (s ? '1' : '0') << '\n';
  }
  return out.str();
}

Dataset make_synthetic_bias(const SyntheticOptions& options, std::uint64_t seed) {
  std::istringstream in(synthetic_csv(options, seed));
  return load_csv(in, synthetic_schema(options), "synthetic");
}

}  // namespace fairrf

#pragma once

// Generated benchmark with a known hidden binary s. With t = 2s - 1:
//   x1, x2, x3 ~ N(0, 1)                  legitimate inputs
//   p1 = t + N(0, 0.7^2), p2 = t + N(0, 1)  proxies of s
//   P(y = 1) = sigmoid(1.5 x1 + x2 - 0.5 x3 + label_shift * t)
// With case_study set, two more inputs are added:
//   a = x1 + 0.2 t + N(0, 0.5^2)  strongly tied to y, weakly to s
//   b = t + N(0, 0.5^2)           weakly tied to y, strongly to s

#include <cstdint>
#include <string>

#include "fairrf/dataset.hpp"

namespace fairrf {

struct SyntheticOptions {
  Eigen::Index rows = 5000;
  double label_shift = 0.75;
  bool case_study = false;
};

/// Schema of the generated table: continuous inputs, label "y" (positive "1"),
/// sensitive "s" (group one "1").
TableSchema synthetic_schema(const SyntheticOptions& options);

/// CSV text with a header row; reproducible from the seed.
std::string synthetic_csv(const SyntheticOptions& options, std::uint64_t seed);

Dataset make_synthetic_bias(const SyntheticOptions& options, std::uint64_t seed);

}  // namespace fairrf

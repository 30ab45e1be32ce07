#include "fairrf/fair_objective.hpp"

namespace fairrf {

ProxyFeatures ProxyFeatures::rows(std::span<const Eigen::Index> idx) const {
  const std::vector<Eigen::Index> picked(idx.begin(), idx.end());
  return {names, values(picked, Eigen::all), groups};
}

ProxyFeatures gather_proxies(const Eigen::MatrixXd& X, const RelatedFeatureSet& related) {
  ProxyFeatures out;
  out.names = related.features;
  std::vector<Eigen::Index> columns;
  for (const auto& group : related.column_groups) {
    std::vector<Eigen::Index> local;
    for (Eigen::Index col : group) {
      if (col < 0 || col >= X.cols()) throw DimensionError("related column index out of range");
      local.push_back(static_cast<Eigen::Index>(columns.size()));
      columns.push_back(col);
    }
    out.groups.push_back(std::move(local));
  }
  out.values = X(Eigen::all, columns);
  return out;
}

}  // namespace fairrf

#include "cwefs/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "cwefs/errors.hpp"

namespace cwefs {

Eigen::MatrixXd Laplacian::matrix() const {
  Eigen::MatrixXd l = -affinity;
  l.diagonal() += degree;
  return l;
}

AffinityGraph build_affinity(const Eigen::MatrixXd& points, int q, double sigma) {
  const auto n = points.cols();
  if (n < 2) throw ConfigError("affinity graph needs at least 2 instances");
  if (q < 1 || q > n - 1) {
    throw ConfigError("neighbour count q=" + std::to_string(q) + " outside [1, " +
                      std::to_string(n - 1) + "]");
  }
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("kernel width sigma must be positive");
  if (!points.allFinite()) throw DataError("affinity graph input contains non-finite values");

  Eigen::MatrixXd dist2(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    dist2(j, j) = 0.0;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double d = (points.col(i) - points.col(j)).squaredNorm();
      dist2(i, j) = d;
      dist2(j, i) = d;
    }
  }

  // neighbour(i, j) marks j within the q nearest of i.
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> neighbour =
      Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(n, n, false);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    order.resize(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    order.erase(order.begin() + i);
    std::partial_sort(order.begin(), order.begin() + q, order.end(),
                      [&](Eigen::Index a, Eigen::Index b) {
                        return dist2(i, a) < dist2(i, b) || (dist2(i, a) == dist2(i, b) && a < b);
                      });
    for (int t = 0; t < q; ++t) neighbour(i, order[t]) = true;
  }

  AffinityGraph g{Eigen::MatrixXd::Zero(n, n), q, sigma};
  const double s2 = sigma * sigma;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j && (neighbour(i, j) || neighbour(j, i))) g.weights(i, j) = std::exp(-dist2(i, j) / s2);
    }
  }
  return g;
}

Laplacian build_laplacian(const AffinityGraph& graph) {
  return {graph.weights, graph.weights.rowwise().sum()};
}

}  // namespace cwefs

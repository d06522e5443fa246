#pragma once

#include <Eigen/Dense>

namespace cwefs {

struct GraphParams {
  int q = 5;
  double sigma = 1.0;
};

/// Heat-kernel q-nearest-neighbour affinity between instances.
struct AffinityGraph {
  Eigen::MatrixXd weights;  // n x n, symmetric, zero diagonal, entries in [0,1]
  int q = 0;
  double sigma = 0.0;
};

/// L = G - S, with S and the degree diagonal G kept separately because the
/// latent update feeds them to different sides of its ratio.
struct Laplacian {
  Eigen::MatrixXd affinity;  // S
  Eigen::VectorXd degree;    // diag(G)

  Eigen::MatrixXd matrix() const;
  Eigen::Index size() const { return degree.size(); }
};

/// `points` holds one instance per column. S(i,j) = exp(-|x_i - x_j|^2 / sigma^2)
/// whenever j is among the q nearest neighbours of i or i among those of j.
/// An instance is never its own neighbour; distance ties go to the lower index.
AffinityGraph build_affinity(const Eigen::MatrixXd& points, int q, double sigma);

inline AffinityGraph build_affinity(const Eigen::MatrixXd& points, const GraphParams& p) {
  return build_affinity(points, p.q, p.sigma);
}

Laplacian build_laplacian(const AffinityGraph& graph);

}  // namespace cwefs

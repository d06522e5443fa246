#pragma once

#include <Eigen/Dense>

namespace cwefs {

/// Multi-label k-nearest-neighbour classifier with Laplace-smoothed priors
/// and neighbour-count likelihoods. Instances are columns.
class MlknnModel {
 public:
  struct Prediction {
    Eigen::MatrixXd labels;  // k x n_test, {0,1}
    Eigen::MatrixXd scores;  // k x n_test, P(H=1 | count)
  };

  /// Requires more training instances than neighbours and binary labels.
  static MlknnModel fit(const Eigen::MatrixXd& train_features, const Eigen::MatrixXd& train_labels,
                        int k_neighbors = 10, double smoothing = 1.0);

  Prediction predict(const Eigen::MatrixXd& test_features) const;

  int k_neighbors() const { return k_neighbors_; }
  double smoothing() const { return smoothing_; }

  /// P(H_j = 1).
  const Eigen::VectorXd& priors() const { return prior_positive_; }
  /// Row j, column c: P(C_j = c | H_j = 1), and likewise for H_j = 0.
  const Eigen::MatrixXd& likelihood_positive() const { return likelihood_positive_; }
  const Eigen::MatrixXd& likelihood_negative() const { return likelihood_negative_; }

 private:
  MlknnModel() = default;

  Eigen::VectorXi positive_neighbour_counts(const Eigen::VectorXd& query,
                                            Eigen::Index exclude) const;

  int k_neighbors_ = 10;
  double smoothing_ = 1.0;
  Eigen::MatrixXd train_features_;
  Eigen::MatrixXd train_labels_;
  Eigen::VectorXd prior_positive_;
  Eigen::MatrixXd likelihood_positive_;
  Eigen::MatrixXd likelihood_negative_;
};

/// Indices of the k nearest columns of `points` to `query` (Euclidean),
/// skipping `exclude` (pass -1 for none). Ties go to the lower index.
Eigen::VectorXi nearest_columns(const Eigen::MatrixXd& points, const Eigen::VectorXd& query, int k,
                                Eigen::Index exclude = -1);

}  // namespace cwefs

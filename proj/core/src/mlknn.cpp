#include "cwefs/mlknn.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "cwefs/errors.hpp"

namespace cwefs {

Eigen::VectorXi nearest_columns(const Eigen::MatrixXd& points, const Eigen::VectorXd& query, int k,
                                Eigen::Index exclude) {
  const auto n = points.cols();
  const Eigen::VectorXd dist = (points.colwise() - query).colwise().squaredNorm().transpose();
  std::vector<Eigen::Index> order;
  order.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    if (i != exclude) order.push_back(i);
  if (static_cast<std::size_t>(k) > order.size()) throw DataError("fewer candidates than neighbours requested");

  std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return dist(a) < dist(b) || (dist(a) == dist(b) && a < b);
  });
  Eigen::VectorXi out(k);
  for (int t = 0; t < k; ++t) out(t) = static_cast<int>(order[t]);
  return out;
}

Eigen::VectorXi MlknnModel::positive_neighbour_counts(const Eigen::VectorXd& query,
                                                      Eigen::Index exclude) const {
  const auto nb = nearest_columns(train_features_, query, k_neighbors_, exclude);
  Eigen::VectorXi counts = Eigen::VectorXi::Zero(train_labels_.rows());
  for (Eigen::Index j = 0; j < train_labels_.rows(); ++j)
    for (int t = 0; t < nb.size(); ++t) counts(j) += train_labels_(j, nb(t)) > 0.5 ? 1 : 0;
  return counts;
}

MlknnModel MlknnModel::fit(const Eigen::MatrixXd& train_features, const Eigen::MatrixXd& train_labels,
                           int k_neighbors, double smoothing) {
  const auto n = train_features.cols();
  if (k_neighbors < 1) throw ConfigError("ML-KNN needs at least one neighbour");
  if (!(smoothing > 0.0)) throw ConfigError("ML-KNN smoothing must be positive");
  if (train_labels.cols() != n) throw DataError("ML-KNN features and labels disagree on instance count");
  if (n <= k_neighbors) {
    throw DataError("ML-KNN needs more training instances (" + std::to_string(n) + ") than neighbours (" +
                    std::to_string(k_neighbors) + ")");
  }
  if (!(train_labels.array() == 0.0 || train_labels.array() == 1.0).all())
    throw DataError("ML-KNN labels must be binary");

  MlknnModel m;
  m.k_neighbors_ = k_neighbors;
  m.smoothing_ = smoothing;
  m.train_features_ = train_features;
  m.train_labels_ = train_labels;

  const auto labels = train_labels.rows();
  const double s = smoothing;
  m.prior_positive_ = ((s + train_labels.rowwise().sum().array()) / (2.0 * s + static_cast<double>(n))).matrix();

  // hist_pos(j, c): training instances positive for j with c positive neighbours.
  Eigen::MatrixXd hist_pos = Eigen::MatrixXd::Zero(labels, k_neighbors + 1);
  Eigen::MatrixXd hist_neg = Eigen::MatrixXd::Zero(labels, k_neighbors + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto counts = m.positive_neighbour_counts(train_features.col(i), i);
    for (Eigen::Index j = 0; j < labels; ++j)
      (train_labels(j, i) > 0.5 ? hist_pos : hist_neg)(j, counts(j)) += 1.0;
  }

  const double bins = static_cast<double>(k_neighbors + 1);
  m.likelihood_positive_ = (hist_pos.array() + s).colwise() / (s * bins + hist_pos.rowwise().sum().array());
  m.likelihood_negative_ = (hist_neg.array() + s).colwise() / (s * bins + hist_neg.rowwise().sum().array());
  return m;
}

MlknnModel::Prediction MlknnModel::predict(const Eigen::MatrixXd& test_features) const {
  if (test_features.rows() != train_features_.rows()) {
    throw DataError("ML-KNN test features have " + std::to_string(test_features.rows()) +
                    " dimensions, model was trained on " + std::to_string(train_features_.rows()));
  }
  const auto labels = train_labels_.rows();
  Prediction out{Eigen::MatrixXd(labels, test_features.cols()), Eigen::MatrixXd(labels, test_features.cols())};
  for (Eigen::Index i = 0; i < test_features.cols(); ++i) {
    const auto counts = positive_neighbour_counts(test_features.col(i), -1);
    for (Eigen::Index j = 0; j < labels; ++j) {
      const double p1 = prior_positive_(j) * likelihood_positive_(j, counts(j));
      const double p0 = (1.0 - prior_positive_(j)) * likelihood_negative_(j, counts(j));
      out.scores(j, i) = p1 / (p1 + p0);
      out.labels(j, i) = p1 >= p0 ? 1.0 : 0.0;
    }
  }
  return out;
}

}  // namespace cwefs

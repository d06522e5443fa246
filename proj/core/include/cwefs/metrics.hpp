#pragma once

#include <string>

#include <Eigen/Dense>

namespace cwefs {

// All metrics take k x n matrices: labels along rows, instances along columns.

struct MetricsReport {
  double hamming_loss = 0.0;
  double ranking_loss = 0.0;
  double coverage = 0.0;
  double average_precision = 0.0;
  double macro_f1 = 0.0;
  double micro_f1 = 0.0;

  /// Flat JSON object keyed by the six metric names.
  std::string to_json() const;
};

double hamming_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth);

/// Fraction of (relevant, irrelevant) pairs ordered wrongly, averaged over
/// instances having at least one of each. A tied pair counts one half.
double ranking_loss(const Eigen::MatrixXd& scores, const Eigen::MatrixXd& truth);

/// 0-based rank of the worst-ranked relevant label, averaged over instances
/// with at least one relevant label. Tied scores rank the lower label first.
double coverage(const Eigen::MatrixXd& scores, const Eigen::MatrixXd& truth);

double average_precision(const Eigen::MatrixXd& scores, const Eigen::MatrixXd& truth);

/// Per-label F1 averaged; a label with no TP, FP or FN scores 0.
double macro_f1(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth);
double micro_f1(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth);

MetricsReport evaluate(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& scores,
                       const Eigen::MatrixXd& truth);

struct FriedmanResult {
  double chi_square = 0.0;
  double f_statistic = 0.0;  // +inf when the rankings agree perfectly
  int methods = 0;
  int datasets = 0;
};

/// `ranks` is methods x datasets; column j holds the rank of each method on
/// dataset j. Returns the Friedman chi-square and its Iman-Davenport F form.
FriedmanResult friedman_statistic(const Eigen::MatrixXd& ranks);

}  // namespace cwefs

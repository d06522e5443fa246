#include "cwefs/metrics.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include <json.hpp>

#include "cwefs/errors.hpp"

namespace cwefs {

namespace {

void require_same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DataError(std::string(what) + ": prediction and truth shapes differ");
  if (a.size() == 0) throw DataError(std::string(what) + ": empty input");
}

// Label indices of column `i` sorted by descending score, ties by index.
std::vector<Eigen::Index> label_order(const Eigen::MatrixXd& scores, Eigen::Index i) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(scores.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return scores(a, i) > scores(b, i); });
  return order;
}

struct Confusion {
  double tp = 0, fp = 0, fn = 0;
};

double f1(const Confusion& c) {
  const double denom = 2.0 * c.tp + c.fp + c.fn;
  return denom > 0.0 ? 2.0 * c.tp / denom : 0.0;
}

Confusion tally(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth, Eigen::Index j) {
  Confusion c;
  for (Eigen::Index i = 0; i < truth.cols(); ++i) {
    const bool p = pred(j, i) > 0.5;
    const bool t = truth(j, i) > 0.5;
    c.tp += p && t;
    c.fp += p && !t;
    c.fn += !p && t;
  }
  return c;
}

}  // namespace

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["hamming_loss"] = hamming_loss;
  j["ranking_loss"] = ranking_loss;
  j["coverage"] = coverage;
  j["average_precision"] = average_precision;
  j["macro_f1"] = macro_f1;
  j["micro_f1"] = micro_f1;
  return j.dump();
}

double hamming_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) {
  require_same_shape(pred, truth, "hamming loss");
  const auto wrong = ((pred.array() > 0.5) != (truth.array() > 0.5)).count();
  return static_cast<double>(wrong) / static_cast<double>(truth.size());
}

double ranking_loss(const Eigen::MatrixXd& scores, const Eigen::MatrixXd& truth) {
  require_same_shape(scores, truth, "ranking loss");
  double total = 0.0;
  int counted = 0;
  for (Eigen::Index i = 0; i < truth.cols(); ++i) {
    double bad = 0.0;
    int rel = 0, irr = 0;
    for (Eigen::Index a = 0; a < truth.rows(); ++a) {
      if (truth(a, i) > 0.5) ++rel; else ++irr;
    }
    if (rel == 0 || irr == 0) continue;
    for (Eigen::Index a = 0; a < truth.rows(); ++a) {
      if (truth(a, i) <= 0.5) continue;
      for (Eigen::Index b = 0; b < truth.rows(); ++b) {
        if (truth(b, i) > 0.5) continue;
        if (scores(a, i) < scores(b, i)) bad += 1.0;
        else if (scores(a, i) == scores(b, i)) bad += 0.5;
      }
    }
    total += bad / (static_cast<double>(rel) * irr);
    ++counted;
  }
  if (counted == 0) throw DataError("ranking loss: no instance has both relevant and irrelevant labels");
  return total / counted;
}

double coverage(const Eigen::MatrixXd& scores, const Eigen::MatrixXd& truth) {
  require_same_shape(scores, truth, "coverage");
  double total = 0.0;
  int counted = 0;
  for (Eigen::Index i = 0; i < truth.cols(); ++i) {
    const auto order = label_order(scores, i);
    int worst = -1;
    for (std::size_t r = 0; r < order.size(); ++r)
      if (truth(order[r], i) > 0.5) worst = static_cast<int>(r);
    if (worst < 0) continue;
    total += worst;
    ++counted;
  }
  if (counted == 0) throw DataError("coverage: no instance has a relevant label");
  return total / counted;
}

double average_precision(const Eigen::MatrixXd& scores, const Eigen::MatrixXd& truth) {
  require_same_shape(scores, truth, "average precision");
  double total = 0.0;
  int counted = 0;
  for (Eigen::Index i = 0; i < truth.cols(); ++i) {
    const auto order = label_order(scores, i);
    double sum = 0.0;
    int hits = 0;
    for (std::size_t r = 0; r < order.size(); ++r) {
      if (truth(order[r], i) > 0.5) {
        ++hits;
        sum += static_cast<double>(hits) / static_cast<double>(r + 1);
      }
    }
    if (hits == 0) continue;
    total += sum / hits;
    ++counted;
  }
  if (counted == 0) throw DataError("average precision: no instance has a relevant label");
  return total / counted;
}

double macro_f1(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) {
  require_same_shape(pred, truth, "macro-F1");
  double sum = 0.0;
  for (Eigen::Index j = 0; j < truth.rows(); ++j) sum += f1(tally(pred, truth, j));
  return sum / static_cast<double>(truth.rows());
}

double micro_f1(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) {
  require_same_shape(pred, truth, "micro-F1");
  Confusion pooled;
  for (Eigen::Index j = 0; j < truth.rows(); ++j) {
    const auto c = tally(pred, truth, j);
    pooled.tp += c.tp;
    pooled.fp += c.fp;
    pooled.fn += c.fn;
  }
  return f1(pooled);
}

MetricsReport evaluate(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& scores,
                       const Eigen::MatrixXd& truth) {
  return {hamming_loss(pred, truth),      ranking_loss(scores, truth), coverage(scores, truth),
          average_precision(scores, truth), macro_f1(pred, truth),     micro_f1(pred, truth)};
}

FriedmanResult friedman_statistic(const Eigen::MatrixXd& ranks) {
  const auto k = ranks.rows();
  const auto n = ranks.cols();
  if (k < 2) throw ConfigError("Friedman test needs at least 2 methods");
  if (n < 2) throw ConfigError("Friedman test needs at least 2 datasets");
  if (!ranks.allFinite()) throw DataError("Friedman test: non-finite rank");

  const double K = static_cast<double>(k);
  const double N = static_cast<double>(n);
  const Eigen::VectorXd avg = ranks.rowwise().mean();
  FriedmanResult r;
  r.methods = static_cast<int>(k);
  r.datasets = static_cast<int>(n);
  r.chi_square = 12.0 * N / (K * (K + 1.0)) * (avg.squaredNorm() - K * (K + 1.0) * (K + 1.0) / 4.0);
  const double denom = N * (K - 1.0) - r.chi_square;
  r.f_statistic = denom > 0.0 ? (N - 1.0) * r.chi_square / denom : std::numeric_limits<double>::infinity();
  return r;
}

}  // namespace cwefs

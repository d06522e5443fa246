#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cwefs/dataset.hpp"
#include "cwefs/graph.hpp"

namespace cwefs {

struct HyperParams {
  double lambda = 0.1;  // label reconstruction
  double beta = 0.1;    // channel graphs
  double eta = 0.1;     // label graph
  double gamma = 2.0;   // channel-weight exponent, must exceed 1
  double delta = 0.1;   // l2,1 sparsity
  double epsilon = 1e-12;
  int max_iters = 300;
  double rel_tol = 1e-6;
  int latent_dim = 0;  // 0 selects the label count k

  /// When false the channel weights stay at 1/ch for the whole run.
  bool adapt_channel_weights = true;
  /// Scale row norms by the channel weight when ranking.
  bool alpha_weighted_ranking = false;

  void validate() const;
};

/// Solver inputs: non-negative channel matrices (d_v x n) and binary labels (k x n).
struct Problem {
  std::vector<Eigen::MatrixXd> channels;
  Eigen::MatrixXd labels;

  Eigen::Index instance_count() const { return labels.cols(); }
  Eigen::Index label_count() const { return labels.rows(); }

  /// Requires labels_binary to be present.
  static Problem from_dataset(const MultiChannelDataset& data);
};

/// Channel-wise feature graphs plus the label graph, all over the same instances.
struct ProblemGraphs {
  std::vector<Laplacian> channels;
  Laplacian labels;

  static ProblemGraphs build(const Problem& problem, const GraphParams& params);
};

struct SolverState {
  std::vector<Eigen::MatrixXd> Q;  // per channel, d_v x r
  Eigen::MatrixXd U;               // n x r
  Eigen::MatrixXd M;               // k x r
  Eigen::VectorXd alpha;           // ch, on the simplex
  std::vector<double> objective_trace;
  int degenerate_alpha_updates = 0;
};

/// Random positive start: Q, U, M i.i.d. uniform on (0.01, 1], alpha = 1/ch.
SolverState initialize(const Problem& problem, const HyperParams& hp, std::uint64_t seed);

/// Per-channel cost e(v): reconstruction of X(v) and Y, both graph terms and
/// the l2,1 norm of Q(v), without the channel weight.
Eigen::VectorXd channel_costs(const SolverState& state, const Problem& problem,
                              const ProblemGraphs& graphs, const HyperParams& hp);

/// sum_v alpha(v)^gamma * e(v).
double objective(const SolverState& state, const Problem& problem, const ProblemGraphs& graphs,
                 const HyperParams& hp);

void update_Q(SolverState& state, const Problem& problem, const HyperParams& hp);
void update_U(SolverState& state, const Problem& problem, const ProblemGraphs& graphs,
              const HyperParams& hp);
void update_M(SolverState& state, const Problem& problem, const HyperParams& hp);

/// Closed-form simplex minimiser of sum_v alpha(v)^gamma e(v) for the given
/// costs. Costs are floored at `floor`; if every cost sits at the floor the
/// weights come back uniform and `degenerate` is set.
struct AlphaUpdate {
  Eigen::VectorXd alpha;
  bool degenerate = false;
};
AlphaUpdate closed_form_alpha(const Eigen::VectorXd& costs, double gamma, double floor);

/// Recomputes the channel costs and applies closed_form_alpha. Returns false
/// on the degenerate (all costs at floor) path.
bool update_alpha(SolverState& state, const Problem& problem, const ProblemGraphs& graphs,
                  const HyperParams& hp);

/// One pass of Q, U, M, alpha updates, in that order.
void sweep(SolverState& state, const Problem& problem, const ProblemGraphs& graphs,
           const HyperParams& hp);

/// Runs sweeps from `state` until the relative objective change drops below
/// rel_tol or max_iters sweeps have run. The trace starts with the initial
/// objective. Throws NumericalError if the objective becomes non-finite.
SolverState solve(const Problem& problem, const ProblemGraphs& graphs, const HyperParams& hp,
                  SolverState state);

SolverState solve(const Problem& problem, const ProblemGraphs& graphs, const HyperParams& hp,
                  std::uint64_t seed);

// Ranking -------------------------------------------------------------------

struct RankedFeature {
  FeatureId id;
  double score = 0.0;
};

/// Global ordering of every (channel, feature) pair, highest score first.
struct FeatureRanking {
  std::vector<RankedFeature> entries;

  std::size_t size() const { return entries.size(); }
};

/// Sorts all rows of all Q(v) by l2 norm, descending; ties by (channel, feature).
FeatureRanking rank_features(const SolverState& state, bool alpha_weighted = false);

/// Orders arbitrary per-feature scores the same way rank_features does.
FeatureRanking rank_by_scores(const std::vector<Eigen::VectorXd>& scores);

/// The first ceil(ratio * total) ranked features, returned in ascending
/// (channel, feature) order. ratio must lie in (0, 1].
std::vector<FeatureId> select_top(const FeatureRanking& ranking, double ratio);

void write_ranking_csv(const FeatureRanking& ranking, const std::filesystem::path& path);
FeatureRanking read_ranking_csv(const std::filesystem::path& path);
void write_trace_csv(const std::vector<double>& trace, const std::filesystem::path& path);

}  // namespace cwefs

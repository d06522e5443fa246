#include "cwefs/solver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <string>

#include "cwefs/csv.hpp"
#include "cwefs/errors.hpp"

namespace cwefs {

void HyperParams::validate() const {
  if (!(lambda > 0.0)) throw ConfigError("lambda must be > 0");
  if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
  if (!(eta >= 0.0)) throw ConfigError("eta must be >= 0");
  if (!(gamma > 1.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be > 1");
  if (!(delta >= 0.0)) throw ConfigError("delta must be >= 0");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  if (max_iters < 0) throw ConfigError("max_iters must be >= 0");
  if (!(rel_tol >= 0.0)) throw ConfigError("rel_tol must be >= 0");
  if (latent_dim < 0) throw ConfigError("latent_dim must be >= 0");
}

Problem Problem::from_dataset(const MultiChannelDataset& data) {
  if (!data.labels_binary) throw DataError("solver needs binarized labels");
  Problem p;
  p.channels.reserve(data.channels.size());
  for (const auto& c : data.channels) {
    if ((c.features.array() < 0.0).any())
      throw DataError("channel '" + c.name + "' has negative entries; normalize features first");
    p.channels.push_back(c.features);
  }
  p.labels = *data.labels_binary;
  return p;
}

ProblemGraphs ProblemGraphs::build(const Problem& problem, const GraphParams& params) {
  ProblemGraphs g;
  for (const auto& x : problem.channels) g.channels.push_back(build_laplacian(build_affinity(x, params)));
  g.labels = build_laplacian(build_affinity(problem.labels, params));
  return g;
}

namespace {

void check_shapes(const SolverState& s, const Problem& p, const ProblemGraphs& g) {
  const auto ch = p.channels.size();
  const auto n = p.instance_count();
  const auto r = s.U.cols();
  if (s.Q.size() != ch || static_cast<std::size_t>(s.alpha.size()) != ch || g.channels.size() != ch)
    throw DataError("channel count differs between data, state and graphs");
  if (s.U.rows() != n) throw DataError("latent matrix rows differ from instance count");
  if (s.M.rows() != p.label_count() || s.M.cols() != r)
    throw DataError("label coefficient matrix has the wrong shape");
  if (g.labels.size() != n) throw DataError("label graph size differs from instance count");
  for (std::size_t v = 0; v < ch; ++v) {
    if (p.channels[v].cols() != n) throw DataError("channel " + std::to_string(v) + " instance count mismatch");
    if (s.Q[v].rows() != p.channels[v].rows() || s.Q[v].cols() != r)
      throw DataError("loading matrix " + std::to_string(v) + " has the wrong shape");
    if (g.channels[v].size() != n) throw DataError("graph " + std::to_string(v) + " size mismatch");
  }
}

// tr(U^T (G - S) U)
double laplacian_form(const Laplacian& l, const Eigen::MatrixXd& u) {
  const double degree_part = (u.array().square().colwise() * l.degree.array()).sum();
  return degree_part - (u.array() * (l.affinity * u).array()).sum();
}

double l21_norm(const Eigen::MatrixXd& q) { return q.rowwise().norm().sum(); }

Eigen::VectorXd channel_powers(const Eigen::VectorXd& alpha, double gamma) {
  return alpha.array().pow(gamma).matrix();
}

}  // namespace

SolverState initialize(const Problem& problem, const HyperParams& hp, std::uint64_t seed) {
  hp.validate();
  const auto n = problem.instance_count();
  const auto k = problem.label_count();
  const Eigen::Index r = hp.latent_dim > 0 ? hp.latent_dim : k;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto fill = [&](Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = 1.0 - 0.99 * unit(rng);  // (0.01, 1]
    return m;
  };

  SolverState s;
  for (const auto& x : problem.channels) s.Q.push_back(fill(x.rows(), r));
  s.U = fill(n, r);
  s.M = fill(k, r);
  const auto ch = static_cast<Eigen::Index>(problem.channels.size());
  s.alpha = Eigen::VectorXd::Constant(ch, 1.0 / static_cast<double>(ch));
  return s;
}

Eigen::VectorXd channel_costs(const SolverState& state, const Problem& problem,
                              const ProblemGraphs& graphs, const HyperParams& hp) {
  check_shapes(state, problem, graphs);
  const double shared = hp.lambda * (problem.labels - state.M * state.U.transpose()).squaredNorm() +
                        hp.eta * laplacian_form(graphs.labels, state.U);
  Eigen::VectorXd e(static_cast<Eigen::Index>(problem.channels.size()));
  for (std::size_t v = 0; v < problem.channels.size(); ++v) {
    const auto& q = state.Q[v];
    e(static_cast<Eigen::Index>(v)) = (problem.channels[v] - q * state.U.transpose()).squaredNorm() + shared +
                                      hp.beta * laplacian_form(graphs.channels[v], state.U) +
                                      hp.delta * l21_norm(q);
  }
  return e;
}

double objective(const SolverState& state, const Problem& problem, const ProblemGraphs& graphs,
                 const HyperParams& hp) {
  const auto e = channel_costs(state, problem, graphs, hp);
  return channel_powers(state.alpha, hp.gamma).dot(e);
}

void update_Q(SolverState& state, const Problem& problem, const HyperParams& hp) {
  const Eigen::MatrixXd utu = state.U.transpose() * state.U;
  for (std::size_t v = 0; v < problem.channels.size(); ++v) {
    auto& q = state.Q[v];
    const Eigen::MatrixXd numer = problem.channels[v] * state.U;
    // D_ii = 1 / (2 sqrt(|q_i|^2 + eps)), applied row-wise.
    const Eigen::ArrayXd d = 0.5 / (q.rowwise().squaredNorm().array() + hp.epsilon).sqrt();
    Eigen::ArrayXXd denom = (q * utu).array();
    denom += hp.delta * (q.array().colwise() * d);
    q = (q.array() * numer.array() / (denom + hp.epsilon)).matrix();
  }
}

void update_U(SolverState& state, const Problem& problem, const ProblemGraphs& graphs,
              const HyperParams& hp) {
  const auto w = channel_powers(state.alpha, hp.gamma);
  const double w_total = w.sum();
  const auto& u = state.U;
  const auto r = u.cols();

  Eigen::MatrixXd numer = w_total * hp.lambda * (problem.labels.transpose() * state.M);
  Eigen::MatrixXd qtq = Eigen::MatrixXd::Zero(r, r);
  Eigen::VectorXd degree = w_total * hp.eta * graphs.labels.degree;
  if (hp.eta > 0.0) numer.noalias() += w_total * hp.eta * (graphs.labels.affinity * u);

  for (std::size_t v = 0; v < problem.channels.size(); ++v) {
    const double wv = w(static_cast<Eigen::Index>(v));
    const auto& q = state.Q[v];
    numer.noalias() += wv * (problem.channels[v].transpose() * q);
    qtq.noalias() += wv * (q.transpose() * q);
    if (hp.beta > 0.0) {
      numer.noalias() += wv * hp.beta * (graphs.channels[v].affinity * u);
      degree += wv * hp.beta * graphs.channels[v].degree;
    }
  }

  Eigen::MatrixXd denom = u * qtq;
  denom.noalias() += w_total * hp.lambda * (u * (state.M.transpose() * state.M));
  denom += (u.array().colwise() * degree.array()).matrix();

  state.U = (u.array() * numer.array() / (denom.array() + hp.epsilon)).matrix();
}

void update_M(SolverState& state, const Problem& problem, const HyperParams& hp) {
  const Eigen::MatrixXd numer = problem.labels * state.U;
  const Eigen::MatrixXd denom = state.M * (state.U.transpose() * state.U);
  state.M = (state.M.array() * numer.array() / (denom.array() + hp.epsilon)).matrix();
}

AlphaUpdate closed_form_alpha(const Eigen::VectorXd& costs, double gamma, double floor) {
  const auto ch = costs.size();
  AlphaUpdate out;
  const Eigen::ArrayXd e = costs.array().max(floor);
  if ((e <= floor).all()) {
    out.alpha = Eigen::VectorXd::Constant(ch, 1.0 / static_cast<double>(ch));
    out.degenerate = true;
    return out;
  }
  // alpha_v proportional to e_v^(1/(1-gamma)); normalised in log space.
  const Eigen::ArrayXd logs = e.log() / (1.0 - gamma);
  const Eigen::ArrayXd scaled = (logs - logs.maxCoeff()).exp();
  out.alpha = (scaled / scaled.sum()).matrix();
  return out;
}

bool update_alpha(SolverState& state, const Problem& problem, const ProblemGraphs& graphs,
                  const HyperParams& hp) {
  if (!hp.adapt_channel_weights) return true;
  auto upd = closed_form_alpha(channel_costs(state, problem, graphs, hp), hp.gamma, hp.epsilon);
  state.alpha = std::move(upd.alpha);
  if (upd.degenerate) ++state.degenerate_alpha_updates;
  return !upd.degenerate;
}

void sweep(SolverState& state, const Problem& problem, const ProblemGraphs& graphs,
           const HyperParams& hp) {
  update_Q(state, problem, hp);
  update_U(state, problem, graphs, hp);
  update_M(state, problem, hp);
  update_alpha(state, problem, graphs, hp);
}

SolverState solve(const Problem& problem, const ProblemGraphs& graphs, const HyperParams& hp,
                  SolverState state) {
  hp.validate();
  check_shapes(state, problem, graphs);
  state.objective_trace.clear();

  double prev = objective(state, problem, graphs, hp);
  if (!std::isfinite(prev)) throw NumericalError("objective became non-finite at sweep 0 (initial state)");
  state.objective_trace.push_back(prev);

  for (int it = 1; it <= hp.max_iters; ++it) {
    sweep(state, problem, graphs, hp);
    const double cur = objective(state, problem, graphs, hp);
    if (!std::isfinite(cur))
      throw NumericalError("objective became non-finite at sweep " + std::to_string(it));
    state.objective_trace.push_back(cur);
    if (std::abs(cur - prev) / std::max(prev, hp.epsilon) < hp.rel_tol) break;
    prev = cur;
  }
  return state;
}

SolverState solve(const Problem& problem, const ProblemGraphs& graphs, const HyperParams& hp,
                  std::uint64_t seed) {
  return solve(problem, graphs, hp, initialize(problem, hp, seed));
}

// Ranking -------------------------------------------------------------------

FeatureRanking rank_by_scores(const std::vector<Eigen::VectorXd>& scores) {
  FeatureRanking ranking;
  for (std::size_t v = 0; v < scores.size(); ++v)
    for (Eigen::Index i = 0; i < scores[v].size(); ++i)
      ranking.entries.push_back({{static_cast<int>(v), static_cast<int>(i)}, scores[v](i)});
  // Entries start in (channel, feature) order, so a stable sort keeps that as the tie rule.
  std::stable_sort(ranking.entries.begin(), ranking.entries.end(),
                   [](const RankedFeature& a, const RankedFeature& b) { return a.score > b.score; });
  return ranking;
}

FeatureRanking rank_features(const SolverState& state, bool alpha_weighted) {
  std::vector<Eigen::VectorXd> scores;
  for (std::size_t v = 0; v < state.Q.size(); ++v) {
    Eigen::VectorXd s = state.Q[v].rowwise().norm();
    if (alpha_weighted) s *= state.alpha(static_cast<Eigen::Index>(v));
    scores.push_back(std::move(s));
  }
  return rank_by_scores(scores);
}

std::vector<FeatureId> select_top(const FeatureRanking& ranking, double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw ConfigError("feature ratio must lie in (0, 1]");
  const double exact = ratio * static_cast<double>(ranking.size());
  // Shave representation error so that e.g. 0.3 * 10 selects 3, not 4.
  auto count = static_cast<std::size_t>(std::ceil(exact - 1e-9 * std::max(1.0, exact)));
  count = std::clamp<std::size_t>(count, 1, ranking.size());

  std::vector<FeatureId> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(ranking.entries[i].id);
  std::sort(out.begin(), out.end());
  return out;
}

void write_ranking_csv(const FeatureRanking& ranking, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "global_rank,channel,feature_index,score\n";
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    const auto& e = ranking.entries[i];
    out << (i + 1) << ',' << e.id.channel << ',' << e.id.feature << ',' << csv::format_double(e.score)
        << '\n';
  }
}

FeatureRanking read_ranking_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  FeatureRanking ranking;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || csv::trim(line).empty()) continue;
    const auto cells = csv::split(line, ',');
    double vals[4];
    if (cells.size() != 4) throw DataError(path.string() + ": row " + std::to_string(line_no) + ": expected 4 columns");
    for (int c = 0; c < 4; ++c) {
      if (!csv::parse_double(cells[c], vals[c]))
        throw DataError(path.string() + ": row " + std::to_string(line_no) + ", column " +
                        std::to_string(c + 1) + ": not a number");
    }
    ranking.entries.push_back({{static_cast<int>(vals[1]), static_cast<int>(vals[2])}, vals[3]});
  }
  return ranking;
}

void write_trace_csv(const std::vector<double>& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "sweep,objective\n";
  for (std::size_t i = 0; i < trace.size(); ++i) out << i << ',' << csv::format_double(trace[i]) << '\n';
}

}  // namespace cwefs

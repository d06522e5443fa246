#include "cwefs/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "cwefs/csv.hpp"
#include "cwefs/errors.hpp"
#include "cwefs/mlknn.hpp"

namespace cwefs {

namespace fs = std::filesystem;

std::string method_name(Method m) {
  switch (m) {
    case Method::Cwefs: return "cwefs";
    case Method::Random: return "random";
    case Method::Variance: return "variance";
  }
  return "unknown";
}

// Config --------------------------------------------------------------------

namespace {

double to_double(const std::string& key, const std::string& v) {
  double out = 0;
  if (!csv::parse_double(v, out)) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

long long to_integer(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d != std::floor(d) || std::abs(d) > 9.0e15) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return static_cast<long long>(d);
}

int to_int(const std::string& key, const std::string& v) {
  const auto i = to_integer(key, v);
  if (i < std::numeric_limits<int>::min() || i > std::numeric_limits<int>::max())
    throw ConfigError(key + ": value out of range");
  return static_cast<int>(i);
}

std::uint64_t to_seed(const std::string& key, const std::string& v) {
  const auto t = csv::trim(v);
  std::uint64_t out = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), out);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size())
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

Method to_method(const std::string& v) {
  if (v == "cwefs") return Method::Cwefs;
  if (v == "random") return Method::Random;
  if (v == "variance") return Method::Variance;
  throw ConfigError("methods: unknown method '" + v + "'");
}

std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

template <class F>
auto with_context(const std::string& ctx, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(ctx + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(ctx + ": " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(ctx + ": " + e.what());
  }
}

}  // namespace

std::vector<double> parse_ratio_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& tok : csv::split(text, ',')) {
    if (tok.empty()) continue;
    out.push_back(to_double("ratios", tok));
  }
  return out;
}

ExperimentConfig parse_config_text(const std::string& text, const fs::path& base_dir) {
  ExperimentConfig c;
  SyntheticSpec syn;
  bool any_synthetic = false;
  std::optional<std::vector<int>> syn_features;

  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = csv::trim(std::string_view(line).substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key(csv::trim(body.substr(0, eq)));
    const std::string val(csv::trim(body.substr(eq + 1)));
    auto& hp = c.hyper;

    if (key == "data.manifest") {
      c.manifest = base_dir / val;
    } else if (key.rfind("synthetic.", 0) == 0) {
      any_synthetic = true;
      if (key == "synthetic.channels") syn.channels = to_int(key, val);
      else if (key == "synthetic.features") {
        std::vector<int> f;
        for (const auto& t : csv::split(val, ',')) f.push_back(to_int(key, t));
        syn_features = std::move(f);
      } else if (key == "synthetic.instances") syn.instances = to_int(key, val);
      else if (key == "synthetic.labels") syn.labels = to_int(key, val);
      else if (key == "synthetic.relevant") syn.relevant_per_channel = to_int(key, val);
      else if (key == "synthetic.noise_sigma") syn.noise_sigma = to_double(key, val);
      else if (key == "synthetic.seed") syn.seed = to_seed(key, val);
      else throw ConfigError("unknown config key '" + key + "'");
    } else if (key == "labels.threshold") c.label_threshold = to_double(key, val);
    else if (key == "labels.comparator") {
      if (val == "gt") c.comparator = Comparator::Greater;
      else if (val == "ge") c.comparator = Comparator::GreaterEqual;
      else throw ConfigError(key + ": expected gt or ge");
    } else if (key == "features.normalize") c.normalize = to_bool(key, val);
    else if (key == "solver.lambda") hp.lambda = to_double(key, val);
    else if (key == "solver.beta") hp.beta = to_double(key, val);
    else if (key == "solver.eta") hp.eta = to_double(key, val);
    else if (key == "solver.gamma") hp.gamma = to_double(key, val);
    else if (key == "solver.delta") hp.delta = to_double(key, val);
    else if (key == "solver.epsilon") hp.epsilon = to_double(key, val);
    else if (key == "solver.max_iters") hp.max_iters = to_int(key, val);
    else if (key == "solver.rel_tol") hp.rel_tol = to_double(key, val);
    else if (key == "solver.latent_dim") hp.latent_dim = to_int(key, val);
    else if (key == "solver.adapt_channel_weights") hp.adapt_channel_weights = to_bool(key, val);
    else if (key == "solver.alpha_weighted_ranking") hp.alpha_weighted_ranking = to_bool(key, val);
    else if (key == "graph.q") c.graph.q = to_int(key, val);
    else if (key == "graph.sigma") c.graph.sigma = to_double(key, val);
    else if (key == "eval.ratios") c.ratios = parse_ratio_list(val);
    else if (key == "eval.trials") c.trials = to_int(key, val);
    else if (key == "eval.train_fraction") c.train_fraction = to_double(key, val);
    else if (key == "eval.split") {
      if (val == "subject") c.split = SplitMode::Subject;
      else if (val == "instance") c.split = SplitMode::Instance;
      else throw ConfigError(key + ": expected subject or instance");
    } else if (key == "eval.k_neighbors") c.k_neighbors = to_int(key, val);
    else if (key == "eval.smoothing") c.smoothing = to_double(key, val);
    else if (key == "seed") c.seed = to_seed(key, val);
    else if (key == "methods") {
      c.methods.clear();
      for (const auto& t : csv::split(val, ','))
        if (!t.empty()) c.methods.push_back(to_method(t));
    } else if (key == "threads") c.threads = to_int(key, val);
    else throw ConfigError("unknown config key '" + key + "'");
  }

  if (any_synthetic) {
    if (syn_features) {
      syn.features_per_channel = *syn_features;
      if (syn.features_per_channel.size() == 1 && syn.channels > 1)
        syn.features_per_channel.assign(static_cast<std::size_t>(syn.channels), syn_features->front());
    } else {
      syn.features_per_channel.assign(static_cast<std::size_t>(std::max(syn.channels, 0)), 40);
    }
    c.synthetic = syn;
  }
  return c;
}

ExperimentConfig parse_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.parent_path());
}

void ExperimentConfig::validate() const {
  if (manifest && synthetic) throw ConfigError("config names both a manifest and a synthetic dataset");
  if (!manifest && !synthetic) throw ConfigError("config names no dataset (data.manifest or synthetic.*)");
  if (ratios.empty()) throw ConfigError("eval.ratios is empty");
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    if (!(ratios[i] > 0.0 && ratios[i] <= 1.0)) throw ConfigError("feature ratios must lie in (0, 1]");
    if (i > 0 && !(ratios[i] > ratios[i - 1])) throw ConfigError("feature ratios must be strictly increasing");
  }
  if (trials < 1) throw ConfigError("eval.trials must be >= 1");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("eval.train_fraction must lie in (0, 1)");
  if (k_neighbors < 1) throw ConfigError("eval.k_neighbors must be >= 1");
  if (!(smoothing > 0.0)) throw ConfigError("eval.smoothing must be > 0");
  if (methods.empty()) throw ConfigError("methods is empty");
  if (std::set<Method>(methods.begin(), methods.end()).size() != methods.size())
    throw ConfigError("methods lists a method twice");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (graph.q < 1) throw ConfigError("graph.q must be >= 1");
  if (!(graph.sigma > 0.0)) throw ConfigError("graph.sigma must be > 0");
  hyper.validate();
}

MultiChannelDataset prepare_dataset(const ExperimentConfig& config) {
  MultiChannelDataset data;
  if (config.manifest) {
    data = load_dataset(*config.manifest);
  } else if (config.synthetic) {
    data = generate_synthetic(*config.synthetic).first;
  } else {
    throw ConfigError("config names no dataset");
  }
  data = binarize_labels(std::move(data), config.label_threshold, config.comparator);
  if (config.normalize) data = normalize_features(std::move(data));
  return data;
}

// Baselines -----------------------------------------------------------------

FeatureRanking baseline_random(const std::vector<Eigen::Index>& features_per_channel, std::uint64_t seed) {
  FeatureRanking r;
  for (std::size_t v = 0; v < features_per_channel.size(); ++v)
    for (Eigen::Index i = 0; i < features_per_channel[v]; ++i)
      r.entries.push_back({{static_cast<int>(v), static_cast<int>(i)}, 0.0});
  std::mt19937_64 rng(seed);
  std::shuffle(r.entries.begin(), r.entries.end(), rng);
  // Scores descend with position so the file format stays meaningful.
  const auto total = static_cast<double>(r.entries.size());
  for (std::size_t i = 0; i < r.entries.size(); ++i)
    r.entries[i].score = (total - static_cast<double>(i)) / total;
  return r;
}

FeatureRanking baseline_variance(const MultiChannelDataset& data) {
  std::vector<Eigen::VectorXd> scores;
  for (const auto& c : data.channels) {
    const Eigen::MatrixXd centered = c.features.colwise() - c.features.rowwise().mean();
    scores.emplace_back(centered.rowwise().squaredNorm() / static_cast<double>(c.features.cols()));
  }
  return rank_by_scores(scores);
}

// Evaluation ----------------------------------------------------------------

Eigen::MatrixXd gather_features(const MultiChannelDataset& data, const std::vector<FeatureId>& selected) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(selected.size()), data.instance_count());
  for (std::size_t r = 0; r < selected.size(); ++r) {
    const auto& id = selected[r];
    if (id.channel < 0 || static_cast<std::size_t>(id.channel) >= data.channels.size() || id.feature < 0 ||
        id.feature >= data.channels[static_cast<std::size_t>(id.channel)].feature_count())
      throw DataError("selected feature (" + std::to_string(id.channel) + ", " + std::to_string(id.feature) +
                      ") does not exist");
    out.row(static_cast<Eigen::Index>(r)) = data.channels[static_cast<std::size_t>(id.channel)].features.row(id.feature);
  }
  return out;
}

MetricsReport evaluate_selection(const MultiChannelDataset& data, const SplitPlan& split,
                                 const std::vector<FeatureId>& selected, int k_neighbors, double smoothing) {
  if (!data.labels_binary) throw DataError("evaluation needs binarized labels");
  const auto features = gather_features(data, selected);
  auto columns = [](const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& idx) {
    Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = m.col(idx[i]);
    return out;
  };
  const auto model = MlknnModel::fit(columns(features, split.train), columns(*data.labels_binary, split.train),
                                     k_neighbors, smoothing);
  const auto pred = model.predict(columns(features, split.test));
  return evaluate(pred.labels, pred.scores, columns(*data.labels_binary, split.test));
}

// Sweeps --------------------------------------------------------------------

namespace {

using MetricGetter = double MetricsReport::*;
constexpr MetricGetter kMetrics[] = {&MetricsReport::hamming_loss,      &MetricsReport::ranking_loss,
                                     &MetricsReport::coverage,          &MetricsReport::average_precision,
                                     &MetricsReport::macro_f1,          &MetricsReport::micro_f1};
constexpr const char* kMetricNames[] = {"hamming_loss",      "ranking_loss", "coverage",
                                        "average_precision", "macro_f1",     "micro_f1"};

SplitPlan make_split(const ExperimentConfig& config, const MultiChannelDataset& data, std::uint64_t seed) {
  return config.split == SplitMode::Subject ? split_subjectwise(data, config.train_fraction, seed)
                                            : split_instancewise(data, config.train_fraction, seed);
}

// Runs trial bodies on `threads` workers. Errors surface in trial order.
template <class Body>
void run_trials(int trials, int threads, Body&& body) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(trials));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int t = next++; t < trials; t = next++) {
      try {
        body(t);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    }
  };
  const int workers = std::min(threads, trials);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

SweepReport empty_report(const std::vector<std::string>& methods, const std::vector<double>& ratios, int trials) {
  SweepReport report;
  report.methods = methods;
  report.ratios = ratios;
  report.trials = trials;
  report.raw.assign(methods.size(),
                    std::vector<std::vector<MetricsReport>>(ratios.size(),
                                                            std::vector<MetricsReport>(static_cast<std::size_t>(trials))));
  return report;
}

}  // namespace

MetricsReport SweepReport::mean(std::size_t method, std::size_t ratio) const {
  MetricsReport out;
  const auto& cells = raw.at(method).at(ratio);
  for (auto m : kMetrics) {
    double s = 0.0;
    for (const auto& c : cells) s += c.*m;
    out.*m = s / static_cast<double>(cells.size());
  }
  return out;
}

MetricsReport SweepReport::stddev(std::size_t method, std::size_t ratio) const {
  MetricsReport out;
  const auto& cells = raw.at(method).at(ratio);
  if (cells.size() < 2) return out;
  const auto mu = mean(method, ratio);
  for (auto m : kMetrics) {
    double s = 0.0;
    for (const auto& c : cells) s += (c.*m - mu.*m) * (c.*m - mu.*m);
    out.*m = std::sqrt(s / static_cast<double>(cells.size() - 1));
  }
  return out;
}

SweepReport run_experiment(const ExperimentConfig& config, const MultiChannelDataset& data) {
  config.validate();
  data.validate();

  std::vector<std::string> names;
  for (auto m : config.methods) names.push_back(method_name(m));
  auto report = empty_report(names, config.ratios, config.trials);

  std::vector<Eigen::Index> layout;
  for (const auto& c : data.channels) layout.push_back(c.feature_count());

  run_trials(config.trials, config.threads, [&](int t) {
    const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(t);
    const std::string ctx = "trial " + std::to_string(t);
    const auto split = with_context(ctx + ", split", [&] { return make_split(config, data, seed); });
    const auto train = data.subset(split.train);

    for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
      const auto method = config.methods[mi];
      const auto mctx = ctx + ", " + method_name(method);
      const auto ranking = with_context(mctx + ", selection", [&]() -> FeatureRanking {
        switch (method) {
          case Method::Cwefs: {
            const auto problem = Problem::from_dataset(train);
            const auto graphs = ProblemGraphs::build(problem, config.graph);
            const auto state = solve(problem, graphs, config.hyper, seed);
            return rank_features(state, config.hyper.alpha_weighted_ranking);
          }
          case Method::Random: return baseline_random(layout, seed);
          case Method::Variance: return baseline_variance(train);
        }
        throw ConfigError("unknown method");
      });
      for (std::size_t ri = 0; ri < config.ratios.size(); ++ri) {
        report.raw[mi][ri][static_cast<std::size_t>(t)] = with_context(mctx + ", evaluation", [&] {
          return evaluate_selection(data, split, select_top(ranking, config.ratios[ri]), config.k_neighbors,
                                    config.smoothing);
        });
      }
    }
  });
  return report;
}

SweepReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  return run_experiment(config, prepare_dataset(config));
}

SweepReport evaluate_fixed_ranking(const ExperimentConfig& config, const MultiChannelDataset& data,
                                   const FeatureRanking& ranking, const std::string& label) {
  config.validate();
  data.validate();
  if (ranking.size() != static_cast<std::size_t>(data.total_features()))
    throw DataError("ranking covers " + std::to_string(ranking.size()) + " features, dataset has " +
                    std::to_string(data.total_features()));
  auto report = empty_report({label}, config.ratios, config.trials);
  run_trials(config.trials, config.threads, [&](int t) {
    const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(t);
    const std::string ctx = "trial " + std::to_string(t);
    const auto split = with_context(ctx + ", split", [&] { return make_split(config, data, seed); });
    for (std::size_t ri = 0; ri < config.ratios.size(); ++ri) {
      report.raw[0][ri][static_cast<std::size_t>(t)] = with_context(ctx + ", evaluation", [&] {
        return evaluate_selection(data, split, select_top(ranking, config.ratios[ri]), config.k_neighbors,
                                  config.smoothing);
      });
    }
  });
  return report;
}

std::vector<fs::path> emit_report(const SweepReport& report, const fs::path& out_dir) {
  if (report.ratios.empty()) throw ConfigError("report has no feature ratios");
  if (report.methods.empty()) throw ConfigError("report has no methods");
  fs::create_directories(out_dir);

  const auto summary_csv = out_dir / "summary.csv";
  const auto trials_csv = out_dir / "trials.csv";
  const auto summary_json = out_dir / "summary.json";

  std::ofstream summary(summary_csv, std::ios::binary | std::ios::trunc);
  std::ofstream trials(trials_csv, std::ios::binary | std::ios::trunc);
  if (!summary || !trials) throw DataError("cannot write report files in " + out_dir.string());

  summary << "method,ratio,trials";
  trials << "method,ratio,trial";
  for (auto* name : kMetricNames) {
    summary << ',' << name << "_mean," << name << "_std";
    trials << ',' << name;
  }
  summary << '\n';
  trials << '\n';

  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (std::size_t m = 0; m < report.methods.size(); ++m) {
    for (std::size_t r = 0; r < report.ratios.size(); ++r) {
      const auto mu = report.mean(m, r);
      const auto sd = report.stddev(m, r);
      summary << report.methods[m] << ',' << shortest(report.ratios[r]) << ',' << report.trials;
      nlohmann::ordered_json row;
      row["method"] = report.methods[m];
      row["ratio"] = report.ratios[r];
      row["trials"] = report.trials;
      for (std::size_t k = 0; k < std::size(kMetrics); ++k) {
        summary << ',' << csv::format_double(mu.*kMetrics[k]) << ',' << csv::format_double(sd.*kMetrics[k]);
        row[std::string(kMetricNames[k]) + "_mean"] = mu.*kMetrics[k];
        row[std::string(kMetricNames[k]) + "_std"] = sd.*kMetrics[k];
      }
      summary << '\n';
      rows.push_back(std::move(row));

      for (int t = 0; t < report.trials; ++t) {
        const auto& cell = report.raw[m][r][static_cast<std::size_t>(t)];
        trials << report.methods[m] << ',' << shortest(report.ratios[r]) << ',' << t;
        for (auto metric : kMetrics) trials << ',' << csv::format_double(cell.*metric);
        trials << '\n';
      }
    }
  }

  std::ofstream json(summary_json, std::ios::binary | std::ios::trunc);
  if (!json) throw DataError("cannot write " + summary_json.string());
  json << rows.dump(2) << '\n';
  return {summary_csv, trials_csv, summary_json};
}

}  // namespace cwefs

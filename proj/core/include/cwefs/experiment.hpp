#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cwefs/dataset.hpp"
#include "cwefs/graph.hpp"
#include "cwefs/metrics.hpp"
#include "cwefs/solver.hpp"

namespace cwefs {

enum class Method { Cwefs, Random, Variance };
enum class SplitMode { Subject, Instance };

std::string method_name(Method m);

/// Everything a `run` needs. Parsed from a flat `key = value` file; see
/// parse_config for the recognised keys.
struct ExperimentConfig {
  std::optional<std::filesystem::path> manifest;
  std::optional<SyntheticSpec> synthetic;

  double label_threshold = 5.0;
  Comparator comparator = Comparator::Greater;
  bool normalize = true;

  HyperParams hyper;
  GraphParams graph;

  std::vector<double> ratios{0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50};
  int trials = 50;
  double train_fraction = 0.8;
  SplitMode split = SplitMode::Subject;
  int k_neighbors = 10;
  double smoothing = 1.0;
  std::uint64_t seed = 0;
  std::vector<Method> methods{Method::Cwefs};
  int threads = 1;

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;
};

/// Keys (all optional except a data source):
///   data.manifest, synthetic.channels, synthetic.features (comma list or a
///   single value repeated per channel), synthetic.instances, synthetic.labels,
///   synthetic.relevant, synthetic.noise_sigma, synthetic.seed,
///   labels.threshold, labels.comparator (gt|ge), features.normalize,
///   solver.{lambda,beta,eta,gamma,delta,epsilon,max_iters,rel_tol,latent_dim,
///   adapt_channel_weights,alpha_weighted_ranking}, graph.{q,sigma},
///   eval.{ratios,trials,train_fraction,split,k_neighbors,smoothing},
///   seed, methods (comma list of cwefs|random|variance), threads.
/// Relative paths resolve against `base_dir`.
ExperimentConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir);
ExperimentConfig parse_config(const std::filesystem::path& path);

std::vector<double> parse_ratio_list(const std::string& text);

/// Loads or synthesises the dataset, then binarizes and (optionally) normalizes it.
MultiChannelDataset prepare_dataset(const ExperimentConfig& config);

// Baselines -----------------------------------------------------------------

FeatureRanking baseline_random(const std::vector<Eigen::Index>& features_per_channel,
                               std::uint64_t seed);

/// Descending per-row variance (population), ties by (channel, feature).
FeatureRanking baseline_variance(const MultiChannelDataset& data);

// Evaluation ----------------------------------------------------------------

/// Stacks the selected rows of every channel, in the order given.
Eigen::MatrixXd gather_features(const MultiChannelDataset& data,
                                const std::vector<FeatureId>& selected);

/// Fits ML-KNN on the training instances restricted to `selected` and scores
/// the test instances.
MetricsReport evaluate_selection(const MultiChannelDataset& data, const SplitPlan& split,
                                 const std::vector<FeatureId>& selected, int k_neighbors,
                                 double smoothing);

struct SweepReport {
  std::vector<std::string> methods;
  std::vector<double> ratios;
  int trials = 0;
  /// raw[method][ratio][trial]
  std::vector<std::vector<std::vector<MetricsReport>>> raw;

  MetricsReport mean(std::size_t method, std::size_t ratio) const;
  /// Sample standard deviation; zero for a single trial.
  MetricsReport stddev(std::size_t method, std::size_t ratio) const;
};

/// Trial t uses seed base_seed + t for the split, the solver and the random
/// baseline. Trials run on config.threads workers; output does not depend
/// on the worker count.
SweepReport run_experiment(const ExperimentConfig& config, const MultiChannelDataset& data);
SweepReport run_experiment(const ExperimentConfig& config);

/// Same protocol for a fixed, precomputed ranking (no per-trial selection).
SweepReport evaluate_fixed_ranking(const ExperimentConfig& config, const MultiChannelDataset& data,
                                   const FeatureRanking& ranking, const std::string& label);

/// Writes summary.csv, trials.csv and summary.json into out_dir.
std::vector<std::filesystem::path> emit_report(const SweepReport& report,
                                               const std::filesystem::path& out_dir);

}  // namespace cwefs

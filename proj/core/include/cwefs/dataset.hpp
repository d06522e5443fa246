#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace cwefs {

/// One channel's features: rows are features, columns are instances.
struct ChannelBlock {
  std::string name;
  Eigen::MatrixXd features;

  Eigen::Index feature_count() const { return features.rows(); }
};

/// Feature blocks for every channel plus the k x n label matrices and one
/// subject identifier per instance.
struct MultiChannelDataset {
  std::vector<ChannelBlock> channels;
  Eigen::MatrixXd labels_raw;                    // k x n
  std::optional<Eigen::MatrixXd> labels_binary;  // k x n, entries in {0,1}
  std::vector<std::string> subject_ids;          // length n

  Eigen::Index instance_count() const { return labels_raw.cols(); }
  Eigen::Index label_count() const { return labels_raw.rows(); }
  std::size_t channel_count() const { return channels.size(); }
  Eigen::Index total_features() const;

  /// Throws DataError when any shape invariant is violated.
  void validate() const;

  /// Copy restricted to the given instance columns, in the given order.
  MultiChannelDataset subset(const std::vector<Eigen::Index>& instances) const;
};

// Ingestion -----------------------------------------------------------------

/// Reads the manifest and every file it names. Paths in the manifest are
/// resolved relative to the manifest's own directory.
///
/// Manifest lines (blank lines and `#` comments ignored):
///   channel <name> <path>
///   labels <path>
///   subjects <path>            one id per cell, comma or newline separated
///   subjects labels_row=<r>    ids taken from row r of the labels file,
///                              which is then dropped from the labels
///   header=true                every CSV carries one header line
MultiChannelDataset load_dataset(const std::filesystem::path& manifest);

/// Writes `<dir>/manifest.txt`, one CSV per channel, `labels.csv` and
/// `subjects.csv`. Numbers use 17 significant digits.
void save_dataset(const MultiChannelDataset& data, const std::filesystem::path& dir);

// Preprocessing -------------------------------------------------------------

enum class Comparator { Greater, GreaterEqual };

/// labels_binary(j, i) = 1 when labels_raw(j, i) > threshold (or >= with
/// Comparator::GreaterEqual), else 0.
MultiChannelDataset binarize_labels(MultiChannelDataset data, double threshold = 5.0,
                                    Comparator cmp = Comparator::Greater);

/// Per-row min-max scaling of every channel into [0, 1]. Constant rows become 0.
MultiChannelDataset normalize_features(MultiChannelDataset data);

// Splitting -----------------------------------------------------------------

struct SplitPlan {
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> test;
  std::uint64_t seed = 0;
};

/// Shuffles the distinct subjects with a seeded generator and assigns the
/// first ceil(train_fraction * #subjects) of them to training. Both index
/// lists come back sorted ascending.
SplitPlan split_subjectwise(const MultiChannelDataset& data, double train_fraction,
                            std::uint64_t seed);

/// Same as split_subjectwise but treating every instance as its own subject.
SplitPlan split_instancewise(const MultiChannelDataset& data, double train_fraction,
                             std::uint64_t seed);

// Synthetic data ------------------------------------------------------------

struct FeatureId {
  int channel = 0;
  int feature = 0;

  friend auto operator<=>(const FeatureId&, const FeatureId&) = default;
};

struct SyntheticSpec {
  int channels = 3;
  std::vector<int> features_per_channel{40, 40, 40};
  int instances = 120;
  int labels = 3;
  int relevant_per_channel = 8;
  double noise_sigma = 0.05;
  std::uint64_t seed = 0;
};

struct SyntheticGroundTruth {
  std::vector<FeatureId> relevant_features;  // sorted ascending
  Eigen::MatrixXd planted_latent;            // n x k
  std::vector<Eigen::MatrixXd> planted_loadings;  // per channel, d_v x k
};

/// Planted low-rank data: X(v) = max(0, Q*(v) U*^T + noise) where only the
/// designated relevant rows of Q*(v) are nonzero. Label scores are
/// 10 * M* U*^T on a 0..10 scale and are binarized at 5. Every instance is
/// its own subject.
std::pair<MultiChannelDataset, SyntheticGroundTruth> generate_synthetic(const SyntheticSpec& spec);

void save_ground_truth(const SyntheticGroundTruth& truth, const std::filesystem::path& path);

}  // namespace cwefs

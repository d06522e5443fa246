#include "cwefs/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "cwefs/csv.hpp"
#include "cwefs/errors.hpp"

namespace cwefs {

namespace fs = std::filesystem;

Eigen::Index MultiChannelDataset::total_features() const {
  Eigen::Index total = 0;
  for (const auto& c : channels) total += c.feature_count();
  return total;
}

void MultiChannelDataset::validate() const {
  const auto n = instance_count();
  if (channels.empty()) throw DataError("dataset has no channels");
  if (n < 2) throw DataError("dataset needs at least 2 instances, got " + std::to_string(n));
  if (label_count() < 1) throw DataError("dataset has no label dimensions");
  for (const auto& c : channels) {
    if (c.features.cols() != n) {
      throw DataError("channel '" + c.name + "' has " + std::to_string(c.features.cols()) +
                      " instances, labels have " + std::to_string(n));
    }
    if (c.features.rows() < 1) throw DataError("channel '" + c.name + "' has no features");
    if (!c.features.allFinite()) throw DataError("channel '" + c.name + "' has non-finite entries");
  }
  if (labels_binary && (labels_binary->rows() != label_count() || labels_binary->cols() != n))
    throw DataError("binary labels shape differs from raw labels");
  if (static_cast<Eigen::Index>(subject_ids.size()) != n) {
    throw DataError("expected " + std::to_string(n) + " subject ids, got " +
                    std::to_string(subject_ids.size()));
  }
}

MultiChannelDataset MultiChannelDataset::subset(const std::vector<Eigen::Index>& instances) const {
  MultiChannelDataset out;
  const auto m = static_cast<Eigen::Index>(instances.size());
  for (const auto& c : channels) {
    ChannelBlock b{c.name, Eigen::MatrixXd(c.features.rows(), m)};
    for (Eigen::Index i = 0; i < m; ++i) b.features.col(i) = c.features.col(instances[i]);
    out.channels.push_back(std::move(b));
  }
  out.labels_raw.resize(labels_raw.rows(), m);
  for (Eigen::Index i = 0; i < m; ++i) out.labels_raw.col(i) = labels_raw.col(instances[i]);
  if (labels_binary) {
    Eigen::MatrixXd yb(labels_binary->rows(), m);
    for (Eigen::Index i = 0; i < m; ++i) yb.col(i) = labels_binary->col(instances[i]);
    out.labels_binary = std::move(yb);
  }
  out.subject_ids.reserve(instances.size());
  for (auto i : instances) out.subject_ids.push_back(subject_ids[i]);
  return out;
}

// Ingestion -----------------------------------------------------------------

namespace {

struct Manifest {
  std::vector<std::pair<std::string, fs::path>> channels;
  fs::path labels;
  std::optional<fs::path> subjects_file;
  std::optional<int> subjects_labels_row;
  bool header = false;
};

Manifest parse_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  const auto base = path.parent_path();

  Manifest m;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body(csv::trim(std::string_view(line).substr(0, line.find('#'))));
    if (body.empty()) continue;
    std::istringstream ss{body};
    std::vector<std::string> words;
    for (std::string w; ss >> w;) words.push_back(w);
    const auto where = path.string() + ":" + std::to_string(line_no) + ": ";

    if (words[0] == "header=true" || words[0] == "header=false") {
      m.header = words[0] == "header=true";
    } else if (words[0] == "channel" && words.size() == 3) {
      m.channels.emplace_back(words[1], base / words[2]);
    } else if (words[0] == "labels" && words.size() == 2) {
      m.labels = base / words[1];
    } else if (words[0] == "subjects" && words.size() == 2) {
      constexpr std::string_view row_key = "labels_row=";
      if (words[1].rfind(row_key, 0) == 0) {
        double r = 0;
        if (!csv::parse_double(words[1].substr(row_key.size()), r) || r < 0 || r != std::floor(r))
          throw DataError(where + "bad labels_row index");
        m.subjects_labels_row = static_cast<int>(r);
      } else {
        m.subjects_file = base / words[1];
      }
    } else {
      throw DataError(where + "unrecognised manifest line: " + body);
    }
  }
  if (m.channels.empty()) throw DataError(path.string() + ": manifest lists no channels");
  if (m.labels.empty()) throw DataError(path.string() + ": manifest lists no labels file");
  return m;
}

}  // namespace

MultiChannelDataset load_dataset(const fs::path& manifest_path) {
  const auto manifest = parse_manifest(manifest_path);

  MultiChannelDataset data;
  data.labels_raw = csv::read_matrix(manifest.labels, manifest.header);

  if (manifest.subjects_labels_row) {
    const int r = *manifest.subjects_labels_row;
    if (r >= data.labels_raw.rows()) {
      throw DataError(manifest.labels.string() + ": labels_row " + std::to_string(r) +
                      " out of range");
    }
    if (data.labels_raw.rows() < 2)
      throw DataError(manifest.labels.string() + ": no label rows left after subject row");
    Eigen::MatrixXd rest(data.labels_raw.rows() - 1, data.labels_raw.cols());
    for (Eigen::Index i = 0, o = 0; i < data.labels_raw.rows(); ++i) {
      if (i == r) continue;
      rest.row(o++) = data.labels_raw.row(i);
    }
    for (Eigen::Index c = 0; c < data.labels_raw.cols(); ++c)
      data.subject_ids.push_back(csv::format_double(data.labels_raw(r, c)));
    data.labels_raw = std::move(rest);
  } else if (manifest.subjects_file) {
    data.subject_ids = csv::read_tokens(*manifest.subjects_file);
    if (manifest.header && !data.subject_ids.empty()) data.subject_ids.erase(data.subject_ids.begin());
  } else {
    for (Eigen::Index c = 0; c < data.labels_raw.cols(); ++c)
      data.subject_ids.push_back(std::to_string(c));
  }

  const auto n = data.labels_raw.cols();
  if (static_cast<Eigen::Index>(data.subject_ids.size()) != n) {
    throw DataError((manifest.subjects_file ? manifest.subjects_file->string() : std::string("subjects")) +
                    ": " + std::to_string(data.subject_ids.size()) + " subject ids, labels have " +
                    std::to_string(n) + " instances");
  }

  for (const auto& [name, file] : manifest.channels) {
    auto x = csv::read_matrix(file, manifest.header);
    if (x.cols() != n) {
      throw DataError(file.string() + ": " + std::to_string(x.cols()) +
                      " columns, labels file has " + std::to_string(n));
    }
    data.channels.push_back({name, std::move(x)});
  }
  data.validate();
  return data;
}

void save_dataset(const MultiChannelDataset& data, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream manifest(dir / "manifest.txt", std::ios::binary | std::ios::trunc);
  if (!manifest) throw DataError("cannot write " + (dir / "manifest.txt").string());
  for (std::size_t v = 0; v < data.channels.size(); ++v) {
    const auto file = "channel_" + std::to_string(v) + ".csv";
    csv::write_matrix(dir / file, data.channels[v].features);
    manifest << "channel " << data.channels[v].name << ' ' << file << '\n';
  }
  csv::write_matrix(dir / "labels.csv", data.labels_raw);
  manifest << "labels labels.csv\n";

  std::ofstream subjects(dir / "subjects.csv", std::ios::binary | std::ios::trunc);
  for (const auto& s : data.subject_ids) subjects << s << '\n';
  manifest << "subjects subjects.csv\n";
}

// Preprocessing -------------------------------------------------------------

MultiChannelDataset binarize_labels(MultiChannelDataset data, double threshold, Comparator cmp) {
  const auto& raw = data.labels_raw;
  Eigen::MatrixXd y(raw.rows(), raw.cols());
  for (Eigen::Index j = 0; j < raw.rows(); ++j) {
    for (Eigen::Index i = 0; i < raw.cols(); ++i) {
      const bool high = cmp == Comparator::Greater ? raw(j, i) > threshold : raw(j, i) >= threshold;
      y(j, i) = high ? 1.0 : 0.0;
    }
  }
  data.labels_binary = std::move(y);
  return data;
}

MultiChannelDataset normalize_features(MultiChannelDataset data) {
  for (auto& c : data.channels) {
    auto& x = c.features;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const double lo = x.row(r).minCoeff();
      const double hi = x.row(r).maxCoeff();
      if (hi > lo) {
        x.row(r) = ((x.row(r).array() - lo) / (hi - lo)).matrix();
      } else {
        x.row(r).setZero();
      }
    }
  }
  return data;
}

// Splitting -----------------------------------------------------------------

namespace {

SplitPlan split_by_groups(const std::vector<std::string>& groups, double train_fraction,
                          std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train fraction must lie in (0, 1)");

  // Distinct subjects in order of first appearance, so the shuffle input is
  // independent of how ids sort.
  std::vector<std::string> subjects;
  std::set<std::string> seen;
  for (const auto& g : groups)
    if (seen.insert(g).second) subjects.push_back(g);
  if (subjects.size() < 2)
    throw DataError("subject-wise split needs at least 2 subjects, got " +
                    std::to_string(subjects.size()));

  std::mt19937_64 rng(seed);
  std::shuffle(subjects.begin(), subjects.end(), rng);

  const auto count = static_cast<double>(subjects.size());
  auto n_train = static_cast<std::size_t>(std::ceil(train_fraction * count - 1e-9));
  n_train = std::clamp<std::size_t>(n_train, 1, subjects.size() - 1);
  const std::set<std::string> train_subjects(subjects.begin(), subjects.begin() + n_train);

  SplitPlan plan;
  plan.seed = seed;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    (train_subjects.count(groups[i]) ? plan.train : plan.test).push_back(static_cast<Eigen::Index>(i));
  }
  return plan;
}

}  // namespace

SplitPlan split_subjectwise(const MultiChannelDataset& data, double train_fraction,
                            std::uint64_t seed) {
  return split_by_groups(data.subject_ids, train_fraction, seed);
}

SplitPlan split_instancewise(const MultiChannelDataset& data, double train_fraction,
                             std::uint64_t seed) {
  std::vector<std::string> ids;
  ids.reserve(static_cast<std::size_t>(data.instance_count()));
  for (Eigen::Index i = 0; i < data.instance_count(); ++i) ids.push_back(std::to_string(i));
  return split_by_groups(ids, train_fraction, seed);
}

// Synthetic data ------------------------------------------------------------

std::pair<MultiChannelDataset, SyntheticGroundTruth> generate_synthetic(const SyntheticSpec& spec) {
  if (spec.channels < 1) throw ConfigError("synthetic: need at least one channel");
  if (static_cast<int>(spec.features_per_channel.size()) != spec.channels)
    throw ConfigError("synthetic: feature count list must have one entry per channel");
  if (spec.labels < 1) throw ConfigError("synthetic: need at least one label");
  if (spec.instances <= spec.labels) throw ConfigError("synthetic: instances must exceed labels");
  if (spec.relevant_per_channel < 1) throw ConfigError("synthetic: need at least one relevant row");
  const int min_d = *std::min_element(spec.features_per_channel.begin(), spec.features_per_channel.end());
  if (spec.relevant_per_channel > min_d)
    throw ConfigError("synthetic: relevant rows exceed the smallest channel");
  const bool all_relevant = std::all_of(spec.features_per_channel.begin(), spec.features_per_channel.end(),
                                        [&](int d) { return d == spec.relevant_per_channel; });
  if (all_relevant)
    throw ConfigError("synthetic: relevant rows must be a strict subset of all features");
  if (!(spec.noise_sigma >= 0.0)) throw ConfigError("synthetic: noise sigma must be non-negative");

  const int n = spec.instances;
  const int k = spec.labels;
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> loading(0.2, 1.0);
  std::normal_distribution<double> noise(0.0, spec.noise_sigma > 0 ? spec.noise_sigma : 1.0);

  SyntheticGroundTruth truth;
  truth.planted_latent.resize(n, k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) truth.planted_latent(i, j) = unit(rng);

  MultiChannelDataset data;
  for (int v = 0; v < spec.channels; ++v) {
    const int d = spec.features_per_channel[v];
    std::vector<int> rows(d);
    for (int r = 0; r < d; ++r) rows[r] = r;
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(spec.relevant_per_channel);
    std::sort(rows.begin(), rows.end());

    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(d, k);
    for (int r : rows) {
      for (int j = 0; j < k; ++j) q(r, j) = loading(rng);
      truth.relevant_features.push_back({v, r});
    }

    Eigen::MatrixXd x = q * truth.planted_latent.transpose();
    if (spec.noise_sigma > 0) {
      for (Eigen::Index c = 0; c < x.cols(); ++c)
        for (Eigen::Index r = 0; r < x.rows(); ++r) x(r, c) = std::max(0.0, x(r, c) + noise(rng));
    }
    data.channels.push_back({"ch" + std::to_string(v), std::move(x)});
    truth.planted_loadings.push_back(std::move(q));
  }

  // Each label mixes its own latent factor (weight 0.6) with the others.
  Eigen::MatrixXd mix = Eigen::MatrixXd::Constant(k, k, k > 1 ? 0.4 / (k - 1) : 0.0);
  mix.diagonal().setConstant(k > 1 ? 0.6 : 1.0);
  data.labels_raw = 10.0 * mix * truth.planted_latent.transpose();
  for (int i = 0; i < n; ++i) data.subject_ids.push_back("s" + std::to_string(i));

  data = binarize_labels(std::move(data), 5.0);
  data.validate();
  return {std::move(data), std::move(truth)};
}

void save_ground_truth(const SyntheticGroundTruth& truth, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "channel,feature_index\n";
  for (const auto& f : truth.relevant_features) out << f.channel << ',' << f.feature << '\n';
}

}  // namespace cwefs

// cwefs: channel-weighted multi-view NMF feature selection and evaluation.
//
//   cwefs synth    --config <cfg> --out <dir>
//   cwefs select   --config <cfg> --out <dir> [--dump-graphs]
//   cwefs eval     --config <cfg> --ranking <csv> --out <dir>
//   cwefs run      --config <cfg> --out <dir>
//   cwefs friedman --ranks <csv> [--out <file>]
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "cwefs/csv.hpp"
#include "cwefs/errors.hpp"
#include "cwefs/experiment.hpp"

namespace fs = std::filesystem;
using namespace cwefs;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

struct Overrides {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<std::string> ratios;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, Overrides& o, bool experiment_flags) {
  cmd->add_option("--config", o.config, "Experiment config file")->required();
  cmd->add_option("--out", o.out, "Output directory")->required();
  cmd->add_option("--seed", o.seed, "Base seed");
  if (experiment_flags) {
    cmd->add_option("--trials", o.trials, "Number of repeated trials");
    cmd->add_option("--ratios", o.ratios, "Comma-separated feature ratios");
    cmd->add_option("--threads", o.threads, "Worker threads for trials");
  }
}

ExperimentConfig load_config(const Overrides& o) {
  auto c = parse_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.trials) c.trials = *o.trials;
  if (o.ratios) c.ratios = parse_ratio_list(*o.ratios);
  if (o.threads) c.threads = *o.threads;
  c.validate();
  return c;
}

void write_json(const fs::path& p, const nlohmann::ordered_json& j) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + p.string());
  out << j.dump(2) << '\n';
}

int cmd_synth(const Overrides& o) {
  auto c = parse_config(o.config);
  if (!c.synthetic) throw ConfigError("synth needs synthetic.* keys in the config");
  if (o.seed) c.synthetic->seed = *o.seed;
  const auto [data, truth] = generate_synthetic(*c.synthetic);
  save_dataset(data, o.out);
  save_ground_truth(truth, fs::path(o.out) / "ground_truth.csv");
  std::cout << "wrote " << data.channel_count() << " channels, " << data.instance_count() << " instances to "
            << o.out << '\n';
  return 0;
}

int cmd_select(const Overrides& o, bool dump_graphs) {
  const auto c = load_config(o);
  const auto data = prepare_dataset(c);
  const auto problem = Problem::from_dataset(data);
  const auto graphs = ProblemGraphs::build(problem, c.graph);
  const auto state = solve(problem, graphs, c.hyper, c.seed);

  const fs::path out(o.out);
  fs::create_directories(out);
  write_ranking_csv(rank_features(state, c.hyper.alpha_weighted_ranking), out / "ranking.csv");
  write_trace_csv(state.objective_trace, out / "trace.csv");
  csv::write_matrix(out / "alpha.csv", state.alpha.transpose());
  if (dump_graphs) {
    for (std::size_t v = 0; v < graphs.channels.size(); ++v) {
      csv::write_matrix(out / ("graph_S_channel_" + std::to_string(v) + ".csv"), graphs.channels[v].affinity);
      csv::write_matrix(out / ("graph_L_channel_" + std::to_string(v) + ".csv"), graphs.channels[v].matrix());
    }
    csv::write_matrix(out / "graph_S_labels.csv", graphs.labels.affinity);
    csv::write_matrix(out / "graph_L_labels.csv", graphs.labels.matrix());
  }
  std::cout << "solved in " << state.objective_trace.size() - 1 << " sweeps, objective "
            << csv::format_double(state.objective_trace.back()) << '\n';
  return 0;
}

int cmd_eval(const Overrides& o, const std::string& ranking_path) {
  const auto c = load_config(o);
  const auto data = prepare_dataset(c);
  const auto ranking = read_ranking_csv(ranking_path);
  emit_report(evaluate_fixed_ranking(c, data, ranking, fs::path(ranking_path).stem().string()), o.out);
  return 0;
}

int cmd_run(const Overrides& o) {
  const auto c = load_config(o);
  const auto files = emit_report(run_experiment(c), o.out);
  for (const auto& f : files) std::cout << f.string() << '\n';
  return 0;
}

int cmd_friedman(const std::string& ranks_path, bool header, const std::string& out) {
  const auto r = friedman_statistic(csv::read_matrix(ranks_path, header));
  nlohmann::ordered_json j;
  j["methods"] = r.methods;
  j["datasets"] = r.datasets;
  j["chi_square"] = r.chi_square;
  j["f_statistic"] = r.f_statistic;  // null when infinite
  if (out.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    write_json(out, j);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Channel-weighted multi-view NMF feature selection"};
  app.require_subcommand(1);

  Overrides o;
  bool dump_graphs = false;
  std::string ranking_path, ranks_path, friedman_out;
  bool ranks_header = false;

  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset with planted relevant features");
  add_common(synth, o, false);
  auto* select = app.add_subcommand("select", "Fit on all instances and write the feature ranking");
  add_common(select, o, false);
  select->add_flag("--dump-graphs", dump_graphs, "Also write affinity and Laplacian matrices");
  auto* eval = app.add_subcommand("eval", "Evaluate a precomputed ranking with ML-KNN over repeated splits");
  add_common(eval, o, true);
  eval->add_option("--ranking", ranking_path, "Ranking CSV")->required();
  auto* run = app.add_subcommand("run", "Full pipeline: repeated selection and evaluation");
  add_common(run, o, true);
  auto* friedman = app.add_subcommand("friedman", "Friedman statistic from a methods x datasets rank table");
  friedman->add_option("--ranks", ranks_path, "Rank table CSV")->required();
  friedman->add_flag("--header", ranks_header, "Skip the first line of the CSV");
  friedman->add_option("--out", friedman_out, "Write JSON here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*synth) return cmd_synth(o);
    if (*select) return cmd_select(o, dump_graphs);
    if (*eval) return cmd_eval(o, ranking_path);
    if (*run) return cmd_run(o);
    if (*friedman) return cmd_friedman(ranks_path, ranks_header, friedman_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

// mrl: batch front end for multiresolution training and robustness runs.
//
// Exit codes: 0 success, 1 config error, 2 data error, 3 runtime failure.

#include "mrl/errors.hpp"
#include "mrl/experiment.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
namespace ex = mrl::experiment;

namespace {

enum Exit { kOk = 0, kConfig = 1, kData = 2, kRuntime = 3 };

struct Overrides {
  std::vector<std::uint64_t> seeds;
  std::vector<int> k_levels;
  std::optional<int> epochs;
  std::optional<int> jobs;
  std::optional<int> batch_size;
  std::optional<int> patience;
  std::optional<double> learning_rate;
  std::string output_dir;
  bool no_attacks = false;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seeds", o.seeds, "Seed list (overrides config)")->delimiter(',');
  cmd->add_option("--k-levels", o.k_levels, "Learning modes as k values, 1 = TL")->delimiter(',');
  cmd->add_option("--epochs", o.epochs, "Total epoch budget per run");
  cmd->add_option("--jobs", o.jobs, "Concurrent runs");
  cmd->add_option("--batch-size", o.batch_size, "Minibatch size");
  cmd->add_option("--patience", o.patience, "Early-stopping patience in epochs");
  cmd->add_option("--learning-rate", o.learning_rate, "SGD learning rate");
  cmd->add_option("--output-dir", o.output_dir, "Report bundle directory (relative to $MRL_OUTPUT_ROOT)");
}

ex::ExperimentConfig load(const std::string& path, const Overrides& o) {
  auto c = ex::load_config(path);
  if (!o.seeds.empty()) c.seeds = o.seeds;
  if (!o.k_levels.empty()) c.k_levels = o.k_levels;
  if (o.epochs) c.total_epochs = *o.epochs;
  if (o.jobs) c.jobs = *o.jobs;
  if (o.batch_size) c.train.batch_size = *o.batch_size;
  if (o.patience) c.train.early_stop_patience = *o.patience;
  if (o.learning_rate) c.train.learning_rate = *o.learning_rate;
  if (!o.output_dir.empty()) c.output_dir = o.output_dir;
  if (o.no_attacks) c.attacks = {};
  c.validate();
  return c;
}

const ex::SplitData& pick_split(const std::vector<ex::SplitData>& splits, std::size_t fold) {
  if (fold >= splits.size()) {
    throw mrl::ConfigError("--fold " + std::to_string(fold) + " out of range (" + std::to_string(splits.size()) +
                           " splits)");
  }
  return splits[fold];
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiresolution curriculum training and robustness evaluation"};
  app.require_subcommand(1);

  std::string config_path, checkpoint, input, run_dir;
  std::size_t fold = 0;
  int levels = 3;
  std::optional<std::uint64_t> attack_seed;
  Overrides o;

  auto* run = app.add_subcommand("run", "Train every mode and seed, then attack and report");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  add_overrides(run, o);
  run->add_flag("--no-attacks", o.no_attacks, "Skip the attack suite");

  auto* train = app.add_subcommand("train", "Train every mode and seed without attacks");
  train->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  add_overrides(train, o);

  auto* attack = app.add_subcommand("attack", "Run the config's attack suite against a checkpoint");
  attack->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  attack->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
  attack->add_option("--fold", fold, "Split index in cross-validation mode");
  attack->add_option("--seed", attack_seed, "Attack seed (default: first config seed)");
  attack->add_option("--output-dir", o.output_dir, "Where to write attack results");

  auto* evaluate = app.add_subcommand("evaluate", "Clean test accuracy of a checkpoint");
  evaluate->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
  evaluate->add_option("--fold", fold, "Split index in cross-validation mode");

  auto* report = app.add_subcommand("report", "Write plot CSVs for a finished bundle");
  report->add_option("--run-dir", run_dir, "Report bundle directory")->required();

  auto* decompose = app.add_subcommand("decompose", "Dump resolution versions r_1..r_k of a WAV/PGM/PPM file");
  decompose->add_option("--input", input, "Input file")->required()->check(CLI::ExistingFile);
  decompose->add_option("--levels", levels, "Number of resolution versions")->check(CLI::PositiveNumber);
  decompose->add_option("--output-dir", o.output_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  std::string log_dir;
  auto fail = [&](int code, const std::string& kind, const std::string& what) {
    std::cerr << "mrl: " << kind << ": " << what << '\n';
    if (!log_dir.empty()) {
      std::error_code ec;
      fs::create_directories(log_dir, ec);
      std::ofstream(fs::path(log_dir) / "error.log") << kind << ": " << what << '\n';
    }
    return code;
  };

  try {
    if (*run || *train) {
      const auto config = load(config_path, o);
      log_dir = ex::resolve_output_dir(config.output_dir);
      ex::Stages stages;
      stages.attacks = run->parsed();
      const auto summary = ex::run_experiment(config, stages);
      for (const auto& m : summary.runs) {
        std::cout << m.mode << " seed " << m.seed << (m.fold.empty() ? "" : " " + m.fold) << ": test accuracy "
                  << m.test_accuracy;
        if (m.noisy_accuracy) std::cout << ", noisy " << *m.noisy_accuracy;
        if (m.rho) std::cout << ", rho " << *m.rho;
        std::cout << '\n';
      }
      std::cout << "bundle: " << summary.output_dir << '\n';
    } else if (*attack || *evaluate) {
      auto config = load(config_path, o);
      const auto splits = ex::load_dataset(config.dataset);
      const auto& split = pick_split(splits, fold);
      const auto net = mrl::nn::load_checkpoint(checkpoint);
      ex::RunMetrics m;
      m.mode = "checkpoint";
      m.seed = attack_seed.value_or(config.seeds.front());
      m.fold = split.name;
      const auto clean = ex::evaluate_clean(net, split.test);
      m.test_accuracy = clean.accuracy;
      m.test_loss = clean.loss;
      m.clip_accuracy = clean.clip_accuracy;
      if (*attack) {
        const std::string dir = o.output_dir.empty() ? fs::path(checkpoint).parent_path().string()
                                                     : ex::resolve_output_dir(o.output_dir);
        log_dir = dir;
        fs::create_directories(dir);
        ex::run_attacks(net, split.test, config.attacks, split.dim, m.seed, dir, m);
        std::ofstream(fs::path(dir) / "attack.json") << ex::to_json(m) << '\n';
      }
      std::cout << ex::to_json(m) << '\n';
    } else if (*report) {
      log_dir = run_dir;
      ex::emit_plot_data(run_dir);
      std::cout << "plots: " << (fs::path(run_dir) / "plots").string() << '\n';
    } else if (*decompose) {
      const std::string dir = ex::resolve_output_dir(o.output_dir);
      for (const auto& f : ex::decompose_file(input, levels, dir)) std::cout << f << '\n';
    }
  } catch (const mrl::ConfigError& e) {
    return fail(kConfig, "config error", e.what());
  } catch (const mrl::DataError& e) {
    return fail(kData, "data error", e.what());
  } catch (const mrl::DimensionError& e) {
    return fail(kData, "data error", e.what());
  } catch (const std::exception& e) {
    return fail(kRuntime, "runtime failure", e.what());
  }
  return kOk;
}

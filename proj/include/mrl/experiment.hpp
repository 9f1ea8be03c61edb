#pragma once

// Batch experiment orchestration: a JSON config describes the dataset, the
// network, the learning modes (k levels), the seeds and the attack suite.
// run_experiment() trains every (mode, seed[, fold]) combination, evaluates
// it and writes a report bundle:
//
//   <out>/manifest.json                      config and completed stages
//   <out>/<mode>/<run>/metrics.json          deterministic per-run metrics
//   <out>/<mode>/<run>/train.json            per-epoch history
//   <out>/<mode>/<run>/timing.json           wall-clock only
//   <out>/<mode>/<run>/phase-<n>.ckpt, model.ckpt
//   <out>/<mode>/<run>/{deepfool,one_pixel,swap}.csv
//   <out>/summary.json                       means over seeds per mode
//   <out>/plots/*.csv                        tabular figure data

#include "mrl/curriculum.hpp"
#include "mrl/dataset.hpp"
#include "mrl/multires.hpp"
#include "mrl/nn/network.hpp"
#include "mrl/nn/spec.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mrl::experiment {

struct DatasetConfig {
  /// synthetic-1d | synthetic-2d | wav-dir | cifar-bin | image-dir
  std::string format = "synthetic-1d";
  /// Directory or file; cifar-bin accepts a directory of *.bin batches.
  std::string path;
  /// none | waveform | log-mel | standardize
  std::string preprocess = "none";
  std::size_t count = 200;      // synthetic sample count
  Index length = 128;           // synthetic 1D length
  Index image_size = 16;        // synthetic 2D side
  double noise = 0.05;          // synthetic additive noise std
  std::uint64_t seed = 0;       // generator and split seed
  std::array<double, 3> split{0.64, 0.16, 0.20};
  double train_fraction = 1.0;  // keeps this share of the training split
  Index target_length = 16000;  // waveform preprocessing
  int cross_validation_folds = 0;
};

struct NoiseAttackConfig {
  bool enabled = false;
  double density = 0.05;
  double sigma = 0.75;
};

struct DeepFoolAttackConfig {
  bool enabled = false;
  int max_iter = 50;
  double overshoot = 0.02;
  std::size_t max_samples = 0;  // 0 = whole test split
};

struct OnePixelAttackConfig {
  bool enabled = false;
  int pop_size = 75;
  int max_gens = 40;
  double scale_factor = 0.5;
  std::size_t max_samples = 0;
};

struct SwapAttackConfig {
  bool enabled = false;
  std::size_t max_samples = 0;
};

struct AttackSuite {
  NoiseAttackConfig noise;
  DeepFoolAttackConfig deepfool;
  OnePixelAttackConfig one_pixel;
  SwapAttackConfig swap;

  bool any() const { return noise.enabled || deepfool.enabled || one_pixel.enabled || swap.enabled; }
};

struct ExperimentConfig {
  std::string name = "experiment";
  DatasetConfig dataset;
  std::string network_preset;
  std::optional<nn::NetworkSpec> network_spec;
  Index pool_stride = 2;
  std::vector<int> k_levels{1};
  int total_epochs = 500;
  nn::TrainConfig train;
  curriculum::ValidationResolution validate_at = curriculum::ValidationResolution::Phase;
  std::vector<std::uint64_t> seeds{0};
  AttackSuite attacks;
  std::string output_dir = "runs";
  int jobs = 1;

  nn::NetworkSpec network() const;
  /// Throws ConfigError on inconsistent settings.
  void validate() const;
};

/// Strict parse: unknown keys and type mismatches are ConfigErrors.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);
std::string config_to_json(const ExperimentConfig& config);

/// "TL" for k = 1, "ML (k)" otherwise.
std::string mode_label(int k_levels);
/// Directory-safe form: "tl", "ml-k".
std::string mode_slug(int k_levels);

/// Output root: `dir` if absolute, else $MRL_OUTPUT_ROOT/dir (or ./dir).
std::string resolve_output_dir(const std::string& dir);

struct SplitIndices {
  std::vector<std::size_t> train, validation, test;
};

/// Shuffles 0..n-1 with `seed` and cuts it by `ratios`. Train and
/// validation sizes are rounded to nearest, test takes the rest.
SplitIndices split_indices(std::size_t n, const std::array<double, 3>& ratios, std::uint64_t seed);

/// Keeps the first round(fraction * size) entries.
std::vector<std::size_t> reduce_training(const std::vector<std::size_t>& train, double fraction);

/// (test fold, validation fold) pairs with distinct folds: folds*(folds-1) entries.
std::vector<std::pair<int, int>> cross_validation_pairs(int folds);

struct SplitData {
  std::string name;  // empty, or "fold-<test>-<val>" in cross-validation mode
  Dataset train, validation, test;
  Dimensionality dim = Dimensionality::D1;
};

/// Labeled items before splitting. `groups` are source clips for segmented
/// audio; `folds` are filename folds when present.
struct RawDataset {
  Dataset data;
  std::vector<int> folds;
  Dimensionality dim = Dimensionality::D1;
};

RawDataset synthetic_1d(std::size_t count, Index length, double noise, std::uint64_t seed);
RawDataset synthetic_2d(std::size_t count, Index size, double noise, std::uint64_t seed);

/// Loads, preprocesses and splits. One entry, or one per fold pair in
/// cross-validation mode. Throws DataError on unreadable inputs.
std::vector<SplitData> load_dataset(const DatasetConfig& config);

struct RunMetrics {
  int k_levels = 1;
  std::string mode;
  std::uint64_t seed = 0;
  std::string fold;
  int epochs_run = 0;
  double test_accuracy = 0.0;
  double test_loss = 0.0;
  std::optional<double> clip_accuracy;
  std::optional<double> noisy_accuracy;
  std::optional<double> rho;
  std::optional<std::size_t> deepfool_failures;
  std::optional<double> one_pixel_as_rate;
  std::optional<std::array<double, 4>> swap_as_rate;  // LH, HL, HH, Total
};

std::string to_json(const RunMetrics& metrics);
RunMetrics metrics_from_json(const std::string& text, const std::string& source);

/// Clean accuracy; clip-level accuracy by probability voting when the test
/// set carries group ids.
struct CleanEvaluation {
  double accuracy = 0.0;
  double loss = 0.0;
  std::optional<double> clip_accuracy;
};
CleanEvaluation evaluate_clean(const nn::Network& net, const Dataset& test);

/// Runs the enabled attacks against `net`, filling the attack fields of
/// `metrics` and writing per-sample CSVs into `dir`.
void run_attacks(const nn::Network& net, const Dataset& test, const AttackSuite& attacks, Dimensionality dim,
                 std::uint64_t seed, const std::string& dir, RunMetrics& metrics);

struct Stages {
  bool attacks = true;
};

struct ExperimentSummary {
  std::string output_dir;
  std::vector<RunMetrics> runs;
};

ExperimentSummary run_experiment(const ExperimentConfig& config, const Stages& stages = {});

/// Reads a bundle and writes plots/accuracy.csv, plots/rho.csv,
/// plots/one_pixel_as_rate.csv and plots/swap_as_rate.csv (attack files
/// only when the attack ran). Throws DataError naming the missing stage
/// when the bundle is incomplete.
void emit_plot_data(const std::string& bundle_dir);

/// Writes r_1..r_k of a WAV or PGM/PPM file next to each other in `out_dir`,
/// plus the raw values as CSV.
std::vector<std::string> decompose_file(const std::string& path, int k_levels, const std::string& out_dir);

}  // namespace mrl::experiment

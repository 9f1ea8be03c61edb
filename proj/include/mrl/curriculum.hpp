#pragma once

#include "mrl/dataset.hpp"
#include "mrl/multires.hpp"
#include "mrl/nn/network.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace mrl::curriculum {

struct Phase {
  int resolution_index = 1;
  int epoch_budget = 0;
  double relu_slope = 1.0;
  std::optional<double> learning_rate;  // overrides TrainConfig when set
};

/// Phases ordered coarsest first; the last phase trains on the original data.
struct PhasePlan {
  std::vector<Phase> phases;
  int total_epochs = 0;
  int k_levels = 1;
  Dimensionality dim = Dimensionality::D1;
};

/// ReLU slope for resolution index i: 0.85 + 0.15 i, exactly 1 for i = 1.
double relu_slope_for(int resolution_index);

/// Splits `total_epochs` evenly over k phases (indices k..1); coarser phases
/// take the remainder.
PhasePlan plan_phases(int total_epochs, int k_levels, Dimensionality dim);

enum class StopDecision { Continue, Stop };

/// Stop once the validation loss has not improved by more than 1e-6 on the
/// best value for `patience` consecutive epochs.
StopDecision early_stop_check(const std::vector<double>& validation_history, int patience);

/// Training data at one resolution index.
struct Stage {
  int resolution_index = 1;
  Dataset data;
};

/// Builds stages r_k..r_1 from the original training set.
std::vector<Stage> make_stages(const Dataset& train, int k_levels, Dimensionality dim);

enum class ValidationResolution { Phase, Original };

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> val_loss;
  std::optional<double> val_accuracy;
};

struct PhaseReport {
  int resolution_index = 1;
  double relu_slope = 1.0;
  int epoch_budget = 0;
  int epochs_run = 0;
  bool stopped_early = false;
  int best_epoch = -1;
  std::vector<EpochRecord> history;
  std::uint64_t start_hash = 0;
  std::uint64_t end_hash = 0;
};

struct TrainReport {
  std::vector<PhaseReport> phases;
  int epochs_run = 0;
  std::uint64_t seed = 0;
  double wall_clock_seconds = 0.0;
  std::optional<double> test_accuracy;
  std::optional<double> test_loss;
};

/// Structured text form. Wall-clock time is included only on request so
/// reports of identical runs compare equal byte for byte.
std::string to_json(const TrainReport& report, bool include_timing = false);

struct TrainOptions {
  ValidationResolution validate_at = ValidationResolution::Phase;
  /// Called after each phase with its position and the network handed to the next phase.
  std::function<void(std::size_t phase, const nn::Network&)> on_phase_end;
};

struct TrainResult {
  nn::Network network;
  TrainReport report;
};

/// Runs the phases in order, carrying weights across phase boundaries.
/// Momentum buffers restart at each phase. `stages` must line up with the
/// plan's resolution indices. An empty validation set disables early stopping.
TrainResult train_multiresolution(nn::Network network, const std::vector<Stage>& stages, const Dataset& validation,
                                  const PhasePlan& plan, const nn::TrainConfig& config,
                                  const TrainOptions& options = {});

/// Plain single-resolution training loop at ReLU slope 1.
TrainResult train_traditional(nn::Network network, const Dataset& train, const Dataset& validation,
                              const nn::TrainConfig& config);

}  // namespace mrl::curriculum

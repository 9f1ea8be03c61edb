#include "mrl/curriculum.hpp"

#include "mrl/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <random>

namespace mrl::curriculum {

using nn::Network;
using nn::TrainConfig;

double relu_slope_for(int resolution_index) {
  if (resolution_index < 1) throw ArgumentError("resolution index must be >= 1");
  if (resolution_index == 1) return 1.0;
  return 0.85 + 0.15 * resolution_index;
}

PhasePlan plan_phases(int total_epochs, int k_levels, Dimensionality dim) {
  if (k_levels < 1) throw ArgumentError("k_levels must be >= 1");
  if (total_epochs < k_levels) {
    throw ArgumentError("total_epochs (" + std::to_string(total_epochs) + ") must be >= k_levels (" +
                        std::to_string(k_levels) + ")");
  }
  PhasePlan plan;
  plan.total_epochs = total_epochs;
  plan.k_levels = k_levels;
  plan.dim = dim;
  const int base = total_epochs / k_levels;
  const int extra = total_epochs % k_levels;
  for (int p = 0; p < k_levels; ++p) {
    const int index = k_levels - p;
    plan.phases.push_back({index, base + (p < extra ? 1 : 0), relu_slope_for(index), std::nullopt});
  }
  return plan;
}

StopDecision early_stop_check(const std::vector<double>& history, int patience) {
  if (patience < 1) throw ArgumentError("patience must be >= 1");
  if (history.empty()) return StopDecision::Continue;
  double best = history.front();
  int since = 0;
  for (std::size_t i = 1; i < history.size(); ++i) {
    if (history[i] < best - 1e-6) {
      best = history[i];
      since = 0;
    } else {
      ++since;
    }
  }
  return since >= patience ? StopDecision::Stop : StopDecision::Continue;
}

std::vector<Stage> make_stages(const Dataset& train, int k_levels, Dimensionality dim) {
  auto versions = build_curriculum_dataset(train.samples, k_levels, dim);
  std::vector<Stage> stages;
  for (auto& v : versions) {
    Stage s;
    s.resolution_index = v.index;
    s.data = train;
    s.data.samples = std::move(v.samples);
    stages.push_back(std::move(s));
  }
  return stages;
}

namespace {

struct EpochStats {
  double loss = 0.0;
  double accuracy = 0.0;
};

// One pass over `data` in a freshly shuffled order.
EpochStats train_epoch(Network& net, const Dataset& data, const TrainConfig& config, double slope,
                       std::mt19937_64& rng) {
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  EpochStats stats;
  std::size_t correct = 0;
  const auto batch_size = static_cast<std::size_t>(config.batch_size);
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    std::vector<Tensor> batch;
    std::vector<int> labels;
    for (std::size_t k = start; k < end; ++k) {
      batch.push_back(data.samples[order[k]]);
      labels.push_back(data.labels[order[k]]);
    }
    const auto pass = nn::forward(net, batch, nn::Mode::Train, slope, &rng);
    const auto grads = nn::backward(net, pass, labels, config.weight_decay);
    stats.loss += grads.data_loss * static_cast<double>(end - start);
    for (std::size_t k = 0; k < labels.size(); ++k) {
      if (nn::argmax(pass.logits.row(static_cast<Index>(k)).transpose()) == labels[k]) ++correct;
    }
    nn::sgd_step(net, grads, config);
  }
  stats.loss /= static_cast<double>(data.size());
  stats.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return stats;
}

void check_dataset(const Dataset& d, const char* what) {
  if (d.samples.size() != d.labels.size()) {
    throw DimensionError(std::string(what) + ": sample/label count mismatch");
  }
}

// Runs one phase in place and returns its report.
PhaseReport run_phase(Network& net, const Dataset& train, const Dataset& validation, const Phase& phase,
                      TrainConfig config, std::mt19937_64& rng) {
  if (phase.learning_rate) config.learning_rate = *phase.learning_rate;
  PhaseReport rep;
  rep.resolution_index = phase.resolution_index;
  rep.relu_slope = phase.relu_slope;
  rep.epoch_budget = phase.epoch_budget;
  rep.start_hash = net.parameter_hash();
  net.reset_velocity();
  std::optional<Network> best;
  double best_loss = 0.0;
  std::vector<double> val_history;
  for (int epoch = 0; epoch < phase.epoch_budget; ++epoch) {
    const EpochStats s = train_epoch(net, train, config, phase.relu_slope, rng);
    EpochRecord rec{epoch, s.loss, s.accuracy, std::nullopt, std::nullopt};
    ++rep.epochs_run;
    if (!validation.empty()) {
      const auto v = nn::evaluate(net, validation, phase.relu_slope);
      rec.val_loss = v.mean_loss;
      rec.val_accuracy = v.accuracy;
      val_history.push_back(v.mean_loss);
      if (!best || v.mean_loss < best_loss - 1e-6) {
        best = net;
        best_loss = v.mean_loss;
        rep.best_epoch = epoch;
      }
      rep.history.push_back(rec);
      if (early_stop_check(val_history, config.early_stop_patience) == StopDecision::Stop) {
        net = *best;
        rep.stopped_early = true;
        break;
      }
    } else {
      rep.history.push_back(rec);
    }
  }
  rep.end_hash = net.parameter_hash();
  return rep;
}

}  // namespace

TrainResult train_multiresolution(Network network, const std::vector<Stage>& stages, const Dataset& validation,
                                  const PhasePlan& plan, const TrainConfig& config, const TrainOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  if (stages.size() != plan.phases.size()) {
    throw ArgumentError("curriculum has " + std::to_string(stages.size()) + " dataset versions for " +
                        std::to_string(plan.phases.size()) + " phases");
  }
  for (std::size_t p = 0; p < stages.size(); ++p) {
    if (stages[p].resolution_index != plan.phases[p].resolution_index) {
      throw ArgumentError("dataset version " + std::to_string(p) + " has resolution index " +
                          std::to_string(stages[p].resolution_index) + ", plan expects " +
                          std::to_string(plan.phases[p].resolution_index));
    }
    check_dataset(stages[p].data, "training stage");
    config.validate(stages[p].data.size());
  }
  check_dataset(validation, "validation set");

  std::mt19937_64 rng(config.seed);
  TrainResult result{std::move(network), {}};
  result.report.seed = config.seed;
  for (std::size_t p = 0; p < plan.phases.size(); ++p) {
    const Phase& phase = plan.phases[p];
    Dataset val = validation;
    if (options.validate_at == ValidationResolution::Phase && !validation.empty()) {
      val.samples = transform_samples(validation.samples, phase.resolution_index, plan.dim);
    }
    auto rep = run_phase(result.network, stages[p].data, val, phase, config, rng);
    result.report.epochs_run += rep.epochs_run;
    result.report.phases.push_back(std::move(rep));
    if (options.on_phase_end) options.on_phase_end(p, result.network);
  }
  result.report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

TrainResult train_traditional(Network network, const Dataset& train, const Dataset& validation,
                              const TrainConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  check_dataset(train, "training set");
  check_dataset(validation, "validation set");
  config.validate(train.size());
  std::mt19937_64 rng(config.seed);
  Network net = std::move(network);
  PhaseReport rep;
  rep.epoch_budget = config.max_epochs;
  rep.start_hash = net.parameter_hash();
  net.reset_velocity();
  std::optional<Network> best;
  double best_loss = 0.0;
  std::vector<double> history;
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    const EpochStats s = train_epoch(net, train, config, 1.0, rng);
    EpochRecord rec{epoch, s.loss, s.accuracy, std::nullopt, std::nullopt};
    ++rep.epochs_run;
    if (validation.empty()) {
      rep.history.push_back(rec);
      continue;
    }
    const auto v = nn::evaluate(net, validation, 1.0);
    rec.val_loss = v.mean_loss;
    rec.val_accuracy = v.accuracy;
    rep.history.push_back(rec);
    history.push_back(v.mean_loss);
    if (!best || v.mean_loss < best_loss - 1e-6) {
      best = net;
      best_loss = v.mean_loss;
      rep.best_epoch = epoch;
    }
    if (early_stop_check(history, config.early_stop_patience) == StopDecision::Stop) {
      net = *best;
      rep.stopped_early = true;
      break;
    }
  }
  rep.end_hash = net.parameter_hash();
  TrainResult result{std::move(net), {}};
  result.report.seed = config.seed;
  result.report.epochs_run = rep.epochs_run;
  result.report.phases.push_back(std::move(rep));
  result.report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

std::string to_json(const TrainReport& report, bool include_timing) {
  using nlohmann::json;
  json j;
  j["seed"] = report.seed;
  j["epochs_run"] = report.epochs_run;
  if (include_timing) j["wall_clock_seconds"] = report.wall_clock_seconds;
  if (report.test_accuracy) j["test_accuracy"] = *report.test_accuracy;
  if (report.test_loss) j["test_loss"] = *report.test_loss;
  j["phases"] = json::array();
  for (const auto& p : report.phases) {
    json pj;
    pj["resolution_index"] = p.resolution_index;
    pj["relu_slope"] = p.relu_slope;
    pj["epoch_budget"] = p.epoch_budget;
    pj["epochs_run"] = p.epochs_run;
    pj["stopped_early"] = p.stopped_early;
    pj["best_epoch"] = p.best_epoch;
    pj["start_hash"] = p.start_hash;
    pj["end_hash"] = p.end_hash;
    json h = json::array();
    for (const auto& e : p.history) {
      json ej;
      ej["epoch"] = e.epoch;
      ej["train_loss"] = e.train_loss;
      ej["train_accuracy"] = e.train_accuracy;
      if (e.val_loss) ej["val_loss"] = *e.val_loss;
      if (e.val_accuracy) ej["val_accuracy"] = *e.val_accuracy;
      h.push_back(ej);
    }
    pj["history"] = h;
    j["phases"].push_back(pj);
  }
  return j.dump(2);
}

}  // namespace mrl::curriculum

#pragma once

#include "mrl/dataset.hpp"
#include "mrl/nn/network.hpp"
#include "mrl/tensor.hpp"
#include "mrl/wavelet.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

namespace mrl::robustness {

/// Independent generator for sample `index` of a run seeded with `seed`.
std::mt19937_64 sample_stream(std::uint64_t seed, std::uint64_t index);

struct Perturbation {
  Tensor delta;
  double l2_norm = 0.0;
  int iterations_used = 0;
  bool success = false;
  int original_label = -1;
  int adversarial_label = -1;
  std::string diagnostic;
};

/// Adds Normal(0, sigma) to floor(density * size) positions drawn without
/// replacement.
Tensor add_impulsive_noise(const Tensor& signal, double density, double sigma, std::uint64_t seed);

struct DeepFoolOptions {
  int max_iter = 50;
  double overshoot = 0.02;
  double relu_slope = 1.0;
  std::uint64_t seed = 0;  // jitter stream for degenerate gradients
};

struct DeepFoolResult : Perturbation {
  double pre_overshoot_norm = 0.0;
};

/// Multiclass L2 DeepFool on the network logits. `delta` includes the
/// (1 + overshoot) factor; `pre_overshoot_norm` is the accumulated step norm.
DeepFoolResult deepfool(const nn::Network& net, const Tensor& x, const DeepFoolOptions& options = {});

struct SampleOutcome {
  std::size_t id = 0;
  int label = -1;
  int predicted = -1;
  bool success = false;
  double l2_norm = 0.0;
  double ratio = 0.0;
  bool skipped = false;
};

struct RobustnessReport {
  double rho = 0.0;
  std::vector<double> ratios;  // successful samples, in input order
  std::vector<SampleOutcome> samples;
  double attack_success_rate = 0.0;
  std::size_t sample_count = 0;
  std::size_t failures = 0;
  std::size_t skipped_zero_norm = 0;
  std::uint64_t seed = 0;
};

/// Mean of per-sample ||p||/||x|| ratios. Throws on an empty list.
double rho_from_ratios(const std::vector<double>& ratios);

/// Runs DeepFool on every sample. rho averages the samples where DeepFool
/// flipped the label; failures and zero-norm inputs are counted separately.
RobustnessReport robustness_rho(const nn::Network& net, const Dataset& test_set, const DeepFoolOptions& options = {});
RobustnessReport robustness_rho(const nn::Network& net, const std::vector<Tensor>& test_set,
                                const DeepFoolOptions& options = {});

/// Probabilities of one input; the one-pixel attack only needs this view.
using ProbabilityFn = std::function<Eigen::VectorXd(const Tensor&)>;

struct OnePixelOptions {
  int pop_size = 75;
  int max_gens = 40;
  double scale_factor = 0.5;
  /// Admissible pixel value range; when min >= max the image's own range is used.
  double value_min = 0.0;
  double value_max = 0.0;
  std::uint64_t seed = 0;
};

struct OnePixelResult : Perturbation {
  Tensor adversarial;
  Index row = -1;
  Index col = -1;
  Eigen::VectorXd values;
  int generations_used = 0;  // 1 = initial population
  double best_fitness = 1.0;
};

/// Untargeted one-pixel attack by differential evolution (DE/rand/1, no
/// crossover). Fitness is the true-class probability. Stops as soon as a
/// candidate changes the predicted label.
OnePixelResult one_pixel_attack(const ProbabilityFn& model, const Tensor& image, int true_label,
                                const OnePixelOptions& options = {});
OnePixelResult one_pixel_attack(const nn::Network& net, const Tensor& image, int true_label,
                                const OnePixelOptions& options = {});

enum class BandChoice { LH, HL, HH, Random };

struct SwapResult {
  Tensor adversarial;
  wavelet::Subband band = wavelet::Subband::LH;
};

/// One-level 2D Haar swap: the chosen detail band of every channel of `x`
/// is replaced by the donor's band, then reconstructed.
SwapResult multires_swap_attack(const Tensor& x, const Tensor& donor, BandChoice band, std::uint64_t seed);

/// Attack success rate: successes / attempts. Throws on an empty list.
double attack_success_rate(const std::vector<bool>& outcomes);

/// Per-band success table. Each rate divides by all attempts, so the three
/// band rates add up to the total rate.
struct BandSuccessTable {
  std::array<std::size_t, 3> attempts{};
  std::array<std::size_t, 3> successes{};

  void add(wavelet::Subband band, bool success);
  std::size_t total_attempts() const;
  std::size_t total_successes() const;
  double rate(wavelet::Subband band) const;
  double total_rate() const;
};

/// Absolute and relative change of an attack success rate (lower is better).
struct RateComparison {
  double absolute = 0.0;  // baseline - candidate
  double relative = 0.0;  // (baseline - candidate) / baseline
};
RateComparison compare_rates(double baseline, double candidate);

struct SwapAttackSummary {
  BandSuccessTable table;
  std::vector<SampleOutcome> samples;
};

/// Attacks every correctly classified sample with a donor of another class.
SwapAttackSummary run_swap_attack(const nn::Network& net, const Dataset& test_set, std::uint64_t seed,
                                  std::size_t max_samples = 0);

struct OnePixelSummary {
  double attack_success_rate = 0.0;
  std::vector<SampleOutcome> samples;
};

/// Attacks up to `max_samples` correctly classified samples (0 = all).
OnePixelSummary run_one_pixel_attack(const nn::Network& net, const Dataset& test_set, const OnePixelOptions& options,
                                     std::size_t max_samples = 0);

/// Accuracy on noise-corrupted copies of the test set; sample i uses stream (seed, i).
double noisy_accuracy(const nn::Network& net, const Dataset& test_set, double density, double sigma,
                      std::uint64_t seed);

/// id,label,predicted,success,l2_norm,ratio
void write_samples_csv(std::ostream& os, const std::vector<SampleOutcome>& samples);
std::string to_json(const RobustnessReport& report);

}  // namespace mrl::robustness

#include "mrl/robustness.hpp"

#include "mrl/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>

namespace mrl::robustness {

std::mt19937_64 sample_stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

Tensor add_impulsive_noise(const Tensor& signal, double density, double sigma, std::uint64_t seed) {
  if (!(density > 0.0 && density <= 1.0)) throw ArgumentError("noise density must be in (0, 1]");
  if (sigma < 0.0) throw ArgumentError("noise sigma must be non-negative");
  Tensor out = signal;
  const auto n = static_cast<std::size_t>(signal.size());
  const auto count = static_cast<std::size_t>(std::floor(density * static_cast<double>(n)));
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> positions(n);
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  // Partial Fisher-Yates: the first `count` entries are a uniform sample.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(positions[i], positions[pick(rng)]);
  }
  if (sigma == 0.0) return out;
  std::normal_distribution<double> noise(0.0, sigma);
  for (std::size_t i = 0; i < count; ++i) out[static_cast<Index>(positions[i])] += noise(rng);
  return out;
}

DeepFoolResult deepfool(const nn::Network& net, const Tensor& x, const DeepFoolOptions& options) {
  if (options.max_iter < 1) throw ArgumentError("deepfool: max_iter must be >= 1");
  if (options.overshoot < 0.0) throw ArgumentError("deepfool: overshoot must be non-negative");
  DeepFoolResult res;
  const Eigen::VectorXd x0 = x.values();
  Eigen::VectorXd r_total = Eigen::VectorXd::Zero(x0.size());
  Tensor current = x;
  auto jac = nn::input_jacobian(net, current, options.relu_slope);
  const int k0 = nn::argmax(jac.logits);
  res.original_label = k0;
  res.adversarial_label = k0;
  std::mt19937_64 jitter_rng(options.seed);
  bool jittered = false;

  int iter = 0;
  while (iter < options.max_iter) {
    if (nn::argmax(jac.logits) != k0) break;
    double best = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_w;
    for (Index k = 0; k < jac.logits.size(); ++k) {
      if (k == k0) continue;
      const Eigen::VectorXd w = (jac.jacobian.row(k) - jac.jacobian.row(k0)).transpose();
      const double wn = w.norm();
      if (!(wn > 0.0) || !std::isfinite(wn)) continue;
      const double dist = std::abs(jac.logits[k] - jac.logits[k0]) / wn;
      if (dist < best) {
        best = dist;
        best_w = w / wn;
      }
    }
    if (!std::isfinite(best)) {
      // Flat or non-differentiable point: nudge once, then give up.
      if (jittered) {
        res.diagnostic = "zero or non-finite logit gradient differences at iteration " + std::to_string(iter) +
                         " after jitter retry";
        break;
      }
      jittered = true;
      std::normal_distribution<double> n01(0.0, 1.0);
      const double scale = 1e-8 * std::max(1.0, x0.norm());
      for (Index i = 0; i < current.size(); ++i) current[i] += scale * n01(jitter_rng);
      jac = nn::input_jacobian(net, current, options.relu_slope);
      continue;
    }
    r_total += (best * (1.0 + 1e-6) + 1e-12) * best_w;
    current.values() = x0 + (1.0 + options.overshoot) * r_total;
    jac = nn::input_jacobian(net, current, options.relu_slope);
    ++iter;
  }
  res.iterations_used = iter;
  res.adversarial_label = nn::argmax(jac.logits);
  res.success = res.adversarial_label != k0;
  res.delta = x;
  res.delta.values() = current.values() - x0;
  res.l2_norm = res.delta.values().norm();
  res.pre_overshoot_norm = r_total.norm();
  if (!res.success && res.diagnostic.empty()) {
    res.diagnostic = "label unchanged after " + std::to_string(iter) + " iterations";
  }
  return res;
}

double rho_from_ratios(const std::vector<double>& ratios) {
  if (ratios.empty()) throw ArgumentError("rho: no ratios to average");
  return std::accumulate(ratios.begin(), ratios.end(), 0.0) / static_cast<double>(ratios.size());
}

RobustnessReport robustness_rho(const nn::Network& net, const Dataset& test_set, const DeepFoolOptions& options) {
  if (test_set.empty()) throw ArgumentError("robustness_rho: empty test set");
  RobustnessReport rep;
  rep.seed = options.seed;
  rep.sample_count = test_set.size();
  std::size_t successes = 0;
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    const Tensor& x = test_set.samples[i];
    SampleOutcome s;
    s.id = i;
    s.label = test_set.labels.empty() ? -1 : test_set.labels[i];
    const double xn = x.values().norm();
    if (!(xn > 0.0)) {
      s.skipped = true;
      ++rep.skipped_zero_norm;
      rep.samples.push_back(s);
      continue;
    }
    DeepFoolOptions o = options;
    o.seed = sample_stream(options.seed, i)();
    const auto df = deepfool(net, x, o);
    s.predicted = df.original_label;
    s.success = df.success;
    s.l2_norm = df.l2_norm;
    s.ratio = df.l2_norm / xn;
    if (df.success) {
      ++successes;
      rep.ratios.push_back(s.ratio);
    } else {
      ++rep.failures;
    }
    rep.samples.push_back(s);
  }
  rep.rho = rep.ratios.empty() ? 0.0 : rho_from_ratios(rep.ratios);
  const std::size_t attempted = rep.sample_count - rep.skipped_zero_norm;
  rep.attack_success_rate = attempted ? static_cast<double>(successes) / static_cast<double>(attempted) : 0.0;
  return rep;
}

RobustnessReport robustness_rho(const nn::Network& net, const std::vector<Tensor>& test_set,
                                const DeepFoolOptions& options) {
  Dataset d;
  d.samples = test_set;
  return robustness_rho(net, d, options);
}

namespace {

Tensor with_pixel(const Tensor& image, Index row, Index col, const Eigen::VectorXd& values) {
  Tensor out = image;
  const Index rows = image.image_rows(), cols = image.image_cols();
  for (Index c = 0; c < values.size(); ++c) out[(c * rows + row) * cols + col] = values[c];
  return out;
}

}  // namespace

OnePixelResult one_pixel_attack(const ProbabilityFn& model, const Tensor& image, int true_label,
                                const OnePixelOptions& options) {
  if (options.pop_size < 4) throw ArgumentError("one_pixel_attack: population must be >= 4");
  if (options.max_gens < 1) throw ArgumentError("one_pixel_attack: max_gens must be >= 1");
  const Index channels = image.channels(false);
  const Index rows = image.image_rows(), cols = image.image_cols();
  double vmin = options.value_min, vmax = options.value_max;
  if (!(vmin < vmax)) {
    vmin = image.values().minCoeff();
    vmax = image.values().maxCoeff();
    if (!(vmin < vmax)) vmax = vmin + 1.0;
  }
  const Eigen::VectorXd p0 = model(image);
  if (true_label < 0 || true_label >= p0.size()) throw ArgumentError("one_pixel_attack: label out of range");
  if (nn::argmax(p0) != true_label) throw ArgumentError("one_pixel_attack: image is not correctly classified");

  std::mt19937_64 rng(options.seed);
  const Index dims = 2 + channels;
  const auto pop = static_cast<std::size_t>(options.pop_size);
  std::vector<Eigen::VectorXd> population(pop, Eigen::VectorXd(dims));
  std::vector<double> fitness(pop);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto clip = [&](Eigen::VectorXd& c) {
    c[0] = std::clamp(c[0], 0.0, std::nextafter(static_cast<double>(rows), 0.0));
    c[1] = std::clamp(c[1], 0.0, std::nextafter(static_cast<double>(cols), 0.0));
    for (Index k = 2; k < dims; ++k) c[k] = std::clamp(c[k], vmin, vmax);
  };
  auto apply = [&](const Eigen::VectorXd& c) {
    return with_pixel(image, static_cast<Index>(c[0]), static_cast<Index>(c[1]), c.tail(channels));
  };

  OnePixelResult res;
  res.original_label = true_label;
  res.adversarial_label = true_label;
  std::size_t best = 0;
  auto finish = [&](const Eigen::VectorXd& c, const Eigen::VectorXd& probs, int generation) {
    res.row = static_cast<Index>(c[0]);
    res.col = static_cast<Index>(c[1]);
    res.values = c.tail(channels);
    res.adversarial = apply(c);
    res.delta = res.adversarial;
    res.delta.values() -= image.values();
    res.l2_norm = res.delta.values().norm();
    res.adversarial_label = nn::argmax(probs);
    res.success = res.adversarial_label != true_label;
    res.best_fitness = probs[true_label];
    res.generations_used = generation;
    res.iterations_used = generation;
    return res;
  };

  for (std::size_t i = 0; i < pop; ++i) {
    auto& c = population[i];
    c[0] = unit(rng) * static_cast<double>(rows);
    c[1] = unit(rng) * static_cast<double>(cols);
    for (Index k = 2; k < dims; ++k) c[k] = vmin + unit(rng) * (vmax - vmin);
    clip(c);
    const Eigen::VectorXd probs = model(apply(c));
    fitness[i] = probs[true_label];
    if (nn::argmax(probs) != true_label) return finish(c, probs, 1);
    if (fitness[i] < fitness[best]) best = i;
  }

  std::uniform_int_distribution<std::size_t> pick(0, pop - 1);
  for (int gen = 2; gen <= options.max_gens; ++gen) {
    for (std::size_t i = 0; i < pop; ++i) {
      std::size_t a, b, c;
      do { a = pick(rng); } while (a == i);
      do { b = pick(rng); } while (b == i || b == a);
      do { c = pick(rng); } while (c == i || c == a || c == b);
      Eigen::VectorXd trial = population[a] + options.scale_factor * (population[b] - population[c]);
      clip(trial);
      const Eigen::VectorXd probs = model(apply(trial));
      if (nn::argmax(probs) != true_label) return finish(trial, probs, gen);
      if (probs[true_label] < fitness[i]) {
        population[i] = trial;
        fitness[i] = probs[true_label];
        if (fitness[i] < fitness[best]) best = i;
      }
    }
  }
  return finish(population[best], model(apply(population[best])), options.max_gens);
}

OnePixelResult one_pixel_attack(const nn::Network& net, const Tensor& image, int true_label,
                                const OnePixelOptions& options) {
  const Tensor shaped = image;
  return one_pixel_attack([&net](const Tensor& t) { return nn::predict_probabilities(net, t); }, shaped, true_label,
                          options);
}

SwapResult multires_swap_attack(const Tensor& x, const Tensor& donor, BandChoice choice, std::uint64_t seed) {
  if (x.shape() != donor.shape()) {
    throw DimensionError("swap attack: image " + x.shape_string() + " and donor " + donor.shape_string() +
                         " differ in shape");
  }
  SwapResult out;
  if (choice == BandChoice::Random) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, 2);
    out.band = static_cast<wavelet::Subband>(pick(rng));
  } else {
    out.band = static_cast<wavelet::Subband>(static_cast<int>(choice));
  }
  out.adversarial = x;
  for (Index c = 0; c < x.channels(false); ++c) {
    auto px = wavelet::dwt2d<double>(x.image_channel(c), 1);
    const auto pd = wavelet::dwt2d<double>(donor.image_channel(c), 1);
    px.details[0].band(out.band) = pd.details[0].band(out.band);
    out.adversarial.set_image_channel(c, wavelet::idwt2d(px));
  }
  return out;
}

double attack_success_rate(const std::vector<bool>& outcomes) {
  if (outcomes.empty()) throw ArgumentError("attack_success_rate: no attack results");
  const auto hits = std::count(outcomes.begin(), outcomes.end(), true);
  return static_cast<double>(hits) / static_cast<double>(outcomes.size());
}

void BandSuccessTable::add(wavelet::Subband band, bool success) {
  const auto b = static_cast<std::size_t>(band);
  ++attempts[b];
  if (success) ++successes[b];
}

std::size_t BandSuccessTable::total_attempts() const { return attempts[0] + attempts[1] + attempts[2]; }
std::size_t BandSuccessTable::total_successes() const { return successes[0] + successes[1] + successes[2]; }

double BandSuccessTable::rate(wavelet::Subband band) const {
  const std::size_t n = total_attempts();
  return n ? static_cast<double>(successes[static_cast<std::size_t>(band)]) / static_cast<double>(n) : 0.0;
}

double BandSuccessTable::total_rate() const {
  const std::size_t n = total_attempts();
  return n ? static_cast<double>(total_successes()) / static_cast<double>(n) : 0.0;
}

RateComparison compare_rates(double baseline, double candidate) {
  RateComparison r;
  r.absolute = baseline - candidate;
  r.relative = baseline != 0.0 ? (baseline - candidate) / baseline : 0.0;
  return r;
}

SwapAttackSummary run_swap_attack(const nn::Network& net, const Dataset& test, std::uint64_t seed,
                                  std::size_t max_samples) {
  if (test.empty()) throw ArgumentError("swap attack: empty test set");
  SwapAttackSummary out;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (max_samples && out.samples.size() >= max_samples) break;
    const int label = test.labels[i];
    const int pred = nn::argmax(nn::predict_logits(net, test.samples[i]));
    if (pred != label) continue;
    std::vector<std::size_t> donors;
    for (std::size_t j = 0; j < test.size(); ++j) {
      if (test.labels[j] != label) donors.push_back(j);
    }
    if (donors.empty()) throw ArgumentError("swap attack: test set has a single class");
    auto rng = sample_stream(seed, i);
    std::uniform_int_distribution<std::size_t> pick(0, donors.size() - 1);
    const std::size_t donor = donors[pick(rng)];
    const auto swap = multires_swap_attack(test.samples[i], test.samples[donor], BandChoice::Random, rng());
    const int adv = nn::argmax(nn::predict_logits(net, swap.adversarial));
    SampleOutcome s;
    s.id = i;
    s.label = label;
    s.predicted = adv;
    s.success = adv != label;
    s.l2_norm = (swap.adversarial.values() - test.samples[i].values()).norm();
    const double xn = test.samples[i].values().norm();
    s.ratio = xn > 0.0 ? s.l2_norm / xn : 0.0;
    out.table.add(swap.band, s.success);
    out.samples.push_back(s);
  }
  return out;
}

OnePixelSummary run_one_pixel_attack(const nn::Network& net, const Dataset& test, const OnePixelOptions& options,
                                     std::size_t max_samples) {
  OnePixelSummary out;
  std::vector<bool> outcomes;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (max_samples && outcomes.size() >= max_samples) break;
    if (nn::argmax(nn::predict_logits(net, test.samples[i])) != test.labels[i]) continue;
    OnePixelOptions o = options;
    o.seed = sample_stream(options.seed, i)();
    const auto r = one_pixel_attack(net, test.samples[i], test.labels[i], o);
    SampleOutcome s;
    s.id = i;
    s.label = test.labels[i];
    s.predicted = r.adversarial_label;
    s.success = r.success;
    s.l2_norm = r.l2_norm;
    const double xn = test.samples[i].values().norm();
    s.ratio = xn > 0.0 ? r.l2_norm / xn : 0.0;
    out.samples.push_back(s);
    outcomes.push_back(r.success);
  }
  out.attack_success_rate = outcomes.empty() ? 0.0 : attack_success_rate(outcomes);
  return out;
}

double noisy_accuracy(const nn::Network& net, const Dataset& test, double density, double sigma, std::uint64_t seed) {
  if (test.empty()) throw ArgumentError("noisy_accuracy: empty test set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const Tensor noisy = add_impulsive_noise(test.samples[i], density, sigma, sample_stream(seed, i)());
    if (nn::argmax(nn::predict_logits(net, noisy)) == test.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

void write_samples_csv(std::ostream& os, const std::vector<SampleOutcome>& samples) {
  os << "id,label,predicted,success,l2_norm,ratio\n";
  os << std::setprecision(17);
  for (const auto& s : samples) {
    os << s.id << ',' << s.label << ',' << s.predicted << ',' << (s.skipped ? "skipped" : (s.success ? "1" : "0"))
       << ',' << s.l2_norm << ',' << s.ratio << '\n';
  }
}

std::string to_json(const RobustnessReport& r) {
  nlohmann::json j;
  j["rho"] = r.rho;
  j["attack_success_rate"] = r.attack_success_rate;
  j["sample_count"] = r.sample_count;
  j["failures"] = r.failures;
  j["skipped_zero_norm"] = r.skipped_zero_norm;
  j["seed"] = r.seed;
  j["ratios"] = r.ratios;
  return j.dump(2);
}

}  // namespace mrl::robustness

#pragma once

// Finite-difference gradient checks for mrl::nn networks.

#include "mrl/nn/network.hpp"
#include "support/oracles.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

namespace gradcheck {

/// Gradients laid out like Network::flat_parameters().
inline Eigen::VectorXd flatten(const mrl::nn::Network& net, const mrl::nn::Gradients& g) {
  Eigen::VectorXd flat(net.parameter_count());
  Eigen::Index off = 0;
  for (const auto& p : g.layers) {
    flat.segment(off, p.weight.size()) = p.weight.reshaped();
    off += p.weight.size();
    flat.segment(off, p.bias.size()) = p.bias;
    off += p.bias.size();
  }
  return flat;
}

struct LayerResult {
  std::size_t layer = 0;
  int checked = 0;
  double max_relative_error = 0.0;
};

struct Setup {
  std::vector<mrl::Tensor> batch;
  std::vector<int> labels;
  double weight_decay = 0.0;
  mrl::nn::Mode mode = mrl::nn::Mode::Eval;
  double relu_slope = 1.0;
  std::uint64_t dropout_seed = 0;
};

/// Compares backward() against central differences (h = 1e-5) on up to
/// `per_layer` random coordinates of every parameterized layer.
inline std::vector<LayerResult> check(const mrl::nn::Network& net, const Setup& s, int per_layer, std::uint64_t seed) {
  using namespace mrl::nn;
  std::mt19937_64 mask_rng(s.dropout_seed);
  const auto pass = forward(net, s.batch, s.mode, s.relu_slope, &mask_rng);
  const Eigen::VectorXd analytic = flatten(net, backward(net, pass, s.labels, s.weight_decay));

  Network probe = net;
  auto loss = [&](const Eigen::VectorXd& theta) {
    probe.set_flat_parameters(theta);
    std::mt19937_64 rng(s.dropout_seed);
    return objective(probe, s.batch, s.labels, s.weight_decay, s.mode, s.relu_slope, &rng);
  };
  const Eigen::VectorXd theta = net.flat_parameters();

  std::mt19937_64 pick(seed);
  std::vector<LayerResult> results;
  Eigen::Index off = 0;
  for (std::size_t l = 0; l < net.params().size(); ++l) {
    const Eigen::Index n = net.params()[l].size();
    if (n == 0) continue;
    std::vector<Eigen::Index> coords(static_cast<std::size_t>(n));
    std::iota(coords.begin(), coords.end(), off);
    std::shuffle(coords.begin(), coords.end(), pick);
    coords.resize(std::min<std::size_t>(coords.size(), static_cast<std::size_t>(per_layer)));
    LayerResult r{l, 0, 0.0};
    for (Eigen::Index i : coords) {
      const double numeric = oracle::central_difference(loss, theta, i);
      r.max_relative_error = std::max(r.max_relative_error, oracle::relative_error(analytic[i], numeric));
      ++r.checked;
    }
    results.push_back(r);
    off += n;
  }
  return results;
}

/// Uniform(-scale, scale) parameters so that gradients are well away from zero.
inline void randomize(mrl::nn::Network& net, std::uint64_t seed, double scale = 0.5) {
  std::mt19937_64 rng(seed);
  net.set_flat_parameters(oracle::random_vector(net.parameter_count(), rng, -scale, scale));
}

inline std::vector<mrl::Tensor> random_batch(const std::vector<Eigen::Index>& shape, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<mrl::Tensor> batch;
  for (int i = 0; i < n; ++i) {
    mrl::Tensor t(shape);
    t.values() = oracle::random_vector(t.size(), rng);
    batch.push_back(t);
  }
  return batch;
}

}  // namespace gradcheck

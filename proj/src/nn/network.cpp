#include "mrl/nn/network.hpp"

#include "mrl/errors.hpp"

#include <atomic>
#include <cmath>
#include <cstring>

namespace mrl::nn {

namespace {

std::atomic<std::uint64_t> g_stamp_counter{1};

std::uint64_t next_stamp() { return g_stamp_counter.fetch_add(1, std::memory_order_relaxed); }

FeatureShape layer_input_shape(const Network& net, std::size_t i) {
  return i == 0 ? input_feature_shape(net.spec().input_shape) : net.shapes()[i - 1];
}

RowMatrixXd as_feature(const Tensor& x, const FeatureShape& in) {
  if (x.size() != in.size()) {
    throw DimensionError("input " + x.shape_string() + " does not match network input (" +
                         std::to_string(in.channels) + ", " + std::to_string(in.height) + ", " +
                         std::to_string(in.width) + ")");
  }
  return Eigen::Map<const RowMatrixXd>(x.data(), in.channels, in.height * in.width);
}

// Unfolds `x` (C x H*W) into (C*kh*kw) x (Hout*Wout) columns.
Eigen::MatrixXd im2col(const RowMatrixXd& x, const FeatureShape& in, const FeatureShape& out, Index kh,
                       Index kw, Index stride) {
  Eigen::MatrixXd cols(in.channels * kh * kw, out.height * out.width);
  for (Index c = 0; c < in.channels; ++c) {
    for (Index u = 0; u < kh; ++u) {
      for (Index v = 0; v < kw; ++v) {
        const Index row = (c * kh + u) * kw + v;
        for (Index oy = 0; oy < out.height; ++oy) {
          const Index iy = oy * stride + u;
          for (Index ox = 0; ox < out.width; ++ox) {
            cols(row, oy * out.width + ox) = x(c, iy * in.width + ox * stride + v);
          }
        }
      }
    }
  }
  return cols;
}

RowMatrixXd col2im(const Eigen::MatrixXd& cols, const FeatureShape& in, const FeatureShape& out, Index kh,
                   Index kw, Index stride) {
  RowMatrixXd x = RowMatrixXd::Zero(in.channels, in.height * in.width);
  for (Index c = 0; c < in.channels; ++c) {
    for (Index u = 0; u < kh; ++u) {
      for (Index v = 0; v < kw; ++v) {
        const Index row = (c * kh + u) * kw + v;
        for (Index oy = 0; oy < out.height; ++oy) {
          const Index iy = oy * stride + u;
          for (Index ox = 0; ox < out.width; ++ox) {
            x(c, iy * in.width + ox * stride + v) += cols(row, oy * out.width + ox);
          }
        }
      }
    }
  }
  return x;
}

RowMatrixXd activate(const RowMatrixXd& z, Activation a, double slope) {
  if (a == Activation::ReLU) return slope * z.cwiseMax(0.0);
  return z;
}

RowMatrixXd activation_backward(const RowMatrixXd& dy, const RowMatrixXd& z, Activation a, double slope) {
  if (a != Activation::ReLU) return dy;
  return (z.array() > 0.0).select(slope * dy, 0.0);
}

Index kernel_h_of(const LayerSpec& l) { return l.kind == LayerKind::Conv1D || l.kind == LayerKind::MaxPool1D ? 1 : l.kernel_h; }

// Runs one sample. When `trace` is non-null every layer's cache is kept.
Eigen::VectorXd run_sample(const Network& net, const Tensor& x, Mode mode, double slope, std::mt19937_64* rng,
                           SampleTrace* trace) {
  const auto& spec = net.spec();
  RowMatrixXd cur = as_feature(x, input_feature_shape(spec.input_shape));
  if (trace) trace->layers.assign(spec.layers.size(), {});
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    const FeatureShape in = layer_input_shape(net, i);
    const FeatureShape out = net.shapes()[i];
    LayerCache* cache = trace ? &trace->layers[i] : nullptr;
    if (cache) cache->input = cur;
    switch (l.kind) {
      case LayerKind::Conv1D:
      case LayerKind::Conv2D: {
        const auto& p = net.params()[i];
        Eigen::MatrixXd cols = im2col(cur, in, out, kernel_h_of(l), l.kernel_w, l.stride);
        RowMatrixXd z = (p.weight * cols).colwise() + p.bias;
        cur = activate(z, l.activation, slope);
        if (cache) {
          cache->columns = std::move(cols);
          cache->pre_activation = std::move(z);
        }
        break;
      }
      case LayerKind::Dense: {
        const auto& p = net.params()[i];
        const Eigen::Map<const Eigen::VectorXd> flat(cur.data(), cur.size());
        RowMatrixXd z = p.weight * flat + p.bias;
        cur = activate(z, l.activation, slope);
        if (cache) cache->pre_activation = std::move(z);
        break;
      }
      case LayerKind::MaxPool1D:
      case LayerKind::MaxPool2D: {
        const Index kh = kernel_h_of(l), kw = l.kernel_w;
        RowMatrixXd y(out.channels, out.height * out.width);
        std::vector<Index> winners(static_cast<std::size_t>(y.size()));
        for (Index c = 0; c < in.channels; ++c) {
          for (Index oy = 0; oy < out.height; ++oy) {
            for (Index ox = 0; ox < out.width; ++ox) {
              Index best = (oy * l.stride) * in.width + ox * l.stride;
              double best_value = cur(c, best);
              for (Index u = 0; u < kh; ++u) {
                for (Index v = 0; v < kw; ++v) {
                  const Index pos = (oy * l.stride + u) * in.width + ox * l.stride + v;
                  if (cur(c, pos) > best_value) {
                    best_value = cur(c, pos);
                    best = pos;
                  }
                }
              }
              const Index o = oy * out.width + ox;
              y(c, o) = best_value;
              winners[static_cast<std::size_t>(c * out.height * out.width + o)] = c * in.height * in.width + best;
            }
          }
        }
        cur = std::move(y);
        if (cache) cache->argmax = std::move(winners);
        break;
      }
      case LayerKind::Dropout: {
        if (mode == Mode::Train && l.rate > 0.0) {
          if (!rng) throw ArgumentError("train-mode forward through dropout needs a random generator");
          const double keep = 1.0 - l.rate;
          std::bernoulli_distribution draw(keep);
          RowMatrixXd mask(cur.rows(), cur.cols());
          for (Index k = 0; k < mask.size(); ++k) mask.data()[k] = draw(*rng) ? 1.0 / keep : 0.0;
          cur = cur.cwiseProduct(mask);
          if (cache) cache->mask = std::move(mask);
        }
        break;
      }
      case LayerKind::Flatten: {
        RowMatrixXd y = Eigen::Map<const RowMatrixXd>(cur.data(), cur.size(), 1);
        cur = std::move(y);
        break;
      }
    }
  }
  return Eigen::Map<const Eigen::VectorXd>(cur.data(), cur.size());
}

// Reverse pass for one sample. Accumulates into `grads` when non-null and
// returns the gradient with respect to the input when `input_grad` is set.
void backprop_sample(const Network& net, const SampleTrace& trace, const Eigen::VectorXd& dlogits, double slope,
                     std::vector<LayerParams>* grads, Eigen::VectorXd* input_grad) {
  const auto& spec = net.spec();
  RowMatrixXd dy = Eigen::Map<const RowMatrixXd>(dlogits.data(), dlogits.size(), 1);
  for (std::size_t ii = spec.layers.size(); ii-- > 0;) {
    const LayerSpec& l = spec.layers[ii];
    const LayerCache& cache = trace.layers[ii];
    const FeatureShape in = layer_input_shape(net, ii);
    const FeatureShape out = net.shapes()[ii];
    const bool need_input = ii > 0 || input_grad != nullptr;
    switch (l.kind) {
      case LayerKind::Conv1D:
      case LayerKind::Conv2D: {
        const auto& p = net.params()[ii];
        const RowMatrixXd dz = activation_backward(dy, cache.pre_activation, l.activation, slope);
        if (grads) {
          (*grads)[ii].weight.noalias() += dz * cache.columns.transpose();
          (*grads)[ii].bias += dz.rowwise().sum();
        }
        if (need_input) {
          const Eigen::MatrixXd dcols = p.weight.transpose() * dz;
          dy = col2im(dcols, in, out, kernel_h_of(l), l.kernel_w, l.stride);
        }
        break;
      }
      case LayerKind::Dense: {
        const auto& p = net.params()[ii];
        const RowMatrixXd dz = activation_backward(dy, cache.pre_activation, l.activation, slope);
        const Eigen::Map<const Eigen::VectorXd> dzv(dz.data(), dz.size());
        if (grads) {
          const Eigen::Map<const Eigen::VectorXd> x(cache.input.data(), cache.input.size());
          (*grads)[ii].weight.noalias() += dzv * x.transpose();
          (*grads)[ii].bias += dzv;
        }
        if (need_input) {
          const Eigen::VectorXd dx = p.weight.transpose() * dzv;
          dy = Eigen::Map<const RowMatrixXd>(dx.data(), in.channels, in.height * in.width);
        }
        break;
      }
      case LayerKind::MaxPool1D:
      case LayerKind::MaxPool2D: {
        RowMatrixXd dx = RowMatrixXd::Zero(in.channels, in.height * in.width);
        for (std::size_t k = 0; k < cache.argmax.size(); ++k) {
          dx.data()[cache.argmax[k]] += dy.data()[k];
        }
        dy = std::move(dx);
        break;
      }
      case LayerKind::Dropout:
        if (cache.mask.size() > 0) dy = dy.cwiseProduct(cache.mask);
        break;
      case LayerKind::Flatten: {
        RowMatrixXd dx = Eigen::Map<const RowMatrixXd>(dy.data(), in.channels, in.height * in.width);
        dy = std::move(dx);
        break;
      }
    }
  }
  if (input_grad) *input_grad = Eigen::Map<const Eigen::VectorXd>(dy.data(), dy.size());
}

std::vector<LayerParams> zeros_like(const std::vector<LayerParams>& params) {
  std::vector<LayerParams> out(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    out[i].weight = Eigen::MatrixXd::Zero(params[i].weight.rows(), params[i].weight.cols());
    out[i].bias = Eigen::VectorXd::Zero(params[i].bias.size());
  }
  return out;
}

double log_sum_exp(const Eigen::VectorXd& z) {
  const double m = z.maxCoeff();
  return m + std::log((z.array() - m).exp().sum());
}

double regularization(const Network& net, double weight_decay) {
  double sum = 0.0;
  for (std::size_t i = 0; i < net.params().size(); ++i) {
    if (net.spec().layers[i].has_parameters() && net.spec().layers[i].regularize) {
      sum += net.params()[i].weight.squaredNorm();
    }
  }
  return 0.5 * weight_decay * sum;
}

void check_labels(const std::vector<int>& labels, std::size_t n, Index classes) {
  if (labels.size() != n) {
    throw DimensionError("got " + std::to_string(labels.size()) + " labels for " + std::to_string(n) + " samples");
  }
  for (int y : labels) {
    if (y < 0 || y >= classes) throw ArgumentError("label " + std::to_string(y) + " out of range");
  }
}

}  // namespace

Network::Network(NetworkSpec spec) : spec_(std::move(spec)) {
  shapes_ = infer_shapes(spec_);
  params_.resize(spec_.layers.size());
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const auto& l = spec_.layers[i];
    if (!l.has_parameters()) continue;
    const auto [rows, cols] = weight_shape(l, layer_input_shape(*this, i));
    params_[i].weight = Eigen::MatrixXd::Zero(rows, cols);
    params_[i].bias = Eigen::VectorXd::Zero(rows);
  }
  velocity_ = zeros_like(params_);
  touch();
}

void Network::touch() { stamp_ = next_stamp(); }

std::vector<LayerParams>& Network::mutable_params() {
  touch();
  return params_;
}

std::vector<LayerParams>& Network::mutable_velocity() {
  touch();
  return velocity_;
}

Index Network::parameter_count() const {
  Index n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

Eigen::VectorXd Network::flat_parameters() const {
  Eigen::VectorXd flat(parameter_count());
  Index off = 0;
  for (const auto& p : params_) {
    flat.segment(off, p.weight.size()) = p.weight.reshaped();
    off += p.weight.size();
    flat.segment(off, p.bias.size()) = p.bias;
    off += p.bias.size();
  }
  return flat;
}

void Network::set_flat_parameters(const Eigen::VectorXd& flat) {
  if (flat.size() != parameter_count()) throw DimensionError("flat parameter vector has wrong length");
  touch();
  Index off = 0;
  for (auto& p : params_) {
    p.weight.reshaped() = flat.segment(off, p.weight.size());
    off += p.weight.size();
    p.bias = flat.segment(off, p.bias.size());
    off += p.bias.size();
  }
}

void Network::reset_velocity() {
  touch();
  for (auto& v : velocity_) {
    v.weight.setZero();
    v.bias.setZero();
  }
}

std::uint64_t Network::parameter_hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const double* data, Index n) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(data);
    for (std::size_t k = 0; k < static_cast<std::size_t>(n) * sizeof(double); ++k) {
      h ^= bytes[k];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& p : params_) {
    mix(p.weight.data(), p.weight.size());
    mix(p.bias.data(), p.bias.size());
  }
  return h;
}

void TrainConfig::validate(std::size_t dataset_size) const {
  if (!(learning_rate > 0.0)) throw ArgumentError("learning_rate must be positive");
  if (momentum < 0.0) throw ArgumentError("momentum must be non-negative");
  if (weight_decay < 0.0) throw ArgumentError("weight_decay must be non-negative");
  if (batch_size < 1) throw ArgumentError("batch_size must be positive");
  if (static_cast<std::size_t>(batch_size) > dataset_size) {
    throw ArgumentError("batch_size " + std::to_string(batch_size) + " exceeds dataset size " +
                        std::to_string(dataset_size));
  }
  if (max_epochs < 1) throw ArgumentError("max_epochs must be positive");
  if (early_stop_patience < 1) throw ArgumentError("early_stop_patience must be positive");
}

Network init_weights(const NetworkSpec& spec, std::uint64_t seed) {
  Network net(spec);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.02);
  for (auto& p : net.mutable_params()) {
    for (Index k = 0; k < p.weight.size(); ++k) p.weight.data()[k] = normal(rng);
  }
  return net;
}

Tensor scaled_relu(const Tensor& x, double slope) {
  if (!(slope > 0.0)) throw ArgumentError("ReLU slope must be positive");
  Tensor y = x;
  y.values() = slope * x.values().cwiseMax(0.0);
  return y;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (Index r = 0; r < logits.rows(); ++r) {
    const Eigen::ArrayXd e = (logits.row(r).array() - logits.row(r).maxCoeff()).exp().transpose();
    p.row(r) = (e / e.sum()).transpose();
  }
  return p;
}

ForwardPass forward(const Network& net, const std::vector<Tensor>& batch, Mode mode, double relu_slope,
                    std::mt19937_64* rng) {
  if (batch.empty()) throw ArgumentError("forward: empty batch");
  if (!(relu_slope > 0.0)) throw ArgumentError("ReLU slope must be positive");
  ForwardPass pass;
  pass.mode = mode;
  pass.relu_slope = relu_slope;
  pass.stamp = net.stamp();
  const Index classes = net.spec().num_classes();
  pass.logits.resize(static_cast<Index>(batch.size()), classes);
  pass.traces.resize(batch.size());
  for (std::size_t n = 0; n < batch.size(); ++n) {
    pass.logits.row(static_cast<Index>(n)) =
        run_sample(net, batch[n], mode, relu_slope, rng, &pass.traces[n]).transpose();
  }
  pass.probabilities = softmax_rows(pass.logits);
  return pass;
}

Eigen::VectorXd predict_logits(const Network& net, const Tensor& x, double relu_slope) {
  return run_sample(net, x, Mode::Eval, relu_slope, nullptr, nullptr);
}

Eigen::VectorXd predict_probabilities(const Network& net, const Tensor& x, double relu_slope) {
  const Eigen::VectorXd z = predict_logits(net, x, relu_slope);
  return softmax_rows(z.transpose()).row(0).transpose();
}

Gradients backward(const Network& net, const ForwardPass& pass, const std::vector<int>& labels,
                   double weight_decay) {
  if (pass.stamp != net.stamp()) {
    throw StateError("backward: forward pass was computed on a different network state");
  }
  if (pass.traces.size() != static_cast<std::size_t>(pass.logits.rows())) {
    throw StateError("backward: forward pass has no traces");
  }
  const std::size_t n = pass.traces.size();
  check_labels(labels, n, net.spec().num_classes());
  Gradients g;
  g.layers = zeros_like(net.params());
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t s = 0; s < n; ++s) {
    const Eigen::VectorXd z = pass.logits.row(static_cast<Index>(s)).transpose();
    g.data_loss += (log_sum_exp(z) - z[labels[s]]) * inv_n;
    Eigen::VectorXd dz = pass.probabilities.row(static_cast<Index>(s)).transpose();
    dz[labels[s]] -= 1.0;
    dz *= inv_n;
    backprop_sample(net, pass.traces[s], dz, pass.relu_slope, &g.layers, nullptr);
  }
  for (std::size_t i = 0; i < g.layers.size(); ++i) {
    const auto& l = net.spec().layers[i];
    if (l.has_parameters() && l.regularize && weight_decay != 0.0) {
      g.layers[i].weight += weight_decay * net.params()[i].weight;
    }
  }
  g.regularization_loss = regularization(net, weight_decay);
  return g;
}

double objective(const Network& net, const std::vector<Tensor>& batch, const std::vector<int>& labels,
                 double weight_decay, Mode mode, double relu_slope, std::mt19937_64* rng) {
  check_labels(labels, batch.size(), net.spec().num_classes());
  double loss = 0.0;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const Eigen::VectorXd z = run_sample(net, batch[s], mode, relu_slope, rng, nullptr);
    loss += log_sum_exp(z) - z[labels[s]];
  }
  return loss / static_cast<double>(batch.size()) + regularization(net, weight_decay);
}

void sgd_step(Network& net, const Gradients& grads, const TrainConfig& config) {
  if (grads.layers.size() != net.params().size()) throw DimensionError("sgd_step: gradient layer count mismatch");
  auto& params = net.mutable_params();
  auto& velocity = net.mutable_velocity();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& g = grads.layers[i];
    if (g.weight.rows() != params[i].weight.rows() || g.weight.cols() != params[i].weight.cols() ||
        g.bias.size() != params[i].bias.size()) {
      throw DimensionError("sgd_step: gradient shape mismatch at layer " + std::to_string(i));
    }
    velocity[i].weight = config.momentum * velocity[i].weight + g.weight;
    velocity[i].bias = config.momentum * velocity[i].bias + g.bias;
    params[i].weight -= config.learning_rate * velocity[i].weight;
    params[i].bias -= config.learning_rate * velocity[i].bias;
  }
}

InputJacobian input_jacobian(const Network& net, const Tensor& x, double relu_slope) {
  SampleTrace trace;
  InputJacobian out;
  out.logits = run_sample(net, x, Mode::Eval, relu_slope, nullptr, &trace);
  const Index classes = out.logits.size();
  out.jacobian.resize(classes, x.size());
  for (Index k = 0; k < classes; ++k) {
    Eigen::VectorXd e = Eigen::VectorXd::Unit(classes, k);
    Eigen::VectorXd g;
    backprop_sample(net, trace, e, relu_slope, nullptr, &g);
    out.jacobian.row(k) = g.transpose();
  }
  return out;
}

int argmax(const Eigen::VectorXd& v) {
  if (v.size() == 0) throw ArgumentError("argmax of empty vector");
  Index best = 0;
  for (Index k = 1; k < v.size(); ++k) {
    if (v[k] > v[best]) best = k;
  }
  return static_cast<int>(best);
}

EvalResult evaluate(const Network& net, const Dataset& data, double relu_slope) {
  if (data.empty()) throw ArgumentError("evaluate: empty dataset");
  check_labels(data.labels, data.size(), net.spec().num_classes());
  EvalResult r;
  const Index classes = net.spec().num_classes();
  r.probabilities.resize(static_cast<Index>(data.size()), classes);
  std::size_t correct = 0;
  double loss = 0.0;
  for (std::size_t s = 0; s < data.size(); ++s) {
    const Eigen::VectorXd z = predict_logits(net, data.samples[s], relu_slope);
    const double lse = log_sum_exp(z);
    loss += lse - z[data.labels[s]];
    r.probabilities.row(static_cast<Index>(s)) = (z.array() - lse).exp().transpose();
    const int pred = argmax(z);
    r.predictions.push_back(pred);
    if (pred == data.labels[s]) ++correct;
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  r.mean_loss = loss / static_cast<double>(data.size());
  return r;
}

}  // namespace mrl::nn

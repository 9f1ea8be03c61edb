#pragma once

#include "mrl/dataset.hpp"
#include "mrl/nn/spec.hpp"
#include "mrl/tensor.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

namespace mrl::nn {

/// Weight matrix (rows = output units/filters) and bias of one layer.
/// Layers without parameters hold empty tensors.
struct LayerParams {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;

  Index size() const { return weight.size() + bias.size(); }
};

/// Network state: spec, parameters and momentum buffers.
///
/// Every mutable access refreshes the state stamp so forward caches taken
/// before the change are rejected by backward().
class Network {
 public:
  Network() = default;
  explicit Network(NetworkSpec spec);

  const NetworkSpec& spec() const { return spec_; }
  const std::vector<FeatureShape>& shapes() const { return shapes_; }
  const std::vector<LayerParams>& params() const { return params_; }
  const std::vector<LayerParams>& velocity() const { return velocity_; }
  std::vector<LayerParams>& mutable_params();
  std::vector<LayerParams>& mutable_velocity();

  Index parameter_count() const;
  std::uint64_t stamp() const { return stamp_; }

  Eigen::VectorXd flat_parameters() const;
  void set_flat_parameters(const Eigen::VectorXd& flat);
  void reset_velocity();

  /// FNV-1a over the raw parameter bytes.
  std::uint64_t parameter_hash() const;

 private:
  void touch();

  NetworkSpec spec_;
  std::vector<FeatureShape> shapes_;
  std::vector<LayerParams> params_;
  std::vector<LayerParams> velocity_;
  std::uint64_t stamp_ = 0;
};

struct TrainConfig {
  double learning_rate = 0.02;
  double momentum = 0.2;
  double weight_decay = 0.001;
  int batch_size = 23;
  int max_epochs = 500;
  int early_stop_patience = 20;
  std::uint64_t seed = 0;

  void validate(std::size_t dataset_size) const;
};

/// Weights ~ Normal(0, 0.02), zero biases and velocity. Deterministic in `seed`.
Network init_weights(const NetworkSpec& spec, std::uint64_t seed);

/// slope * max(x, 0), element-wise.
Tensor scaled_relu(const Tensor& x, double slope);

/// Row-wise softmax computed through log-sum-exp.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);

enum class Mode { Train, Eval };

/// Per-layer values kept by the forward pass for backpropagation.
struct LayerCache {
  RowMatrixXd input;           // channels x (height*width)
  Eigen::MatrixXd columns;     // unfolded input for convolutions
  RowMatrixXd pre_activation;  // linear output before ReLU
  std::vector<Index> argmax;   // pooling winners (flat index into input)
  RowMatrixXd mask;            // dropout mask, already scaled
};

struct SampleTrace {
  std::vector<LayerCache> layers;
};

struct ForwardPass {
  std::vector<SampleTrace> traces;
  Eigen::MatrixXd logits;         // batch x classes
  Eigen::MatrixXd probabilities;  // batch x classes
  double relu_slope = 1.0;
  Mode mode = Mode::Eval;
  std::uint64_t stamp = 0;
};

/// Runs the batch through the network. Dropout only acts in Train mode and
/// then draws its masks from `rng`, which must be non-null.
ForwardPass forward(const Network& net, const std::vector<Tensor>& batch, Mode mode, double relu_slope,
                    std::mt19937_64* rng = nullptr);

/// Logits of a single sample without keeping a trace.
Eigen::VectorXd predict_logits(const Network& net, const Tensor& x, double relu_slope = 1.0);
Eigen::VectorXd predict_probabilities(const Network& net, const Tensor& x, double relu_slope = 1.0);

struct Gradients {
  std::vector<LayerParams> layers;
  double data_loss = 0.0;            // mean cross-entropy
  double regularization_loss = 0.0;  // (weight_decay / 2) * sum ||W||^2
  double loss() const { return data_loss + regularization_loss; }
};

/// Gradient of mean cross-entropy + (weight_decay/2)*||W||^2 (weights of
/// layers with `regularize`, biases excluded). Throws StateError if `pass`
/// was not produced by `net` in its current state.
Gradients backward(const Network& net, const ForwardPass& pass, const std::vector<int>& labels,
                   double weight_decay);

/// Loss value that backward() differentiates, computed from scratch.
double objective(const Network& net, const std::vector<Tensor>& batch, const std::vector<int>& labels,
                 double weight_decay, Mode mode = Mode::Eval, double relu_slope = 1.0,
                 std::mt19937_64* rng = nullptr);

/// Classical momentum: v <- momentum*v + g; w <- w - lr*v.
void sgd_step(Network& net, const Gradients& grads, const TrainConfig& config);

struct InputJacobian {
  Eigen::VectorXd logits;
  Eigen::MatrixXd jacobian;  // classes x input size
};

/// Logits and their gradients with respect to the input.
InputJacobian input_jacobian(const Network& net, const Tensor& x, double relu_slope = 1.0);

struct EvalResult {
  double accuracy = 0.0;
  double mean_loss = 0.0;
  std::vector<int> predictions;
  Eigen::MatrixXd probabilities;
};

/// Accuracy and mean cross-entropy with dropout disabled.
EvalResult evaluate(const Network& net, const Dataset& data, double relu_slope = 1.0);

/// Index of the largest entry; ties go to the lowest index.
int argmax(const Eigen::VectorXd& v);

void write_checkpoint(std::ostream& os, const Network& net);
Network read_checkpoint(std::istream& is, const std::string& source = "<stream>");
void save_checkpoint(const std::string& path, const Network& net);
Network load_checkpoint(const std::string& path);

}  // namespace mrl::nn

#pragma once

#include "mrl/tensor.hpp"

#include <string>
#include <vector>

namespace mrl::nn {

enum class LayerKind { Conv1D, Conv2D, MaxPool1D, MaxPool2D, Dense, Dropout, Flatten };
enum class Activation { Linear, ReLU, Softmax };

const char* to_string(LayerKind k);
const char* to_string(Activation a);

/// One declarative layer. Convolutions are valid (unpadded).
/// `kernel_h` is ignored by 1D layers; pools use the kernel as window size.
struct LayerSpec {
  LayerKind kind = LayerKind::Dense;
  Index units = 0;
  Index kernel_h = 1;
  Index kernel_w = 1;
  Index stride = 1;
  Activation activation = Activation::Linear;
  double rate = 0.0;
  bool regularize = true;

  static LayerSpec conv1d(Index filters, Index kernel, Activation a = Activation::ReLU, Index stride = 1);
  static LayerSpec conv2d(Index filters, Index kernel_h, Index kernel_w, Activation a = Activation::ReLU,
                          Index stride = 1);
  static LayerSpec maxpool1d(Index size = 2, Index stride = 2);
  static LayerSpec maxpool2d(Index size = 2, Index stride = 2);
  static LayerSpec dense(Index units, Activation a = Activation::ReLU);
  static LayerSpec dropout(double rate);
  static LayerSpec flatten();

  bool has_parameters() const {
    return kind == LayerKind::Conv1D || kind == LayerKind::Conv2D || kind == LayerKind::Dense;
  }
  bool operator==(const LayerSpec&) const = default;
};

/// Activation shape between layers: channels x height x width (height 1 for 1D).
struct FeatureShape {
  Index channels = 1;
  Index height = 1;
  Index width = 1;

  Index size() const { return channels * height * width; }
  bool operator==(const FeatureShape&) const = default;
};

struct NetworkSpec {
  std::vector<Index> input_shape;  // {L}, {C, L} or {C, H, W}
  std::vector<LayerSpec> layers;

  Index num_classes() const;
  bool operator==(const NetworkSpec&) const = default;
};

FeatureShape input_feature_shape(const std::vector<Index>& input_shape);

/// Output shape of every layer. Throws DimensionError if shapes do not compose
/// or the layer list is not a classifier ending in a Dense layer.
std::vector<FeatureShape> infer_shapes(const NetworkSpec& spec);

/// Weight matrix dimensions (rows, cols) of a parameterized layer given its input.
std::pair<Index, Index> weight_shape(const LayerSpec& layer, const FeatureShape& in);

Index parameter_count(const NetworkSpec& spec);

struct PresetOptions {
  Index pool_stride = 2;
};

/// Named architectures:
///   fsdd-samplecnn                raw-waveform 1D CNN, input (1, 16000), 10 classes
///   esc10-piczak-variant          log-mel 2D CNN, input (1, 60, 41), 10 classes
///   esc10-piczak-variant-stride1  same with 2x2 pools at stride 1
///   synthetic-1d-small            input (1, 128), 2 classes
///   synthetic-2d-small            input (1, 16, 16), 2 classes
NetworkSpec network_preset(const std::string& name, const PresetOptions& options = {});
std::vector<std::string> preset_names();

std::string spec_to_json(const NetworkSpec& spec);
NetworkSpec spec_from_json(const std::string& text);

}  // namespace mrl::nn

#include "mrl/nn/spec.hpp"

#include "mrl/errors.hpp"

#include "json.hpp"

#include <map>

namespace mrl::nn {

using nlohmann::json;

const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Conv1D: return "conv1d";
    case LayerKind::Conv2D: return "conv2d";
    case LayerKind::MaxPool1D: return "maxpool1d";
    case LayerKind::MaxPool2D: return "maxpool2d";
    case LayerKind::Dense: return "dense";
    case LayerKind::Dropout: return "dropout";
    case LayerKind::Flatten: return "flatten";
  }
  return "?";
}

const char* to_string(Activation a) {
  switch (a) {
    case Activation::Linear: return "linear";
    case Activation::ReLU: return "relu";
    case Activation::Softmax: return "softmax";
  }
  return "?";
}

LayerSpec LayerSpec::conv1d(Index filters, Index kernel, Activation a, Index stride) {
  LayerSpec l;
  l.kind = LayerKind::Conv1D;
  l.units = filters;
  l.kernel_w = kernel;
  l.stride = stride;
  l.activation = a;
  return l;
}

LayerSpec LayerSpec::conv2d(Index filters, Index kernel_h, Index kernel_w, Activation a, Index stride) {
  LayerSpec l;
  l.kind = LayerKind::Conv2D;
  l.units = filters;
  l.kernel_h = kernel_h;
  l.kernel_w = kernel_w;
  l.stride = stride;
  l.activation = a;
  return l;
}

LayerSpec LayerSpec::maxpool1d(Index size, Index stride) {
  LayerSpec l;
  l.kind = LayerKind::MaxPool1D;
  l.kernel_w = size;
  l.stride = stride;
  return l;
}

LayerSpec LayerSpec::maxpool2d(Index size, Index stride) {
  LayerSpec l;
  l.kind = LayerKind::MaxPool2D;
  l.kernel_h = size;
  l.kernel_w = size;
  l.stride = stride;
  return l;
}

LayerSpec LayerSpec::dense(Index units, Activation a) {
  LayerSpec l;
  l.kind = LayerKind::Dense;
  l.units = units;
  l.activation = a;
  return l;
}

LayerSpec LayerSpec::dropout(double rate) {
  LayerSpec l;
  l.kind = LayerKind::Dropout;
  l.rate = rate;
  return l;
}

LayerSpec LayerSpec::flatten() {
  LayerSpec l;
  l.kind = LayerKind::Flatten;
  return l;
}

Index NetworkSpec::num_classes() const {
  if (layers.empty()) return 0;
  return layers.back().units;
}

FeatureShape input_feature_shape(const std::vector<Index>& s) {
  switch (s.size()) {
    case 1: return {1, 1, s[0]};
    case 2: return {s[0], 1, s[1]};
    case 3: return {s[0], s[1], s[2]};
    default: throw DimensionError("network input shape must have rank 1-3, got " + shape_string(s));
  }
}

namespace {

Index window_output(Index in, Index window, Index stride, const std::string& what) {
  if (window < 1 || stride < 1) throw DimensionError(what + ": window and stride must be >= 1");
  if (in < window) {
    throw DimensionError(what + ": input extent " + std::to_string(in) + " smaller than window " +
                         std::to_string(window));
  }
  return (in - window) / stride + 1;
}

}  // namespace

std::pair<Index, Index> weight_shape(const LayerSpec& l, const FeatureShape& in) {
  switch (l.kind) {
    case LayerKind::Conv1D: return {l.units, in.channels * l.kernel_w};
    case LayerKind::Conv2D: return {l.units, in.channels * l.kernel_h * l.kernel_w};
    case LayerKind::Dense: return {l.units, in.size()};
    default: return {0, 0};
  }
}

std::vector<FeatureShape> infer_shapes(const NetworkSpec& spec) {
  if (spec.layers.empty()) throw DimensionError("network has no layers");
  FeatureShape cur = input_feature_shape(spec.input_shape);
  if (cur.size() <= 0) throw DimensionError("network input shape is empty");
  std::vector<FeatureShape> out;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" + to_string(l.kind) + ")";
    if (l.activation == Activation::Softmax && i + 1 != spec.layers.size()) {
      throw DimensionError(where + ": softmax is only allowed on the output layer");
    }
    switch (l.kind) {
      case LayerKind::Conv1D:
        if (cur.height != 1) throw DimensionError(where + ": expects 1D input");
        if (l.units < 1) throw DimensionError(where + ": needs at least one filter");
        cur = {l.units, 1, window_output(cur.width, l.kernel_w, l.stride, where)};
        break;
      case LayerKind::Conv2D:
        if (l.units < 1) throw DimensionError(where + ": needs at least one filter");
        cur = {l.units, window_output(cur.height, l.kernel_h, l.stride, where),
               window_output(cur.width, l.kernel_w, l.stride, where)};
        break;
      case LayerKind::MaxPool1D:
        if (cur.height != 1) throw DimensionError(where + ": expects 1D input");
        cur.width = window_output(cur.width, l.kernel_w, l.stride, where);
        break;
      case LayerKind::MaxPool2D:
        cur.height = window_output(cur.height, l.kernel_h, l.stride, where);
        cur.width = window_output(cur.width, l.kernel_w, l.stride, where);
        break;
      case LayerKind::Dense:
        if (l.units < 1) throw DimensionError(where + ": needs at least one unit");
        cur = {l.units, 1, 1};
        break;
      case LayerKind::Dropout:
        if (!(l.rate >= 0.0 && l.rate < 1.0)) throw DimensionError(where + ": rate must be in [0, 1)");
        break;
      case LayerKind::Flatten:
        cur = {cur.size(), 1, 1};
        break;
    }
    out.push_back(cur);
  }
  if (spec.layers.back().kind != LayerKind::Dense) {
    throw DimensionError("network must end with a dense output layer");
  }
  return out;
}

Index parameter_count(const NetworkSpec& spec) {
  const auto shapes = infer_shapes(spec);
  FeatureShape in = input_feature_shape(spec.input_shape);
  Index total = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    if (l.has_parameters()) {
      const auto [r, c] = weight_shape(l, in);
      total += r * c + r;
    }
    in = shapes[i];
  }
  return total;
}

NetworkSpec network_preset(const std::string& name, const PresetOptions& options) {
  using A = Activation;
  NetworkSpec s;
  if (name == "fsdd-samplecnn") {
    s.input_shape = {1, 16000};
    for (Index filters : {128, 128, 128, 256, 256, 256, 256, 256, 256, 512}) {
      s.layers.push_back(LayerSpec::conv1d(filters, 2));
      s.layers.push_back(LayerSpec::maxpool1d(2, options.pool_stride));
    }
    s.layers.push_back(LayerSpec::conv1d(512, 1));
    s.layers.push_back(LayerSpec::flatten());
    s.layers.push_back(LayerSpec::dense(128));
    s.layers.push_back(LayerSpec::dense(10, A::Softmax));
    return s;
  }
  if (name == "esc10-piczak-variant" || name == "esc10-piczak-variant-stride1") {
    const Index pool_stride = name == "esc10-piczak-variant-stride1" ? 1 : options.pool_stride;
    s.input_shape = {1, 60, 41};
    s.layers = {
        LayerSpec::conv2d(80, 3, 3), LayerSpec::conv2d(80, 2, 2), LayerSpec::maxpool2d(2, pool_stride),
        LayerSpec::conv2d(80, 2, 2), LayerSpec::conv2d(80, 2, 2), LayerSpec::maxpool2d(2, pool_stride),
        LayerSpec::conv2d(80, 2, 2), LayerSpec::conv2d(80, 2, 2), LayerSpec::maxpool2d(2, pool_stride),
        LayerSpec::flatten(),        LayerSpec::dense(1000),      LayerSpec::dense(500),
        LayerSpec::dense(500),       LayerSpec::dropout(0.5),     LayerSpec::dense(10, A::Softmax),
    };
    return s;
  }
  if (name == "synthetic-1d-small") {
    s.input_shape = {1, 128};
    s.layers = {LayerSpec::conv1d(32, 3), LayerSpec::maxpool1d(2, options.pool_stride),
                LayerSpec::conv1d(64, 3), LayerSpec::maxpool1d(2, options.pool_stride),
                LayerSpec::flatten(),     LayerSpec::dense(128),
                LayerSpec::dense(2, A::Softmax)};
    return s;
  }
  if (name == "synthetic-2d-small") {
    s.input_shape = {1, 16, 16};
    s.layers = {LayerSpec::conv2d(32, 3, 3), LayerSpec::maxpool2d(2, options.pool_stride),
                LayerSpec::conv2d(64, 2, 2), LayerSpec::maxpool2d(2, options.pool_stride),
                LayerSpec::flatten(),        LayerSpec::dense(128),
                LayerSpec::dense(2, A::Softmax)};
    return s;
  }
  throw ArgumentError("unknown network preset '" + name + "'");
}

std::vector<std::string> preset_names() {
  return {"fsdd-samplecnn", "esc10-piczak-variant", "esc10-piczak-variant-stride1", "synthetic-1d-small",
          "synthetic-2d-small"};
}

namespace {

const std::map<std::string, LayerKind>& kind_table() {
  static const std::map<std::string, LayerKind> t = {
      {"conv1d", LayerKind::Conv1D},         {"conv2d", LayerKind::Conv2D}, {"maxpool1d", LayerKind::MaxPool1D},
      {"maxpool2d", LayerKind::MaxPool2D},   {"dense", LayerKind::Dense},   {"dropout", LayerKind::Dropout},
      {"flatten", LayerKind::Flatten}};
  return t;
}

Activation activation_from(const std::string& s) {
  if (s == "linear") return Activation::Linear;
  if (s == "relu") return Activation::ReLU;
  if (s == "softmax") return Activation::Softmax;
  throw ArgumentError("unknown activation '" + s + "'");
}

}  // namespace

std::string spec_to_json(const NetworkSpec& spec) {
  json j;
  j["input_shape"] = spec.input_shape;
  j["layers"] = json::array();
  for (const auto& l : spec.layers) {
    json lj;
    lj["type"] = to_string(l.kind);
    switch (l.kind) {
      case LayerKind::Conv1D:
        lj["filters"] = l.units;
        lj["kernel"] = l.kernel_w;
        lj["stride"] = l.stride;
        lj["activation"] = to_string(l.activation);
        break;
      case LayerKind::Conv2D:
        lj["filters"] = l.units;
        lj["kernel"] = {l.kernel_h, l.kernel_w};
        lj["stride"] = l.stride;
        lj["activation"] = to_string(l.activation);
        break;
      case LayerKind::MaxPool1D:
      case LayerKind::MaxPool2D:
        lj["size"] = l.kernel_w;
        lj["stride"] = l.stride;
        break;
      case LayerKind::Dense:
        lj["units"] = l.units;
        lj["activation"] = to_string(l.activation);
        break;
      case LayerKind::Dropout:
        lj["rate"] = l.rate;
        break;
      case LayerKind::Flatten:
        break;
    }
    if (l.has_parameters() && !l.regularize) lj["regularize"] = false;
    j["layers"].push_back(lj);
  }
  return j.dump();
}

NetworkSpec spec_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ArgumentError(std::string("network spec: ") + e.what());
  }
  NetworkSpec spec;
  try {
    spec.input_shape = j.at("input_shape").get<std::vector<Index>>();
    for (const auto& lj : j.at("layers")) {
      const std::string type = lj.at("type").get<std::string>();
      const auto it = kind_table().find(type);
      if (it == kind_table().end()) throw ArgumentError("unknown layer type '" + type + "'");
      LayerSpec l;
      l.kind = it->second;
      switch (l.kind) {
        case LayerKind::Conv1D:
          l.units = lj.at("filters").get<Index>();
          l.kernel_w = lj.at("kernel").get<Index>();
          l.stride = lj.value("stride", Index{1});
          l.activation = activation_from(lj.value("activation", std::string("relu")));
          break;
        case LayerKind::Conv2D: {
          l.units = lj.at("filters").get<Index>();
          const auto& k = lj.at("kernel");
          if (k.is_array()) {
            l.kernel_h = k.at(0).get<Index>();
            l.kernel_w = k.at(1).get<Index>();
          } else {
            l.kernel_h = l.kernel_w = k.get<Index>();
          }
          l.stride = lj.value("stride", Index{1});
          l.activation = activation_from(lj.value("activation", std::string("relu")));
          break;
        }
        case LayerKind::MaxPool1D:
          l.kernel_w = lj.value("size", Index{2});
          l.stride = lj.value("stride", Index{2});
          break;
        case LayerKind::MaxPool2D:
          l.kernel_h = l.kernel_w = lj.value("size", Index{2});
          l.stride = lj.value("stride", Index{2});
          break;
        case LayerKind::Dense:
          l.units = lj.at("units").get<Index>();
          l.activation = activation_from(lj.value("activation", std::string("relu")));
          break;
        case LayerKind::Dropout:
          l.rate = lj.at("rate").get<double>();
          break;
        case LayerKind::Flatten:
          break;
      }
      l.regularize = lj.value("regularize", true);
      spec.layers.push_back(l);
    }
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("network spec: ") + e.what());
  }
  infer_shapes(spec);
  return spec;
}

}  // namespace mrl::nn

#include "mrl/errors.hpp"
#include "mrl/experiment.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace mrl::experiment {

using nlohmann::json;

namespace {

// Reads one JSON object and rejects keys nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json* child(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    const json* v = child(key);
    if (!v) return fallback;
    try {
      return v->get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + "." + key + ": wrong type (" + std::string(v->type_name()) + ")");
    }
  }

  std::string path(const std::string& key) const { return where_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

DatasetConfig parse_dataset(const json& j) {
  ObjectReader r(j, "dataset");
  DatasetConfig d;
  d.format = r.get<std::string>("format", d.format);
  d.path = r.get<std::string>("path", d.path);
  d.preprocess = r.get<std::string>("preprocess", d.preprocess);
  d.count = r.get<std::size_t>("count", d.count);
  d.length = r.get<Index>("length", d.length);
  d.image_size = r.get<Index>("image_size", d.image_size);
  d.noise = r.get<double>("noise", d.noise);
  d.seed = r.get<std::uint64_t>("seed", d.seed);
  if (const json* s = r.child("split")) {
    if (!s->is_array() || s->size() != 3) throw ConfigError("dataset.split: expected [train, validation, test]");
    for (std::size_t i = 0; i < 3; ++i) {
      if (!(*s)[i].is_number()) throw ConfigError("dataset.split: ratios must be numbers");
      d.split[i] = (*s)[i].get<double>();
    }
  }
  d.train_fraction = r.get<double>("train_fraction", d.train_fraction);
  d.target_length = r.get<Index>("target_length", d.target_length);
  d.cross_validation_folds = r.get<int>("cross_validation_folds", d.cross_validation_folds);
  r.finish();
  return d;
}

void parse_network(const json& j, ExperimentConfig& c) {
  ObjectReader r(j, "network");
  c.network_preset = r.get<std::string>("preset", "");
  c.pool_stride = r.get<Index>("pool_stride", c.pool_stride);
  if (const json* s = r.child("spec")) {
    try {
      c.network_spec = nn::spec_from_json(s->dump());
    } catch (const std::exception& e) {
      throw ConfigError(std::string("network.spec: ") + e.what());
    }
  }
  r.finish();
}

void parse_train(const json& j, ExperimentConfig& c) {
  ObjectReader r(j, "train");
  auto& t = c.train;
  t.learning_rate = r.get<double>("learning_rate", t.learning_rate);
  t.momentum = r.get<double>("momentum", t.momentum);
  t.weight_decay = r.get<double>("weight_decay", t.weight_decay);
  t.batch_size = r.get<int>("batch_size", t.batch_size);
  t.early_stop_patience = r.get<int>("early_stop_patience", t.early_stop_patience);
  const auto v = r.get<std::string>("validate_at", "phase");
  if (v == "phase") {
    c.validate_at = curriculum::ValidationResolution::Phase;
  } else if (v == "original") {
    c.validate_at = curriculum::ValidationResolution::Original;
  } else {
    throw ConfigError("train.validate_at: expected 'phase' or 'original', got '" + v + "'");
  }
  r.finish();
}

void parse_attacks(const json& j, AttackSuite& a) {
  ObjectReader r(j, "attacks");
  if (const json* n = r.child("noise")) {
    ObjectReader s(*n, "attacks.noise");
    a.noise.enabled = s.get<bool>("enabled", true);
    a.noise.density = s.get<double>("density", a.noise.density);
    a.noise.sigma = s.get<double>("sigma", a.noise.sigma);
    s.finish();
  }
  if (const json* n = r.child("deepfool")) {
    ObjectReader s(*n, "attacks.deepfool");
    a.deepfool.enabled = s.get<bool>("enabled", true);
    a.deepfool.max_iter = s.get<int>("max_iter", a.deepfool.max_iter);
    a.deepfool.overshoot = s.get<double>("overshoot", a.deepfool.overshoot);
    a.deepfool.max_samples = s.get<std::size_t>("max_samples", a.deepfool.max_samples);
    s.finish();
  }
  if (const json* n = r.child("one_pixel")) {
    ObjectReader s(*n, "attacks.one_pixel");
    a.one_pixel.enabled = s.get<bool>("enabled", true);
    a.one_pixel.pop_size = s.get<int>("pop_size", a.one_pixel.pop_size);
    a.one_pixel.max_gens = s.get<int>("max_gens", a.one_pixel.max_gens);
    a.one_pixel.scale_factor = s.get<double>("scale_factor", a.one_pixel.scale_factor);
    a.one_pixel.max_samples = s.get<std::size_t>("max_samples", a.one_pixel.max_samples);
    s.finish();
  }
  if (const json* n = r.child("swap")) {
    ObjectReader s(*n, "attacks.swap");
    a.swap.enabled = s.get<bool>("enabled", true);
    a.swap.max_samples = s.get<std::size_t>("max_samples", a.swap.max_samples);
    s.finish();
  }
  r.finish();
}

bool is_2d(const DatasetConfig& d) {
  return d.format == "synthetic-2d" || d.format == "cifar-bin" || d.format == "image-dir" ||
         (d.format == "wav-dir" && d.preprocess == "log-mel");
}

}  // namespace

nn::NetworkSpec ExperimentConfig::network() const {
  if (network_spec) return *network_spec;
  try {
    return nn::network_preset(network_preset, {pool_stride});
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("network: ") + e.what());
  }
}

void ExperimentConfig::validate() const {
  const auto& d = dataset;
  static const std::set<std::string> formats = {"synthetic-1d", "synthetic-2d", "wav-dir", "cifar-bin", "image-dir"};
  if (!formats.count(d.format)) throw ConfigError("dataset.format: unknown format '" + d.format + "'");
  static const std::set<std::string> preprocess = {"none", "waveform", "log-mel", "standardize"};
  if (!preprocess.count(d.preprocess)) throw ConfigError("dataset.preprocess: unknown preset '" + d.preprocess + "'");
  if ((d.preprocess == "waveform" || d.preprocess == "log-mel") && d.format != "wav-dir") {
    throw ConfigError("dataset.preprocess: '" + d.preprocess + "' needs format wav-dir");
  }
  if (d.format.rfind("synthetic", 0) != 0 && d.path.empty()) throw ConfigError("dataset.path: required for " + d.format);
  if (d.format.rfind("synthetic", 0) == 0 && d.count < 10) throw ConfigError("dataset.count: need at least 10 samples");
  double sum = 0.0;
  for (double r : d.split) {
    if (r < 0.0) throw ConfigError("dataset.split: ratios must be non-negative");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("dataset.split: ratios must sum to 1");
  if (!(d.split[0] > 0.0) || !(d.split[2] > 0.0)) throw ConfigError("dataset.split: train and test must be non-empty");
  if (!(d.train_fraction > 0.0 && d.train_fraction <= 1.0)) throw ConfigError("dataset.train_fraction: must be in (0, 1]");
  if (d.cross_validation_folds == 1 || d.cross_validation_folds < 0) {
    throw ConfigError("dataset.cross_validation_folds: 0 (off) or at least 2");
  }
  if (d.target_length < 2) throw ConfigError("dataset.target_length: must be >= 2");

  if (network_preset.empty() == !network_spec.has_value()) {
    throw ConfigError("network: give exactly one of 'preset' or 'spec'");
  }
  const auto spec = network();
  const bool net_2d = spec.input_shape.size() == 3;
  if (net_2d != is_2d(d)) {
    throw ConfigError("network input " + shape_string(spec.input_shape) + " does not fit dataset format " + d.format);
  }
  if (k_levels.empty()) throw ConfigError("k_levels: at least one learning mode");
  for (int k : k_levels) {
    if (k < 1) throw ConfigError("k_levels: values must be >= 1");
    if (k > total_epochs) throw ConfigError("total_epochs: must be >= every k_levels value");
  }
  if (seeds.empty()) throw ConfigError("seeds: list must be nonempty");
  if (jobs < 1) throw ConfigError("jobs: must be >= 1");
  if (!(train.learning_rate > 0.0)) throw ConfigError("train.learning_rate: must be positive");
  if (train.momentum < 0.0 || train.momentum >= 1.0) throw ConfigError("train.momentum: must be in [0, 1)");
  if (train.weight_decay < 0.0) throw ConfigError("train.weight_decay: must be non-negative");
  if (train.batch_size < 1) throw ConfigError("train.batch_size: must be >= 1");
  if (train.early_stop_patience < 1) throw ConfigError("train.early_stop_patience: must be >= 1");
  if ((attacks.one_pixel.enabled || attacks.swap.enabled) && !is_2d(d)) {
    throw ConfigError("attacks: one_pixel and swap need image-shaped data");
  }
  if (attacks.noise.enabled && !(attacks.noise.density > 0.0 && attacks.noise.density <= 1.0)) {
    throw ConfigError("attacks.noise.density: must be in (0, 1]");
  }
  if (attacks.noise.enabled && attacks.noise.sigma < 0.0) throw ConfigError("attacks.noise.sigma: must be >= 0");
  if (attacks.deepfool.enabled && (attacks.deepfool.max_iter < 1 || attacks.deepfool.overshoot < 0.0)) {
    throw ConfigError("attacks.deepfool: max_iter >= 1 and overshoot >= 0 required");
  }
  if (attacks.one_pixel.enabled && (attacks.one_pixel.pop_size < 4 || attacks.one_pixel.max_gens < 1)) {
    throw ConfigError("attacks.one_pixel: pop_size >= 4 and max_gens >= 1 required");
  }
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source + ": " + e.what());
  }
  ExperimentConfig c;
  try {
    ObjectReader r(j, "config");
    c.name = r.get<std::string>("name", c.name);
    if (const json* d = r.child("dataset")) c.dataset = parse_dataset(*d);
    if (const json* n = r.child("network")) parse_network(*n, c);
    if (const json* k = r.child("k_levels")) {
      if (k->is_number_integer()) {
        c.k_levels = {k->get<int>()};
      } else {
        c.k_levels = r.get<std::vector<int>>("k_levels", {});
      }
    }
    c.total_epochs = r.get<int>("total_epochs", c.total_epochs);
    if (const json* t = r.child("train")) parse_train(*t, c);
    if (const json* s = r.child("seeds")) {
      if (s->is_number_integer()) {
        c.seeds = {s->get<std::uint64_t>()};
      } else {
        c.seeds = r.get<std::vector<std::uint64_t>>("seeds", {});
      }
    }
    if (const json* a = r.child("attacks")) parse_attacks(*a, c.attacks);
    c.output_dir = r.get<std::string>("output_dir", c.output_dir);
    c.jobs = r.get<int>("jobs", c.jobs);
    r.finish();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), path);
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  const auto& d = c.dataset;
  j["dataset"] = {{"format", d.format},
                  {"path", d.path},
                  {"preprocess", d.preprocess},
                  {"count", d.count},
                  {"length", d.length},
                  {"image_size", d.image_size},
                  {"noise", d.noise},
                  {"seed", d.seed},
                  {"split", d.split},
                  {"train_fraction", d.train_fraction},
                  {"target_length", d.target_length},
                  {"cross_validation_folds", d.cross_validation_folds}};
  if (c.network_spec) {
    j["network"] = {{"spec", json::parse(nn::spec_to_json(*c.network_spec))}};
  } else {
    j["network"] = {{"preset", c.network_preset}, {"pool_stride", c.pool_stride}};
  }
  j["k_levels"] = c.k_levels;
  j["total_epochs"] = c.total_epochs;
  j["train"] = {{"learning_rate", c.train.learning_rate},
                {"momentum", c.train.momentum},
                {"weight_decay", c.train.weight_decay},
                {"batch_size", c.train.batch_size},
                {"early_stop_patience", c.train.early_stop_patience},
                {"validate_at", c.validate_at == curriculum::ValidationResolution::Phase ? "phase" : "original"}};
  j["seeds"] = c.seeds;
  const auto& a = c.attacks;
  j["attacks"] = {
      {"noise", {{"enabled", a.noise.enabled}, {"density", a.noise.density}, {"sigma", a.noise.sigma}}},
      {"deepfool",
       {{"enabled", a.deepfool.enabled},
        {"max_iter", a.deepfool.max_iter},
        {"overshoot", a.deepfool.overshoot},
        {"max_samples", a.deepfool.max_samples}}},
      {"one_pixel",
       {{"enabled", a.one_pixel.enabled},
        {"pop_size", a.one_pixel.pop_size},
        {"max_gens", a.one_pixel.max_gens},
        {"scale_factor", a.one_pixel.scale_factor},
        {"max_samples", a.one_pixel.max_samples}}},
      {"swap", {{"enabled", a.swap.enabled}, {"max_samples", a.swap.max_samples}}}};
  j["output_dir"] = c.output_dir;
  j["jobs"] = c.jobs;
  return j.dump(2);
}

std::string mode_label(int k) { return k == 1 ? "TL" : "ML (" + std::to_string(k) + ")"; }

std::string mode_slug(int k) { return k == 1 ? "tl" : "ml-" + std::to_string(k); }

std::string resolve_output_dir(const std::string& dir) {
  const std::filesystem::path p(dir);
  if (p.is_absolute()) return p.string();
  const char* root = std::getenv("MRL_OUTPUT_ROOT");
  const std::filesystem::path base = root && *root ? std::filesystem::path(root) : std::filesystem::current_path();
  return (base / p).lexically_normal().string();
}

}  // namespace mrl::experiment

#include "mrl/errors.hpp"
#include "mrl/experiment.hpp"
#include "mrl/formats.hpp"
#include "mrl/signalprep.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>
#include <numeric>
#include <random>

namespace mrl::experiment {

namespace fs = std::filesystem;

SplitIndices split_indices(std::size_t n, const std::array<double, 3>& ratios, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = std::min<std::size_t>(n, static_cast<std::size_t>(std::llround(ratios[0] * double(n))));
  const auto n_val =
      std::min<std::size_t>(n - n_train, static_cast<std::size_t>(std::llround(ratios[1] * double(n))));
  SplitIndices s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                      order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  return s;
}

std::vector<std::size_t> reduce_training(const std::vector<std::size_t>& train, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ArgumentError("train fraction must be in (0, 1]");
  auto keep = static_cast<std::size_t>(std::llround(fraction * double(train.size())));
  keep = std::clamp<std::size_t>(keep, train.empty() ? 0 : 1, train.size());
  return {train.begin(), train.begin() + static_cast<std::ptrdiff_t>(keep)};
}

std::vector<std::pair<int, int>> cross_validation_pairs(int folds) {
  if (folds < 2) throw ArgumentError("cross-validation needs at least 2 folds");
  std::vector<std::pair<int, int>> out;
  for (int t = 0; t < folds; ++t) {
    for (int v = 0; v < folds; ++v) {
      if (v != t) out.emplace_back(t, v);
    }
  }
  return out;
}

RawDataset synthetic_1d(std::size_t count, Index length, double noise, std::uint64_t seed) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n01(0.0, 1.0);
  RawDataset raw;
  raw.dim = Dimensionality::D1;
  raw.data.num_classes = 2;
  for (std::size_t i = 0; i < count; ++i) {
    const int label = static_cast<int>(i % 2);
    const double amp = 0.6 + 0.4 * u(rng);
    const double phase = two_pi * u(rng);
    // Frequencies in cycles per signal length: a steady tone vs a rising chirp.
    const double f0 = label == 0 ? 4.0 + 16.0 * u(rng) : 2.0 + 4.0 * u(rng);
    const double f1 = label == 0 ? f0 : 16.0 + 16.0 * u(rng);
    Tensor x({1, length});
    for (Index t = 0; t < length; ++t) {
      const double s = static_cast<double>(t) / static_cast<double>(length);
      x[t] = amp * std::sin(two_pi * (f0 * s + 0.5 * (f1 - f0) * s * s) + phase) + noise * n01(rng);
    }
    raw.data.samples.push_back(std::move(x));
    raw.data.labels.push_back(label);
  }
  return raw;
}

RawDataset synthetic_2d(std::size_t count, Index size, double noise, std::uint64_t seed) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n01(0.0, 1.0);
  RawDataset raw;
  raw.dim = Dimensionality::D2;
  raw.data.num_classes = 2;
  for (std::size_t i = 0; i < count; ++i) {
    const int label = static_cast<int>(i % 2);
    // Stripes varying along a near-horizontal (class 0) or near-vertical (class 1) direction.
    const double base = label == 0 ? 0.0 : std::numbers::pi / 2.0;
    const double theta = base + (u(rng) - 0.5) * std::numbers::pi / 4.0;
    const double freq = 1.5 + 1.5 * u(rng);
    const double phase = two_pi * u(rng);
    Tensor x({1, size, size});
    for (Index r = 0; r < size; ++r) {
      for (Index c = 0; c < size; ++c) {
        const double pos = (static_cast<double>(c) * std::cos(theta) + static_cast<double>(r) * std::sin(theta)) /
                           static_cast<double>(size);
        x[r * size + c] = std::sin(two_pi * freq * pos + phase) + noise * n01(rng);
      }
    }
    raw.data.samples.push_back(std::move(x));
    raw.data.labels.push_back(label);
  }
  return raw;
}

namespace {

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::optional<int> parse_int(const std::string& s) {
  if (s.empty() || !std::all_of(s.begin(), s.end(), [](unsigned char ch) { return std::isdigit(ch); })) {
    return std::nullopt;
  }
  return std::stoi(s);
}

struct WavLabel {
  int label = -1;
  int fold = -1;
};

// "{digit}_{speaker}_{n}.wav" or "{fold}-{clip}-{take}-{target}.wav"; a
// numeric parent directory is the fallback label.
WavLabel parse_wav_name(const fs::path& p) {
  const std::string stem = p.stem().string();
  if (stem.find('_') != std::string::npos) {
    if (auto v = parse_int(split_on(stem, '_').front())) return {*v, -1};
  }
  const auto dash = split_on(stem, '-');
  if (dash.size() >= 4) {
    auto fold = parse_int(dash.front());
    auto label = parse_int(dash.back());
    if (fold && label) return {*label, *fold};
  }
  if (auto v = parse_int(p.parent_path().filename().string())) return {*v, -1};
  throw DataError(p.string(), -1, "cannot parse a class label from the file name");
}

struct WavCorpus {
  RawDataset raw;
  std::vector<double> sample_rates;
};

WavCorpus read_wav_directory(const std::string& root) {
  if (!fs::is_directory(root)) throw DataError(root, -1, "not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && e.path().extension() == ".wav") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError(root, -1, "no .wav files found");
  std::vector<WavLabel> names;
  for (const auto& f : files) names.push_back(parse_wav_name(f));
  // Class ids need not be contiguous (ESC-10 keeps its ESC-50 targets).
  std::map<int, int> remap;
  for (const auto& n : names) remap.emplace(n.label, 0);
  int next = 0;
  for (auto& [label, index] : remap) index = next++;
  const bool have_folds = std::all_of(names.begin(), names.end(), [](const WavLabel& n) { return n.fold >= 0; });

  WavCorpus corpus;
  corpus.raw.dim = Dimensionality::D1;
  corpus.raw.data.num_classes = next;
  for (std::size_t i = 0; i < files.size(); ++i) {
    auto clip = formats::read_wav(files[i].string());
    corpus.raw.data.samples.push_back(Tensor({1, clip.samples.size()}, clip.samples));
    corpus.raw.data.labels.push_back(remap.at(names[i].label));
    corpus.sample_rates.push_back(clip.sample_rate);
    if (have_folds) corpus.raw.folds.push_back(names[i].fold);
  }
  return corpus;
}

std::vector<std::string> cifar_files(const std::string& path) {
  if (fs::is_regular_file(path)) return {path};
  if (!fs::is_directory(path)) throw DataError(path, -1, "no such file or directory");
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(path)) {
    if (e.is_regular_file() && e.path().extension() == ".bin") files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError(path, -1, "no .bin batches found");
  return files;
}

// Turns a split of clip-level items into model inputs.
class Preprocessor {
 public:
  Preprocessor(const DatasetConfig& config, std::vector<double> sample_rates)
      : config_(config), rates_(std::move(sample_rates)) {}

  Dataset apply(const Dataset& all, const std::vector<std::size_t>& idx) const {
    Dataset subset = all.subset(idx);
    if (config_.preprocess == "waveform") {
      for (std::size_t i = 0; i < idx.size(); ++i) {
        signalprep::AudioClip clip{subset.samples[i].values(), rates_.at(idx[i]), subset.labels[i]};
        try {
          clip = signalprep::preprocess_waveform(clip, config_.target_length);
        } catch (const ArgumentError& e) {
          throw DataError("clip #" + std::to_string(idx[i]) + ": " + e.what());
        }
        subset.samples[i] = Tensor({1, clip.samples.size()}, clip.samples);
      }
    } else if (config_.preprocess == "log-mel") {
      Dataset segmented;
      segmented.num_classes = all.num_classes;
      for (std::size_t i = 0; i < idx.size(); ++i) {
        signalprep::AudioClip clip{subset.samples[i].values(), rates_.at(idx[i]), subset.labels[i]};
        signalprep::Spectrogram spec;
        try {
          spec = signalprep::log_mel_spectrogram(clip);
        } catch (const std::invalid_argument& e) {
          throw DataError("clip #" + std::to_string(idx[i]) + ": " + e.what());
        }
        const auto segs = signalprep::segment_spectrogram(spec);
        for (const auto& m : segs.segments) {
          Tensor t({1, m.rows(), m.cols()});
          t.set_image_channel(0, m);
          segmented.samples.push_back(std::move(t));
          segmented.labels.push_back(subset.labels[i]);
          segmented.groups.push_back(static_cast<int>(idx[i]));
        }
      }
      return segmented;
    }
    return subset;
  }

 private:
  const DatasetConfig& config_;
  std::vector<double> rates_;
};

void standardize(SplitData& s) {
  const auto stats = signalprep::normalize_images(s.train.samples, {});
  s.train.samples = signalprep::apply_normalization(s.train.samples, stats.mean, stats.stddev);
  s.validation.samples = signalprep::apply_normalization(s.validation.samples, stats.mean, stats.stddev);
  s.test.samples = signalprep::apply_normalization(s.test.samples, stats.mean, stats.stddev);
}

}  // namespace

std::vector<SplitData> load_dataset(const DatasetConfig& config) {
  RawDataset raw;
  std::vector<double> rates;
  if (config.format == "synthetic-1d") {
    raw = synthetic_1d(config.count, config.length, config.noise, config.seed);
  } else if (config.format == "synthetic-2d") {
    raw = synthetic_2d(config.count, config.image_size, config.noise, config.seed);
  } else if (config.format == "wav-dir") {
    auto corpus = read_wav_directory(config.path);
    raw = std::move(corpus.raw);
    rates = std::move(corpus.sample_rates);
    if (config.preprocess == "log-mel") raw.dim = Dimensionality::D2;
  } else if (config.format == "cifar-bin") {
    raw.dim = Dimensionality::D2;
    for (const auto& f : cifar_files(config.path)) {
      auto batch = formats::read_cifar_batch(f);
      for (std::size_t i = 0; i < batch.size(); ++i) {
        raw.data.samples.push_back(std::move(batch.samples[i]));
        raw.data.labels.push_back(batch.labels[i]);
      }
      raw.data.num_classes = std::max(raw.data.num_classes, batch.num_classes);
    }
  } else if (config.format == "image-dir") {
    raw.dim = Dimensionality::D2;
    raw.data = formats::read_image_directory(config.path);
  } else {
    throw ConfigError("unknown dataset format '" + config.format + "'");
  }
  const std::size_t n = raw.data.size();
  if (n < 3) throw DataError(config.path, -1, "dataset has fewer than 3 items");

  Preprocessor prep(config, rates);
  auto finish = [&](std::string name, const std::vector<std::size_t>& tr, const std::vector<std::size_t>& va,
                    const std::vector<std::size_t>& te) {
    SplitData s;
    s.name = std::move(name);
    s.dim = raw.dim;
    s.train = prep.apply(raw.data, reduce_training(tr, config.train_fraction));
    s.validation = prep.apply(raw.data, va);
    s.test = prep.apply(raw.data, te);
    if (config.preprocess == "standardize") standardize(s);
    return s;
  };

  std::vector<SplitData> out;
  if (config.cross_validation_folds == 0) {
    const auto idx = split_indices(n, config.split, config.seed);
    out.push_back(finish("", idx.train, idx.validation, idx.test));
    return out;
  }

  const int folds = config.cross_validation_folds;
  std::vector<int> fold_of(n);
  if (!raw.folds.empty()) {
    // Filename folds are 1-based.
    for (std::size_t i = 0; i < n; ++i) {
      fold_of[i] = raw.folds[i] - 1;
      if (fold_of[i] < 0 || fold_of[i] >= folds) {
        throw DataError("item #" + std::to_string(i) + " has fold " + std::to_string(raw.folds[i]) + " outside 1.." +
                        std::to_string(folds));
      }
    }
  } else {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(config.seed);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t pos = 0; pos < n; ++pos) fold_of[order[pos]] = static_cast<int>(pos % std::size_t(folds));
  }
  for (const auto& [t, v] : cross_validation_pairs(folds)) {
    std::vector<std::size_t> tr, va, te;
    std::mt19937_64 rng(config.seed);
    for (std::size_t i = 0; i < n; ++i) {
      if (fold_of[i] == t) {
        te.push_back(i);
      } else if (fold_of[i] == v) {
        va.push_back(i);
      } else {
        tr.push_back(i);
      }
    }
    // Reduction keeps a prefix, so the training fold must be in random order.
    std::shuffle(tr.begin(), tr.end(), rng);
    out.push_back(finish("fold-" + std::to_string(t + 1) + "-" + std::to_string(v + 1), tr, va, te));
  }
  return out;
}

}  // namespace mrl::experiment

#include "mrl/errors.hpp"
#include "mrl/experiment.hpp"
#include "mrl/formats.hpp"
#include "mrl/robustness.hpp"
#include "mrl/signalprep.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace mrl::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError(path.string(), -1, "cannot open");
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Dataset head(const Dataset& d, std::size_t max_samples) {
  if (max_samples == 0 || max_samples >= d.size()) return d;
  std::vector<std::size_t> idx(max_samples);
  for (std::size_t i = 0; i < max_samples; ++i) idx[i] = i;
  return d.subset(idx);
}

std::string run_name(std::uint64_t seed, const std::string& fold) {
  std::string name = "seed-" + std::to_string(seed);
  if (!fold.empty()) name += "/" + fold;
  return name;
}

}  // namespace

std::string to_json(const RunMetrics& m) {
  json j;
  j["mode"] = m.mode;
  j["k_levels"] = m.k_levels;
  j["seed"] = m.seed;
  j["fold"] = m.fold;
  j["epochs_run"] = m.epochs_run;
  j["test_accuracy"] = m.test_accuracy;
  j["test_loss"] = m.test_loss;
  if (m.clip_accuracy) j["clip_accuracy"] = *m.clip_accuracy;
  if (m.noisy_accuracy) j["noisy_accuracy"] = *m.noisy_accuracy;
  if (m.rho) j["rho"] = *m.rho;
  if (m.deepfool_failures) j["deepfool_failures"] = *m.deepfool_failures;
  if (m.one_pixel_as_rate) j["one_pixel_as_rate"] = *m.one_pixel_as_rate;
  if (m.swap_as_rate) {
    const auto& s = *m.swap_as_rate;
    j["swap_as_rate"] = {{"LH", s[0]}, {"HL", s[1]}, {"HH", s[2]}, {"Total", s[3]}};
  }
  return j.dump(2);
}

RunMetrics metrics_from_json(const std::string& text, const std::string& source) {
  RunMetrics m;
  try {
    const json j = json::parse(text);
    m.mode = j.at("mode").get<std::string>();
    m.k_levels = j.at("k_levels").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.fold = j.at("fold").get<std::string>();
    m.epochs_run = j.at("epochs_run").get<int>();
    m.test_accuracy = j.at("test_accuracy").get<double>();
    m.test_loss = j.at("test_loss").get<double>();
    if (j.contains("clip_accuracy")) m.clip_accuracy = j["clip_accuracy"].get<double>();
    if (j.contains("noisy_accuracy")) m.noisy_accuracy = j["noisy_accuracy"].get<double>();
    if (j.contains("rho")) m.rho = j["rho"].get<double>();
    if (j.contains("deepfool_failures")) m.deepfool_failures = j["deepfool_failures"].get<std::size_t>();
    if (j.contains("one_pixel_as_rate")) m.one_pixel_as_rate = j["one_pixel_as_rate"].get<double>();
    if (j.contains("swap_as_rate")) {
      const auto& s = j["swap_as_rate"];
      m.swap_as_rate = std::array<double, 4>{s.at("LH").get<double>(), s.at("HL").get<double>(),
                                             s.at("HH").get<double>(), s.at("Total").get<double>()};
    }
  } catch (const json::exception& e) {
    throw DataError(source, -1, std::string("malformed metrics: ") + e.what());
  }
  return m;
}

CleanEvaluation evaluate_clean(const nn::Network& net, const Dataset& test) {
  const auto ev = nn::evaluate(net, test, 1.0);
  CleanEvaluation out{ev.accuracy, ev.mean_loss, std::nullopt};
  if (!test.groups.empty()) {
    std::map<int, std::vector<Eigen::VectorXd>> by_clip;
    std::map<int, int> label_of;
    for (std::size_t i = 0; i < test.size(); ++i) {
      by_clip[test.groups[i]].push_back(ev.probabilities.row(static_cast<Index>(i)).transpose());
      label_of[test.groups[i]] = test.labels[i];
    }
    std::size_t correct = 0;
    for (const auto& [clip, probs] : by_clip) {
      if (signalprep::probability_vote(probs) == label_of[clip]) ++correct;
    }
    out.clip_accuracy = static_cast<double>(correct) / static_cast<double>(by_clip.size());
  }
  return out;
}

void run_attacks(const nn::Network& net, const Dataset& test, const AttackSuite& attacks, Dimensionality dim,
                 std::uint64_t seed, const std::string& dir, RunMetrics& m) {
  const fs::path out(dir);
  if (attacks.noise.enabled) {
    m.noisy_accuracy = robustness::noisy_accuracy(net, test, attacks.noise.density, attacks.noise.sigma, seed);
  }
  if (attacks.deepfool.enabled) {
    robustness::DeepFoolOptions o;
    o.max_iter = attacks.deepfool.max_iter;
    o.overshoot = attacks.deepfool.overshoot;
    o.seed = seed;
    const auto rep = robustness::robustness_rho(net, head(test, attacks.deepfool.max_samples), o);
    m.rho = rep.rho;
    m.deepfool_failures = rep.failures;
    std::ofstream os(out / "deepfool.csv");
    robustness::write_samples_csv(os, rep.samples);
  }
  if ((attacks.one_pixel.enabled || attacks.swap.enabled) && dim != Dimensionality::D2) {
    throw ConfigError("one_pixel and swap attacks need image-shaped data");
  }
  if (attacks.one_pixel.enabled) {
    robustness::OnePixelOptions o;
    o.pop_size = attacks.one_pixel.pop_size;
    o.max_gens = attacks.one_pixel.max_gens;
    o.scale_factor = attacks.one_pixel.scale_factor;
    o.seed = seed;
    o.value_min = std::numeric_limits<double>::infinity();
    o.value_max = -std::numeric_limits<double>::infinity();
    for (const auto& x : test.samples) {
      o.value_min = std::min(o.value_min, x.values().minCoeff());
      o.value_max = std::max(o.value_max, x.values().maxCoeff());
    }
    const auto sum = robustness::run_one_pixel_attack(net, test, o, attacks.one_pixel.max_samples);
    m.one_pixel_as_rate = sum.attack_success_rate;
    std::ofstream os(out / "one_pixel.csv");
    robustness::write_samples_csv(os, sum.samples);
  }
  if (attacks.swap.enabled) {
    const auto sum = robustness::run_swap_attack(net, test, seed, attacks.swap.max_samples);
    using wavelet::Subband;
    m.swap_as_rate = std::array<double, 4>{sum.table.rate(Subband::LH), sum.table.rate(Subband::HL),
                                           sum.table.rate(Subband::HH), sum.table.total_rate()};
    std::ofstream os(out / "swap.csv");
    robustness::write_samples_csv(os, sum.samples);
  }
}

namespace {

struct Task {
  int k = 1;
  std::uint64_t seed = 0;
  std::size_t split = 0;
  fs::path dir;
};

RunMetrics run_one(const ExperimentConfig& config, const SplitData& split, const Task& task,
                   const nn::NetworkSpec& spec, const Stages& stages) {
  fs::create_directories(task.dir);
  RunMetrics m;
  m.k_levels = task.k;
  m.mode = mode_label(task.k);
  m.seed = task.seed;
  m.fold = split.name;

  nn::TrainConfig tc = config.train;
  tc.seed = task.seed;
  tc.max_epochs = config.total_epochs;
  const auto plan = curriculum::plan_phases(config.total_epochs, task.k, split.dim);
  const auto train_stages = curriculum::make_stages(split.train, task.k, split.dim);
  curriculum::TrainOptions opts;
  opts.validate_at = config.validate_at;
  opts.on_phase_end = [&](std::size_t phase, const nn::Network& net) {
    nn::save_checkpoint((task.dir / ("phase-" + std::to_string(phase + 1) + ".ckpt")).string(), net);
  };
  auto result = curriculum::train_multiresolution(nn::init_weights(spec, task.seed), train_stages, split.validation,
                                                  plan, tc, opts);
  nn::save_checkpoint((task.dir / "model.ckpt").string(), result.network);
  m.epochs_run = result.report.epochs_run;

  const auto clean = evaluate_clean(result.network, split.test);
  m.test_accuracy = clean.accuracy;
  m.test_loss = clean.loss;
  m.clip_accuracy = clean.clip_accuracy;
  result.report.test_accuracy = clean.accuracy;
  result.report.test_loss = clean.loss;
  write_text(task.dir / "train.json", curriculum::to_json(result.report));

  const auto t0 = std::chrono::steady_clock::now();
  if (stages.attacks && config.attacks.any()) {
    run_attacks(result.network, split.test, config.attacks, split.dim, task.seed, task.dir.string(), m);
  }
  const double attack_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_text(task.dir / "metrics.json", to_json(m));
  write_text(task.dir / "timing.json", json{{"train_seconds", result.report.wall_clock_seconds},
                                            {"attack_seconds", attack_seconds}}
                                           .dump(2));
  return m;
}

struct Stat {
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t n = 0;
};

Stat stat_of(const std::vector<double>& v) {
  Stat s;
  s.n = v.size();
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  for (double x : v) s.stddev += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(s.stddev / static_cast<double>(v.size()));
  return s;
}

json stat_json(const std::vector<double>& v) {
  const auto s = stat_of(v);
  return {{"mean", s.mean}, {"std", s.stddev}, {"n", s.n}};
}

std::string summary_json(const std::vector<int>& modes, const std::vector<RunMetrics>& runs) {
  json j = json::array();
  for (int k : modes) {
    std::vector<double> acc, clip, noisy, rho, op, swap_total;
    for (const auto& r : runs) {
      if (r.k_levels != k) continue;
      acc.push_back(r.test_accuracy);
      if (r.clip_accuracy) clip.push_back(*r.clip_accuracy);
      if (r.noisy_accuracy) noisy.push_back(*r.noisy_accuracy);
      if (r.rho) rho.push_back(*r.rho);
      if (r.one_pixel_as_rate) op.push_back(*r.one_pixel_as_rate);
      if (r.swap_as_rate) swap_total.push_back((*r.swap_as_rate)[3]);
    }
    json e{{"mode", mode_label(k)}, {"k_levels", k}, {"test_accuracy", stat_json(acc)}};
    if (!clip.empty()) e["clip_accuracy"] = stat_json(clip);
    if (!noisy.empty()) e["noisy_accuracy"] = stat_json(noisy);
    if (!rho.empty()) e["rho"] = stat_json(rho);
    if (!op.empty()) e["one_pixel_as_rate"] = stat_json(op);
    if (!swap_total.empty()) e["swap_as_rate_total"] = stat_json(swap_total);
    j.push_back(e);
  }
  return j.dump(2);
}

}  // namespace

ExperimentSummary run_experiment(const ExperimentConfig& config, const Stages& stages) {
  config.validate();
  const auto spec = config.network();
  const auto splits = load_dataset(config.dataset);
  for (const auto& s : splits) {
    const auto& shape = s.train.samples.front().shape();
    if (shape != spec.input_shape) {
      throw ConfigError("network input " + shape_string(spec.input_shape) + " does not match data samples " +
                        shape_string(shape));
    }
    if (s.train.num_classes > spec.num_classes()) {
      throw ConfigError("network has " + std::to_string(spec.num_classes()) + " outputs for " +
                        std::to_string(s.train.num_classes) + " classes");
    }
  }

  const fs::path root = resolve_output_dir(config.output_dir);
  fs::create_directories(root);
  std::vector<Task> tasks;
  json manifest_runs = json::array();
  for (std::size_t si = 0; si < splits.size(); ++si) {
    for (int k : config.k_levels) {
      for (auto seed : config.seeds) {
        const std::string rel = mode_slug(k) + "/" + run_name(seed, splits[si].name);
        tasks.push_back({k, seed, si, root / rel});
        manifest_runs.push_back({{"mode", mode_label(k)}, {"k_levels", k}, {"seed", seed},
                                 {"fold", splits[si].name}, {"dir", rel}});
      }
    }
  }
  const bool attacks = stages.attacks;
  json manifest;
  manifest["config"] = json::parse(config_to_json(config));
  manifest["runs"] = manifest_runs;
  manifest["stages"] = {{"train", true},
                        {"noise", attacks && config.attacks.noise.enabled},
                        {"deepfool", attacks && config.attacks.deepfool.enabled},
                        {"one_pixel", attacks && config.attacks.one_pixel.enabled},
                        {"swap", attacks && config.attacks.swap.enabled}};
  write_text(root / "manifest.json", manifest.dump(2));

  std::vector<RunMetrics> results(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        results[i] = run_one(config, splits[tasks[i].split], tasks[i], spec, stages);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(config.jobs), tasks.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  write_text(root / "summary.json", summary_json(config.k_levels, results));
  emit_plot_data(root.string());
  return {root.string(), std::move(results)};
}

void emit_plot_data(const std::string& bundle_dir) {
  const fs::path root(bundle_dir);
  const fs::path manifest_path = root / "manifest.json";
  if (!fs::exists(manifest_path)) throw DataError(bundle_dir, -1, "incomplete bundle: missing stage 'setup' (no manifest.json)");
  json manifest;
  try {
    manifest = json::parse(read_text(manifest_path));
  } catch (const json::exception& e) {
    throw DataError(manifest_path.string(), -1, std::string("malformed manifest: ") + e.what());
  }
  const auto& stage = manifest.at("stages");
  const bool noise = stage.at("noise").get<bool>(), deepfool = stage.at("deepfool").get<bool>();
  const bool one_pixel = stage.at("one_pixel").get<bool>(), swap = stage.at("swap").get<bool>();

  std::vector<RunMetrics> runs;
  std::vector<int> modes;
  for (const auto& r : manifest.at("runs")) {
    const fs::path metrics = root / r.at("dir").get<std::string>() / "metrics.json";
    const std::string who = r.at("mode").get<std::string>() + " seed " + std::to_string(r.at("seed").get<std::uint64_t>()) +
                            (r.at("fold").get<std::string>().empty() ? "" : " " + r.at("fold").get<std::string>());
    if (!fs::exists(metrics)) throw DataError(bundle_dir, -1, "incomplete bundle: missing stage 'train' for " + who);
    auto m = metrics_from_json(read_text(metrics), metrics.string());
    auto require = [&](bool enabled, bool present, const char* name) {
      if (enabled && !present) {
        throw DataError(bundle_dir, -1, std::string("incomplete bundle: missing stage '") + name + "' for " + who);
      }
    };
    require(noise, m.noisy_accuracy.has_value(), "noise");
    require(deepfool, m.rho.has_value(), "deepfool");
    require(one_pixel, m.one_pixel_as_rate.has_value(), "one_pixel");
    require(swap, m.swap_as_rate.has_value(), "swap");
    if (std::find(modes.begin(), modes.end(), m.k_levels) == modes.end()) modes.push_back(m.k_levels);
    runs.push_back(std::move(m));
  }

  const fs::path plots = root / "plots";
  fs::create_directories(plots);
  const bool clips = std::any_of(runs.begin(), runs.end(), [](const RunMetrics& m) { return m.clip_accuracy; });
  {
    std::ostringstream os;
    os << std::setprecision(17) << "mode,seed,fold,test_accuracy";
    if (clips) os << ",clip_accuracy";
    if (noise) os << ",noisy_accuracy";
    os << '\n';
    for (const auto& m : runs) {
      os << m.mode << ',' << m.seed << ',' << m.fold << ',' << m.test_accuracy;
      if (clips) os << ',' << m.clip_accuracy.value_or(0.0);
      if (noise) os << ',' << *m.noisy_accuracy;
      os << '\n';
    }
    write_text(plots / "accuracy.csv", os.str());
  }
  if (deepfool) {
    std::ostringstream os;
    os << std::setprecision(17) << "mode,seed,fold,rho,failures\n";
    for (const auto& m : runs) os << m.mode << ',' << m.seed << ',' << m.fold << ',' << *m.rho << ',' << *m.deepfool_failures << '\n';
    write_text(plots / "rho.csv", os.str());
  }
  if (one_pixel) {
    std::ostringstream os;
    os << std::setprecision(17) << "mode,seed,fold,as_rate\n";
    for (const auto& m : runs) os << m.mode << ',' << m.seed << ',' << m.fold << ',' << *m.one_pixel_as_rate << '\n';
    write_text(plots / "one_pixel_as_rate.csv", os.str());
  }
  if (swap) {
    // Table layout: one row per band, one column per mode (mean over runs),
    // plus absolute and relative reductions against TL when it is present.
    std::map<int, std::array<double, 4>> mean;
    std::map<int, int> count;
    for (const auto& m : runs) {
      auto& acc = mean[m.k_levels];
      for (int b = 0; b < 4; ++b) acc[b] += (*m.swap_as_rate)[b];
      ++count[m.k_levels];
    }
    for (auto& [k, acc] : mean) {
      for (double& v : acc) v /= count[k];
    }
    const bool has_tl = mean.count(1) > 0;
    std::ostringstream os;
    os << std::setprecision(17) << "band";
    for (int k : modes) os << ',' << mode_label(k);
    if (has_tl) {
      for (int k : modes) {
        if (k != 1) os << ',' << mode_label(k) << " abs_improvement," << mode_label(k) << " rel_improvement";
      }
    }
    os << '\n';
    const char* bands[4] = {"LH", "HL", "HH", "Total"};
    for (int b = 0; b < 4; ++b) {
      os << bands[b];
      for (int k : modes) os << ',' << mean[k][b];
      if (has_tl) {
        for (int k : modes) {
          if (k == 1) continue;
          const auto cmp = robustness::compare_rates(mean[1][b], mean[k][b]);
          os << ',' << cmp.absolute << ',' << cmp.relative;
        }
      }
      os << '\n';
    }
    write_text(plots / "swap_as_rate.csv", os.str());
  }
}

std::vector<std::string> decompose_file(const std::string& path, int k_levels, const std::string& out_dir) {
  if (k_levels < 1) throw ArgumentError("levels must be >= 1");
  const fs::path in(path);
  const std::string ext = in.extension().string();
  fs::create_directories(out_dir);
  std::vector<std::string> written;
  auto write_csv = [&](const fs::path& p, const Tensor& t) {
    std::ostringstream os;
    os << std::setprecision(17);
    const Index cols = t.rank() == 1 ? t.size() : t.shape().back();
    for (Index i = 0; i < t.size(); ++i) os << t[i] << ((i + 1) % cols == 0 ? '\n' : ',');
    write_text(p, os.str());
    written.push_back(p.string());
  };
  if (ext == ".wav") {
    const auto clip = formats::read_wav(path);
    const Tensor x({clip.samples.size()}, clip.samples);
    for (int i = 1; i <= k_levels; ++i) {
      const auto r = build_resolution_1d(x, i);
      const fs::path base = fs::path(out_dir) / ("r" + std::to_string(i));
      formats::write_wav16(base.string() + ".wav", r.data.values(), static_cast<int>(clip.sample_rate));
      written.push_back(base.string() + ".wav");
      write_csv(base.string() + ".csv", r.data);
    }
  } else if (ext == ".pgm" || ext == ".ppm") {
    const Tensor x = formats::read_pnm(path);
    for (int i = 1; i <= k_levels; ++i) {
      const auto r = build_resolution_2d(x, i);
      const fs::path base = fs::path(out_dir) / ("r" + std::to_string(i));
      Tensor clipped = r.data;
      clipped.values() = clipped.values().cwiseMax(0.0).cwiseMin(1.0);
      formats::write_pnm(base.string() + ext, clipped);
      written.push_back(base.string() + ext);
      write_csv(base.string() + ".csv", r.data);
    }
  } else {
    throw DataError(path, -1, "unsupported file type '" + ext + "' (expected .wav, .pgm or .ppm)");
  }
  return written;
}

}  // namespace mrl::experiment

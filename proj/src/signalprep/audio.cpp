#include "mrl/errors.hpp"
#include "mrl/signalprep.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <numbers>

namespace mrl::signalprep {

AudioClip crop_silence(const AudioClip& clip) {
  const Index n = clip.samples.size();
  Index first = 0;
  while (first < n && clip.samples[first] == 0.0) ++first;
  if (first == n) throw ArgumentError("crop_silence: clip is empty or entirely zero");
  Index last = n - 1;
  while (clip.samples[last] == 0.0) --last;
  AudioClip out = clip;
  out.samples = clip.samples.segment(first, last - first + 1);
  return out;
}

AudioClip resample_to_length(const AudioClip& clip, Index length) {
  const Index n = clip.samples.size();
  if (n == 0) throw ArgumentError("resample_to_length: empty clip");
  if (length < 2) throw ArgumentError("resample_to_length: target length must be >= 2");
  if (n == length) return clip;
  AudioClip out = clip;
  out.samples.resize(length);
  if (n == 1) {
    out.samples.setConstant(clip.samples[0]);
    return out;
  }
  const double step = static_cast<double>(n - 1) / static_cast<double>(length - 1);
  for (Index i = 0; i < length; ++i) {
    const double pos = step * static_cast<double>(i);
    const Index lo = std::min(static_cast<Index>(std::floor(pos)), n - 2);
    const double frac = pos - static_cast<double>(lo);
    out.samples[i] = clip.samples[lo] + frac * (clip.samples[lo + 1] - clip.samples[lo]);
  }
  out.samples[length - 1] = clip.samples[n - 1];
  return out;
}

AudioClip normalize_amplitude(const AudioClip& clip) {
  AudioClip out = clip;
  if (clip.samples.size() == 0) return out;
  const double peak = clip.samples.cwiseAbs().maxCoeff();
  if (peak > 0.0) out.samples /= peak;
  return out;
}

AudioClip preprocess_waveform(const AudioClip& clip, Index length) {
  return normalize_amplitude(resample_to_length(crop_silence(clip), length));
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

Eigen::VectorXd mel_edges(double sample_rate, int mel_bands) {
  const double top = hz_to_mel(sample_rate / 2.0);
  Eigen::VectorXd hz(mel_bands + 2);
  for (int i = 0; i < mel_bands + 2; ++i) hz[i] = mel_to_hz(top * i / (mel_bands + 1));
  return hz;
}

}  // namespace

Eigen::VectorXd mel_band_centers(double sample_rate, int mel_bands) {
  return mel_edges(sample_rate, mel_bands).segment(1, mel_bands);
}

Eigen::MatrixXd mel_filterbank(int n_fft, double sample_rate, int mel_bands) {
  if (n_fft < 2 || mel_bands < 1 || !(sample_rate > 0.0)) throw ArgumentError("mel_filterbank: bad parameters");
  const Eigen::VectorXd edges = mel_edges(sample_rate, mel_bands);
  const int bins = n_fft / 2 + 1;
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(mel_bands, bins);
  for (int b = 0; b < mel_bands; ++b) {
    const double left = edges[b], center = edges[b + 1], right = edges[b + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = sample_rate * k / n_fft;
      if (f > left && f < center) {
        fb(b, k) = (f - left) / (center - left);
      } else if (f >= center && f < right) {
        fb(b, k) = (right - f) / (right - center);
      }
    }
  }
  return fb;
}

Spectrogram log_mel_spectrogram(const AudioClip& clip, int window, int hop, int mel_bands) {
  if (window < 2 || hop < 1 || mel_bands < 1) throw ArgumentError("log_mel_spectrogram: bad parameters");
  const Index n = clip.samples.size();
  if (n < window) {
    throw ArgumentError("log_mel_spectrogram: clip of " + std::to_string(n) + " samples is shorter than window " +
                        std::to_string(window));
  }
  const Index frames = (n - window) / hop + 1;
  const int bins = window / 2 + 1;
  Eigen::VectorXd hann(window);
  for (int i = 0; i < window; ++i) hann[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / window);
  const Eigen::MatrixXd fb = mel_filterbank(window, clip.sample_rate, mel_bands);

  Eigen::FFT<double> fft;
  Eigen::MatrixXd power(bins, frames);
  std::vector<double> frame(static_cast<std::size_t>(window));
  std::vector<std::complex<double>> spectrum;
  for (Index t = 0; t < frames; ++t) {
    for (int i = 0; i < window; ++i) frame[static_cast<std::size_t>(i)] = clip.samples[t * hop + i] * hann[i];
    fft.fwd(spectrum, frame);
    for (int k = 0; k < bins; ++k) power(k, t) = std::norm(spectrum[static_cast<std::size_t>(k)]);
  }
  Spectrogram s;
  s.values = ((fb * power).array() + kLogFloor).log();
  s.mel_bands = mel_bands;
  s.hop = hop;
  s.window = window;
  s.label = clip.label;
  return s;
}

}  // namespace mrl::signalprep

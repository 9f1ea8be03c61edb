#pragma once

#include "mrl/tensor.hpp"

#include <Eigen/Core>

#include <vector>

namespace mrl::signalprep {

struct AudioClip {
  Eigen::VectorXd samples;
  double sample_rate = 8000.0;
  int label = -1;
};

/// Removes exact-zero runs at both ends. Throws ArgumentError on an all-zero clip.
AudioClip crop_silence(const AudioClip& clip);

/// Linear interpolation onto `length` evenly spaced points spanning the
/// original support (first and last samples are kept).
AudioClip resample_to_length(const AudioClip& clip, Index length);

/// Divides by the largest absolute value; all-zero input is returned as is.
AudioClip normalize_amplitude(const AudioClip& clip);

/// crop -> resample -> normalize, the raw-waveform pipeline.
AudioClip preprocess_waveform(const AudioClip& clip, Index length = 16000);

/// Log-scaled mel spectrogram, mel bands x frames.
struct Spectrogram {
  Eigen::MatrixXd values;
  int mel_bands = 60;
  int hop = 512;
  int window = 1024;
  int label = -1;

  Index frames() const { return values.cols(); }
};

inline constexpr double kLogFloor = 1e-10;

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Triangular HTK-style filterbank from 0 Hz to Nyquist: bands x (n_fft/2 + 1).
Eigen::MatrixXd mel_filterbank(int n_fft, double sample_rate, int mel_bands);

/// Peak frequency (Hz) of each filter in mel_filterbank().
Eigen::VectorXd mel_band_centers(double sample_rate, int mel_bands);

/// Hann-windowed one-sided STFT without centering, mel-projected power,
/// then log(power + 1e-10). Frames: floor((len - window) / hop) + 1.
Spectrogram log_mel_spectrogram(const AudioClip& clip, int window = 1024, int hop = 512, int mel_bands = 60);

struct SegmentSet {
  std::vector<Eigen::MatrixXd> segments;
  std::vector<Index> starts;
  int clip_id = -1;
  int label = -1;
};

/// Fixed-width windows starting at 0, hop, 2*hop, ...; only windows that fit
/// entirely are kept, silent ones included.
SegmentSet segment_spectrogram(const Spectrogram& spec, Index frames = 41, Index hop_frames = 20);

/// Argmax of the mean probability vector; ties go to the lowest class.
int probability_vote(const std::vector<Eigen::VectorXd>& segment_probabilities);

struct NormalizedImages {
  std::vector<Tensor> images;
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;
};

/// Per-channel mean/std from `train`, applied to `apply_to` as (x - mean) / std.
/// The standard deviation is floored at 1e-8.
NormalizedImages normalize_images(const std::vector<Tensor>& train, const std::vector<Tensor>& apply_to);

/// Applies previously computed statistics.
std::vector<Tensor> apply_normalization(const std::vector<Tensor>& images, const Eigen::VectorXd& mean,
                                        const Eigen::VectorXd& stddev);

}  // namespace mrl::signalprep

#include "mrl/errors.hpp"
#include "mrl/signalprep.hpp"

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace mrl::signalprep;
using mrl::Tensor;
using Eigen::VectorXd;

namespace {

AudioClip clip(std::initializer_list<double> v) {
  AudioClip c;
  c.samples.resize(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) c.samples[i++] = x;
  return c;
}

void expect_samples(const AudioClip& c, std::initializer_list<double> expected, double tol = 1e-15) {
  ASSERT_EQ(c.samples.size(), static_cast<Eigen::Index>(expected.size()));
  Eigen::Index i = 0;
  for (double x : expected) EXPECT_NEAR(c.samples[i++], x, tol);
}

Spectrogram frames(Eigen::Index n) {
  Spectrogram s;
  s.values = Eigen::MatrixXd::Zero(60, n);
  for (Eigen::Index f = 0; f < n; ++f) s.values.col(f).setConstant(static_cast<double>(f));
  return s;
}

}  // namespace

TEST(CropSilence, Examples) {
  expect_samples(crop_silence(clip({0, 0, 1, -0.5, 0})), {1, -0.5});
  expect_samples(crop_silence(clip({1, 0, 1})), {1, 0, 1});
  expect_samples(crop_silence(clip({0.0001, 1, 0})), {0.0001, 1});
  EXPECT_THROW(crop_silence(clip({0, 0, 0})), mrl::ArgumentError);
}

TEST(CropSilence, Idempotent) {
  const auto once = crop_silence(clip({0, 0, 0.2, 0, -0.3, 0}));
  EXPECT_EQ(crop_silence(once).samples, once.samples);
}

TEST(Resample, Examples) {
  expect_samples(resample_to_length(clip({0, 1}), 3), {0, 0.5, 1});
  const AudioClip c = clip({0.3, -0.1, 0.7, 0.2});
  EXPECT_EQ(resample_to_length(c, 4).samples, c.samples);
  const auto flat = resample_to_length(clip({0.4, 0.4, 0.4}), 11);
  for (Eigen::Index i = 0; i < 11; ++i) EXPECT_NEAR(flat.samples[i], 0.4, 1e-15);
  EXPECT_THROW(resample_to_length(AudioClip{}, 4), mrl::ArgumentError);
}

TEST(Resample, LinearRampStaysLinear) {
  AudioClip c;
  c.samples = VectorXd::LinSpaced(37, -1.0, 2.0);
  const auto r = resample_to_length(c, 16000);
  EXPECT_LE((r.samples - VectorXd::LinSpaced(16000, -1.0, 2.0)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(NormalizeAmplitude, Examples) {
  expect_samples(normalize_amplitude(clip({2, -4})), {0.5, -1});
  expect_samples(normalize_amplitude(clip({-0.5, 0.25})), {-1, 0.5});
  expect_samples(normalize_amplitude(clip({0, 0})), {0, 0});
  const auto once = normalize_amplitude(clip({0.1, -0.3, 0.2}));
  EXPECT_EQ(normalize_amplitude(once).samples, once.samples);
}

TEST(PreprocessWaveform, FixedLengthUnitPeak) {
  std::mt19937_64 rng(1);
  AudioClip c;
  c.samples = VectorXd::Zero(3000);
  c.samples.segment(200, 2500) = oracle::random_vector(2500, rng, -0.3, 0.3);
  const auto out = preprocess_waveform(c, 16000);
  EXPECT_EQ(out.samples.size(), 16000);
  EXPECT_NEAR(out.samples.cwiseAbs().maxCoeff(), 1.0, 1e-15);
  EXPECT_EQ(preprocess_waveform(c, 16000).samples, out.samples);
}

TEST(Mel, ScaleRoundTrip) {
  for (double hz : {0.0, 440.0, 1000.0, 8000.0}) EXPECT_NEAR(mel_to_hz(hz_to_mel(hz)), hz, 1e-9);
  EXPECT_NEAR(hz_to_mel(700.0), 2595.0 * std::log10(2.0), 1e-12);
}

TEST(LogMel, FrameCount) {
  AudioClip c;
  c.sample_rate = 44100;
  c.samples = VectorXd::Zero(44100 * 5);
  const auto s = log_mel_spectrogram(c);
  EXPECT_EQ(s.frames(), 429);
  EXPECT_EQ(s.values.rows(), 60);
}

TEST(LogMel, SilenceIsLogFloor) {
  AudioClip c;
  c.sample_rate = 22050;
  c.samples = VectorXd::Zero(4096);
  const auto s = log_mel_spectrogram(c);
  EXPECT_EQ(s.frames(), 7);
  EXPECT_LE((s.values.array() - std::log(kLogFloor)).abs().maxCoeff(), 1e-12);
}

TEST(LogMel, SineAtBandCenterPeaksInThatBand) {
  const double sr = 44100;
  const VectorXd centers = mel_band_centers(sr, 60);
  for (int band : {20, 35, 50}) {
    AudioClip c;
    c.sample_rate = sr;
    c.samples.resize(8192);
    for (Eigen::Index t = 0; t < c.samples.size(); ++t) {
      c.samples[t] = std::sin(2 * std::numbers::pi * centers[band] * static_cast<double>(t) / sr);
    }
    const auto s = log_mel_spectrogram(c);
    for (Eigen::Index f = 0; f < s.frames(); ++f) {
      Eigen::Index arg = 0;
      s.values.col(f).maxCoeff(&arg);
      EXPECT_EQ(arg, band) << "frame " << f;
    }
  }
}

TEST(LogMel, RejectsShortClip) {
  AudioClip c;
  c.samples = VectorXd::Ones(1000);
  EXPECT_THROW(log_mel_spectrogram(c), mrl::ArgumentError);
}

TEST(Filterbank, TrianglesPeakAtCenters) {
  const Eigen::MatrixXd fb = mel_filterbank(1024, 44100, 60);
  EXPECT_EQ(fb.rows(), 60);
  EXPECT_EQ(fb.cols(), 513);
  EXPECT_GE(fb.minCoeff(), 0.0);
  EXPECT_LE(fb.maxCoeff(), 1.0 + 1e-12);
}

TEST(Segments, Starts) {
  auto s = segment_spectrogram(frames(101));
  EXPECT_EQ(s.starts, (std::vector<Eigen::Index>{0, 20, 40, 60}));
  EXPECT_EQ(segment_spectrogram(frames(41)).segments.size(), 1u);
  EXPECT_EQ(segment_spectrogram(frames(60)).segments.size(), 1u);
  EXPECT_THROW(segment_spectrogram(frames(40)), mrl::ArgumentError);
}

TEST(Segments, ContentsAndSilence) {
  Spectrogram s = frames(81);
  s.values.rightCols(41).setConstant(std::log(kLogFloor));
  const auto seg = segment_spectrogram(s);
  ASSERT_EQ(seg.segments.size(), 3u);
  for (std::size_t n = 0; n < 3; ++n) {
    EXPECT_EQ(seg.segments[n].rows(), 60);
    EXPECT_EQ(seg.segments[n].cols(), 41);
    EXPECT_EQ(seg.segments[n], s.values.middleCols(seg.starts[n], 41));
  }
}

TEST(Segments, CoverageProperty) {
  // Every frame is covered exactly when the windows tile to the end;
  // otherwise the last (frames - 41) mod 20 frames fall outside.
  for (Eigen::Index n = 41; n <= 431; ++n) {
    const auto seg = segment_spectrogram(frames(n));
    std::vector<bool> covered(static_cast<std::size_t>(n), false);
    for (Eigen::Index start : seg.starts) {
      for (Eigen::Index f = start; f < start + 41; ++f) covered[static_cast<std::size_t>(f)] = true;
    }
    const auto uncovered = std::count(covered.begin(), covered.end(), false);
    EXPECT_EQ(uncovered, (n - 41) % 20) << n << " frames";
    for (std::size_t i = 1; i < seg.starts.size(); ++i) EXPECT_EQ(seg.starts[i] - seg.starts[i - 1], 20);
  }
}

TEST(Vote, Examples) {
  EXPECT_EQ(probability_vote({(VectorXd(2) << 0.9, 0.1).finished(), (VectorXd(2) << 0.2, 0.8).finished()}), 0);
  EXPECT_EQ(probability_vote({(VectorXd(3) << 0.2, 0.1, 0.7).finished()}), 2);
  EXPECT_EQ(probability_vote({(VectorXd(2) << 0.5, 0.5).finished(), (VectorXd(2) << 0.5, 0.5).finished()}), 0);
  EXPECT_THROW(probability_vote({}), mrl::ArgumentError);
}

TEST(Vote, PermutationInvariant) {
  std::mt19937_64 rng(3);
  std::vector<VectorXd> probs;
  for (int i = 0; i < 9; ++i) {
    VectorXd p = oracle::random_vector(4, rng, 0.0, 1.0);
    probs.push_back(p / p.sum());
  }
  const int base = probability_vote(probs);
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(probs.begin(), probs.end(), rng);
    EXPECT_EQ(probability_vote(probs), base);
  }
}

TEST(NormalizeImages, ConstantImagesBecomeZero) {
  const std::vector<Tensor> imgs(3, Tensor::from_matrix(Eigen::MatrixXd::Constant(4, 4, 0.7)));
  const auto n = normalize_images(imgs, imgs);
  for (const auto& t : n.images) EXPECT_LE(t.values().cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(n.stddev[0], 1e-8);
}

TEST(NormalizeImages, TwoImageArithmetic) {
  const std::vector<Tensor> imgs{Tensor::from_matrix(Eigen::MatrixXd::Zero(2, 2)),
                                 Tensor::from_matrix(Eigen::MatrixXd::Constant(2, 2, 2.0))};
  const auto n = normalize_images(imgs, imgs);
  EXPECT_NEAR(n.mean[0], 1.0, 1e-15);
  EXPECT_NEAR(n.stddev[0], 1.0, 1e-15);
  EXPECT_LE((n.images[0].values().array() + 1.0).abs().maxCoeff(), 1e-15);
  EXPECT_LE((n.images[1].values().array() - 1.0).abs().maxCoeff(), 1e-15);
}

TEST(NormalizeImages, PerChannelStatistics) {
  std::mt19937_64 rng(5);
  std::vector<Tensor> imgs;
  for (int i = 0; i < 20; ++i) {
    Tensor t({3, 5, 5});
    t.values() = oracle::random_vector(t.size(), rng, 0.0, 1.0);
    for (Eigen::Index k = 25; k < 50; ++k) t[k] = 10.0 * t[k] + 3.0;
    imgs.push_back(t);
  }
  const auto n = normalize_images(imgs, imgs);
  for (Eigen::Index c = 0; c < 3; ++c) {
    double sum = 0, sq = 0, count = 0;
    for (const auto& t : n.images) {
      const Eigen::MatrixXd m = t.image_channel(c);
      sum += m.sum();
      sq += m.squaredNorm();
      count += static_cast<double>(m.size());
    }
    EXPECT_NEAR(sum / count, 0.0, 1e-9);
    EXPECT_NEAR(std::sqrt(sq / count), 1.0, 1e-6);
  }
}

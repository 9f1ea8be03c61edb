#include "mrl/errors.hpp"
#include "mrl/robustness.hpp"

#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace mrl::robustness;
using mrl::Tensor;
using mrl::wavelet::Subband;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace nn = mrl::nn;

namespace {

nn::Network affine(const MatrixXd& w, const VectorXd& b) {
  nn::NetworkSpec s;
  s.input_shape = {1, w.cols()};
  s.layers = {nn::LayerSpec::flatten(), nn::LayerSpec::dense(w.rows(), nn::Activation::Linear)};
  nn::Network net(s);
  net.mutable_params()[1].weight = w;
  net.mutable_params()[1].bias = b;
  return net;
}

Tensor row(const VectorXd& v) { return Tensor({1, v.size()}, v); }

MatrixXd mat2(double a, double b, double c, double d) { return (MatrixXd(2, 2) << a, b, c, d).finished(); }

// Class 1 when pixel (0, 0) is positive, class 0 otherwise.
VectorXd sign_of_corner(const Tensor& t) {
  const double p1 = 1.0 / (1.0 + std::exp(-20.0 * t[0]));
  return (VectorXd(2) << 1.0 - p1, p1).finished();
}

int differing_pixels(const Tensor& a, const Tensor& b) {
  const Eigen::Index rows = a.image_rows(), cols = a.image_cols();
  int n = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      bool diff = false;
      for (Eigen::Index ch = 0; ch < a.channels(false); ++ch) diff |= a.image_channel(ch)(r, c) != b.image_channel(ch)(r, c);
      n += diff;
    }
  }
  return n;
}

}  // namespace

TEST(Noise, DensityOfSixteenThousand) {
  const Tensor x = Tensor::from_vector(VectorXd::Zero(16000));
  const Tensor y = add_impulsive_noise(x, 0.05, 0.75, 3);
  EXPECT_EQ((y.values().array() != 0.0).count(), 800);
}

TEST(Noise, ZeroSigmaAndDeterminism) {
  std::mt19937_64 rng(1);
  const Tensor x = Tensor::from_vector(oracle::random_vector(500, rng));
  EXPECT_EQ(add_impulsive_noise(x, 0.3, 0.0, 9), x);
  EXPECT_EQ(add_impulsive_noise(x, 0.05, 0.75, 9), add_impulsive_noise(x, 0.05, 0.75, 9));
  EXPECT_NE(add_impulsive_noise(x, 0.05, 0.75, 9), add_impulsive_noise(x, 0.05, 0.75, 10));
  EXPECT_THROW(add_impulsive_noise(x, 0.0, 1.0, 1), mrl::ArgumentError);
  EXPECT_THROW(add_impulsive_noise(x, 1.5, 1.0, 1), mrl::ArgumentError);
}

TEST(Noise, NoiseScaleMatchesSigma) {
  const Tensor x = Tensor::from_vector(VectorXd::Zero(200000));
  const VectorXd y = add_impulsive_noise(x, 0.5, 0.75, 4).values();
  EXPECT_NEAR(std::sqrt(y.squaredNorm() / 100000.0), 0.75, 0.01);
}

TEST(DeepFool, BinaryLinearDistance) {
  const auto net = affine((MatrixXd(2, 2) << 3, 4, 0, 0).finished(), VectorXd::Zero(2));
  const auto r = deepfool(net, row((VectorXd(2) << 1, 1).finished()));
  EXPECT_TRUE(r.success);
  EXPECT_NEAR(r.pre_overshoot_norm, 1.4, 0.05 * 1.4);
  EXPECT_NEAR(r.pre_overshoot_norm, 1.4, 1e-5);
  EXPECT_NEAR(r.l2_norm, r.delta.values().norm(), 1e-9);
  EXPECT_EQ(r.original_label, 0);
  EXPECT_EQ(r.adversarial_label, 1);
}

TEST(DeepFool, PointOnBoundary) {
  const auto net = affine((MatrixXd(2, 2) << 1, 0, 0, 1).finished(), VectorXd::Zero(2));
  const auto r = deepfool(net, row((VectorXd(2) << 0.5, 0.5).finished()));
  EXPECT_LE(r.l2_norm, 1e-9);
}

TEST(DeepFool, MulticlassWithinHyperplaneBound) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const MatrixXd w = oracle::random_matrix(3, 5, rng);
    const VectorXd b = oracle::random_vector(3, rng), x = oracle::random_vector(5, rng);
    const auto ref = oracle::nearest_hyperplane(w, b, x);
    DeepFoolOptions opt;
    const auto r = deepfool(affine(w, b), row(x), opt);
    EXPECT_TRUE(r.success);
    // Each step overshoots the linearized boundary by a relative 1e-6 plus 1e-12.
    EXPECT_LE(r.l2_norm, (ref.distance * (1 + 1e-6) + 1e-12) * (1 + opt.overshoot) + 1e-12);
    EXPECT_NEAR(r.pre_overshoot_norm, ref.distance, 0.05 * ref.distance);
    const VectorXd dir = (w.row(ref.cls) - w.row(nn::argmax(w * x + b))).transpose();
    EXPECT_GE(std::abs(r.delta.values().dot(dir)) / (r.delta.values().norm() * dir.norm()), 0.999);
  }
}

TEST(DeepFool, ReluNetworkFlipsLabel) {
  nn::NetworkSpec s;
  s.input_shape = {1, 16};
  s.layers = {nn::LayerSpec::conv1d(4, 3), nn::LayerSpec::flatten(), nn::LayerSpec::dense(3, nn::Activation::Softmax)};
  nn::Network net(s);
  gradcheck::randomize(net, 3);
  for (const auto& x : gradcheck::random_batch({1, 16}, 5, 4)) {
    const auto r = deepfool(net, x);
    EXPECT_TRUE(r.success) << r.diagnostic;
    EXPECT_NE(nn::argmax(nn::predict_logits(net, Tensor(x.shape(), x.values() + r.delta.values()))),
              r.original_label);
  }
}

TEST(DeepFool, FlatNetworkReportsDiagnostic) {
  const auto net = affine(MatrixXd::Zero(2, 3), VectorXd::Zero(2));
  const auto r = deepfool(net, row(VectorXd::Ones(3)));
  EXPECT_FALSE(r.success);
  EXPECT_NE(r.diagnostic.find("jitter"), std::string::npos) << r.diagnostic;
}

TEST(Rho, Arithmetic) {
  EXPECT_DOUBLE_EQ(rho_from_ratios({0.1, 0.3}), 0.2);
  EXPECT_THROW(rho_from_ratios({}), mrl::ArgumentError);
}

TEST(Rho, LinearModelOracle) {
  const auto net = affine((MatrixXd(2, 2) << 3, 4, 0, 0).finished(), VectorXd::Zero(2));
  const auto rep = robustness_rho(net, std::vector<Tensor>{row((VectorXd(2) << 1, 1).finished())});
  EXPECT_NEAR(rep.rho, 1.4 * 1.02 / std::sqrt(2.0), 1e-5);
  EXPECT_EQ(rep.failures, 0u);
}

TEST(Rho, SkipsZeroNormAndIsDeterministic) {
  nn::Network net = affine(MatrixXd::Zero(3, 4), VectorXd::Zero(3));
  gradcheck::randomize(net, 5);
  auto samples = gradcheck::random_batch({1, 4}, 6, 6);
  samples.push_back(Tensor({1, 4}));
  DeepFoolOptions opt;
  opt.seed = 12;
  const auto a = robustness_rho(net, samples, opt), b = robustness_rho(net, samples, opt);
  EXPECT_EQ(a.rho, b.rho);
  EXPECT_EQ(a.skipped_zero_norm, 1u);
  EXPECT_EQ(a.sample_count, 7u);
  EXPECT_EQ(a.ratios.size() + a.failures, 6u);
  EXPECT_DOUBLE_EQ(a.rho, rho_from_ratios(a.ratios));
  std::ostringstream csv;
  write_samples_csv(csv, a.samples);
  EXPECT_EQ(csv.str().rfind("id,label,predicted,success,l2_norm,ratio\n", 0), 0u);
  EXPECT_NE(csv.str().find("skipped"), std::string::npos);
}

TEST(SampleStream, IndependentOfOrder) {
  auto a = sample_stream(5, 3);
  auto b = sample_stream(5, 3);
  auto c = sample_stream(5, 4);
  const auto va = a();
  EXPECT_EQ(va, b());
  EXPECT_NE(va, c());
}

TEST(OnePixel, SignOfCornerSucceedsInFirstGeneration) {
  Tensor img({2, 2});
  img.values() << 0.5, -0.2, 0.3, 0.1;
  OnePixelOptions opt;
  opt.value_min = -1.0;
  opt.value_max = 1.0;
  opt.seed = 3;
  const auto r = one_pixel_attack(sign_of_corner, img, 1, opt);
  EXPECT_TRUE(r.success);
  EXPECT_EQ(r.generations_used, 1);
  EXPECT_EQ(r.row, 0);
  EXPECT_EQ(r.col, 0);
  EXPECT_LT(r.values[0], 0.0);
  EXPECT_EQ(differing_pixels(r.adversarial, img), 1);
}

TEST(OnePixel, EvolvesTowardCornerOnLargerImage) {
  Tensor img({8, 8});
  img.values().setConstant(0.2);
  img[0] = 0.9;
  OnePixelOptions opt;
  opt.pop_size = 20;
  opt.value_min = -1.0;
  opt.value_max = 1.0;
  opt.seed = 11;
  const auto r = one_pixel_attack(sign_of_corner, img, 1, opt);
  EXPECT_TRUE(r.success);
  EXPECT_LE(r.generations_used, 40);
  EXPECT_EQ(differing_pixels(r.adversarial, img), 1);
}

TEST(OnePixel, DeterministicAndSparseOnNetwork) {
  nn::NetworkSpec s;
  s.input_shape = {3, 6, 6};
  s.layers = {nn::LayerSpec::conv2d(4, 3, 3), nn::LayerSpec::flatten(), nn::LayerSpec::dense(3, nn::Activation::Softmax)};
  nn::Network net(s);
  gradcheck::randomize(net, 8);
  const Tensor img = gradcheck::random_batch({3, 6, 6}, 1, 9)[0];
  const int label = nn::argmax(nn::predict_logits(net, img));
  OnePixelOptions opt;
  opt.pop_size = 20;
  opt.max_gens = 5;
  opt.seed = 4;
  const auto a = one_pixel_attack(net, img, label, opt), b = one_pixel_attack(net, img, label, opt);
  EXPECT_EQ(a.adversarial, b.adversarial);
  EXPECT_EQ(a.generations_used, b.generations_used);
  EXPECT_EQ(a.best_fitness, b.best_fitness);
  EXPECT_LE(differing_pixels(a.adversarial, img), 1);
  if (a.success) EXPECT_EQ(differing_pixels(a.adversarial, img), 1);
  EXPECT_THROW(one_pixel_attack(net, img, (label + 1) % 3, opt), mrl::ArgumentError);
}

TEST(Swap, HandExample) {
  const Tensor x = Tensor::from_matrix(mat2(1, 2, 3, 4));
  const Tensor donor = Tensor::from_matrix(mat2(3, 0, 0, 9));  // HH band 6
  const auto r = multires_swap_attack(x, donor, BandChoice::HH, 0);
  EXPECT_EQ(r.band, Subband::HH);
  EXPECT_LE((r.adversarial.image_channel(0) - mat2(4, -1, 0, 7)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Swap, SelfSwapIsIdentity) {
  std::mt19937_64 rng(2);
  const Tensor x = Tensor::from_matrix(oracle::random_matrix(6, 10, rng));
  for (auto band : {BandChoice::LH, BandChoice::HL, BandChoice::HH}) {
    EXPECT_LE((multires_swap_attack(x, x, band, 0).adversarial.values() - x.values()).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Swap, BandIsolation) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    Tensor x({3, 8, 12}), d({3, 8, 12});
    x.values() = oracle::random_vector(x.size(), rng);
    d.values() = oracle::random_vector(d.size(), rng);
    const auto r = multires_swap_attack(x, d, BandChoice::Random, static_cast<std::uint64_t>(trial));
    for (Eigen::Index c = 0; c < 3; ++c) {
      const auto ox = oracle::haar_bands(x.image_channel(c));
      const auto od = oracle::haar_bands(d.image_channel(c));
      const auto oa = oracle::haar_bands(r.adversarial.image_channel(c));
      EXPECT_LE((oa.ll - ox.ll).cwiseAbs().maxCoeff(), 1e-10);
      EXPECT_LE((oa.lh - (r.band == Subband::LH ? od.lh : ox.lh)).cwiseAbs().maxCoeff(), 1e-10);
      EXPECT_LE((oa.hl - (r.band == Subband::HL ? od.hl : ox.hl)).cwiseAbs().maxCoeff(), 1e-10);
      EXPECT_LE((oa.hh - (r.band == Subband::HH ? od.hh : ox.hh)).cwiseAbs().maxCoeff(), 1e-10);
    }
  }
}

TEST(Swap, RandomBandDeterministicAndCoversAll) {
  const Tensor x = Tensor::from_matrix(mat2(1, 2, 3, 4));
  std::array<int, 3> seen{};
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const auto a = multires_swap_attack(x, x, BandChoice::Random, seed);
    EXPECT_EQ(a.band, multires_swap_attack(x, x, BandChoice::Random, seed).band);
    ++seen[static_cast<std::size_t>(a.band)];
  }
  for (int n : seen) EXPECT_GT(n, 0);
}

TEST(Swap, ShapeMismatch) {
  EXPECT_THROW(multires_swap_attack(Tensor({4, 4}), Tensor({4, 6}), BandChoice::LH, 0), mrl::DimensionError);
}

TEST(SuccessRate, Arithmetic) {
  std::vector<bool> outcomes(100, false);
  for (int i = 0; i < 26; ++i) outcomes[static_cast<std::size_t>(i * 3)] = true;
  EXPECT_DOUBLE_EQ(attack_success_rate(outcomes), 0.26);
  EXPECT_EQ(attack_success_rate(std::vector<bool>(5, false)), 0.0);
  EXPECT_THROW(attack_success_rate({}), mrl::ArgumentError);
}

TEST(SuccessRate, BandTableRowsSumToTotal) {
  BandSuccessTable t;
  t.add(Subband::LH, true);
  t.add(Subband::LH, false);
  t.add(Subband::HL, true);
  t.add(Subband::HH, false);
  t.add(Subband::HH, true);
  EXPECT_EQ(t.total_attempts(), 5u);
  EXPECT_DOUBLE_EQ(t.rate(Subband::LH), 0.2);
  EXPECT_DOUBLE_EQ(t.rate(Subband::LH) + t.rate(Subband::HL) + t.rate(Subband::HH), t.total_rate());
  EXPECT_DOUBLE_EQ(t.total_rate(), 0.6);
}

TEST(SuccessRate, CompareRates) {
  const auto c = compare_rates(0.26, 0.189);
  EXPECT_NEAR(c.absolute, 0.071, 1e-12);
  EXPECT_NEAR(c.relative, 0.071 / 0.26, 1e-12);
  EXPECT_EQ(compare_rates(0.0, 0.1).relative, 0.0);
}

TEST(SwapAttack, OnlyCorrectSamplesAttacked) {
  nn::NetworkSpec s;
  s.input_shape = {1, 4, 4};
  s.layers = {nn::LayerSpec::flatten(), nn::LayerSpec::dense(2, nn::Activation::Softmax)};
  nn::Network net(s);
  gradcheck::randomize(net, 1);
  mrl::Dataset d;
  d.samples = gradcheck::random_batch({1, 4, 4}, 12, 2);
  for (const auto& x : d.samples) d.labels.push_back(nn::argmax(nn::predict_logits(net, x)));
  d.labels[0] = 1 - d.labels[0];
  d.num_classes = 2;
  const auto a = run_swap_attack(net, d, 5), b = run_swap_attack(net, d, 5);
  EXPECT_EQ(a.samples.size(), 11u);
  EXPECT_EQ(a.table.total_attempts(), 11u);
  ASSERT_EQ(a.samples.size(), b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) EXPECT_EQ(a.samples[i].l2_norm, b.samples[i].l2_norm);
  EXPECT_EQ(run_swap_attack(net, d, 5, 4).samples.size(), 4u);
}

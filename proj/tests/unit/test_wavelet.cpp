#include "mrl/wavelet.hpp"

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace w = mrl::wavelet;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

const double kRt2 = std::sqrt(2.0);

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

MatrixXd mat2(double a, double b, double c, double d) {
  MatrixXd m(2, 2);
  m << a, b, c, d;
  return m;
}

MatrixXd scalar(double v) { return MatrixXd::Constant(1, 1, v); }

}  // namespace

TEST(Dwt1d, ConstantPairHasZeroDetail) {
  const auto p = w::dwt1d<double>(vec({1, 1}), 1);
  ASSERT_EQ(p.approx.size(), 1);
  EXPECT_NEAR(p.approx[0], kRt2, 1e-15);
  EXPECT_NEAR(p.details[0][0], 0.0, 1e-15);
}

TEST(Dwt1d, SingleLevelFormula) {
  const auto p = w::dwt1d<double>(vec({4, 2}), 1);
  EXPECT_NEAR(p.approx[0], 3 * kRt2, 1e-14);
  EXPECT_NEAR(p.details[0][0], kRt2, 1e-14);
}

TEST(Dwt1d, TwoLevelsByHand) {
  const auto p = w::dwt1d<double>(vec({1, 3, 5, 7}), 2);
  EXPECT_NEAR(p.approx[0], 8.0, 1e-14);
  EXPECT_NEAR(p.details[1][0], -4.0, 1e-14);
  EXPECT_NEAR(p.details[0][0], -kRt2, 1e-14);
  EXPECT_NEAR(p.details[0][1], -kRt2, 1e-14);
}

TEST(Dwt1d, MatchesBruteForceHaarMatrix) {
  std::mt19937_64 rng(3);
  for (int levels = 1; levels <= 5; ++levels) {
    const Eigen::Index n = Eigen::Index{1} << (levels + 1);
    const VectorXd x = oracle::random_vector(n, rng);
    const VectorXd ref = oracle::haar_transform_matrix(n, levels) * x;
    const auto p = w::dwt1d<double>(x, levels);
    Eigen::Index pos = 0;
    EXPECT_LE((ref.segment(pos, p.approx.size()) - p.approx).cwiseAbs().maxCoeff(), 1e-12);
    pos += p.approx.size();
    for (int j = levels - 1; j >= 0; --j) {
      const auto& d = p.details[static_cast<std::size_t>(j)];
      EXPECT_LE((ref.segment(pos, d.size()) - d).cwiseAbs().maxCoeff(), 1e-12) << "level " << j + 1;
      pos += d.size();
    }
  }
}

TEST(Dwt1d, RejectsNonDivisibleLength) {
  try {
    w::dwt1d<double>(VectorXd::Ones(12), 3);
    FAIL() << "expected DimensionError";
  } catch (const mrl::DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("multiple of 8"), std::string::npos) << e.what();
  }
  EXPECT_THROW(w::dwt1d<double>(VectorXd::Ones(8), 0), mrl::DimensionError);
}

TEST(Idwt1d, InvertsSmallExample) {
  w::WaveletPyramid<double> p;
  p.approx = vec({kRt2});
  p.details = {vec({0})};
  p.original_len = 2;
  p.levels = 1;
  const VectorXd x = w::idwt1d(p);
  EXPECT_NEAR(x[0], 1.0, 1e-15);
  EXPECT_NEAR(x[1], 1.0, 1e-15);
}

TEST(Idwt1d, ZeroDetailIsBlockMean) {
  w::WaveletPyramid<double> p;
  p.approx = vec({8});
  p.details = {VectorXd::Zero(2), VectorXd::Zero(1)};
  p.original_len = 4;
  p.levels = 2;
  const VectorXd x = w::idwt1d(p);
  EXPECT_LE((x - oracle::block_means(vec({1, 3, 5, 7}), 4)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE((x - VectorXd::Constant(4, 4.0)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Idwt1d, RoundTripLength64) {
  std::mt19937_64 rng(11);
  const VectorXd x = oracle::random_vector(64, rng);
  for (int levels = 1; levels <= 6; ++levels) {
    EXPECT_LE((w::idwt1d(w::dwt1d<double>(x, levels)) - x).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Idwt1d, RejectsMismatchedBands) {
  auto p = w::dwt1d<double>(VectorXd::Ones(8), 2);
  p.details[0] = VectorXd::Zero(3);
  EXPECT_THROW(w::idwt1d(p), mrl::DimensionError);
  p = w::dwt1d<double>(VectorXd::Ones(8), 2);
  p.details.pop_back();
  EXPECT_THROW(w::idwt1d(p), mrl::DimensionError);
}

TEST(Dwt2d, TwoByTwoBands) {
  const auto p = w::dwt2d<double>(mat2(1, 2, 3, 4), 1);
  EXPECT_NEAR(p.approx(0, 0), 5.0, 1e-14);
  EXPECT_NEAR(p.details[0].lh(0, 0), -1.0, 1e-14);
  EXPECT_NEAR(p.details[0].hl(0, 0), -2.0, 1e-14);
  EXPECT_NEAR(p.details[0].hh(0, 0), 0.0, 1e-14);
}

TEST(Dwt2d, MatchesBlockFormulas) {
  std::mt19937_64 rng(5);
  const MatrixXd m = oracle::random_matrix(8, 12, rng);
  const auto ref = oracle::haar_bands(m);
  const auto p = w::dwt2d<double>(m, 1);
  EXPECT_LE((p.approx - ref.ll).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LE((p.details[0].lh - ref.lh).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LE((p.details[0].hl - ref.hl).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LE((p.details[0].hh - ref.hh).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Dwt2d, ConstantImage) {
  const double c = 1.75;
  const auto p = w::dwt2d<double>(MatrixXd::Constant(4, 4, c), 2);
  EXPECT_NEAR(p.approx(0, 0), 4 * c, 1e-13);
  for (const auto& t : p.details) {
    EXPECT_LE(t.lh.cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LE(t.hl.cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LE(t.hh.cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Dwt2d, BandShapes) {
  std::mt19937_64 rng(1);
  const auto p = w::dwt2d<double>(oracle::random_matrix(32, 32, rng), 3);
  const Eigen::Index expected[] = {16, 8, 4};
  for (int j = 0; j < 3; ++j) {
    for (w::Subband b : {w::Subband::LH, w::Subband::HL, w::Subband::HH}) {
      EXPECT_EQ(p.details[static_cast<std::size_t>(j)].band(b).rows(), expected[j]);
      EXPECT_EQ(p.details[static_cast<std::size_t>(j)].band(b).cols(), expected[j]);
    }
  }
  EXPECT_EQ(p.approx.rows(), 4);
  EXPECT_EQ(p.approx.cols(), 4);
}

TEST(Dwt2d, OddShapePadsPerLevel) {
  const auto p = w::dwt2d<double>(MatrixXd::Ones(31, 41), 3);
  EXPECT_EQ(p.details[0].hh.rows(), 16);
  EXPECT_EQ(p.details[0].hh.cols(), 21);
  EXPECT_EQ(p.details[1].hh.rows(), 8);
  EXPECT_EQ(p.details[1].hh.cols(), 11);
  EXPECT_EQ(p.details[2].hh.rows(), 4);
  EXPECT_EQ(p.details[2].hh.cols(), 6);
}

TEST(Dwt2d, RejectsEmptyImage) {
  EXPECT_THROW(w::dwt2d<double>(MatrixXd(0, 4), 1), mrl::DimensionError);
  EXPECT_THROW(w::dwt2d<double>(MatrixXd::Ones(2, 2), 0), mrl::DimensionError);
}

TEST(Idwt2d, InvertsTwoByTwo) {
  w::WaveletPyramid2D<double> p;
  p.approx = scalar(5);
  p.details = {{scalar(-1), scalar(-2), scalar(0)}};
  p.rows = p.cols = 2;
  p.levels = 1;
  EXPECT_LE((w::idwt2d(p) - mat2(1, 2, 3, 4)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Idwt2d, ZeroDetailIsBlockMean) {
  w::WaveletPyramid2D<double> p;
  p.approx = scalar(5);
  p.details = {{scalar(0), scalar(0), scalar(0)}};
  p.rows = p.cols = 2;
  p.levels = 1;
  EXPECT_LE((w::idwt2d(p) - MatrixXd::Constant(2, 2, 2.5)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Idwt2d, RoundTripOddShape) {
  std::mt19937_64 rng(9);
  const MatrixXd m = oracle::random_matrix(31, 41, rng);
  for (int levels = 1; levels <= 4; ++levels) {
    const MatrixXd back = w::idwt2d(w::dwt2d<double>(m, levels));
    ASSERT_EQ(back.rows(), 31);
    ASSERT_EQ(back.cols(), 41);
    EXPECT_LE((back - m).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Idwt2d, RejectsInconsistentBands) {
  auto p = w::dwt2d<double>(MatrixXd::Ones(8, 8), 2);
  p.details[1].hl = MatrixXd::Zero(3, 2);
  EXPECT_THROW(w::idwt2d(p), mrl::DimensionError);
}

TEST(WaveletProperties, EnergyConservation1d) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    const int levels = 1 + trial % 5;
    const VectorXd x = oracle::random_vector(Eigen::Index{1} << (levels + trial % 4), rng);
    EXPECT_NEAR(w::energy(w::dwt1d<double>(x, levels)), x.squaredNorm(), 1e-9);
  }
}

TEST(WaveletProperties, EnergyConservation2dPadded) {
  std::mt19937_64 rng(22);
  const MatrixXd m = oracle::random_matrix(7, 5, rng);
  // One level: the zero padding adds no energy, so the input energy is the reference.
  EXPECT_NEAR(w::energy(w::dwt2d<double>(m, 1)), m.squaredNorm(), 1e-9);
}

TEST(WaveletProperties, Linearity) {
  std::mt19937_64 rng(23);
  const VectorXd x = oracle::random_vector(32, rng), y = oracle::random_vector(32, rng);
  const double a = 0.7, b = -2.3;
  const auto pz = w::dwt1d<double>(VectorXd(a * x + b * y), 3);
  const auto px = w::dwt1d<double>(x, 3), py = w::dwt1d<double>(y, 3);
  EXPECT_LE((pz.approx - (a * px.approx + b * py.approx)).cwiseAbs().maxCoeff(), 1e-9);
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_LE((pz.details[j] - (a * px.details[j] + b * py.details[j])).cwiseAbs().maxCoeff(), 1e-9);
  }
  const MatrixXd m = oracle::random_matrix(9, 6, rng), n = oracle::random_matrix(9, 6, rng);
  const auto qz = w::dwt2d<double>(MatrixXd(a * m + b * n), 2);
  const auto qm = w::dwt2d<double>(m, 2), qn = w::dwt2d<double>(n, 2);
  EXPECT_LE((qz.approx - (a * qm.approx + b * qn.approx)).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE((qz.details[1].hh - (a * qm.details[1].hh + b * qn.details[1].hh)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(WaveletProperties, ZeroDetailOracle1d) {
  std::mt19937_64 rng(24);
  for (int k = 1; k <= 5; ++k) {
    for (Eigen::Index n : {Eigen::Index{1} << k, Eigen::Index{256}, Eigen::Index{1024}}) {
      const VectorXd x = oracle::random_vector(n, rng);
      auto p = w::dwt1d<double>(x, k);
      for (auto& d : p.details) d.setZero();
      EXPECT_LE((w::idwt1d(p) - oracle::block_means(x, Eigen::Index{1} << k)).cwiseAbs().maxCoeff(), 1e-10);
    }
  }
}

TEST(WaveletProperties, ZeroDetailOracle2d) {
  std::mt19937_64 rng(25);
  for (int k = 1; k <= 3; ++k) {
    const MatrixXd m = oracle::random_matrix(16, 24, rng);
    auto p = w::dwt2d<double>(m, k);
    for (auto& t : p.details) {
      t.lh.setZero();
      t.hl.setZero();
      t.hh.setZero();
    }
    EXPECT_LE((w::idwt2d(p) - oracle::block_means(m, Eigen::Index{1} << k)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(WaveletProperties, FloatScalarRoundTrip) {
  Eigen::VectorXf x = Eigen::VectorXf::LinSpaced(16, -1.f, 1.f);
  EXPECT_LE((w::idwt1d(w::dwt1d<float>(x, 4)) - x).cwiseAbs().maxCoeff(), 1e-5f);
}

#pragma once

// Orthonormal discrete wavelet transforms, 1D and 2D, multi-level.
//
// All transforms are templated on the scalar type and on the wavelet basis.
// Only the Haar basis ships; a basis type provides `analyze_rows` and
// `synthesize_rows`, which split/merge adjacent row pairs of a dense
// expression.
//
// 2D band labels: the transform runs along rows (horizontal) first, then
// along columns (vertical).
//   LL  low  vertical, low  horizontal
//   LH  low  vertical, high horizontal
//   HL  high vertical, low  horizontal
//   HH  high vertical, high horizontal
// For a 2x2 block [[a, b], [c, d]]:
//   LL = (a+b+c+d)/2, LH = (a-b+c-d)/2, HL = (a+b-c-d)/2, HH = (a-b-c+d)/2.

#include "mrl/errors.hpp"

#include <Eigen/Core>

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace mrl::wavelet {

using Index = Eigen::Index;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Orthonormal Haar pair: lo = (x0 + x1)/sqrt2, hi = (x0 - x1)/sqrt2.
struct HaarBasis {
  template <typename Derived>
  static std::pair<typename Derived::PlainObject, typename Derived::PlainObject> analyze_rows(
      const Eigen::MatrixBase<Derived>& x) {
    using Scalar = typename Derived::Scalar;
    const Scalar s = Scalar(1) / std::sqrt(Scalar(2));
    const auto even = x(Eigen::seq(0, Eigen::last, 2), Eigen::all);
    const auto odd = x(Eigen::seq(1, Eigen::last, 2), Eigen::all);
    typename Derived::PlainObject lo = (even + odd) * s;
    typename Derived::PlainObject hi = (even - odd) * s;
    return {std::move(lo), std::move(hi)};
  }

  template <typename DerivedLo, typename DerivedHi>
  static typename DerivedLo::PlainObject synthesize_rows(const Eigen::MatrixBase<DerivedLo>& lo,
                                                          const Eigen::MatrixBase<DerivedHi>& hi) {
    using Scalar = typename DerivedLo::Scalar;
    const Scalar s = Scalar(1) / std::sqrt(Scalar(2));
    typename DerivedLo::PlainObject out(lo.rows() * 2, lo.cols());
    out(Eigen::seq(0, Eigen::last, 2), Eigen::all) = (lo + hi) * s;
    out(Eigen::seq(1, Eigen::last, 2), Eigen::all) = (lo - hi) * s;
    return out;
  }
};

enum class Subband { LH, HL, HH };

inline const char* subband_name(Subband b) {
  switch (b) {
    case Subband::LH: return "LH";
    case Subband::HL: return "HL";
    case Subband::HH: return "HH";
  }
  return "?";
}

/// 1D multi-level decomposition. `details[j]` is the detail band produced
/// at level j+1 (finest first); `approx` is the coarsest approximation.
template <typename Scalar = double>
struct WaveletPyramid {
  Vector<Scalar> approx;
  std::vector<Vector<Scalar>> details;
  Index original_len = 0;
  int levels = 0;
};

template <typename Scalar = double>
struct SubbandTriple {
  Matrix<Scalar> lh, hl, hh;

  Matrix<Scalar>& band(Subband b) { return b == Subband::LH ? lh : (b == Subband::HL ? hl : hh); }
  const Matrix<Scalar>& band(Subband b) const {
    return b == Subband::LH ? lh : (b == Subband::HL ? hl : hh);
  }
};

/// 2D multi-level decomposition. Each level zero-pads odd axes at the high
/// end before transforming; the inverse crops back, so the pad amounts are
/// implied by `rows`/`cols`.
template <typename Scalar = double>
struct WaveletPyramid2D {
  Matrix<Scalar> approx;
  std::vector<SubbandTriple<Scalar>> details;  // finest first
  Index rows = 0;
  Index cols = 0;
  int levels = 0;
};

/// Unpadded shape of the signal entering level `level` (0 = original).
inline std::pair<Index, Index> level_input_shape(Index rows, Index cols, int level) {
  for (int j = 0; j < level; ++j) {
    rows = (rows + 1) / 2;
    cols = (cols + 1) / 2;
  }
  return {rows, cols};
}

template <typename Scalar = double, typename Basis = HaarBasis>
WaveletPyramid<Scalar> dwt1d(const Vector<Scalar>& signal, int levels) {
  if (levels < 1) throw DimensionError("dwt1d: levels must be >= 1");
  const Index divisor = Index{1} << levels;
  if (signal.size() == 0 || signal.size() % divisor != 0) {
    throw DimensionError("dwt1d: signal length " + std::to_string(signal.size()) +
                         " must be a positive multiple of " + std::to_string(divisor) + " for " +
                         std::to_string(levels) + " levels");
  }
  WaveletPyramid<Scalar> p;
  p.original_len = signal.size();
  p.levels = levels;
  Vector<Scalar> current = signal;
  for (int j = 0; j < levels; ++j) {
    auto [lo, hi] = Basis::analyze_rows(current);
    p.details.push_back(std::move(hi));
    current = std::move(lo);
  }
  p.approx = std::move(current);
  return p;
}

template <typename Scalar>
void check_pyramid(const WaveletPyramid<Scalar>& p) {
  if (p.levels < 1 || static_cast<int>(p.details.size()) != p.levels) {
    throw DimensionError("pyramid: detail band count does not match levels");
  }
  const Index divisor = Index{1} << p.levels;
  if (p.original_len <= 0 || p.original_len % divisor != 0) {
    throw DimensionError("pyramid: original length not divisible by " + std::to_string(divisor));
  }
  for (int j = 0; j < p.levels; ++j) {
    const Index expected = p.original_len >> (j + 1);
    if (p.details[static_cast<std::size_t>(j)].size() != expected) {
      throw DimensionError("pyramid: detail band at level " + std::to_string(j + 1) + " has length " +
                           std::to_string(p.details[static_cast<std::size_t>(j)].size()) +
                           ", expected " + std::to_string(expected));
    }
  }
  if (p.approx.size() != (p.original_len >> p.levels)) {
    throw DimensionError("pyramid: approximation length mismatch");
  }
}

template <typename Scalar = double, typename Basis = HaarBasis>
Vector<Scalar> idwt1d(const WaveletPyramid<Scalar>& p) {
  check_pyramid(p);
  Vector<Scalar> current = p.approx;
  for (int j = p.levels - 1; j >= 0; --j) {
    current = Basis::synthesize_rows(current, p.details[static_cast<std::size_t>(j)]);
  }
  return current;
}

namespace detail {

template <typename Scalar>
Matrix<Scalar> pad_even(const Matrix<Scalar>& m) {
  const Index r = m.rows() + (m.rows() % 2);
  const Index c = m.cols() + (m.cols() % 2);
  if (r == m.rows() && c == m.cols()) return m;
  Matrix<Scalar> out = Matrix<Scalar>::Zero(r, c);
  out.topLeftCorner(m.rows(), m.cols()) = m;
  return out;
}

}  // namespace detail

template <typename Scalar = double, typename Basis = HaarBasis>
WaveletPyramid2D<Scalar> dwt2d(const Matrix<Scalar>& image, int levels) {
  if (levels < 1) throw DimensionError("dwt2d: levels must be >= 1");
  if (image.rows() == 0 || image.cols() == 0) throw DimensionError("dwt2d: empty image");
  WaveletPyramid2D<Scalar> p;
  p.rows = image.rows();
  p.cols = image.cols();
  p.levels = levels;
  Matrix<Scalar> current = image;
  for (int j = 0; j < levels; ++j) {
    const Matrix<Scalar> padded = detail::pad_even(current);
    // Horizontal pass: transform each row (pairs of columns).
    auto [lo_h, hi_h] = Basis::analyze_rows(padded.transpose());
    // Vertical pass on both halves.
    auto [ll, hl] = Basis::analyze_rows(lo_h.transpose());
    auto [lh, hh] = Basis::analyze_rows(hi_h.transpose());
    p.details.push_back({std::move(lh), std::move(hl), std::move(hh)});
    current = std::move(ll);
  }
  p.approx = std::move(current);
  return p;
}

template <typename Scalar>
void check_pyramid(const WaveletPyramid2D<Scalar>& p) {
  if (p.levels < 1 || static_cast<int>(p.details.size()) != p.levels) {
    throw DimensionError("pyramid2d: detail band count does not match levels");
  }
  if (p.rows <= 0 || p.cols <= 0) throw DimensionError("pyramid2d: empty original shape");
  for (int j = 0; j < p.levels; ++j) {
    const auto [r, c] = level_input_shape(p.rows, p.cols, j + 1);
    const auto& t = p.details[static_cast<std::size_t>(j)];
    for (const auto* band : {&t.lh, &t.hl, &t.hh}) {
      if (band->rows() != r || band->cols() != c) {
        throw DimensionError("pyramid2d: band at level " + std::to_string(j + 1) + " is " +
                             std::to_string(band->rows()) + "x" + std::to_string(band->cols()) +
                             ", expected " + std::to_string(r) + "x" + std::to_string(c));
      }
    }
  }
  const auto [r, c] = level_input_shape(p.rows, p.cols, p.levels);
  if (p.approx.rows() != r || p.approx.cols() != c) {
    throw DimensionError("pyramid2d: approximation shape mismatch");
  }
}

template <typename Scalar = double, typename Basis = HaarBasis>
Matrix<Scalar> idwt2d(const WaveletPyramid2D<Scalar>& p) {
  check_pyramid(p);
  Matrix<Scalar> current = p.approx;
  for (int j = p.levels - 1; j >= 0; --j) {
    const auto& t = p.details[static_cast<std::size_t>(j)];
    const Matrix<Scalar> lo_h = Basis::synthesize_rows(current, t.hl).transpose();
    const Matrix<Scalar> hi_h = Basis::synthesize_rows(t.lh, t.hh).transpose();
    const Matrix<Scalar> full = Basis::synthesize_rows(lo_h, hi_h).transpose();
    const auto [r, c] = level_input_shape(p.rows, p.cols, j);
    current = full.topLeftCorner(r, c);
  }
  return current;
}

template <typename Scalar>
Scalar energy(const WaveletPyramid<Scalar>& p) {
  Scalar e = p.approx.squaredNorm();
  for (const auto& d : p.details) e += d.squaredNorm();
  return e;
}

template <typename Scalar>
Scalar energy(const WaveletPyramid2D<Scalar>& p) {
  Scalar e = p.approx.squaredNorm();
  for (const auto& t : p.details) e += t.lh.squaredNorm() + t.hl.squaredNorm() + t.hh.squaredNorm();
  return e;
}

}  // namespace mrl::wavelet

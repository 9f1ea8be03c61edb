#pragma once

#include <Eigen/Core>

#include <initializer_list>
#include <string>
#include <vector>

namespace mrl {

using Index = Eigen::Index;
using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense n-dimensional array of doubles with an explicit shape.
///
/// Values are stored flat in row-major order. Conventions used across the
/// library: a 1D signal is shape {L} or {C, L}; an image is {H, W} or
/// {C, H, W}.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<Index> shape);
  Tensor(std::vector<Index> shape, Eigen::VectorXd values);
  /// 1D tensor holding `values`.
  static Tensor of(std::initializer_list<double> values);
  static Tensor from_vector(const Eigen::VectorXd& v);
  static Tensor from_matrix(const Eigen::MatrixXd& m);

  const std::vector<Index>& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index size() const { return values_.size(); }
  Index dim(Index axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  bool empty() const { return values_.size() == 0; }

  Eigen::VectorXd& values() { return values_; }
  const Eigen::VectorXd& values() const { return values_; }
  double& operator[](Index i) { return values_[i]; }
  double operator[](Index i) const { return values_[i]; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  /// Same values, new shape. Throws DimensionError when element counts differ.
  Tensor reshaped(std::vector<Index> shape) const;

  /// Number of leading channels for signal/image conventions: rank-1 and
  /// rank-2 tensors are single-channel, rank-3 (and rank-2 signals when
  /// `signal` is true) carry the channel count on axis 0.
  Index channels(bool signal) const;

  /// Channel `c` of a 1D signal ({L} or {C, L}).
  Eigen::VectorXd signal_channel(Index c) const;
  void set_signal_channel(Index c, const Eigen::VectorXd& v);

  /// Channel `c` of an image ({H, W} or {C, H, W}).
  Eigen::MatrixXd image_channel(Index c) const;
  void set_image_channel(Index c, const Eigen::MatrixXd& m);
  Index image_rows() const;
  Index image_cols() const;

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && values_ == other.values_;
  }

  std::string shape_string() const;

 private:
  std::vector<Index> shape_;
  Eigen::VectorXd values_;
};

Index shape_size(const std::vector<Index>& shape);
std::string shape_string(const std::vector<Index>& shape);

}  // namespace mrl

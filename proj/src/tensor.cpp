#include "mrl/tensor.hpp"

#include "mrl/errors.hpp"

#include <numeric>
#include <sstream>

namespace mrl {

Index shape_size(const std::vector<Index>& shape) {
  if (shape.empty()) return 0;
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

std::string shape_string(const std::vector<Index>& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

Tensor::Tensor(std::vector<Index> shape) : shape_(std::move(shape)) {
  for (Index d : shape_) {
    if (d < 0) throw DimensionError("negative tensor dimension");
  }
  values_ = Eigen::VectorXd::Zero(shape_size(shape_));
}

Tensor::Tensor(std::vector<Index> shape, Eigen::VectorXd values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (shape_size(shape_) != values_.size()) {
    throw DimensionError("tensor shape " + mrl::shape_string(shape_) + " does not hold " +
                         std::to_string(values_.size()) + " values");
  }
}

Tensor Tensor::of(std::initializer_list<double> values) {
  Tensor t({static_cast<Index>(values.size())});
  Index i = 0;
  for (double v : values) t[i++] = v;
  return t;
}

Tensor Tensor::from_vector(const Eigen::VectorXd& v) { return Tensor({v.size()}, v); }

Tensor Tensor::from_matrix(const Eigen::MatrixXd& m) {
  Tensor t({m.rows(), m.cols()});
  t.set_image_channel(0, m);
  return t;
}

Tensor Tensor::reshaped(std::vector<Index> shape) const { return Tensor(std::move(shape), values_); }

Index Tensor::channels(bool signal) const {
  if (signal) {
    if (rank() == 1) return 1;
    if (rank() == 2) return shape_[0];
    throw DimensionError("signal tensor must be rank 1 or 2, got " + shape_string());
  }
  if (rank() == 2) return 1;
  if (rank() == 3) return shape_[0];
  throw DimensionError("image tensor must be rank 2 or 3, got " + shape_string());
}

Eigen::VectorXd Tensor::signal_channel(Index c) const {
  const Index n = shape_.back();
  if (c < 0 || c >= channels(true)) throw DimensionError("channel out of range");
  return values_.segment(c * n, n);
}

void Tensor::set_signal_channel(Index c, const Eigen::VectorXd& v) {
  const Index n = shape_.back();
  if (c < 0 || c >= channels(true) || v.size() != n) throw DimensionError("signal channel mismatch");
  values_.segment(c * n, n) = v;
}

Index Tensor::image_rows() const {
  channels(false);
  return shape_[shape_.size() - 2];
}

Index Tensor::image_cols() const {
  channels(false);
  return shape_.back();
}

Eigen::MatrixXd Tensor::image_channel(Index c) const {
  const Index h = image_rows(), w = image_cols();
  if (c < 0 || c >= channels(false)) throw DimensionError("channel out of range");
  return Eigen::Map<const RowMatrixXd>(values_.data() + c * h * w, h, w);
}

void Tensor::set_image_channel(Index c, const Eigen::MatrixXd& m) {
  const Index h = image_rows(), w = image_cols();
  if (c < 0 || c >= channels(false) || m.rows() != h || m.cols() != w) {
    throw DimensionError("image channel mismatch");
  }
  Eigen::Map<RowMatrixXd>(values_.data() + c * h * w, h, w) = m;
}

std::string Tensor::shape_string() const { return mrl::shape_string(shape_); }

}  // namespace mrl

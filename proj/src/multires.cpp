#include "mrl/multires.hpp"

#include "mrl/errors.hpp"

namespace mrl {

LadderStep ladder_step(int index, Dimensionality dim) {
  if (index < 1) throw ArgumentError("resolution index must be >= 1, got " + std::to_string(index));
  if (index == 1) return {0, VersionKind::Original};
  if (dim == Dimensionality::D1) return {index - 1, VersionKind::FullDetailZeroed};
  if (index % 2 == 1) return {(index - 1) / 2, VersionKind::FullDetailZeroed};
  return {index / 2, VersionKind::HhOnlyZeroed};
}

Eigen::VectorXd resolution_1d(const Eigen::VectorXd& signal, int index) {
  const LadderStep step = ladder_step(index, Dimensionality::D1);
  if (step.depth == 0) return signal;
  auto p = wavelet::dwt1d(signal, step.depth);
  for (auto& d : p.details) d.setZero();
  return wavelet::idwt1d(p);
}

Eigen::MatrixXd resolution_2d(const Eigen::MatrixXd& image, int index) {
  const LadderStep step = ladder_step(index, Dimensionality::D2);
  if (step.depth == 0) return image;
  auto p = wavelet::dwt2d(image, step.depth);
  for (int j = 0; j < step.depth; ++j) {
    auto& t = p.details[static_cast<std::size_t>(j)];
    t.hh.setZero();
    const bool keep_oriented = step.kind == VersionKind::HhOnlyZeroed && j == step.depth - 1;
    if (!keep_oriented) {
      t.lh.setZero();
      t.hl.setZero();
    }
  }
  return wavelet::idwt2d(p);
}

ResolutionVersion build_resolution_1d(const Tensor& signal, int index) {
  const LadderStep step = ladder_step(index, Dimensionality::D1);
  ResolutionVersion v{index, signal, step.kind, step.depth};
  if (step.depth == 0) return v;
  for (Index c = 0; c < signal.channels(true); ++c) {
    v.data.set_signal_channel(c, resolution_1d(signal.signal_channel(c), index));
  }
  return v;
}

ResolutionVersion build_resolution_2d(const Tensor& image, int index) {
  const LadderStep step = ladder_step(index, Dimensionality::D2);
  ResolutionVersion v{index, image, step.kind, step.depth};
  if (step.depth == 0) return v;
  for (Index c = 0; c < image.channels(false); ++c) {
    v.data.set_image_channel(c, resolution_2d(image.image_channel(c), index));
  }
  return v;
}

ResolutionVersion build_resolution(const Tensor& sample, int index, Dimensionality dim) {
  return dim == Dimensionality::D1 ? build_resolution_1d(sample, index) : build_resolution_2d(sample, index);
}

std::vector<Tensor> transform_samples(const std::vector<Tensor>& samples, int index, Dimensionality dim) {
  std::vector<Tensor> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(build_resolution(s, index, dim).data);
  return out;
}

std::vector<DatasetVersion> build_curriculum_dataset(const std::vector<Tensor>& samples, int k_levels,
                                                     Dimensionality dim) {
  if (k_levels < 1) throw ArgumentError("k_levels must be >= 1");
  if (samples.empty()) throw ArgumentError("curriculum dataset needs at least one sample");
  const auto& shape = samples.front().shape();
  for (std::size_t n = 1; n < samples.size(); ++n) {
    if (samples[n].shape() != shape) {
      throw DimensionError("sample " + std::to_string(n) + " has shape " + samples[n].shape_string() +
                           ", expected " + shape_string(shape));
    }
  }
  std::vector<DatasetVersion> versions;
  versions.reserve(static_cast<std::size_t>(k_levels));
  for (int i = k_levels; i >= 1; --i) {
    versions.push_back({i, transform_samples(samples, i, dim)});
  }
  return versions;
}

}  // namespace mrl

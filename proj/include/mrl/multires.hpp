#pragma once

// Same-shape resolution versions of training samples.
//
// 1D ladder: r_1 is the signal itself; r_i (i > 1) decomposes i-1 levels
// and reconstructs with every detail band replaced by zeros.
//
// 2D ladder (one intermediate step per decomposition level):
//   r_1      original
//   r_{2k+1} k levels, all LH/HL/HH at levels 1..k zeroed
//   r_{2k}   k levels, HH^k zeroed, LH^k and HL^k kept, levels 1..k-1 zeroed
//
// Multichannel tensors are transformed channel by channel.

#include "mrl/tensor.hpp"
#include "mrl/wavelet.hpp"

#include <string>
#include <vector>

namespace mrl {

enum class Dimensionality { D1, D2 };

enum class VersionKind { Original, FullDetailZeroed, HhOnlyZeroed };

struct ResolutionVersion {
  int index = 1;
  Tensor data;
  VersionKind kind = VersionKind::Original;
  int depth = 0;  // decomposition depth used to build it
};

/// Decomposition depth and kind of resolution index `i` on a given ladder.
struct LadderStep {
  int depth;
  VersionKind kind;
};
LadderStep ladder_step(int index, Dimensionality dim);

/// Vector-level helpers used by the tensor-level operations.
Eigen::VectorXd resolution_1d(const Eigen::VectorXd& signal, int index);
Eigen::MatrixXd resolution_2d(const Eigen::MatrixXd& image, int index);

ResolutionVersion build_resolution_1d(const Tensor& signal, int index);
ResolutionVersion build_resolution_2d(const Tensor& image, int index);
ResolutionVersion build_resolution(const Tensor& sample, int index, Dimensionality dim);

/// One resolution version of a whole sample set.
struct DatasetVersion {
  int index = 1;
  std::vector<Tensor> samples;
};

/// Versions r_k, ..., r_1 (coarsest first). The last entry equals the input.
std::vector<DatasetVersion> build_curriculum_dataset(const std::vector<Tensor>& samples, int k_levels,
                                                     Dimensionality dim);

/// Transforms every sample to resolution index `index`.
std::vector<Tensor> transform_samples(const std::vector<Tensor>& samples, int index, Dimensionality dim);

}  // namespace mrl

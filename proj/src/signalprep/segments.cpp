#include "mrl/errors.hpp"
#include "mrl/signalprep.hpp"

#include <cmath>

namespace mrl::signalprep {

SegmentSet segment_spectrogram(const Spectrogram& spec, Index frames, Index hop_frames) {
  if (frames < 1 || hop_frames < 1) throw ArgumentError("segment_spectrogram: bad window");
  if (spec.frames() < frames) {
    throw ArgumentError("segment_spectrogram: " + std::to_string(spec.frames()) + " frames, need at least " +
                        std::to_string(frames));
  }
  SegmentSet set;
  set.label = spec.label;
  for (Index start = 0; start + frames <= spec.frames(); start += hop_frames) {
    set.segments.push_back(spec.values.middleCols(start, frames));
    set.starts.push_back(start);
  }
  return set;
}

int probability_vote(const std::vector<Eigen::VectorXd>& probs) {
  if (probs.empty()) throw ArgumentError("probability_vote: no segments");
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(probs.front().size());
  for (const auto& p : probs) {
    if (p.size() != mean.size()) throw DimensionError("probability_vote: class counts differ");
    if (std::abs(p.sum() - 1.0) > 1e-6) throw ArgumentError("probability_vote: vector does not sum to 1");
    mean += p;
  }
  mean /= static_cast<double>(probs.size());
  Index best = 0;
  for (Index k = 1; k < mean.size(); ++k) {
    if (mean[k] > mean[best]) best = k;
  }
  return static_cast<int>(best);
}

NormalizedImages normalize_images(const std::vector<Tensor>& train, const std::vector<Tensor>& apply_to) {
  if (train.empty()) throw ArgumentError("normalize_images: empty training set");
  const Index channels = train.front().channels(false);
  // Shift by the first pixel of each channel so constant channels give an exact mean.
  Eigen::VectorXd shift(channels);
  for (Index c = 0; c < channels; ++c) shift[c] = train.front().image_channel(c)(0, 0);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(channels);
  Eigen::VectorXd count = Eigen::VectorXd::Zero(channels);
  for (const auto& img : train) {
    if (img.shape() != train.front().shape()) throw DimensionError("normalize_images: image shapes differ");
    for (Index c = 0; c < channels; ++c) {
      const Eigen::MatrixXd ch = img.image_channel(c);
      sum[c] += (ch.array() - shift[c]).sum();
      count[c] += static_cast<double>(ch.size());
    }
  }
  const Eigen::VectorXd mean = shift + sum.cwiseQuotient(count);
  Eigen::VectorXd var = Eigen::VectorXd::Zero(channels);
  for (const auto& img : train) {
    for (Index c = 0; c < channels; ++c) {
      var[c] += (img.image_channel(c).array() - mean[c]).square().sum();
    }
  }
  const Eigen::VectorXd stddev = var.cwiseQuotient(count).cwiseSqrt().cwiseMax(1e-8);
  return {apply_normalization(apply_to, mean, stddev), mean, stddev};
}

std::vector<Tensor> apply_normalization(const std::vector<Tensor>& images, const Eigen::VectorXd& mean,
                                        const Eigen::VectorXd& stddev) {
  std::vector<Tensor> out;
  out.reserve(images.size());
  for (const auto& img : images) {
    if (img.channels(false) != mean.size()) throw DimensionError("apply_normalization: channel count mismatch");
    Tensor t = img;
    for (Index c = 0; c < mean.size(); ++c) {
      t.set_image_channel(c, (img.image_channel(c).array() - mean[c]) / stddev[c]);
    }
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace mrl::signalprep

#pragma once

#include "mrl/tensor.hpp"

#include <vector>

namespace mrl {

/// Labeled samples. `groups` optionally maps each sample to a source clip
/// (segments of one recording share a group id); empty when unused.
struct Dataset {
  std::vector<Tensor> samples;
  std::vector<int> labels;
  std::vector<int> groups;
  int num_classes = 0;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }

  Dataset subset(const std::vector<std::size_t>& indices) const {
    Dataset out;
    out.num_classes = num_classes;
    for (std::size_t i : indices) {
      out.samples.push_back(samples.at(i));
      out.labels.push_back(labels.at(i));
      if (!groups.empty()) out.groups.push_back(groups.at(i));
    }
    return out;
  }
};

}  // namespace mrl

#pragma once

#include <cstdint>

#include "cadm/tensor.hpp"

namespace cadm {

// Pixel tallies for the binary change class (positive = changed). Mergeable
// by field-wise addition for micro-averaged dataset metrics.
struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  std::uint64_t total() const { return tp + fp + fn + tn; }
};

// Both grids must be strictly {0,1}.
ConfusionCounts confusion(const Tensor<std::uint8_t>& pred,
                          const Tensor<std::uint8_t>& gt);

struct Metrics {
  double precision = 0, recall = 0, f1 = 0, iou = 0, oa = 0;
};

// Degenerate denominators (no predicted or no actual positives) yield 0 for
// the affected ratio; overall accuracy is always defined for non-empty input.
Metrics metrics_from_counts(const ConfusionCounts& c);

}  // namespace cadm

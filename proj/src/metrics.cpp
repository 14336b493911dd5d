#include "cadm/metrics.hpp"

#include <stdexcept>

namespace cadm {

ConfusionCounts confusion(const Tensor<std::uint8_t>& pred,
                          const Tensor<std::uint8_t>& gt) {
  check_same_shape(pred, gt, "confusion");
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    std::uint8_t p = pred[i], g = gt[i];
    if (p > 1 || g > 1)
      throw std::invalid_argument("confusion: grids must be strictly binary");
    if (p && g)
      ++c.tp;
    else if (p && !g)
      ++c.fp;
    else if (!p && g)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

Metrics metrics_from_counts(const ConfusionCounts& c) {
  Metrics m;
  double tp = static_cast<double>(c.tp);
  if (c.tp + c.fp > 0) m.precision = tp / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0) m.recall = tp / static_cast<double>(c.tp + c.fn);
  if (m.precision + m.recall > 0)
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  if (c.tp + c.fp + c.fn > 0)
    m.iou = tp / static_cast<double>(c.tp + c.fp + c.fn);
  if (c.total() > 0)
    m.oa = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  return m;
}

}  // namespace cadm

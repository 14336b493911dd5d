#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cadm/data.hpp"
#include "cadm/metrics.hpp"
#include "cadm/predictor.hpp"
#include "cadm/rng.hpp"
#include "cadm/schedule.hpp"

namespace cadm {

struct SamplerConfig {
  int steps = 100;         // must equal the sampling schedule's step count
  int ensemble = 5;        // independent chains averaged per pair
  double threshold = 0.5;  // on the soft map in [0,1]
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const SamplerConfig&) const = default;
};

struct ChangeMap {
  Tensor<float> soft;           // [0,1]
  Tensor<std::uint8_t> binary;  // soft >= threshold
};

// One reverse chain for the currently bound pair. Draw order on the stream:
// x_T (row-major), then one z grid after each predict for t = T..2; the final
// step is deterministic. Returns the clamped soft map (x0_hat + 1)/2,
// shape (1,1,h,w).
Tensor<float> sample_once(NoisePredictor<float>& pred, int h, int w,
                          const NoiseSchedule& sched, Rng& stream);

// Binds the pair, runs cfg.ensemble chains on streams seeded
// mix_seed(cfg.seed, member), averages soft maps in member order, and
// thresholds. Members are batched through the predictor but draw from
// per-member streams, so each member's result is independent of the
// ensemble size.
ChangeMap ensemble_infer(NoisePredictor<float>& pred, const Tensor<float>& ia,
                         const Tensor<float>& ib, const NoiseSchedule& sched,
                         const SamplerConfig& cfg);

// Micro-averaged evaluation over a dataset; pair p uses base seed
// mix_seed(cfg.seed, p), pairs in dataset order. The optional sink receives
// each pair's name and change map (e.g. for writing images).
struct EvalResult {
  ConfusionCounts counts;
  Metrics metrics;
  std::vector<std::pair<std::string, ConfusionCounts>> per_pair;
};
EvalResult evaluate_dataset(
    NoisePredictor<float>& pred, const Dataset& data,
    const NoiseSchedule& sched, const SamplerConfig& cfg,
    const std::function<void(const std::string&, const ChangeMap&)>& sink = {});

// Gradient-weighted attribution of one output pixel against the three
// decoder-stage features. Runs a single chain (member-0 stream of `seed`),
// rebuilds the final denoising step on a full tape, and backpropagates the
// pixel's x0-estimate. Each map is ReLU(sum_c w_c * feat_c) with
// global-average-pooled gradient weights w_c, max-normalized to [0,1] and
// nearest-upsampled to the input size. maps[0] is the coarsest level.
struct HeatmapResult {
  std::array<Tensor<float>, kNumLevels> maps;
  Tensor<float> soft;  // the chain's soft output, for reference
};
HeatmapResult heatmap_for_pixel(CadmModel<float>& model,
                                const Tensor<float>& ia,
                                const Tensor<float>& ib,
                                const NoiseSchedule& sched, std::uint64_t seed,
                                int y, int x, const AblationFlags& fl = {});

}  // namespace cadm

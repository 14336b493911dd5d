#include "cadm/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cadm {
namespace {

Tensor<float> soft_from_x(const Tensor<float>& x) {
  Tensor<float> soft(x.n(), x.c(), x.h(), x.w());
  for (std::size_t i = 0; i < x.size(); ++i)
    soft[i] = std::clamp((x[i] + 1.0f) / 2.0f, 0.0f, 1.0f);
  return soft;
}

// Fills batch row n of `dst` with normal draws from `stream`, row-major.
void fill_normal_row(Tensor<float>& dst, int n, Rng& stream) {
  const int plane = dst.c() * dst.h() * dst.w();
  float* p = dst.data() + static_cast<std::ptrdiff_t>(n) * plane;
  for (int i = 0; i < plane; ++i) p[i] = static_cast<float>(stream.normal());
}

}  // namespace

void SamplerConfig::validate() const {
  if (steps < 1) throw std::invalid_argument("sampler: steps must be >= 1");
  if (ensemble < 1) throw std::invalid_argument("sampler: ensemble must be >= 1");
  if (!(threshold > 0.0 && threshold < 1.0))
    throw std::invalid_argument("sampler: threshold must be in (0, 1)");
}

Tensor<float> sample_once(NoisePredictor<float>& pred, int h, int w,
                          const NoiseSchedule& sched, Rng& stream) {
  const int T = sched.steps();
  Tensor<float> x(1, 1, h, w);
  stream.fill_normal(x);
  Tensor<float> z(1, 1, h, w);
  for (int t = T; t >= 2; --t) {
    const int tv[] = {t};
    Tensor<float> eps = pred.predict(x, tv);
    stream.fill_normal(z);
    x = p_sample(x, t, eps, sched, &z);
  }
  const int tv[] = {1};
  Tensor<float> eps = pred.predict(x, tv);
  x = p_sample(x, 1, eps, sched);
  return soft_from_x(x);
}

ChangeMap ensemble_infer(NoisePredictor<float>& pred, const Tensor<float>& ia,
                         const Tensor<float>& ib, const NoiseSchedule& sched,
                         const SamplerConfig& cfg) {
  cfg.validate();
  if (cfg.steps != sched.steps())
    throw std::invalid_argument("sampler: cfg.steps does not match the schedule");
  check_same_shape(ia, ib, "ensemble_infer");

  pred.bind_pair(ia, ib);
  const int h = ia.h(), w = ia.w();
  const int M = cfg.ensemble;
  const int T = sched.steps();

  std::vector<Rng> streams;
  streams.reserve(M);
  for (int m = 0; m < M; ++m) streams.emplace_back(mix_seed(cfg.seed, m));

  // All members advance in lockstep as one batch; each draws from its own
  // stream, so row m matches a standalone chain on mix_seed(cfg.seed, m).
  Tensor<float> x(M, 1, h, w);
  for (int m = 0; m < M; ++m) fill_normal_row(x, m, streams[m]);

  std::vector<int> tv(M);
  Tensor<float> z(M, 1, h, w);
  for (int t = T; t >= 2; --t) {
    std::fill(tv.begin(), tv.end(), t);
    Tensor<float> eps = pred.predict(x, tv);
    for (int m = 0; m < M; ++m) fill_normal_row(z, m, streams[m]);
    x = p_sample(x, t, eps, sched, &z);
  }
  std::fill(tv.begin(), tv.end(), 1);
  Tensor<float> eps = pred.predict(x, tv);
  x = p_sample(x, 1, eps, sched);
  Tensor<float> members = soft_from_x(x);

  ChangeMap out{Tensor<float>(1, 1, h, w), Tensor<std::uint8_t>(1, 1, h, w)};
  const int plane = h * w;
  for (int i = 0; i < plane; ++i) {
    double acc = 0.0;
    for (int m = 0; m < M; ++m)
      acc += members.data()[static_cast<std::ptrdiff_t>(m) * plane + i];
    const float s = static_cast<float>(acc / M);
    out.soft.data()[i] = s;
    out.binary.data()[i] = s >= cfg.threshold ? 1 : 0;
  }
  return out;
}

EvalResult evaluate_dataset(
    NoisePredictor<float>& pred, const Dataset& data,
    const NoiseSchedule& sched, const SamplerConfig& cfg,
    const std::function<void(const std::string&, const ChangeMap&)>& sink) {
  EvalResult res;
  res.per_pair.reserve(data.size());
  for (std::size_t p = 0; p < data.size(); ++p) {
    const BitemporalPair& pair = data[p];
    SamplerConfig pc = cfg;
    pc.seed = mix_seed(cfg.seed, p);
    ChangeMap cm = ensemble_infer(pred, pair.image_a, pair.image_b, sched, pc);

    Tensor<std::uint8_t> gt(1, 1, pair.label.h(), pair.label.w());
    for (std::size_t i = 0; i < gt.size(); ++i)
      gt[i] = pair.label[i] > 0.5f ? 1 : 0;
    ConfusionCounts cc = confusion(cm.binary, gt);
    res.counts += cc;
    res.per_pair.emplace_back(pair.name, cc);
    if (sink) sink(pair.name, cm);
  }
  res.metrics = metrics_from_counts(res.counts);
  return res;
}

HeatmapResult heatmap_for_pixel(CadmModel<float>& model,
                                const Tensor<float>& ia,
                                const Tensor<float>& ib,
                                const NoiseSchedule& sched, std::uint64_t seed,
                                int y, int x, const AblationFlags& fl) {
  check_same_shape(ia, ib, "heatmap_for_pixel");
  const int h = ia.h(), w = ia.w();
  if (y < 0 || y >= h || x < 0 || x >= w)
    throw std::invalid_argument("heatmap: pixel out of bounds");

  ModelPredictor<float> pred(model, fl);
  pred.bind_pair(ia, ib);
  Rng stream(mix_seed(seed, 0));
  const int T = sched.steps();

  Tensor<float> xt(1, 1, h, w);
  stream.fill_normal(xt);
  Tensor<float> z(1, 1, h, w);
  for (int t = T; t >= 2; --t) {
    const int tv[] = {t};
    Tensor<float> eps = pred.predict(xt, tv);
    stream.fill_normal(z);
    xt = p_sample(xt, t, eps, sched, &z);
  }

  // Replay the final step on a full tape so the decoder stages are live.
  const int tv[] = {1};
  auto tape = model.forward(xt, ia, ib, tv, fl);
  const Tensor<float>& eps_hat = tape.g.value(tape.eps);
  Tensor<float> x0 = p_sample(xt, 1, eps_hat, sched);

  HeatmapResult res{{}, soft_from_x(x0)};

  // d x0(y,x) / d eps_hat(y,x) for the deterministic t=1 update.
  const double coef =
      -sched.beta(1) /
      (std::sqrt(1.0 - sched.alpha_bar(1)) * std::sqrt(sched.alpha(1)));
  Tensor<float> seed_grad(1, 1, h, w);
  seed_grad.fill(0.0f);
  seed_grad.at(0, 0, y, x) = static_cast<float>(coef);
  tape.g.backward(tape.eps, seed_grad);

  for (int k = 0; k < kNumLevels; ++k) {
    const Tensor<float>& feat = tape.g.value(tape.dec[k]);
    const int fc = feat.c(), fh = feat.h(), fw = feat.w();
    Tensor<float> map(1, 1, fh, fw);
    map.fill(0.0f);
    if (tape.g.has_grad(tape.dec[k])) {
      const Tensor<float>& grad = tape.g.grad(tape.dec[k]);
      for (int c = 0; c < fc; ++c) {
        double wsum = 0.0;
        for (int i = 0; i < fh; ++i)
          for (int j = 0; j < fw; ++j) wsum += grad.at(0, c, i, j);
        const float wc = static_cast<float>(wsum / (fh * fw));
        for (int i = 0; i < fh; ++i)
          for (int j = 0; j < fw; ++j)
            map.at(0, 0, i, j) += wc * feat.at(0, c, i, j);
      }
    }
    float mx = 0.0f;
    for (std::size_t i = 0; i < map.size(); ++i) {
      map[i] = std::max(map[i], 0.0f);
      mx = std::max(mx, map[i]);
    }
    if (mx > 0.0f)
      for (std::size_t i = 0; i < map.size(); ++i) map[i] /= mx;

    // Nearest-neighbour upsample to the input size; maps[0] is coarsest.
    Tensor<float> up(1, 1, h, w);
    const int fy = h / fh, fx = w / fw;
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) up.at(0, 0, i, j) = map.at(0, 0, i / fy, j / fx);
    res.maps[kNumLevels - 1 - k] = std::move(up);
  }
  return res;
}

}  // namespace cadm

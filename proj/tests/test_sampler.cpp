#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "cadm/sampler.hpp"
#include "doctest.h"

using namespace cadm;

namespace {

PredictorConfig tiny_cfg() {
  PredictorConfig cfg;
  cfg.image_size = 16;
  cfg.image_channels = 3;
  cfg.base_channels = 4;
  cfg.blocks_per_level = 1;
  cfg.time_embed_dim = 8;
  return cfg;
}

Dataset tiny_data(int n, std::uint64_t seed = 5) {
  SyntheticConfig sc;
  sc.size = 16;
  sc.n_train = n;
  sc.n_val = 2;
  sc.n_test = 2;
  sc.seed = seed;
  return make_synthetic_split(sc, "train");
}

class ZeroStub : public NoisePredictor<float> {
 public:
  void bind_pair(const Tensor<float>&, const Tensor<float>&) override {}
  Tensor<float> predict(const Tensor<float>& x_t,
                        std::span<const int>) override {
    return Tensor<float>(x_t.n(), x_t.c(), x_t.h(), x_t.w());
  }
};

// deterministic, batch-row-local: row m of the output depends on row m only
class ScaledStub : public NoisePredictor<float> {
 public:
  void bind_pair(const Tensor<float>&, const Tensor<float>&) override {}
  Tensor<float> predict(const Tensor<float>& x_t,
                        std::span<const int>) override {
    Tensor<float> out = x_t;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.1f * x_t[i];
    return out;
  }
};

}  // namespace

TEST_CASE("sampler config validation") {
  SamplerConfig c;
  CHECK_NOTHROW(c.validate());
  c.steps = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = SamplerConfig{};
  c.ensemble = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = SamplerConfig{};
  c.threshold = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = SamplerConfig{};
  c.threshold = 1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("ensemble inference rejects a schedule/config step mismatch") {
  NoiseSchedule sched = NoiseSchedule::linear(15, 1e-4, 0.02);
  ZeroStub stub;
  Tensor<float> ia(1, 3, 8, 8), ib(1, 3, 8, 8);
  SamplerConfig cfg;
  cfg.steps = 10;  // schedule has 15
  CHECK_THROWS_AS(ensemble_infer(stub, ia, ib, sched, cfg),
                  std::invalid_argument);
}

TEST_CASE("the reverse chain follows the posterior recursion and draw order") {
  const int T = 15, h = 12, w = 10;
  NoiseSchedule sched = NoiseSchedule::linear(T, 1e-4, 0.02);
  ZeroStub stub;
  Rng stream(314);
  Tensor<float> got = sample_once(stub, h, w, sched, stream);

  // independent replay: same stream seed, schedule getters only
  Rng oracle(314);
  Tensor<float> x(1, 1, h, w);
  oracle.fill_normal(x);
  Tensor<float> z(1, 1, h, w);
  for (int t = T; t >= 2; --t) {
    oracle.fill_normal(z);  // the zero prediction costs no draws
    const double inv_sa = 1.0 / std::sqrt(sched.alpha(t));
    const double sigma = std::sqrt(sched.posterior_var(t));
    for (std::size_t i = 0; i < x.size(); ++i)
      x[i] = static_cast<float>(static_cast<double>(x[i]) * inv_sa +
                                sigma * static_cast<double>(z[i]));
  }
  const double inv_sa1 = 1.0 / std::sqrt(sched.alpha(1));
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = static_cast<float>(static_cast<double>(x[i]) * inv_sa1);

  REQUIRE(got.h() == h);
  REQUIRE(got.w() == w);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const float soft = std::clamp((x[i] + 1.0f) / 2.0f, 0.0f, 1.0f);
    CHECK(got[i] == soft);
  }
}

TEST_CASE("ensemble members match standalone chains bit for bit (stub)") {
  const int T = 15;
  NoiseSchedule sched = NoiseSchedule::linear(T, 1e-4, 0.02);
  ScaledStub stub;
  Tensor<float> ia(1, 3, 8, 8), ib(1, 3, 8, 8);
  SamplerConfig cfg;
  cfg.steps = T;
  cfg.ensemble = 3;
  cfg.seed = 2718;
  ChangeMap cm = ensemble_infer(stub, ia, ib, sched, cfg);

  std::vector<Tensor<float>> members;
  for (int m = 0; m < 3; ++m) {
    Rng stream(mix_seed(cfg.seed, m));
    members.push_back(sample_once(stub, 8, 8, sched, stream));
  }
  for (std::size_t i = 0; i < cm.soft.size(); ++i) {
    double acc = 0.0;
    for (int m = 0; m < 3; ++m) acc += members[m][i];
    CHECK(cm.soft[i] == static_cast<float>(acc / 3.0));
  }
}

TEST_CASE("a member's chain is independent of the ensemble size") {
  const int T = 15;
  NoiseSchedule sched = NoiseSchedule::linear(T, 1e-4, 0.02);
  ScaledStub stub;
  Tensor<float> ia(1, 3, 8, 8), ib(1, 3, 8, 8);
  SamplerConfig one;
  one.steps = T;
  one.ensemble = 1;
  one.seed = 99;
  ChangeMap cm1 = ensemble_infer(stub, ia, ib, sched, one);
  Rng stream(mix_seed(one.seed, 0));
  Tensor<float> solo = sample_once(stub, 8, 8, sched, stream);
  for (std::size_t i = 0; i < solo.size(); ++i) CHECK(cm1.soft[i] == solo[i]);
}

TEST_CASE("ensemble members match standalone chains through the real model") {
  const int T = 5;
  NoiseSchedule sched = NoiseSchedule::linear(T, 1e-4, 0.02);
  CadmModel<float> model(tiny_cfg(), 11);
  Rng hr(12);
  hr.fill_normal(model.params().value("dec.head.w"), 0.05);
  Dataset data = tiny_data(1);
  ModelPredictor<float> pred(model);

  SamplerConfig cfg;
  cfg.steps = T;
  cfg.ensemble = 2;
  cfg.seed = 333;
  ChangeMap cm =
      ensemble_infer(pred, data[0].image_a, data[0].image_b, sched, cfg);

  // standalone runs of each member, then the documented average; equality
  // means the batched lockstep rows reproduce the solo chains bit for bit
  std::vector<Tensor<float>> members;
  for (int m = 0; m < 2; ++m) {
    ModelPredictor<float> sp(model);
    sp.bind_pair(data[0].image_a, data[0].image_b);
    Rng stream(mix_seed(cfg.seed, m));
    members.push_back(sample_once(sp, 16, 16, sched, stream));
  }
  for (std::size_t i = 0; i < cm.soft.size(); ++i) {
    const double acc =
        static_cast<double>(members[0][i]) + static_cast<double>(members[1][i]);
    CHECK(cm.soft[i] == static_cast<float>(acc / 2.0));
  }
}

TEST_CASE("binary map is the thresholded soft map") {
  const int T = 15;
  NoiseSchedule sched = NoiseSchedule::linear(T, 1e-4, 0.02);
  ScaledStub stub;
  Tensor<float> ia(1, 3, 8, 8), ib(1, 3, 8, 8);
  for (double thr : {0.3, 0.5, 0.7}) {
    SamplerConfig cfg;
    cfg.steps = T;
    cfg.ensemble = 2;
    cfg.threshold = thr;
    cfg.seed = 7;
    ChangeMap cm = ensemble_infer(stub, ia, ib, sched, cfg);
    for (std::size_t i = 0; i < cm.soft.size(); ++i) {
      CHECK(cm.soft[i] >= 0.0f);
      CHECK(cm.soft[i] <= 1.0f);
      CHECK(cm.binary[i] == (cm.soft[i] >= thr ? 1 : 0));
    }
  }
}

TEST_CASE("dataset evaluation is deterministic and visits pairs in order") {
  const int T = 15;
  NoiseSchedule sched = NoiseSchedule::linear(T, 1e-4, 0.02);
  Dataset data = tiny_data(3);
  ScaledStub stub;
  SamplerConfig cfg;
  cfg.steps = T;
  cfg.ensemble = 2;
  cfg.seed = 55;

  std::vector<std::string> seen;
  EvalResult r1 = evaluate_dataset(stub, data, sched, cfg,
                                   [&](const std::string& name,
                                       const ChangeMap& cm) {
                                     seen.push_back(name);
                                     CHECK(cm.soft.h() == 16);
                                     CHECK(cm.binary.h() == 16);
                                   });
  EvalResult r2 = evaluate_dataset(stub, data, sched, cfg);

  REQUIRE(seen.size() == 3);
  for (std::size_t p = 0; p < data.size(); ++p) CHECK(seen[p] == data[p].name);
  REQUIRE(r1.per_pair.size() == 3);
  CHECK(r1.counts.tp == r2.counts.tp);
  CHECK(r1.counts.fp == r2.counts.fp);
  CHECK(r1.counts.fn == r2.counts.fn);
  CHECK(r1.counts.tn == r2.counts.tn);
  CHECK(r1.metrics.f1 == r2.metrics.f1);
  // pooled counts are the sum of the per-pair counts
  ConfusionCounts sum;
  for (const auto& [name, cc] : r1.per_pair) sum += cc;
  CHECK(sum.tp == r1.counts.tp);
  CHECK(sum.fp == r1.counts.fp);
  CHECK(sum.fn == r1.counts.fn);
  CHECK(sum.tn == r1.counts.tn);
  // and the pooled metrics derive from the pooled counts
  Metrics m = metrics_from_counts(r1.counts);
  CHECK(m.f1 == r1.metrics.f1);
  CHECK(m.iou == r1.metrics.iou);
}

TEST_CASE("attribution maps are block-constant, normalized and live") {
  const int T = 5;
  NoiseSchedule sched = NoiseSchedule::linear(T, 1e-4, 0.02);
  CadmModel<float> model(tiny_cfg(), 21);
  Rng hr(22);
  hr.fill_normal(model.params().value("dec.head.w"), 0.05);
  Dataset data = tiny_data(1, 23);

  HeatmapResult res = heatmap_for_pixel(model, data[0].image_a,
                                        data[0].image_b, sched, 444, 9, 6);
  CHECK(res.soft.h() == 16);
  for (std::size_t i = 0; i < res.soft.size(); ++i) {
    CHECK(res.soft[i] >= 0.0f);
    CHECK(res.soft[i] <= 1.0f);
  }

  // maps[0] comes from the 2x2 bottleneck, maps[2] from the 8x8 stage
  const int native[kNumLevels] = {2, 4, 8};
  bool any_live = false;
  for (int k = 0; k < kNumLevels; ++k) {
    const Tensor<float>& mp = res.maps[k];
    REQUIRE(mp.h() == 16);
    REQUIRE(mp.w() == 16);
    const int block = 16 / native[k];
    float mx = 0.0f;
    for (int i = 0; i < 16; ++i)
      for (int j = 0; j < 16; ++j) {
        const float v = mp.at(0, 0, i, j);
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
        // every pixel equals its block's top-left representative
        CHECK(v == mp.at(0, 0, (i / block) * block, (j / block) * block));
        mx = std::max(mx, v);
      }
    if (mx > 0.0f) {
      any_live = true;
      CHECK(mx == 1.0f);  // max-normalized
    }
  }
  CHECK(any_live);

  // deterministic replay
  HeatmapResult res2 = heatmap_for_pixel(model, data[0].image_a,
                                         data[0].image_b, sched, 444, 9, 6);
  for (int k = 0; k < kNumLevels; ++k)
    for (std::size_t i = 0; i < res.maps[k].size(); ++i)
      CHECK(res2.maps[k][i] == res.maps[k][i]);
}

TEST_CASE("the attribution chain is the member-zero sampling chain") {
  const int T = 5;
  NoiseSchedule sched = NoiseSchedule::linear(T, 1e-4, 0.02);
  CadmModel<float> model(tiny_cfg(), 31);
  Rng hr(32);
  hr.fill_normal(model.params().value("dec.head.w"), 0.05);
  Dataset data = tiny_data(1, 33);

  HeatmapResult hm = heatmap_for_pixel(model, data[0].image_a,
                                       data[0].image_b, sched, 777, 0, 0);
  ModelPredictor<float> pred(model);
  SamplerConfig cfg;
  cfg.steps = T;
  cfg.ensemble = 1;
  cfg.seed = 777;
  ChangeMap cm =
      ensemble_infer(pred, data[0].image_a, data[0].image_b, sched, cfg);
  for (std::size_t i = 0; i < cm.soft.size(); ++i)
    CHECK(hm.soft[i] == cm.soft[i]);
}

TEST_CASE("a zero-headed model yields all-zero attribution maps") {
  const int T = 5;
  NoiseSchedule sched = NoiseSchedule::linear(T, 1e-4, 0.02);
  CadmModel<float> model(tiny_cfg(), 41);  // untouched zero head
  Dataset data = tiny_data(1, 42);
  HeatmapResult res = heatmap_for_pixel(model, data[0].image_a,
                                        data[0].image_b, sched, 5, 3, 3);
  for (int k = 0; k < kNumLevels; ++k)
    for (std::size_t i = 0; i < res.maps[k].size(); ++i)
      CHECK(res.maps[k][i] == 0.0f);
}

TEST_CASE("attribution rejects out-of-range pixels") {
  NoiseSchedule sched = NoiseSchedule::linear(5, 1e-4, 0.02);
  CadmModel<float> model(tiny_cfg(), 51);
  Dataset data = tiny_data(1, 52);
  CHECK_THROWS_AS(heatmap_for_pixel(model, data[0].image_a, data[0].image_b,
                                    sched, 1, -1, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(heatmap_for_pixel(model, data[0].image_a, data[0].image_b,
                                    sched, 1, 0, 16),
                  std::invalid_argument);
}

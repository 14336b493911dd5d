// Acceptance harness: prints one PASS/FAIL line per criterion and exits
// non-zero if any fails. The end-to-end criterion trains a full desk-scale
// model, so the whole run takes tens of minutes; progress goes to stderr.
#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cadm/checkpoint.hpp"
#include "cadm/cli.hpp"
#include "cadm/config.hpp"
#include "cadm/data.hpp"
#include "cadm/metrics.hpp"
#include "cadm/predictor.hpp"
#include "cadm/rng.hpp"
#include "cadm/sampler.hpp"
#include "cadm/schedule.hpp"
#include "cadm/training.hpp"

using namespace cadm;
namespace fs = std::filesystem;
using clk = std::chrono::steady_clock;

namespace {

// --- budgets -----------------------------------------------------------
// End-to-end run: desk-scale model (base 32, T=100) on the default synthetic
// split, trained with the shipped default recipe.
constexpr int kE2eEpochs = 20;
constexpr double kE2eLr = 1e-4;
constexpr double kE2eMomentum = 0.99;
constexpr int kE2eBatch = 8;
constexpr double kE2eBudgetMin = 30.0;

// Seeded ablation comparisons: small enough that ten trainings fit in a few
// minutes, large enough that the variants genuinely diverge.
struct AblBudget {
  int image = 32, base = 8, ted = 32;
  int steps = 50, epochs = 6, batch = 4;
  int n_train = 32, n_test = 8, ensemble = 3;
  double lr = 1e-4, momentum = 0.99;
};

struct Outcome {
  bool done = false;
  bool pass = false;
  std::string detail;
};

std::array<Outcome, 10> g_out;

void note(int id, bool pass, std::string detail) {
  g_out[id - 1] = {true, pass, std::move(detail)};
  std::fprintf(stderr, "[acceptance] criterion %d %s (%s)\n", id,
               pass ? "passed" : "FAILED", g_out[id - 1].detail.c_str());
}

void progress(const std::string& msg) {
  std::fprintf(stderr, "[acceptance] %s\n", msg.c_str());
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return "";
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

PredictorConfig tiny_model_cfg() {
  PredictorConfig c;
  c.image_size = 16;
  c.base_channels = 4;
  c.blocks_per_level = 1;
  c.time_embed_dim = 8;
  return c;
}

SyntheticConfig tiny_synth_cfg(std::uint64_t seed) {
  SyntheticConfig c;
  c.size = 16;
  c.n_train = 2;
  c.n_val = 1;
  c.n_test = 1;
  c.seed = seed;
  return c;
}

Tensor<float> randnf(Rng& rng, int n, int c, int h, int w) {
  Tensor<float> t(n, c, h, w);
  rng.fill_normal(t);
  return t;
}

// --- criterion 1: full-scale numbers are documented, not reproduced ----
void crit1_reference_docs() {
  const std::string readme =
      slurp(fs::path(CADM_SOURCE_DIR) / "README.md");
  const std::array<const char*, 4> scores = {"94.93", "92.54", "90.96",
                                             "94.02"};
  bool all = !readme.empty();
  for (const char* s : scores)
    if (readme.find(s) == std::string::npos) all = false;
  const bool marked = readme.find("reference targets") != std::string::npos;
  note(1, all && marked,
       all && marked
           ? "README records the four full-scale F1 targets as reference only"
           : "README is missing the full-scale reference F1 table");
}

// --- criterion 3: analytic gradients match central differences ---------
void crit3_grad_check() {
  CadmModel<double> model(tiny_model_cfg(), 7);
  Rng head_rng(8);
  head_rng.fill_normal(model.params().value("dec.head.w"), 0.05);
  Dataset data = make_synthetic_split(tiny_synth_cfg(3), "train");
  const NoiseSchedule sched = build_schedule(ScheduleConfig{});
  DiffusionLossTarget target(model, data, {0, 1}, sched, 23);
  const GradCheckReport rep = grad_check(target, 60, 1e-4, 5);
  note(3, rep.checked >= 50 && rep.max_rel_err <= 1e-3,
       fmt("max relative error %.3g over %d sampled parameters (budget 1e-3)",
           rep.max_rel_err, rep.checked));
}

// --- criterion 4: forward-process Monte Carlo statistics ---------------
void crit4_forward_stats() {
  const NoiseSchedule sched = build_schedule(ScheduleConfig{});
  const int T = sched.steps();
  const int N = 100000;
  Rng rng(44);
  Tensor<double> x0(1, 1, 4, 4);
  for (std::size_t i = 0; i < x0.size(); ++i)
    x0[i] = 2.0 * rng.uniform() - 1.0;

  double worst_mean_sigma = 0.0, worst_var_rel = 0.0;
  bool pass = true;
  for (const int t : {1, T / 2, T}) {
    const double ab = sched.alpha_bar(t);
    std::array<double, 16> sum{}, sumsq{};
    Tensor<double> eps(1, 1, 4, 4);
    for (int n = 0; n < N; ++n) {
      rng.fill_normal(eps);
      Tensor<double> xt = q_sample(x0, t, eps, sched);
      for (int i = 0; i < 16; ++i) {
        sum[i] += xt[i];
        sumsq[i] += xt[i] * xt[i];
      }
    }
    const double mean_tol = 3.0 * std::sqrt((1.0 - ab) / N);
    for (int i = 0; i < 16; ++i) {
      const double mean = sum[i] / N;
      const double var = (sumsq[i] - N * mean * mean) / (N - 1);
      const double mean_dev = std::abs(mean - std::sqrt(ab) * x0[i]);
      const double var_rel = std::abs(var / (1.0 - ab) - 1.0);
      worst_mean_sigma =
          std::max(worst_mean_sigma, mean_dev / (mean_tol / 3.0));
      worst_var_rel = std::max(worst_var_rel, var_rel);
      if (mean_dev > mean_tol || var_rel > 0.02) pass = false;
    }
  }
  note(4, pass,
       fmt("N=%d, t in {1,%d,%d}: worst mean dev %.2f sigma (limit 3), worst "
           "variance dev %.2f%% (limit 2%%)",
           N, T / 2, T, worst_mean_sigma, worst_var_rel * 100.0));
}

// --- criterion 5: spectral no-op identity ------------------------------
void crit5_spectral_identity() {
  CadmModel<float> model(tiny_model_cfg(), 55);
  const PredictorConfig& mc = model.config();
  for (int k = 0; k < kNumLevels; ++k) {
    const std::string p = "nsse.L" + std::to_string(k);
    Tensor<float>& w = model.params().value(p + ".ns.w");
    w.fill(0.0f);
    for (int c = 0; c < mc.level_channels(k); ++c) w.at(c, c, 0, 0) = 1.0f;
    model.params().value(p + ".ns.b").fill(0.0f);
    model.params().value(p + ".A").fill(1.0f);
  }
  Rng rng(56);
  float worst = 0.0f;
  for (int trial = 0; trial < 20; ++trial) {
    const int k = trial % kNumLevels;
    const int b = 1 + trial % 2;
    Tensor<float> m =
        randnf(rng, b, mc.level_channels(k), mc.level_size(k),
               mc.level_size(k));
    Tensor<float> out = model.noise_suppress(k, m);
    for (std::size_t i = 0; i < m.size(); ++i)
      worst = std::max(worst, std::abs(out[i] - m[i]));
  }
  note(5, worst <= 1e-5f,
       fmt("unit filter + identity pre-conv: max abs deviation %.3g over 20 "
           "grids (budget 1e-5)",
           static_cast<double>(worst)));
}

// --- criterion 6: metric identities and confusion counting -------------
void crit6_metric_oracles() {
  Rng rng(66);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    ConfusionCounts c;
    c.tp = rng.uniform_int(0, 5000);
    c.fp = rng.uniform_int(0, 5000);
    c.fn = rng.uniform_int(0, 5000);
    c.tn = rng.uniform_int(0, 5000);
    const Metrics m = metrics_from_counts(c);
    const double pr = m.precision + m.recall;
    const double f1_ref = pr > 0.0 ? 2.0 * m.precision * m.recall / pr : 0.0;
    const double iou_ref = (2.0 - m.f1) > 0.0 ? m.f1 / (2.0 - m.f1) : 0.0;
    worst = std::max(worst, std::abs(m.f1 - f1_ref));
    worst = std::max(worst, std::abs(m.iou - iou_ref));
  }

  bool counts_exact = true;
  for (int g = 0; g < 100; ++g) {
    Tensor<std::uint8_t> pred(1, 1, 16, 16), gt(1, 1, 16, 16);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      pred[i] = static_cast<std::uint8_t>(rng.uniform_int(0, 1));
      gt[i] = static_cast<std::uint8_t>(rng.uniform_int(0, 1));
    }
    const ConfusionCounts c = confusion(pred, gt);
    ConfusionCounts ref;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (pred[i] && gt[i]) ++ref.tp;
      if (pred[i] && !gt[i]) ++ref.fp;
      if (!pred[i] && gt[i]) ++ref.fn;
      if (!pred[i] && !gt[i]) ++ref.tn;
    }
    if (c.tp != ref.tp || c.fp != ref.fp || c.fn != ref.fn || c.tn != ref.tn)
      counts_exact = false;
  }
  note(6, worst <= 1e-12 && counts_exact,
       fmt("identities hold to %.3g over 1000 tables (budget 1e-12); counts "
           "%s brute force on 100 grids",
           worst, counts_exact ? "match" : "MISMATCH"));
}

// --- criterion 7: swapping the conditions negates the differences ------
void crit7_antisymmetry() {
  CadmModel<float> model(tiny_model_cfg(), 77);
  Rng rng(78);
  float worst = 0.0f;
  for (int trial = 0; trial < 10; ++trial) {
    AblationFlags fl;
    fl.use_nsse = trial % 2 == 0;
    Tensor<float> ia = randnf(rng, 1, 3, 16, 16);
    Tensor<float> ib = randnf(rng, 1, 3, 16, 16);
    Tensor<float> xt = randnf(rng, 1, 1, 16, 16);
    auto d1 = model.dif_features(model.encode_branches(xt, ia, ib), fl);
    auto d2 = model.dif_features(model.encode_branches(xt, ib, ia), fl);
    for (int k = 0; k < kNumLevels; ++k)
      for (std::size_t i = 0; i < d1[k].size(); ++i)
        worst = std::max(worst, std::abs(d1[k][i] + d2[k][i]));
  }
  note(7, worst <= 1e-5f,
       fmt("max abs deviation from exact negation %.3g over 10 swaps "
           "(budget 1e-5)",
           static_cast<double>(worst)));
}

// --- criteria 9/10 share the small ablation budget ---------------------
RunConfig abl_config(const AblBudget& b, std::uint64_t seed) {
  RunConfig c;
  c.schedule.steps = b.steps;
  c.sampler.steps = b.steps;
  c.sampler.ensemble = b.ensemble;
  c.sampler.seed = seed;
  c.model.image_size = b.image;
  c.model.base_channels = b.base;
  c.model.time_embed_dim = b.ted;
  c.train.epochs = b.epochs;
  c.train.batch_size = b.batch;
  c.train.learning_rate = b.lr;
  c.train.momentum = b.momentum;
  c.train.seed = seed;
  c.synthetic.size = b.image;
  c.synthetic.n_train = b.n_train;
  c.synthetic.n_val = 1;
  c.synthetic.n_test = b.n_test;
  c.synthetic.seed = seed;
  c.validate();
  return c;
}

void crit10_ablation() {
  // table structure on a micro budget
  RunConfig micro = abl_config(
      {.image = 16, .base = 4, .ted = 8, .steps = 5, .epochs = 1, .batch = 2,
       .n_train = 2, .n_test = 1, .ensemble = 1},
      1);
  progress("criterion 10: micro ablation grid");
  const std::vector<AblationRow> rows = run_ablation(micro);
  const std::array<const char*, 4> want_scales = {"3", "2+3", "1+2+3",
                                                  "1+2+3"};
  const std::array<bool, 4> want_nsse = {true, true, true, false};
  bool table_ok = rows.size() == 4;
  for (std::size_t i = 0; table_ok && i < rows.size(); ++i)
    table_ok = rows[i].scales == want_scales[i] &&
               rows[i].use_nsse == want_nsse[i];

  // directional check: full vs spectral-module-off across 5 seeds
  const AblBudget budget;
  int wins = 0;
  std::string detail;
  for (int s = 0; s < 5; ++s) {
    progress(fmt("criterion 10: seed %d of 5", s + 1));
    RunConfig full = abl_config(budget, 100 + s);
    RunConfig off = full;
    off.use_nsse = false;
    const double f_full = train_and_eval(full, full.flags()).f1;
    const double f_off = train_and_eval(off, off.flags()).f1;
    if (f_full >= f_off) ++wins;
    detail += fmt("%s%.3f vs %.3f", s ? ", " : "", f_full, f_off);
  }
  note(10, table_ok && wins >= 3,
       fmt("grid %s; full >= spectral-off in %d of 5 seeded repeats (F1: %s)",
           table_ok ? "emits all four variants" : "MALFORMED", wins,
           detail.c_str()));
}

void crit9_ensemble_variance() {
  const AblBudget budget;
  RunConfig cfg = abl_config(budget, 500);
  progress("criterion 9: training the shared small model");
  const NoiseSchedule sched = build_schedule(cfg.schedule);
  CadmModel<float> model(cfg.model, cfg.train.seed, &sched);
  Trainer tr(model, cfg.train, sched, cfg.flags());
  tr.run(make_synthetic_split(cfg.synthetic, "train"), {});
  ModelPredictor<float> pred(model, cfg.flags());

  const Dataset test = make_synthetic_split(cfg.synthetic, "test");
  const BitemporalPair& pair = test[0];
  const int reps = 5;
  std::vector<Tensor<float>> ens, single;
  for (int r = 0; r < reps; ++r) {
    progress(fmt("criterion 9: repetition %d of %d", r + 1, reps));
    SamplerConfig se = cfg.sampler;
    se.ensemble = 25;
    se.seed = 9000 + r;
    ens.push_back(
        ensemble_infer(pred, pair.image_a, pair.image_b, sched, se).soft);
    se.ensemble = 1;
    se.seed = 9500 + r;
    single.push_back(
        ensemble_infer(pred, pair.image_a, pair.image_b, sched, se).soft);
  }
  auto mean_pixel_std = [&](const std::vector<Tensor<float>>& maps) {
    const std::size_t n = maps[0].size();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0, s2 = 0.0;
      for (const auto& m : maps) {
        s += m[i];
        s2 += static_cast<double>(m[i]) * m[i];
      }
      const double mean = s / reps;
      acc += std::sqrt(std::max(0.0, s2 / reps - mean * mean));
    }
    return acc / static_cast<double>(n);
  };
  const double sd_ens = mean_pixel_std(ens);
  const double sd_single = mean_pixel_std(single);
  note(9, sd_ens < sd_single,
       fmt("mean per-pixel std: 25-member ensembles %.4f vs single chains "
           "%.4f over 5 seeded repetitions",
           sd_ens, sd_single));
}

// --- criterion 2: synthetic end-to-end under the desk budget -----------
// Returns the trained checkpoint path (empty on failure) for criterion 8.
std::string crit2_end_to_end(const fs::path& work) {
  RunConfig cfg;  // default synthetic split, desk-scale model, T=100
  cfg.train.epochs = kE2eEpochs;
  cfg.train.learning_rate = kE2eLr;
  cfg.train.momentum = kE2eMomentum;
  cfg.train.batch_size = kE2eBatch;
  cfg.validate();

  const NoiseSchedule sched = build_schedule(cfg.schedule);
  CadmModel<float> model(cfg.model, cfg.train.seed, &sched);
  Trainer tr(model, cfg.train, sched, cfg.flags());
  Dataset train = make_synthetic_split(cfg.synthetic, "train");
  Dataset val = make_synthetic_split(cfg.synthetic, "val");
  Dataset test = make_synthetic_split(cfg.synthetic, "test");

  const auto t0 = clk::now();
  tr.run(train, val, [&](const EpochLog& el) {
    progress(fmt("criterion 2: epoch %d/%d  loss %.4f  val_f1 %.3f",
                 el.epoch + 1, cfg.train.epochs, el.train_loss, el.val_f1));
  });
  progress("criterion 2: ensemble-5 evaluation over 50 test pairs");
  ModelPredictor<float> pred(model, cfg.flags());
  const EvalResult res = evaluate_dataset(pred, test, sched, cfg.sampler);
  const double minutes =
      std::chrono::duration<double>(clk::now() - t0).count() / 60.0;

  const bool pass = res.metrics.f1 >= 0.80 && minutes <= kE2eBudgetMin;
  note(2, pass,
       fmt("pooled F1 %.4f (target 0.80), iou %.4f, %.1f min of %.0f min "
           "budget",
           res.metrics.f1, res.metrics.iou, minutes, kE2eBudgetMin));

  const fs::path ckpt = work / "e2e.ckpt";
  save_checkpoint(ckpt.string(), cfg, cfg.train.epochs, tr.rng().save_state(),
                  model.params(), tr.optimizer());
  std::ofstream(work / "e2e.cfg") << serialize_config(cfg);
  return ckpt.string();
}

// --- criterion 8: repeated evaluation is byte-identical ----------------
void crit8_determinism(const fs::path& work, const std::string& ckpt) {
  if (ckpt.empty() || !fs::exists(ckpt)) {
    note(8, false, "no trained checkpoint available");
    return;
  }
  // a 2-pair subset keeps the two full eval runs short
  RunConfig cfg = load_config_file((work / "e2e.cfg").string());
  Dataset test = make_synthetic_split(cfg.synthetic, "test");
  test.resize(2);
  const fs::path root = work / "subset";
  write_dataset(root.string(), "test", test);

  auto run_eval = [&](const fs::path& out) {
    const std::string cfg_path = (work / "e2e.cfg").string();
    const std::string root_s = root.string();
    const std::string out_s = out.string();
    const char* argv[] = {"cadm",         "eval", "--config",
                          cfg_path.c_str(), "--checkpoint", ckpt.c_str(),
                          "--data-root",  root_s.c_str(), "--out",
                          out_s.c_str()};
    return run_cli(static_cast<int>(std::size(argv)), argv);
  };
  progress("criterion 8: first evaluation run");
  const int rc1 = run_eval(work / "det1");
  progress("criterion 8: second evaluation run");
  const int rc2 = run_eval(work / "det2");

  bool same = rc1 == 0 && rc2 == 0;
  same = same && slurp(work / "det1" / "metrics.csv") ==
                     slurp(work / "det2" / "metrics.csv");
  int maps = 0;
  for (const char* sub : {"soft", "binary"})
    for (const auto& e : fs::directory_iterator(work / "det1" / sub)) {
      ++maps;
      if (slurp(e.path()) !=
          slurp(work / "det2" / sub / e.path().filename()))
        same = false;
    }
  note(8, same && maps == 4,
       same ? fmt("two runs: metrics row and %d maps byte-identical", maps)
            : "repeated runs differ");
}

}  // namespace

int main() {
  const fs::path work = fs::temp_directory_path() / "cadm_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  crit1_reference_docs();
  crit3_grad_check();
  crit4_forward_stats();
  crit5_spectral_identity();
  crit6_metric_oracles();
  crit7_antisymmetry();
  crit10_ablation();
  crit9_ensemble_variance();
  const std::string ckpt = crit2_end_to_end(work);
  crit8_determinism(work, ckpt);

  static const std::array<const char*, 10> titles = {
      "full-scale results documented as reference targets only",
      "synthetic end-to-end pooled F1 within the desk budget",
      "analytic gradients match central differences",
      "forward-process Monte Carlo mean and variance",
      "spectral no-op identity",
      "metric identities and exact confusion counting",
      "Siamese difference antisymmetry",
      "byte-identical repeated evaluation",
      "ensemble averaging reduces per-pixel variance",
      "ablation grid and directional spectral-module benefit",
  };
  int passed = 0;
  std::printf("\n");
  for (int i = 0; i < 10; ++i) {
    const Outcome& o = g_out[i];
    std::printf("criterion %2d: %s  %s — %s\n", i + 1,
                o.pass ? "PASS" : "FAIL", titles[i], o.detail.c_str());
    passed += o.pass;
  }
  std::printf("acceptance: %d/10 criteria passed\n", passed);
  return passed == 10 ? 0 : 1;
}

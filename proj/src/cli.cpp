#include "cadm/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <utility>

#include "CLI11.hpp"

#include "cadm/checkpoint.hpp"
#include "cadm/image_io.hpp"
#include "cadm/sampler.hpp"
#include "cadm/training.hpp"

namespace fs = std::filesystem;

namespace cadm {
namespace {

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string fmtg(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.8g", v);
  return buf;
}

Dataset load_pairs(const RunConfig& cfg, const std::string& split) {
  if (cfg.data_root.empty()) return make_synthetic_split(cfg.synthetic, split);
  return load_split(cfg.data_root, split);
}

std::string default_dataset_name(const RunConfig& cfg) {
  if (cfg.data_root.empty()) return "synthetic";
  fs::path p(cfg.data_root);
  std::string base = p.filename().string();
  if (base.empty()) base = p.parent_path().filename().string();
  return base.empty() ? std::string("dataset") : base;
}

std::string strip_png(const std::string& name) {
  if (name.size() > 4 && name.compare(name.size() - 4, 4, ".png") == 0)
    return name.substr(0, name.size() - 4);
  return name;
}

void write_soft_png(const std::string& path, const Tensor<float>& t) {
  ImageU8 img{1, t.h(), t.w(),
              std::vector<std::uint8_t>(static_cast<std::size_t>(t.h()) * t.w())};
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const float v = std::clamp(t[i], 0.0f, 1.0f);
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
  }
  write_png(path, img);
}

void write_mask_png(const std::string& path, const Tensor<std::uint8_t>& t) {
  ImageU8 img{1, t.h(), t.w(),
              std::vector<std::uint8_t>(static_cast<std::size_t>(t.h()) * t.w())};
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    img.pixels[i] = t[i] ? 255 : 0;
  write_png(path, img);
}

void append_metrics_row(const std::string& csv, const std::string& dataset,
                        const std::string& split, const std::string& tag,
                        const Metrics& m) {
  const bool fresh = !fs::exists(csv);
  std::ofstream out(csv, std::ios::app);
  if (!out) throw std::runtime_error("eval: cannot write " + csv);
  if (fresh) out << "dataset,split,method_tag,recall,precision,oa,f1,iou\n";
  out << dataset << ',' << split << ',' << tag << ',' << fmt6(m.recall) << ','
      << fmt6(m.precision) << ',' << fmt6(m.oa) << ',' << fmt6(m.f1) << ','
      << fmt6(m.iou) << "\n";
}

Dataset tile_dataset(const Dataset& data, int tile, bool pad) {
  Dataset out;
  for (const BitemporalPair& p : data) {
    const TileGrid grid = make_tile_grid(p.image_a.h(), p.image_a.w(), tile, pad);
    auto ta = tile_image(p.image_a, grid);
    auto tb = tile_image(p.image_b, grid);
    auto tl = tile_image(p.label, grid);
    const std::string base = strip_png(p.name);
    for (int i = 0; i < grid.count(); ++i) {
      char suf[32];
      std::snprintf(suf, sizeof suf, "_r%02dc%02d.png", i / grid.cols,
                    i % grid.cols);
      out.push_back({base + suf, std::move(ta[i]), std::move(tb[i]),
                     std::move(tl[i])});
    }
  }
  return out;
}

std::string model_diff(const PredictorConfig& a, const PredictorConfig& b) {
  auto d = [](const char* k, int x, int y) {
    return std::string(k) + " " + std::to_string(x) + " vs " +
           std::to_string(y);
  };
  if (a.image_size != b.image_size)
    return d("image_size", a.image_size, b.image_size);
  if (a.image_channels != b.image_channels)
    return d("image_channels", a.image_channels, b.image_channels);
  if (a.base_channels != b.base_channels)
    return d("base_channels", a.base_channels, b.base_channels);
  if (a.blocks_per_level != b.blocks_per_level)
    return d("blocks_per_level", a.blocks_per_level, b.blocks_per_level);
  return d("time_embed_dim", a.time_embed_dim, b.time_embed_dim);
}

struct LoadedModel {
  CadmModel<float> model;
  CheckpointMeta meta;
};

// user_cfg non-null: the caller supplied a config whose model section must
// match the checkpoint's.
LoadedModel load_model(const std::string& path, const RunConfig* user_cfg) {
  CheckpointMeta meta = peek_checkpoint(path);
  if (user_cfg && !(user_cfg->model == meta.config.model))
    throw std::runtime_error("checkpoint/config incompatibility: " +
                             model_diff(user_cfg->model, meta.config.model));
  const NoiseSchedule sched = build_schedule(meta.config.schedule);
  CadmModel<float> model(meta.config.model, meta.config.train.seed, &sched);
  MomentumSgd<float> opt(model.params());
  meta = load_checkpoint(path, model.params(), opt);
  return {std::move(model), std::move(meta)};
}

std::string join_plus(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += "+";
    s += std::to_string(v[i]);
  }
  return s;
}

}  // namespace

RunConfig resolve_config(const CliOptions& opt) {
  RunConfig cfg = opt.config_path.empty() ? RunConfig{}
                                          : load_config_file(opt.config_path);
  if (opt.seed) {
    cfg.train.seed = *opt.seed;
    cfg.sampler.seed = *opt.seed;
    cfg.synthetic.seed = *opt.seed;
  }
  if (opt.steps) cfg.schedule.steps = *opt.steps;
  if (opt.ensemble) cfg.sampler.ensemble = *opt.ensemble;
  if (!opt.scales.empty()) cfg.scales = opt.scales;
  if (opt.no_nsse) cfg.use_nsse = false;
  if (!opt.data_root.empty()) cfg.data_root = opt.data_root;
  cfg.sampler.steps = cfg.schedule.steps;
  cfg.validate();
  return cfg;
}

int cmd_train(const CliOptions& opt) {
  const RunConfig cfg = resolve_config(opt);
  const fs::path out(opt.out_dir);
  fs::create_directories(out / "checkpoints");

  const NoiseSchedule sched = build_schedule(cfg.schedule);
  CadmModel<float> model(cfg.model, cfg.train.seed, &sched);
  Trainer tr(model, cfg.train, sched, cfg.flags());

  const bool resuming = !opt.checkpoint.empty();
  if (resuming) {
    CheckpointMeta meta =
        load_checkpoint(opt.checkpoint, model.params(), tr.optimizer());
    if (!(meta.config.model == cfg.model))
      throw std::runtime_error("checkpoint/config incompatibility: " +
                               model_diff(cfg.model, meta.config.model));
    tr.set_next_epoch(meta.epoch);
    tr.rng().load_state(meta.rng_state);
    std::printf("resumed %s after epoch %d\n", opt.checkpoint.c_str(),
                meta.epoch);
  }

  const Dataset train = load_pairs(cfg, "train");
  Dataset val;
  try {
    val = load_pairs(cfg, "val");
  } catch (const std::exception& e) {
    std::fprintf(stderr, "warning: validation split unavailable (%s)\n",
                 e.what());
  }

  const std::string log_path = (out / "log.csv").string();
  const bool append = resuming && fs::exists(log_path);
  std::ofstream log(log_path, append ? std::ios::app : std::ios::trunc);
  if (!log) throw std::runtime_error("train: cannot write " + log_path);
  if (!append) log << "epoch,train_loss,val_f1,lr\n";

  const std::string latest = (out / "checkpoints" / "latest.ckpt").string();
  tr.run(train, val, [&](const EpochLog& el) {
    log << el.epoch << ',' << fmtg(el.train_loss) << ',' << fmtg(el.val_f1)
        << ',' << fmtg(el.lr) << "\n";
    log.flush();
    char name[32];
    std::snprintf(name, sizeof name, "epoch_%03d.ckpt", el.epoch + 1);
    const std::string state = tr.rng().save_state();
    save_checkpoint((out / "checkpoints" / name).string(), cfg, el.epoch + 1,
                    state, model.params(), tr.optimizer());
    save_checkpoint(latest, cfg, el.epoch + 1, state, model.params(),
                    tr.optimizer());
    std::printf("epoch %d/%d  loss %.6f  val_f1 %.4f  lr %.3g\n", el.epoch + 1,
                cfg.train.epochs, el.train_loss, el.val_f1, el.lr);
    std::fflush(stdout);
  });
  std::printf("training done; latest checkpoint: %s\n", latest.c_str());
  return 0;
}

int cmd_eval(const CliOptions& opt) {
  const RunConfig cfg = resolve_config(opt);
  const fs::path out(opt.out_dir);
  fs::create_directories(out / "soft");
  fs::create_directories(out / "binary");

  Dataset data = load_pairs(cfg, opt.split);
  if (opt.tile > 0) data = tile_dataset(data, opt.tile, opt.pad_tiles);
  if (data.empty()) throw std::runtime_error("eval: empty dataset");

  const std::string dataset_col =
      opt.dataset_name.empty() ? default_dataset_name(cfg) : opt.dataset_name;
  const std::string csv = (out / "metrics.csv").string();

  EvalResult res;
  std::string tag;
  if (opt.bypass_gt) {
    // Pipeline check: score the ground truth against itself.
    tag = "gt-bypass";
    for (const BitemporalPair& p : data) {
      ChangeMap cm{p.label, Tensor<std::uint8_t>(1, 1, p.label.h(),
                                                 p.label.w())};
      for (std::size_t i = 0; i < p.label.size(); ++i)
        cm.binary[i] = p.label[i] > 0.5f ? 1 : 0;
      const ConfusionCounts cc = confusion(cm.binary, cm.binary);
      res.counts += cc;
      res.per_pair.emplace_back(p.name, cc);
      write_soft_png((out / "soft" / p.name).string(), cm.soft);
      write_mask_png((out / "binary" / p.name).string(), cm.binary);
    }
    res.metrics = metrics_from_counts(res.counts);
  } else {
    if (opt.checkpoint.empty())
      throw std::runtime_error("eval: --checkpoint required (or --bypass-gt)");
    LoadedModel lm =
        load_model(opt.checkpoint, opt.config_path.empty() ? nullptr : &cfg);
    tag = cfg.method_tag;
    const NoiseSchedule sched = build_schedule(cfg.schedule);
    ModelPredictor<float> pred(lm.model, cfg.flags());
    res = evaluate_dataset(
        pred, data, sched, cfg.sampler,
        [&](const std::string& name, const ChangeMap& cm) {
          write_soft_png((out / "soft" / name).string(), cm.soft);
          write_mask_png((out / "binary" / name).string(), cm.binary);
        });
  }

  append_metrics_row(csv, dataset_col, opt.split, tag, res.metrics);
  if (opt.per_tile)
    for (const auto& [name, cc] : res.per_pair)
      append_metrics_row(csv, dataset_col, opt.split + "/" + strip_png(name),
                         tag, metrics_from_counts(cc));

  const Metrics& m = res.metrics;
  std::printf(
      "%s/%s [%s]  recall %.4f  precision %.4f  oa %.4f  f1 %.4f  iou %.4f  "
      "(%zu pairs)\n",
      dataset_col.c_str(), opt.split.c_str(), tag.c_str(), m.recall,
      m.precision, m.oa, m.f1, m.iou, data.size());
  return 0;
}

Metrics train_and_eval(const RunConfig& cfg, const AblationFlags& fl) {
  const NoiseSchedule sched = build_schedule(cfg.schedule);
  CadmModel<float> model(cfg.model, cfg.train.seed, &sched);
  Trainer tr(model, cfg.train, sched, fl);
  tr.run(load_pairs(cfg, "train"), {});
  ModelPredictor<float> pred(model, fl);
  return evaluate_dataset(pred, load_pairs(cfg, "test"), sched, cfg.sampler)
      .metrics;
}

std::vector<AblationRow> run_ablation(const RunConfig& cfg) {
  const std::vector<std::pair<std::vector<int>, bool>> grid = {
      {{3}, true}, {{2, 3}, true}, {{1, 2, 3}, true}, {{1, 2, 3}, false}};
  std::vector<AblationRow> rows;
  for (const auto& [sc, nsse] : grid) {
    RunConfig vc = cfg;
    vc.scales = sc;
    vc.use_nsse = nsse;
    std::printf("ablate: scales %s, nsse %s ...\n", join_plus(sc).c_str(),
                nsse ? "on" : "off");
    std::fflush(stdout);
    rows.push_back({join_plus(sc), nsse, train_and_eval(vc, vc.flags())});
  }
  return rows;
}

int cmd_ablate(const CliOptions& opt) {
  const RunConfig cfg = resolve_config(opt);
  const std::vector<AblationRow> rows = run_ablation(cfg);

  const fs::path out(opt.out_dir);
  fs::create_directories(out);
  std::ofstream csv(out / "ablation.csv", std::ios::trunc);
  if (!csv) throw std::runtime_error("ablate: cannot write ablation.csv");
  csv << "scales,nsse,oa,f1,iou\n";
  std::printf("%-8s %-5s %8s %8s %8s\n", "scales", "nsse", "oa", "f1", "iou");
  for (const AblationRow& r : rows) {
    csv << r.scales << ',' << (r.use_nsse ? "on" : "off") << ','
        << fmt6(r.metrics.oa) << ',' << fmt6(r.metrics.f1) << ','
        << fmt6(r.metrics.iou) << "\n";
    std::printf("%-8s %-5s %8.4f %8.4f %8.4f\n", r.scales.c_str(),
                r.use_nsse ? "on" : "off", r.metrics.oa, r.metrics.f1,
                r.metrics.iou);
  }
  return 0;
}

int cmd_heatmap(const CliOptions& opt) {
  const RunConfig cfg = resolve_config(opt);
  if (opt.checkpoint.empty())
    throw std::runtime_error("heatmap: --checkpoint required");
  if (opt.px < 0 || opt.py < 0)
    throw std::runtime_error("heatmap: --px and --py required");

  LoadedModel lm =
      load_model(opt.checkpoint, opt.config_path.empty() ? nullptr : &cfg);
  const Dataset data = load_pairs(cfg, opt.split);
  if (data.empty()) throw std::runtime_error("heatmap: empty dataset");
  const BitemporalPair* pair = &data[0];
  if (!opt.pair.empty()) {
    pair = nullptr;
    for (const BitemporalPair& p : data)
      if (p.name == opt.pair || strip_png(p.name) == opt.pair) pair = &p;
    if (!pair)
      throw std::runtime_error("heatmap: no pair named '" + opt.pair + "' in " +
                               opt.split);
  }

  const NoiseSchedule sched = build_schedule(cfg.schedule);
  HeatmapResult hm =
      heatmap_for_pixel(lm.model, pair->image_a, pair->image_b, sched,
                        cfg.sampler.seed, opt.py, opt.px, cfg.flags());

  const fs::path out(opt.out_dir);
  fs::create_directories(out);
  write_soft_png((out / "soft.png").string(), hm.soft);
  for (int k = 0; k < kNumLevels; ++k) {
    // maps[0] is the coarsest stage = scale 3; emitted smallest scale first.
    const std::string file = "heatmap_scale" + std::to_string(kNumLevels - k) +
                             ".png";
    write_soft_png((out / file).string(), hm.maps[k]);
    std::printf("wrote %s\n", (out / file).string().c_str());
  }
  std::printf("wrote %s (pair %s, pixel x=%d y=%d)\n",
              (out / "soft.png").string().c_str(), pair->name.c_str(), opt.px,
              opt.py);
  return 0;
}

int cmd_synth(const CliOptions& opt) {
  const RunConfig cfg = resolve_config(opt);
  for (const char* split : {"train", "val", "test"}) {
    const Dataset data = make_synthetic_split(cfg.synthetic, split);
    write_dataset(opt.out_dir, split, data);
    std::printf("wrote %zu %s pairs under %s\n", data.size(), split,
                opt.out_dir.c_str());
  }
  return 0;
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"change-aware denoising diffusion for bitemporal change detection"};
  app.require_subcommand(1);
  CliOptions opt;

  auto common = [&](CLI::App* c) {
    c->add_option("--config", opt.config_path,
                  "config file (key = value under [section]s)");
    c->add_option("--seed", opt.seed,
                  "override the train/sampler/synthetic seeds");
    c->add_option("--out", opt.out_dir, "output directory (default: out)");
  };

  CLI::App* t = app.add_subcommand(
      "train", "train a model; writes per-epoch checkpoints and log.csv");
  common(t);
  t->add_option("--data-root", opt.data_root,
                "dataset root (A/, B/, label/, list/); default: synthetic");
  t->add_option("--resume", opt.checkpoint, "checkpoint to resume from");

  CLI::App* e = app.add_subcommand(
      "eval", "evaluate a checkpoint; writes maps and appends metrics.csv");
  common(e);
  e->add_option("--checkpoint", opt.checkpoint, "trained checkpoint");
  e->add_option("--data-root", opt.data_root, "dataset root; default: synthetic");
  e->add_option("--split", opt.split, "train|val|test (default: test)");
  e->add_option("--dataset", opt.dataset_name, "dataset column for metrics.csv");
  e->add_option("--steps", opt.steps, "respaced chain length");
  e->add_option("--ensemble", opt.ensemble, "chains averaged per pair");
  e->add_option("--scales", opt.scales, "active difference scales, e.g. 1,2,3")
      ->delimiter(',');
  e->add_flag("--no-nsse", opt.no_nsse, "disable the spectral enhancer");
  e->add_flag("--bypass-gt", opt.bypass_gt,
              "score ground truth against itself (pipeline check)");
  e->add_flag("--per-tile", opt.per_tile, "append one metrics row per pair");
  e->add_option("--tile", opt.tile, "cut pairs into tiles of this side");
  e->add_flag("--pad", opt.pad_tiles,
              "zero-pad edge tiles instead of dropping remainders");

  CLI::App* a = app.add_subcommand(
      "ablate", "train/evaluate the four-variant scale/enhancer grid");
  common(a);
  a->add_option("--data-root", opt.data_root, "dataset root; default: synthetic");
  a->add_option("--steps", opt.steps, "respaced chain length");
  a->add_option("--ensemble", opt.ensemble, "chains averaged per pair");

  CLI::App* h = app.add_subcommand(
      "heatmap", "per-scale attribution maps for one output pixel");
  common(h);
  h->add_option("--checkpoint", opt.checkpoint, "trained checkpoint");
  h->add_option("--data-root", opt.data_root, "dataset root; default: synthetic");
  h->add_option("--split", opt.split, "split holding the pair (default: test)");
  h->add_option("--pair", opt.pair, "pair name (default: first in split)");
  h->add_option("--px", opt.px, "pixel x (column)");
  h->add_option("--py", opt.py, "pixel y (row)");
  h->add_option("--steps", opt.steps, "respaced chain length");
  h->add_option("--scales", opt.scales, "active difference scales")
      ->delimiter(',');
  h->add_flag("--no-nsse", opt.no_nsse, "disable the spectral enhancer");

  CLI::App* s = app.add_subcommand(
      "synth", "write the synthetic dataset to --out in on-disk layout");
  common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& pe) {
    return app.exit(pe);
  }

  try {
    if (t->parsed()) return cmd_train(opt);
    if (e->parsed()) return cmd_eval(opt);
    if (a->parsed()) return cmd_ablate(opt);
    if (h->parsed()) return cmd_heatmap(opt);
    if (s->parsed()) return cmd_synth(opt);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 1;
  }
  return 1;
}

}  // namespace cadm

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cadm/config.hpp"
#include "cadm/metrics.hpp"

namespace cadm {

// Parsed command line; optionals are "not given, keep the config value".
struct CliOptions {
  std::string config_path;
  std::string out_dir = "out";
  std::string checkpoint;   // eval/heatmap input; train resume point
  std::string data_root;    // overrides [run] data_root
  std::string split = "test";
  std::string dataset_name; // CSV dataset column; defaults from the source
  std::string pair;         // heatmap pair name; defaults to the first
  std::optional<std::uint64_t> seed;  // overrides train/sampler/synth seeds
  std::optional<int> steps;
  std::optional<int> ensemble;
  std::vector<int> scales;  // empty: keep config
  bool no_nsse = false;
  bool bypass_gt = false;
  bool per_tile = false;
  bool pad_tiles = false;
  int tile = 0;             // eval: cut pairs into tiles of this side
  int px = -1, py = -1;     // heatmap pixel (x, y)
};

// Loads the config (defaults when no path) and applies flag overrides.
RunConfig resolve_config(const CliOptions& opt);

int cmd_train(const CliOptions& opt);
int cmd_eval(const CliOptions& opt);
int cmd_ablate(const CliOptions& opt);
int cmd_heatmap(const CliOptions& opt);
int cmd_synth(const CliOptions& opt);

// Trains a fresh model under `fl` and returns pooled test metrics; the
// ablation grid and the seeded comparisons are built on this.
Metrics train_and_eval(const RunConfig& cfg, const AblationFlags& fl);

struct AblationRow {
  std::string scales;
  bool use_nsse = true;
  Metrics metrics;
};
// The four-variant grid: scales {3}, {2,3}, {1,2,3} and full minus the
// spectral enhancer; identical seeds and budget across rows.
std::vector<AblationRow> run_ablation(const RunConfig& cfg);

// Full argv dispatch; returns a process exit code and reports errors on
// stderr.
int run_cli(int argc, const char* const* argv);

}  // namespace cadm

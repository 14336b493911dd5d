#pragma once

#include <string>
#include <vector>

#include "cadm/data.hpp"
#include "cadm/predictor.hpp"
#include "cadm/sampler.hpp"
#include "cadm/schedule.hpp"
#include "cadm/training.hpp"

namespace cadm {

// A run's chain is defined by a canonical linear schedule of base_steps and
// respaced down to `steps` for desk-scale training/sampling.
struct ScheduleConfig {
  int base_steps = 1000;
  int steps = 100;
  double beta_start = 1e-4;
  double beta_end = 0.02;

  void validate() const;
  bool operator==(const ScheduleConfig&) const = default;
};

NoiseSchedule build_schedule(const ScheduleConfig& sc);

// Everything a command needs; sections mirror the nested structs. The
// sampler's step count is not a key of its own — it always follows
// [schedule] steps.
struct RunConfig {
  ScheduleConfig schedule;
  PredictorConfig model;
  TrainConfig train;
  SamplerConfig sampler;
  SyntheticConfig synthetic;
  std::vector<int> scales = {1, 2, 3};
  bool use_nsse = true;
  std::string data_root;  // empty: use the synthetic generator
  std::string method_tag = "cadm";

  AblationFlags flags() const { return flags_from_scales(scales, use_nsse); }
  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

// Flat `key = value` lines under [section] headers; '#' and ';' start
// comments. Unknown sections/keys and malformed values are errors that name
// file:line. parse(serialize(c)) == c for any valid c.
RunConfig parse_config(const std::string& text,
                       const std::string& filename = "<config>");
RunConfig load_config_file(const std::string& path);
std::string serialize_config(const RunConfig& cfg);

}  // namespace cadm

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "cadm/config.hpp"
#include "doctest.h"

using namespace cadm;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text, "test.cfg");
  } catch (const std::invalid_argument& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("a default config survives the serialize/parse loop") {
  RunConfig def;
  RunConfig back = parse_config(serialize_config(def));
  CHECK(back == def);
}

TEST_CASE("every field kind round-trips") {
  RunConfig c;
  c.schedule.base_steps = 500;
  c.schedule.steps = 25;
  c.schedule.beta_start = 3.5e-4;
  c.schedule.beta_end = 0.0125;
  c.model.image_size = 32;
  c.model.base_channels = 12;
  c.train.epochs = 7;
  c.train.learning_rate = 2.5e-3;
  c.train.seed = 0xDEADBEEFull;
  c.sampler.steps = 25;  // follows the schedule
  c.sampler.ensemble = 3;
  c.sampler.threshold = 0.375;
  c.synthetic.size = 32;
  c.synthetic.noise_level = 0.015;
  c.scales = {2, 3};
  c.use_nsse = false;
  c.data_root = "/data/levir";
  c.method_tag = "ablation-a";
  c.validate();
  RunConfig back = parse_config(serialize_config(c));
  CHECK(back == c);
}

TEST_CASE("comments, blank lines and spacing are tolerated") {
  const std::string text =
      "# leading comment\n"
      "\n"
      "[ schedule ]\n"
      "  steps   =   50   ; trailing comment\n"
      "base_steps=1000\n"
      "\n"
      "[run]\n"
      "scales = 1 , 2 , 3\n";
  RunConfig c = parse_config(text);
  CHECK(c.schedule.steps == 50);
  CHECK(c.schedule.base_steps == 1000);
  CHECK(c.scales == std::vector<int>{1, 2, 3});
  // the sampler's step count silently follows the schedule
  CHECK(c.sampler.steps == 50);
}

TEST_CASE("parse errors name the file and line") {
  std::string msg = error_of("[schedule]\nstep = 5\n");
  CHECK(msg.find("test.cfg:2:") != std::string::npos);
  CHECK(msg.find("unknown key 'step'") != std::string::npos);

  msg = error_of("[scheduler]\nsteps = 5\n");
  CHECK(msg.find("test.cfg:2:") != std::string::npos);
  CHECK(msg.find("unknown section [scheduler]") != std::string::npos);

  msg = error_of("[schedule\nsteps = 5\n");
  CHECK(msg.find("test.cfg:1:") != std::string::npos);
  CHECK(msg.find("malformed section header") != std::string::npos);

  msg = error_of("[schedule]\nsteps\n");
  CHECK(msg.find("test.cfg:2:") != std::string::npos);
  CHECK(msg.find("expected 'key = value'") != std::string::npos);

  msg = error_of("steps = 5\n");
  CHECK(msg.find("test.cfg:1:") != std::string::npos);
  CHECK(msg.find("outside a section") != std::string::npos);

  msg = error_of("[schedule]\n= 5\n");
  CHECK(msg.find("missing key before '='") != std::string::npos);

  msg = error_of("[schedule]\nsteps = fifty\n");
  CHECK(msg.find("test.cfg:2:") != std::string::npos);
  CHECK(msg.find("bad value for 'steps'") != std::string::npos);

  msg = error_of("[run]\nuse_nsse = yes\n");
  CHECK(msg.find("bad boolean for 'use_nsse'") != std::string::npos);

  msg = error_of("[run]\nscales =\n");
  CHECK(msg.find("scales list is empty") != std::string::npos);

  msg = error_of("[run]\nscales = 1,,3\n");
  CHECK(msg.find("empty entry in scales list") != std::string::npos);

  // sampler steps is not a key; it always follows the schedule
  msg = error_of("[sampler]\nsteps = 50\n");
  CHECK(msg.find("unknown key 'steps' in [sampler]") != std::string::npos);
}

TEST_CASE("whole-config validation failures carry the filename") {
  std::string msg = error_of("[schedule]\nsteps = 2000\n");
  CHECK(msg.rfind("test.cfg: ", 0) == 0);
  CHECK(msg.find("steps") != std::string::npos);

  // an active-scale set without the coarsest scale is rejected
  msg = error_of("[run]\nscales = 1,2\n");
  CHECK(msg.rfind("test.cfg: ", 0) == 0);

  msg = error_of("[schedule]\nbeta_start = 0\n");
  CHECK(msg.rfind("test.cfg: ", 0) == 0);
}

TEST_CASE("schedule building honors base and respaced step counts") {
  ScheduleConfig sc;
  sc.base_steps = 40;
  sc.steps = 40;
  NoiseSchedule full = build_schedule(sc);
  CHECK(full.steps() == 40);
  // identical to the canonical linear schedule when nothing is respaced
  NoiseSchedule lin = NoiseSchedule::linear(40, sc.beta_start, sc.beta_end);
  for (int t = 1; t <= 40; ++t) CHECK(full.beta(t) == lin.beta(t));

  sc.steps = 8;
  NoiseSchedule sub = build_schedule(sc);
  CHECK(sub.steps() == 8);
  // respacing keeps the marginal at the retained base steps
  for (int i = 1; i <= 8; ++i) {
    const int tau = static_cast<int>(std::llround(i * 40.0 / 8.0));
    CHECK(sub.alpha_bar(i) == doctest::Approx(lin.alpha_bar(tau)).epsilon(1e-12));
  }

  sc.steps = 0;
  CHECK_THROWS_AS(build_schedule(sc), std::invalid_argument);
  sc.steps = 41;
  CHECK_THROWS_AS(build_schedule(sc), std::invalid_argument);
}

TEST_CASE("the shipped reference config equals the built-in defaults") {
  RunConfig ref =
      load_config_file(std::string(CADM_SOURCE_DIR) + "/configs/reference.cfg");
  CHECK(ref == RunConfig{});
}

TEST_CASE("config files load from disk and report missing paths") {
  namespace fs = std::filesystem;
  const std::string path = "/tmp/cadm_cfg_test.cfg";
  RunConfig c;
  c.schedule.steps = 20;
  c.sampler.steps = 20;
  c.method_tag = "disk";
  {
    std::ofstream out(path);
    out << serialize_config(c);
  }
  RunConfig back = load_config_file(path);
  CHECK(back == c);
  fs::remove(path);
  CHECK_THROWS_AS(load_config_file(path), std::runtime_error);
}

#include "cadm/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace cadm {
namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void fail(const std::string& file, int line,
                       const std::string& msg) {
  throw std::invalid_argument(file + ":" + std::to_string(line) + ": " + msg);
}

template <typename T>
T parse_num(const std::string& file, int line, const std::string& key,
            const std::string& v) {
  T out{};
  const char* b = v.data();
  const char* e = v.data() + v.size();
  auto [p, ec] = std::from_chars(b, e, out);
  if (ec != std::errc() || p != e)
    fail(file, line, "bad value for '" + key + "': '" + v + "'");
  return out;
}

bool parse_bool(const std::string& file, int line, const std::string& key,
                const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(file, line, "bad boolean for '" + key + "': '" + v + "'");
}

std::vector<int> parse_scales(const std::string& file, int line,
                              const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) fail(file, line, "empty entry in scales list");
    out.push_back(parse_num<int>(file, line, "scales", item));
  }
  if (out.empty()) fail(file, line, "scales list is empty");
  return out;
}

std::string fmt_real(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, p);
}

std::string fmt_scales(const std::vector<int>& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out;
}

void apply(RunConfig& c, const std::string& file, int line,
           const std::string& sec, const std::string& key,
           const std::string& v) {
  auto i = [&] { return parse_num<int>(file, line, key, v); };
  auto r = [&] { return parse_num<double>(file, line, key, v); };
  auto u = [&] { return parse_num<std::uint64_t>(file, line, key, v); };
  auto b = [&] { return parse_bool(file, line, key, v); };

  if (sec == "schedule") {
    if (key == "base_steps") c.schedule.base_steps = i();
    else if (key == "steps") c.schedule.steps = i();
    else if (key == "beta_start") c.schedule.beta_start = r();
    else if (key == "beta_end") c.schedule.beta_end = r();
    else fail(file, line, "unknown key '" + key + "' in [schedule]");
  } else if (sec == "model") {
    if (key == "image_size") c.model.image_size = i();
    else if (key == "image_channels") c.model.image_channels = i();
    else if (key == "base_channels") c.model.base_channels = i();
    else if (key == "blocks_per_level") c.model.blocks_per_level = i();
    else if (key == "time_embed_dim") c.model.time_embed_dim = i();
    else fail(file, line, "unknown key '" + key + "' in [model]");
  } else if (sec == "train") {
    if (key == "epochs") c.train.epochs = i();
    else if (key == "batch_size") c.train.batch_size = i();
    else if (key == "learning_rate") c.train.learning_rate = r();
    else if (key == "momentum") c.train.momentum = r();
    else if (key == "weight_decay") c.train.weight_decay = r();
    else if (key == "seed") c.train.seed = u();
    else if (key == "val_steps") c.train.val_steps = i();
    else if (key == "val_ensemble") c.train.val_ensemble = i();
    else if (key == "threshold") c.train.threshold = r();
    else fail(file, line, "unknown key '" + key + "' in [train]");
  } else if (sec == "sampler") {
    if (key == "ensemble") c.sampler.ensemble = i();
    else if (key == "threshold") c.sampler.threshold = r();
    else if (key == "seed") c.sampler.seed = u();
    else fail(file, line, "unknown key '" + key + "' in [sampler]");
  } else if (sec == "synthetic") {
    if (key == "size") c.synthetic.size = i();
    else if (key == "n_train") c.synthetic.n_train = i();
    else if (key == "n_val") c.synthetic.n_val = i();
    else if (key == "n_test") c.synthetic.n_test = i();
    else if (key == "min_shapes") c.synthetic.min_shapes = i();
    else if (key == "max_shapes") c.synthetic.max_shapes = i();
    else if (key == "noise_level") c.synthetic.noise_level = r();
    else if (key == "seed") c.synthetic.seed = u();
    else fail(file, line, "unknown key '" + key + "' in [synthetic]");
  } else if (sec == "run") {
    if (key == "scales") c.scales = parse_scales(file, line, v);
    else if (key == "use_nsse") c.use_nsse = b();
    else if (key == "data_root") c.data_root = v;
    else if (key == "method_tag") c.method_tag = v;
    else fail(file, line, "unknown key '" + key + "' in [run]");
  } else {
    fail(file, line, "unknown section [" + sec + "]");
  }
}

}  // namespace

void ScheduleConfig::validate() const {
  if (base_steps < 1)
    throw std::invalid_argument("schedule: base_steps must be >= 1");
  if (steps < 1 || steps > base_steps)
    throw std::invalid_argument("schedule: steps must be in [1, base_steps]");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
    throw std::invalid_argument("schedule: need 0 < beta_start <= beta_end < 1");
}

NoiseSchedule build_schedule(const ScheduleConfig& sc) {
  sc.validate();
  NoiseSchedule base = NoiseSchedule::linear(sc.base_steps, sc.beta_start,
                                             sc.beta_end);
  if (sc.steps == sc.base_steps) return base;
  return base.respaced(sc.steps);
}

void RunConfig::validate() const {
  schedule.validate();
  model.validate();
  train.validate();
  sampler.validate();
  synthetic.validate();
  if (sampler.steps != schedule.steps)
    throw std::invalid_argument("config: sampler steps out of sync with schedule");
  (void)flags();  // validates the scales list
}

RunConfig parse_config(const std::string& text, const std::string& filename) {
  RunConfig cfg;
  std::stringstream ss(text);
  std::string raw, sec;
  int line = 0;
  while (std::getline(ss, raw)) {
    ++line;
    const auto hash = raw.find_first_of("#;");
    std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']' || s.size() < 3)
        fail(filename, line, "malformed section header '" + s + "'");
      sec = trim(s.substr(1, s.size() - 2));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      fail(filename, line, "expected 'key = value', got '" + s + "'");
    const std::string key = trim(s.substr(0, eq));
    const std::string val = trim(s.substr(eq + 1));
    if (key.empty()) fail(filename, line, "missing key before '='");
    if (sec.empty()) fail(filename, line, "key '" + key + "' outside a section");
    apply(cfg, filename, line, sec, key, val);
  }
  cfg.sampler.steps = cfg.schedule.steps;
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    throw std::invalid_argument(filename + ": " + e.what());
  }
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream o;
  o << "[schedule]\n"
    << "base_steps = " << cfg.schedule.base_steps << "\n"
    << "steps = " << cfg.schedule.steps << "\n"
    << "beta_start = " << fmt_real(cfg.schedule.beta_start) << "\n"
    << "beta_end = " << fmt_real(cfg.schedule.beta_end) << "\n\n";
  o << "[model]\n"
    << "image_size = " << cfg.model.image_size << "\n"
    << "image_channels = " << cfg.model.image_channels << "\n"
    << "base_channels = " << cfg.model.base_channels << "\n"
    << "blocks_per_level = " << cfg.model.blocks_per_level << "\n"
    << "time_embed_dim = " << cfg.model.time_embed_dim << "\n\n";
  o << "[train]\n"
    << "epochs = " << cfg.train.epochs << "\n"
    << "batch_size = " << cfg.train.batch_size << "\n"
    << "learning_rate = " << fmt_real(cfg.train.learning_rate) << "\n"
    << "momentum = " << fmt_real(cfg.train.momentum) << "\n"
    << "weight_decay = " << fmt_real(cfg.train.weight_decay) << "\n"
    << "seed = " << cfg.train.seed << "\n"
    << "val_steps = " << cfg.train.val_steps << "\n"
    << "val_ensemble = " << cfg.train.val_ensemble << "\n"
    << "threshold = " << fmt_real(cfg.train.threshold) << "\n\n";
  o << "[sampler]\n"
    << "ensemble = " << cfg.sampler.ensemble << "\n"
    << "threshold = " << fmt_real(cfg.sampler.threshold) << "\n"
    << "seed = " << cfg.sampler.seed << "\n\n";
  o << "[synthetic]\n"
    << "size = " << cfg.synthetic.size << "\n"
    << "n_train = " << cfg.synthetic.n_train << "\n"
    << "n_val = " << cfg.synthetic.n_val << "\n"
    << "n_test = " << cfg.synthetic.n_test << "\n"
    << "min_shapes = " << cfg.synthetic.min_shapes << "\n"
    << "max_shapes = " << cfg.synthetic.max_shapes << "\n"
    << "noise_level = " << fmt_real(cfg.synthetic.noise_level) << "\n"
    << "seed = " << cfg.synthetic.seed << "\n\n";
  o << "[run]\n"
    << "scales = " << fmt_scales(cfg.scales) << "\n"
    << "use_nsse = " << (cfg.use_nsse ? "true" : "false") << "\n"
    << "data_root = " << cfg.data_root << "\n"
    << "method_tag = " << cfg.method_tag << "\n";
  return o.str();
}

}  // namespace cadm

#include "cadm/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace cadm {
namespace {

constexpr char kMagic[8] = {'C', 'A', 'D', 'M', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void wr(std::ostream& o, const void* p, std::size_t n) {
  o.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}
void wr_u32(std::ostream& o, std::uint32_t v) { wr(o, &v, 4); }
void wr_i32(std::ostream& o, std::int32_t v) { wr(o, &v, 4); }
void wr_u64(std::ostream& o, std::uint64_t v) { wr(o, &v, 8); }
void wr_str(std::ostream& o, const std::string& s) {
  wr_u64(o, s.size());
  wr(o, s.data(), s.size());
}
void wr_tensor(std::ostream& o, const std::string& name,
               const Tensor<float>& t) {
  wr_str(o, name);
  wr_i32(o, t.n());
  wr_i32(o, t.c());
  wr_i32(o, t.h());
  wr_i32(o, t.w());
  wr(o, t.data(), t.size() * sizeof(float));
}

void rd(std::istream& i, void* p, std::size_t n, const char* what) {
  i.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(i.gcount()) != n)
    throw std::runtime_error(std::string("checkpoint: truncated while reading ") +
                             what);
}
std::uint32_t rd_u32(std::istream& i, const char* what) {
  std::uint32_t v;
  rd(i, &v, 4, what);
  return v;
}
std::int32_t rd_i32(std::istream& i, const char* what) {
  std::int32_t v;
  rd(i, &v, 4, what);
  return v;
}
std::uint64_t rd_u64(std::istream& i, const char* what) {
  std::uint64_t v;
  rd(i, &v, 8, what);
  return v;
}
std::string rd_str(std::istream& i, const char* what) {
  const std::uint64_t n = rd_u64(i, what);
  if (n > (1u << 30))
    throw std::runtime_error(std::string("checkpoint: implausible length for ") +
                             what);
  std::string s(n, '\0');
  if (n) rd(i, s.data(), n, what);
  return s;
}

void rd_tensor_into(std::istream& in, const std::string& expect_name,
                    Tensor<float>& t, const char* kind) {
  const std::string name = rd_str(in, kind);
  if (name != expect_name)
    throw std::runtime_error("checkpoint: " + std::string(kind) +
                             " name mismatch: file has '" + name +
                             "', model expects '" + expect_name + "'");
  const int n = rd_i32(in, kind), c = rd_i32(in, kind), h = rd_i32(in, kind),
            w = rd_i32(in, kind);
  if (n != t.n() || c != t.c() || h != t.h() || w != t.w())
    throw std::runtime_error("checkpoint: shape mismatch for '" + name + "'");
  rd(in, t.data(), t.size() * sizeof(float), kind);
}

CheckpointMeta read_header(std::istream& in, const std::string& path) {
  char magic[8];
  rd(in, magic, 8, "magic");
  if (std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  const std::uint32_t ver = rd_u32(in, "version");
  if (ver != kVersion)
    throw std::runtime_error("checkpoint: unsupported version " +
                             std::to_string(ver) + " in " + path);
  CheckpointMeta meta;
  meta.config = parse_config(rd_str(in, "config"), path + "#config");
  meta.epoch = rd_i32(in, "epoch");
  meta.rng_state = rd_str(in, "rng state");
  return meta;
}

}  // namespace

void save_checkpoint(const std::string& path, const RunConfig& cfg, int epoch,
                     const std::string& rng_state,
                     const ParamStore<float>& params,
                     const MomentumSgd<float>& opt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  wr(out, kMagic, 8);
  wr_u32(out, kVersion);
  wr_str(out, serialize_config(cfg));
  wr_i32(out, epoch);
  wr_str(out, rng_state);
  wr_u32(out, static_cast<std::uint32_t>(params.count()));
  for (int i = 0; i < params.count(); ++i)
    wr_tensor(out, params.name(i), params.value(i));
  wr_u32(out, static_cast<std::uint32_t>(opt.count()));
  for (int i = 0; i < opt.count(); ++i)
    wr_tensor(out, opt.name(i), opt.velocity(i));
  out.flush();
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

CheckpointMeta peek_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  return read_header(in, path);
}

CheckpointMeta load_checkpoint(const std::string& path,
                               ParamStore<float>& params,
                               MomentumSgd<float>& opt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  CheckpointMeta meta = read_header(in, path);

  const std::uint32_t np = rd_u32(in, "parameter count");
  if (np != static_cast<std::uint32_t>(params.count()))
    throw std::runtime_error("checkpoint: parameter count mismatch");
  for (int i = 0; i < params.count(); ++i)
    rd_tensor_into(in, params.name(i), params.value(i), "parameter");

  const std::uint32_t nv = rd_u32(in, "velocity count");
  if (nv != static_cast<std::uint32_t>(opt.count()))
    throw std::runtime_error("checkpoint: velocity count mismatch");
  for (int i = 0; i < opt.count(); ++i)
    rd_tensor_into(in, opt.name(i), opt.velocity(i), "velocity");
  return meta;
}

}  // namespace cadm

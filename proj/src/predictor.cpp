#include "cadm/predictor.hpp"

#include <cmath>
#include <stdexcept>

#include "cadm/fft.hpp"
#include "cadm/rng.hpp"

namespace cadm {

// --- ParamStore -------------------------------------------------------

template <typename S>
Tensor<S>& ParamStore<S>::create(const std::string& name, int n, int c, int h,
                                 int w) {
  if (index_.count(name))
    throw std::invalid_argument("ParamStore: duplicate name " + name);
  entries_.push_back({name, Tensor<S>(n, c, h, w), Tensor<S>(n, c, h, w)});
  index_[name] = static_cast<int>(entries_.size()) - 1;
  return entries_.back().val;
}

template <typename S>
bool ParamStore<S>::has(const std::string& name) const {
  return index_.count(name) != 0;
}

template <typename S>
Tensor<S>& ParamStore<S>::value(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end())
    throw std::invalid_argument("ParamStore: unknown name " + name);
  return entries_[it->second].val;
}

template <typename S>
const Tensor<S>& ParamStore<S>::value(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end())
    throw std::invalid_argument("ParamStore: unknown name " + name);
  return entries_[it->second].val;
}

template <typename S>
Tensor<S>& ParamStore<S>::grad(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end())
    throw std::invalid_argument("ParamStore: unknown name " + name);
  return entries_[it->second].grad;
}

template <typename S>
void ParamStore<S>::zero_grads() {
  for (auto& e : entries_) e.grad.fill(S(0));
}

template <typename S>
std::size_t ParamStore<S>::total_params() const {
  std::size_t n = 0;
  for (auto& e : entries_) n += e.val.size();
  return n;
}

// --- config / flags ---------------------------------------------------

void PredictorConfig::validate() const {
  if (image_size < 8 || image_size % 8 != 0)
    throw std::invalid_argument(
        "predictor: image_size must be a positive multiple of 8, got " +
        std::to_string(image_size));
  if (image_channels < 1)
    throw std::invalid_argument("predictor: image_channels must be >= 1");
  if (base_channels < 1)
    throw std::invalid_argument("predictor: base_channels must be >= 1");
  if (blocks_per_level < 1)
    throw std::invalid_argument("predictor: blocks_per_level must be >= 1");
  if (time_embed_dim < 2 || time_embed_dim % 2 != 0)
    throw std::invalid_argument("predictor: time_embed_dim must be even >= 2");
}

AblationFlags flags_from_scales(const std::vector<int>& scales,
                                bool use_nsse) {
  if (scales.empty())
    throw std::invalid_argument("scales: at least one scale required");
  AblationFlags fl;
  fl.scale_on = {false, false, false};
  fl.use_nsse = use_nsse;
  for (int s : scales) {
    if (s < 1 || s > kNumLevels)
      throw std::invalid_argument("scales: scale " + std::to_string(s) +
                                  " outside [1, 3]");
    fl.scale_on[s - 1] = true;
  }
  if (!fl.scale_on[kNumLevels - 1])
    throw std::invalid_argument("scales: scale 3 (bottleneck) must be active");
  for (int k = 0; k < kNumLevels - 1; ++k)
    if (fl.scale_on[k] && !fl.scale_on[k + 1])
      throw std::invalid_argument(
          "scales: active set must be contiguous up to scale 3");
  return fl;
}

std::vector<int> scales_from_flags(const AblationFlags& fl) {
  std::vector<int> out;
  for (int k = 0; k < kNumLevels; ++k)
    if (fl.scale_on[k]) out.push_back(k + 1);
  return out;
}

// --- free helpers -----------------------------------------------------

template <typename S>
Tensor<S> time_embedding(std::span<const int> t, int dim) {
  if (t.empty()) throw std::invalid_argument("time_embedding: empty batch");
  if (dim < 2 || dim % 2 != 0)
    throw std::invalid_argument("time_embedding: dim must be even >= 2");
  const int half = dim / 2;
  Tensor<S> out(static_cast<int>(t.size()), dim, 1, 1);
  for (std::size_t n = 0; n < t.size(); ++n)
    for (int i = 0; i < half; ++i) {
      double freq = std::exp(-std::log(10000.0) * i / half);
      double arg = static_cast<double>(t[n]) * freq;
      out.at(static_cast<int>(n), i, 0, 0) = static_cast<S>(std::sin(arg));
      out.at(static_cast<int>(n), half + i, 0, 0) =
          static_cast<S>(std::cos(arg));
    }
  return out;
}

template <typename S>
Tensor<S> concat_channels(const Tensor<S>& x, const Tensor<S>& y) {
  if (y.h() != x.h() || y.w() != x.w() || (y.n() != x.n() && y.n() != 1))
    throw std::invalid_argument("concat_channels: incompatible shapes " +
                                x.shape_str() + " vs " + y.shape_str());
  Tensor<S> out(x.n(), x.c() + y.c(), x.h(), x.w());
  const std::size_t plane = static_cast<std::size_t>(x.h()) * x.w();
  for (int n = 0; n < x.n(); ++n) {
    int ny = (y.n() == 1) ? 0 : n;
    for (int c = 0; c < x.c(); ++c)
      std::copy(x.data() + x.index(n, c, 0, 0),
                x.data() + x.index(n, c, 0, 0) + plane,
                out.data() + out.index(n, c, 0, 0));
    for (int c = 0; c < y.c(); ++c)
      std::copy(y.data() + y.index(ny, c, 0, 0),
                y.data() + y.index(ny, c, 0, 0) + plane,
                out.data() + out.index(n, x.c() + c, 0, 0));
  }
  return out;
}

// --- model ------------------------------------------------------------

template <typename S>
CadmModel<S>::CadmModel(const PredictorConfig& cfg, std::uint64_t init_seed,
                        const NoiseSchedule* sched)
    : cfg_(cfg) {
  cfg_.validate();
  const NoiseSchedule table =
      sched ? *sched : NoiseSchedule::linear(1000, 1e-4, 0.02).respaced(100);
  const int n = table.steps();
  kappa_id_.resize(n + 1);
  kappa_mask_.resize(n + 1);
  for (int t = 1; t <= n; ++t) {
    const double ab = table.alpha_bar(t);
    kappa_id_[t] = static_cast<S>(1.0 / std::sqrt(1.0 - ab));
    kappa_mask_[t] = static_cast<S>(std::sqrt(ab / (1.0 - ab)));
  }
  init_params(init_seed);
}

template <typename S>
Tensor<S> CadmModel<S>::kappa_feat(std::span<const int> t, bool mask) const {
  const std::vector<S>& tab = mask ? kappa_mask_ : kappa_id_;
  const int last = static_cast<int>(tab.size()) - 1;
  Tensor<S> f(static_cast<int>(t.size()), 1, 1, 1);
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < 1 || t[i] > last)
      throw std::invalid_argument("predictor: step " + std::to_string(t[i]) +
                                  " outside [1, " + std::to_string(last) +
                                  "]");
    f[i] = tab[t[i]];
  }
  return f;
}

template <typename S>
void CadmModel<S>::init_params(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0xC0DE));
  auto conv = [&](const std::string& name, int co, int ci, int k,
                  bool zero = false) {
    Tensor<S>& w = params_.create(name + ".w", co, ci, k, k);
    if (!zero) rng.fill_normal(w, std::sqrt(2.0 / (ci * k * k)));
    params_.create(name + ".b", 1, co, 1, 1);
  };
  auto norm = [&](const std::string& name, int c) {
    params_.create(name + ".g", 1, c, 1, 1).fill(S(1));
    params_.create(name + ".b", 1, c, 1, 1);
  };
  auto block = [&](const std::string& prefix, int c) {
    norm(prefix + ".ln", c);
    conv(prefix + ".c1", c, c, 3);
    conv(prefix + ".c2", c, c, 3);
  };
  auto enc = [&](const std::string& p, int in_ch) {
    conv(p + ".stem", cfg_.level_channels(0), in_ch, 3);
    for (int k = 0; k < kNumLevels; ++k) {
      for (int i = 0; i < cfg_.blocks_per_level; ++i)
        block(p + ".L" + std::to_string(k) + ".b" + std::to_string(i),
              cfg_.level_channels(k));
      if (k + 1 < kNumLevels)
        conv(p + ".down" + std::to_string(k), cfg_.level_channels(k + 1),
             cfg_.level_channels(k), 3);
    }
  };

  enc("cond", cfg_.image_channels);
  enc("xt", cfg_.image_channels + 1);

  for (int k = 0; k < kNumLevels; ++k) {
    const std::string p = "nsse.L" + std::to_string(k);
    const int c = cfg_.level_channels(k), sz = cfg_.level_size(k);
    conv(p + ".ns", c, c, 1);
    params_.create(p + ".A", 1, c, sz, half_spectrum_w(sz)).fill(S(1));
    norm(p + ".lnx", c);
    conv(p + ".pix", 1, c, 3);
    norm(p + ".lnc", c);
  }

  const int d = cfg_.time_embed_dim;
  conv("time.fc1", d, d, 1);
  conv("time.fc2", d, d, 1);
  for (int k = 0; k < kNumLevels; ++k)
    conv("time.inj" + std::to_string(k), cfg_.level_channels(k), d, 1);
  // Scalar output gates, affine in the per-timestep kappa constants (see
  // class comment). Zero weights and biases keep the untrained output at
  // exactly zero; the head gate's unit bias leaves the feature path live
  // from the first update.
  conv("time.gate", 1, 1, 1, /*zero=*/true);
  conv("time.head_gate", 1, 1, 1, /*zero=*/true);
  params_.value("time.head_gate.b").fill(S(1));

  for (int i = 0; i < cfg_.blocks_per_level; ++i)
    block("dec.L2.b" + std::to_string(i), cfg_.level_channels(2));
  conv("dec.up1", cfg_.level_channels(1), cfg_.level_channels(2), 3);
  for (int i = 0; i < cfg_.blocks_per_level; ++i)
    block("dec.L1.b" + std::to_string(i), cfg_.level_channels(1));
  conv("dec.up0", cfg_.level_channels(0), cfg_.level_channels(1), 3);
  for (int i = 0; i < cfg_.blocks_per_level; ++i)
    block("dec.L0.b" + std::to_string(i), cfg_.level_channels(0));
  norm("dec.out_ln", cfg_.level_channels(0));
  // zero-init head: the untrained predictor outputs exactly zero noise
  conv("dec.head", 1, cfg_.level_channels(0), 3, /*zero=*/true);
}

template <typename S>
typename CadmModel<S>::Id CadmModel<S>::pnode(Graph<S>& g,
                                              const std::string& name) {
  return g.param(&params_.value(name), &params_.grad(name));
}

template <typename S>
typename CadmModel<S>::Id CadmModel<S>::res_block(Graph<S>& g, Id x,
                                                  const std::string& prefix) {
  Id h = g.layer_norm_channels(x, pnode(g, prefix + ".ln.g"),
                               pnode(g, prefix + ".ln.b"));
  h = g.silu(h);
  h = g.conv2d(h, pnode(g, prefix + ".c1.w"), pnode(g, prefix + ".c1.b"), 1, 1);
  h = g.silu(h);
  h = g.conv2d(h, pnode(g, prefix + ".c2.w"), pnode(g, prefix + ".c2.b"), 1, 1);
  return g.add(x, h);
}

template <typename S>
typename CadmModel<S>::Id CadmModel<S>::stage(Graph<S>& g, Id x,
                                              const std::string& prefix) {
  Id h = x;
  for (int i = 0; i < cfg_.blocks_per_level; ++i)
    h = res_block(g, h, prefix + ".b" + std::to_string(i));
  return h;
}

template <typename S>
std::array<typename CadmModel<S>::Id, kNumLevels> CadmModel<S>::encoder(
    Graph<S>& g, Id x, const std::string& prefix) {
  std::array<Id, kNumLevels> out{};
  Id h = g.conv2d(x, pnode(g, prefix + ".stem.w"), pnode(g, prefix + ".stem.b"),
                  2, 1);
  for (int k = 0; k < kNumLevels; ++k) {
    h = stage(g, h, prefix + ".L" + std::to_string(k));
    out[k] = h;
    if (k + 1 < kNumLevels)
      h = g.conv2d(h, pnode(g, prefix + ".down" + std::to_string(k) + ".w"),
                   pnode(g, prefix + ".down" + std::to_string(k) + ".b"), 2, 1);
  }
  return out;
}

template <typename S>
typename CadmModel<S>::Id CadmModel<S>::ns_part(Graph<S>& g, int level,
                                                Id m_x) {
  const std::string p = "nsse.L" + std::to_string(level);
  Id pre = g.conv2d(m_x, pnode(g, p + ".ns.w"), pnode(g, p + ".ns.b"), 1, 0);
  return g.spectral_filter(pre, pnode(g, p + ".A"));
}

template <typename S>
typename CadmModel<S>::Id CadmModel<S>::att_part(Graph<S>& g, int level,
                                                 Id m_cond, Id m_prime) {
  const std::string p = "nsse.L" + std::to_string(level);
  Id lx = g.layer_norm_channels(m_prime, pnode(g, p + ".lnx.g"),
                                pnode(g, p + ".lnx.b"));
  Id pix = g.conv2d(lx, pnode(g, p + ".pix.w"), pnode(g, p + ".pix.b"), 1, 1);
  Id ch = g.global_avg_pool(lx);
  Id lc = g.layer_norm_channels(m_cond, pnode(g, p + ".lnc.g"),
                                pnode(g, p + ".lnc.b"));
  return g.mul_channel_vec(g.mul_pixel_map(lc, pix), ch);
}

template <typename S>
typename CadmModel<S>::Id CadmModel<S>::time_feat(Graph<S>& g,
                                                  std::span<const int> t) {
  Id e = g.input(time_embedding<S>(t, cfg_.time_embed_dim));
  Id h = g.linear(e, pnode(g, "time.fc1.w"), pnode(g, "time.fc1.b"));
  h = g.silu(h);
  return g.linear(h, pnode(g, "time.fc2.w"), pnode(g, "time.fc2.b"));
}

template <typename S>
void CadmModel<S>::decode(Tape& tp, const std::array<Id, kNumLevels>& comb,
                          Id tfeat, Id xskip, Id hgate) {
  Graph<S>& g = tp.g;
  auto inject = [&](Id h, int k) {
    Id v = g.linear(tfeat, pnode(g, "time.inj" + std::to_string(k) + ".w"),
                    pnode(g, "time.inj" + std::to_string(k) + ".b"));
    return g.add_channel_vec(h, v);
  };
  Id h = inject(comb[2], 2);
  h = stage(g, h, "dec.L2");
  tp.dec[2] = h;
  h = g.conv2d(g.upsample2x(h), pnode(g, "dec.up1.w"), pnode(g, "dec.up1.b"),
               1, 1);
  h = g.add(h, comb[1]);
  h = inject(h, 1);
  h = stage(g, h, "dec.L1");
  tp.dec[1] = h;
  h = g.conv2d(g.upsample2x(h), pnode(g, "dec.up0.w"), pnode(g, "dec.up0.b"),
               1, 1);
  h = g.add(h, comb[0]);
  h = inject(h, 0);
  h = stage(g, h, "dec.L0");
  tp.dec[0] = h;
  h = g.layer_norm_channels(h, pnode(g, "dec.out_ln.g"),
                            pnode(g, "dec.out_ln.b"));
  h = g.silu(h);
  Id out = g.conv2d(g.upsample2x(h), pnode(g, "dec.head.w"),
                    pnode(g, "dec.head.b"), 1, 1);
  tp.eps = g.add(g.mul_channel_vec(out, hgate), xskip);
}

template <typename S>
void CadmModel<S>::check_pair(const Tensor<S>& ia, const Tensor<S>& ib) const {
  if (ia.c() != cfg_.image_channels || ia.h() != cfg_.image_size ||
      ia.w() != cfg_.image_size)
    throw std::invalid_argument("predictor: condition image " + ia.shape_str() +
                                " does not match configured size " +
                                std::to_string(cfg_.image_size) + "x" +
                                std::to_string(cfg_.image_size) + "x" +
                                std::to_string(cfg_.image_channels));
  check_same_shape(ia, ib, "predictor condition pair");
}

template <typename S>
typename CadmModel<S>::Tape CadmModel<S>::forward(const Tensor<S>& x_t,
                                                  const Tensor<S>& ia,
                                                  const Tensor<S>& ib,
                                                  std::span<const int> t,
                                                  const AblationFlags& fl) {
  check_pair(ia, ib);
  if (x_t.c() != 1 || x_t.h() != cfg_.image_size || x_t.w() != cfg_.image_size)
    throw std::invalid_argument("predictor: x_t must be (N,1,S,S), got " +
                                x_t.shape_str());
  if (ia.n() != x_t.n() || static_cast<int>(t.size()) != x_t.n())
    throw std::invalid_argument("predictor: batch mismatch");

  Tape tp;
  Graph<S>& g = tp.g;
  Id tfeat = time_feat(g, t);
  Id xt_node = g.input(x_t);
  Id gate = g.linear(g.input(kappa_feat(t, false)), pnode(g, "time.gate.w"),
                     pnode(g, "time.gate.b"));
  Id hgate = g.linear(g.input(kappa_feat(t, true)),
                      pnode(g, "time.head_gate.w"),
                      pnode(g, "time.head_gate.b"));
  auto pyr_a = encoder(g, g.input(ia), "cond");
  auto pyr_b = encoder(g, g.input(ib), "cond");
  auto pyr_xa = encoder(g, g.input(concat_channels(x_t, ia)), "xt");
  auto pyr_xb = encoder(g, g.input(concat_channels(x_t, ib)), "xt");

  std::array<Id, kNumLevels> comb{};
  for (int k = 0; k < kNumLevels; ++k) {
    Id dif;
    if (fl.use_nsse)
      dif = g.sub(att_part(g, k, pyr_b[k], ns_part(g, k, pyr_xb[k])),
                  att_part(g, k, pyr_a[k], ns_part(g, k, pyr_xa[k])));
    else
      dif = g.sub(pyr_b[k], pyr_a[k]);
    tp.dif[k] = dif;
    tp.xdif[k] = g.sub(pyr_xa[k], pyr_xb[k]);
    Id xemb = g.scale(g.add(pyr_xa[k], pyr_xb[k]), S(0.5));
    comb[k] = fl.scale_on[k] ? g.add(dif, xemb) : xemb;
  }
  decode(tp, comb, tfeat, g.mul_channel_vec(xt_node, gate), hgate);
  return tp;
}

template <typename S>
Tensor<S> CadmModel<S>::predict_noise(const Tensor<S>& x_t, const Tensor<S>& ia,
                                      const Tensor<S>& ib,
                                      std::span<const int> t,
                                      const AblationFlags& fl) {
  Tape tp = forward(x_t, ia, ib, t, fl);
  return tp.g.value(tp.eps);
}

template <typename S>
typename CadmModel<S>::CondCache CadmModel<S>::encode_conditions(
    const Tensor<S>& ia, const Tensor<S>& ib) {
  check_pair(ia, ib);
  if (ia.n() != 1)
    throw std::invalid_argument("encode_conditions: expects batch 1");
  CondCache cc;
  Graph<S> g;
  auto pa = encoder(g, g.input(ia), "cond");
  auto pb = encoder(g, g.input(ib), "cond");
  for (int k = 0; k < kNumLevels; ++k) {
    cc.pyr_a[k] = g.value(pa[k]);
    cc.pyr_b[k] = g.value(pb[k]);
  }
  return cc;
}

template <typename S>
Tensor<S> CadmModel<S>::predict_with_cache(const CondCache& cache,
                                           const Tensor<S>& x_t,
                                           const Tensor<S>& ia,
                                           const Tensor<S>& ib,
                                           std::span<const int> t,
                                           const AblationFlags& fl) {
  check_pair(ia, ib);
  const int m = x_t.n();
  if (static_cast<int>(t.size()) != m)
    throw std::invalid_argument("predict_with_cache: batch mismatch");
  Tape tp;
  Graph<S>& g = tp.g;
  Id tfeat = time_feat(g, t);
  Id xt_node = g.input(x_t);
  Id gate = g.linear(g.input(kappa_feat(t, false)), pnode(g, "time.gate.w"),
                     pnode(g, "time.gate.b"));
  Id hgate = g.linear(g.input(kappa_feat(t, true)),
                      pnode(g, "time.head_gate.w"),
                      pnode(g, "time.head_gate.b"));
  std::array<Id, kNumLevels> pyr_a{}, pyr_b{};
  for (int k = 0; k < kNumLevels; ++k) {
    Id pa = g.input(cache.pyr_a[k]);
    Id pb = g.input(cache.pyr_b[k]);
    if (m > 1) {
      pa = g.repeat_batch(pa, m);
      pb = g.repeat_batch(pb, m);
    }
    pyr_a[k] = pa;
    pyr_b[k] = pb;
  }
  auto pyr_xa = encoder(g, g.input(concat_channels(x_t, ia)), "xt");
  auto pyr_xb = encoder(g, g.input(concat_channels(x_t, ib)), "xt");

  std::array<Id, kNumLevels> comb{};
  for (int k = 0; k < kNumLevels; ++k) {
    Id dif;
    if (fl.use_nsse)
      dif = g.sub(att_part(g, k, pyr_b[k], ns_part(g, k, pyr_xb[k])),
                  att_part(g, k, pyr_a[k], ns_part(g, k, pyr_xa[k])));
    else
      dif = g.sub(pyr_b[k], pyr_a[k]);
    tp.dif[k] = dif;
    tp.xdif[k] = g.sub(pyr_xa[k], pyr_xb[k]);
    Id xemb = g.scale(g.add(pyr_xa[k], pyr_xb[k]), S(0.5));
    comb[k] = fl.scale_on[k] ? g.add(dif, xemb) : xemb;
  }
  decode(tp, comb, tfeat, g.mul_channel_vec(xt_node, gate), hgate);
  return tp.g.value(tp.eps);
}

template <typename S>
typename CadmModel<S>::Pyramids CadmModel<S>::encode_branches(
    const Tensor<S>& x_t, const Tensor<S>& ia, const Tensor<S>& ib) {
  check_pair(ia, ib);
  Pyramids out;
  Graph<S> g;
  auto pa = encoder(g, g.input(ia), "cond");
  auto pb = encoder(g, g.input(ib), "cond");
  auto pxa = encoder(g, g.input(concat_channels(x_t, ia)), "xt");
  auto pxb = encoder(g, g.input(concat_channels(x_t, ib)), "xt");
  for (int k = 0; k < kNumLevels; ++k) {
    out.cond_a[k] = g.value(pa[k]);
    out.cond_b[k] = g.value(pb[k]);
    out.x_a[k] = g.value(pxa[k]);
    out.x_b[k] = g.value(pxb[k]);
  }
  return out;
}

template <typename S>
Tensor<S> CadmModel<S>::noise_suppress(int level, const Tensor<S>& m_x) {
  if (level < 0 || level >= kNumLevels)
    throw std::invalid_argument("noise_suppress: bad level");
  Graph<S> g;
  Id out = ns_part(g, level, g.input(m_x));
  return g.value(out);
}

template <typename S>
Tensor<S> CadmModel<S>::attention_fuse(int level, const Tensor<S>& m_cond,
                                       const Tensor<S>& m_prime) {
  if (level < 0 || level >= kNumLevels)
    throw std::invalid_argument("attention_fuse: bad level");
  check_same_shape(m_cond, m_prime, "attention_fuse");
  Graph<S> g;
  Id out = att_part(g, level, g.input(m_cond), g.input(m_prime));
  return g.value(out);
}

template <typename S>
std::array<Tensor<S>, kNumLevels> CadmModel<S>::dif_features(
    const Pyramids& pyr, const AblationFlags& fl) {
  std::array<Tensor<S>, kNumLevels> out;
  Graph<S> g;
  for (int k = 0; k < kNumLevels; ++k) {
    Id a = g.input(pyr.cond_a[k]);
    Id b = g.input(pyr.cond_b[k]);
    Id dif;
    if (fl.use_nsse)
      dif = g.sub(att_part(g, k, b, ns_part(g, k, g.input(pyr.x_b[k]))),
                  att_part(g, k, a, ns_part(g, k, g.input(pyr.x_a[k]))));
    else
      dif = g.sub(b, a);
    out[k] = g.value(dif);
  }
  return out;
}

template class ParamStore<float>;
template class ParamStore<double>;
template class CadmModel<float>;
template class CadmModel<double>;
template Tensor<float> time_embedding<float>(std::span<const int>, int);
template Tensor<double> time_embedding<double>(std::span<const int>, int);
template Tensor<float> concat_channels<float>(const Tensor<float>&,
                                              const Tensor<float>&);
template Tensor<double> concat_channels<double>(const Tensor<double>&,
                                                const Tensor<double>&);

}  // namespace cadm

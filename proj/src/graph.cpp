#include "cadm/graph.hpp"

#include <Eigen/Core>

#include <cmath>
#include <complex>
#include <string>
#include <utility>

#include "cadm/fft.hpp"

namespace cadm {
namespace {

template <typename S>
using MatRM =
    Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

constexpr double kLnEps = 1e-5;  // layer-norm variance floor

template <typename S>
S sigmoid(S x) {
  return S(1) / (S(1) + std::exp(-x));
}

// Gathers one sample's padded patches into col (Ci*kh*kw rows, Ho*Wo cols,
// row-major). Shared by the conv2d forward and both weight/input backwards.
template <typename S>
void im2col(const Tensor<S>& x, int n, int kh, int kw, int stride, int pad,
            int ho, int wo, S* col) {
  const int ci_n = x.c(), hh = x.h(), ww = x.w();
  for (int ci = 0; ci < ci_n; ++ci) {
    for (int i = 0; i < kh; ++i) {
      for (int j = 0; j < kw; ++j) {
        S* row = col + (static_cast<std::size_t>(ci) * kh * kw + i * kw + j) *
                           (static_cast<std::size_t>(ho) * wo);
        for (int oy = 0; oy < ho; ++oy) {
          int iy = oy * stride - pad + i;
          if (iy < 0 || iy >= hh) {
            for (int ox = 0; ox < wo; ++ox) row[oy * wo + ox] = S(0);
            continue;
          }
          const S* src = x.data() + x.index(n, ci, iy, 0);
          for (int ox = 0; ox < wo; ++ox) {
            int ix = ox * stride - pad + j;
            row[oy * wo + ox] = (ix >= 0 && ix < ww) ? src[ix] : S(0);
          }
        }
      }
    }
  }
}

// Scatter-add of col-shaped gradients back onto the input plane.
template <typename S>
void col2im_add(const S* col, int ci_n, int kh, int kw, int stride, int pad,
                int ho, int wo, Tensor<S>& dx, int n) {
  const int hh = dx.h(), ww = dx.w();
  for (int ci = 0; ci < ci_n; ++ci) {
    for (int i = 0; i < kh; ++i) {
      for (int j = 0; j < kw; ++j) {
        const S* row = col + (static_cast<std::size_t>(ci) * kh * kw + i * kw +
                              j) *
                           (static_cast<std::size_t>(ho) * wo);
        for (int oy = 0; oy < ho; ++oy) {
          int iy = oy * stride - pad + i;
          if (iy < 0 || iy >= hh) continue;
          S* dst = dx.data() + dx.index(n, ci, iy, 0);
          for (int ox = 0; ox < wo; ++ox) {
            int ix = ox * stride - pad + j;
            if (ix >= 0 && ix < ww) dst[ix] += row[oy * wo + ox];
          }
        }
      }
    }
  }
}

inline bool redundant_col(int v, int w) {
  return v == 0 || (w % 2 == 0 && v == w / 2);
}

// Applies the (symmetrized) half-spectrum filter to one plane, in double.
void filter_plane(const double* in, double* out, const double* a, int h, int w) {
  int wh = half_spectrum_w(w);
  std::vector<std::complex<double>> spec(static_cast<std::size_t>(h) * wh);
  rfft2(in, spec.data(), h, w);
  for (int u = 0; u < h; ++u) {
    for (int v = 0; v < wh; ++v) {
      double av = a[u * wh + v];
      if (redundant_col(v, w)) {
        int um = (h - u) % h;
        av = 0.5 * (av + a[um * wh + v]);
      }
      spec[u * wh + v] *= av;
    }
  }
  irfft2(spec.data(), out, h, w);
}

}  // namespace

template <typename S>
typename Graph<S>::Id Graph<S>::push(Tensor<S> v, bool want,
                                     std::function<void(Graph&)> back) {
  Node n;
  n.owned = std::move(v);
  n.want = want;
  if (want) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<Id>(nodes_.size() - 1);
}

template <typename S>
typename Graph<S>::Id Graph<S>::input(Tensor<S> v) {
  if (v.empty()) throw std::invalid_argument("graph input: empty tensor");
  return push(std::move(v), false, nullptr);
}

template <typename S>
typename Graph<S>::Id Graph<S>::param(const Tensor<S>* val, Tensor<S>* grad) {
  if (!val || !grad || !val->same_shape(*grad))
    throw std::invalid_argument("graph param: bad value/grad storage");
  Node n;
  n.ext = val;
  n.pgrad = grad;
  n.want = true;
  nodes_.push_back(std::move(n));
  return static_cast<Id>(nodes_.size() - 1);
}

template <typename S>
const Tensor<S>& Graph<S>::val(Id id, const char* op) const {
  if (id < 0 || id >= num_nodes())
    throw std::invalid_argument(std::string(op) + ": bad node id " +
                                std::to_string(id));
  const Node& n = nodes_[id];
  return n.ext ? *n.ext : n.owned;
}

template <typename S>
const Tensor<S>& Graph<S>::value(Id id) const {
  return val(id, "value");
}

template <typename S>
bool Graph<S>::wants_grad(Id id) const {
  return val(id, "wants_grad"), nodes_[id].want;
}

template <typename S>
bool Graph<S>::has_grad(Id id) const {
  return val(id, "has_grad"), nodes_[id].has_g;
}

template <typename S>
const Tensor<S>& Graph<S>::grad(Id id) const {
  const Node& n = (val(id, "grad"), nodes_[id]);
  if (n.pgrad) return *n.pgrad;
  if (!n.has_g) throw std::runtime_error("grad: not computed for node");
  return n.gbuf;
}

template <typename S>
Tensor<S>& Graph<S>::gacc(Id id) {
  Node& n = nodes_[id];
  n.has_g = true;
  if (n.pgrad) return *n.pgrad;
  if (n.gbuf.empty()) {
    const Tensor<S>& v = n.ext ? *n.ext : n.owned;
    n.gbuf = Tensor<S>(v.n(), v.c(), v.h(), v.w());
  }
  return n.gbuf;
}

template <typename S>
void Graph<S>::backward(Id root, const Tensor<S>& seed) {
  const Tensor<S>& rv = val(root, "backward");
  check_same_shape(rv, seed, "backward seed");
  if (!nodes_[root].want)
    throw std::invalid_argument("backward: root does not depend on params");
  Tensor<S>& rg = gacc(root);
  for (std::size_t i = 0; i < seed.size(); ++i) rg[i] += seed[i];
  for (Id id = root; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.back && n.has_g) n.back(*this);
  }
}

// --- elementwise ------------------------------------------------------

template <typename S>
typename Graph<S>::Id Graph<S>::add(Id a, Id b) {
  const Tensor<S>& av = val(a, "add");
  const Tensor<S>& bv = val(b, "add");
  check_same_shape(av, bv, "add");
  Tensor<S> out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  bool want = nodes_[a].want || nodes_[b].want;
  Id self = num_nodes();
  return push(std::move(out), want, [a, b, self](Graph& g) {
    const Tensor<S>& gr = g.nodes_[self].gbuf;
    if (g.nodes_[a].want) {
      Tensor<S>& da = g.gacc(a);
      for (std::size_t i = 0; i < gr.size(); ++i) da[i] += gr[i];
    }
    if (g.nodes_[b].want) {
      Tensor<S>& db = g.gacc(b);
      for (std::size_t i = 0; i < gr.size(); ++i) db[i] += gr[i];
    }
  });
}

template <typename S>
typename Graph<S>::Id Graph<S>::sub(Id a, Id b) {
  const Tensor<S>& av = val(a, "sub");
  const Tensor<S>& bv = val(b, "sub");
  check_same_shape(av, bv, "sub");
  Tensor<S> out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  bool want = nodes_[a].want || nodes_[b].want;
  Id self = num_nodes();
  return push(std::move(out), want, [a, b, self](Graph& g) {
    const Tensor<S>& gr = g.nodes_[self].gbuf;
    if (g.nodes_[a].want) {
      Tensor<S>& da = g.gacc(a);
      for (std::size_t i = 0; i < gr.size(); ++i) da[i] += gr[i];
    }
    if (g.nodes_[b].want) {
      Tensor<S>& db = g.gacc(b);
      for (std::size_t i = 0; i < gr.size(); ++i) db[i] -= gr[i];
    }
  });
}

template <typename S>
typename Graph<S>::Id Graph<S>::scale(Id x, S k) {
  const Tensor<S>& xv = val(x, "scale");
  Tensor<S> out = xv;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= k;
  Id self = num_nodes();
  return push(std::move(out), nodes_[x].want, [x, k, self](Graph& g) {
    const Tensor<S>& gr = g.nodes_[self].gbuf;
    Tensor<S>& dx = g.gacc(x);
    for (std::size_t i = 0; i < gr.size(); ++i) dx[i] += k * gr[i];
  });
}

template <typename S>
typename Graph<S>::Id Graph<S>::silu(Id x) {
  const Tensor<S>& xv = val(x, "silu");
  Tensor<S> out = xv;
  for (std::size_t i = 0; i < out.size(); ++i) {
    S s = sigmoid(xv[i]);
    out[i] = xv[i] * s;
  }
  Id self = num_nodes();
  return push(std::move(out), nodes_[x].want, [x, self](Graph& g) {
    const Tensor<S>& gr = g.nodes_[self].gbuf;
    const Tensor<S>& xv2 = g.val(x, "silu.back");
    Tensor<S>& dx = g.gacc(x);
    for (std::size_t i = 0; i < gr.size(); ++i) {
      S s = sigmoid(xv2[i]);
      dx[i] += gr[i] * s * (S(1) + xv2[i] * (S(1) - s));
    }
  });
}

// --- convolution ------------------------------------------------------

template <typename S>
typename Graph<S>::Id Graph<S>::conv2d(Id x, Id w, Id b, int stride, int pad) {
  const Tensor<S>& xv = val(x, "conv2d");
  const Tensor<S>& wv = val(w, "conv2d");
  const Tensor<S>& bv = val(b, "conv2d");
  const int nb = xv.n(), ci = xv.c(), hh = xv.h(), ww = xv.w();
  const int co = wv.n(), kh = wv.h(), kw = wv.w();
  if (wv.c() != ci)
    throw std::invalid_argument("conv2d: weight expects " +
                                std::to_string(wv.c()) + " input channels, got " +
                                std::to_string(ci));
  if (bv.n() != 1 || bv.c() != co || bv.h() != 1 || bv.w() != 1)
    throw std::invalid_argument("conv2d: bias shape " + bv.shape_str());
  if (stride < 1 || pad < 0)
    throw std::invalid_argument("conv2d: bad stride/pad");
  const int ho = (hh + 2 * pad - kh) / stride + 1;
  const int wo = (ww + 2 * pad - kw) / stride + 1;
  if (hh + 2 * pad < kh || ww + 2 * pad < kw)
    throw std::invalid_argument("conv2d: kernel larger than padded input");

  const int kdim = ci * kh * kw;
  const std::size_t ohw = static_cast<std::size_t>(ho) * wo;
  Tensor<S> out(nb, co, ho, wo);
  MatRM<S> col(kdim, ohw);
  Eigen::Map<const MatRM<S>> wm(wv.data(), co, kdim);
  Eigen::Map<const VecX<S>> bvec(bv.data(), co);
  for (int n = 0; n < nb; ++n) {
    im2col(xv, n, kh, kw, stride, pad, ho, wo, col.data());
    Eigen::Map<MatRM<S>> om(out.data() + out.index(n, 0, 0, 0), co, ohw);
    om.noalias() = wm * col;
    om.colwise() += bvec;
  }

  bool want = nodes_[x].want || nodes_[w].want || nodes_[b].want;
  Id self = num_nodes();
  auto back = [x, w, b, stride, pad, self](Graph& g) {
    const Tensor<S>& gr = g.nodes_[self].gbuf;
    const Tensor<S>& xv2 = g.val(x, "conv2d.back");
    const Tensor<S>& wv2 = g.val(w, "conv2d.back");
    const int nb2 = xv2.n(), ci2 = xv2.c();
    const int co2 = wv2.n(), kh2 = wv2.h(), kw2 = wv2.w();
    const int ho2 = gr.h(), wo2 = gr.w();
    const int kdim2 = ci2 * kh2 * kw2;
    const std::size_t ohw2 = static_cast<std::size_t>(ho2) * wo2;
    const bool wx = g.nodes_[x].want, ww2 = g.nodes_[w].want,
               wb = g.nodes_[b].want;
    Eigen::Map<const MatRM<S>> wm2(wv2.data(), co2, kdim2);
    MatRM<S> col(kdim2, ohw2), cg(kdim2, ohw2);
    for (int n = 0; n < nb2; ++n) {
      Eigen::Map<const MatRM<S>> gm(gr.data() + gr.index(n, 0, 0, 0), co2,
                                    ohw2);
      if (ww2 || wx) im2col(xv2, n, kh2, kw2, stride, pad, ho2, wo2, col.data());
      if (ww2) {
        Eigen::Map<MatRM<S>> dw(g.gacc(w).data(), co2, kdim2);
        dw.noalias() += gm * col.transpose();
      }
      if (wb) {
        // fixed-order scalar sum: keeps results independent of buffer
        // addresses (Eigen's reductions peel by alignment)
        Tensor<S>& db = g.gacc(b);
        const S* gp = gr.data() + gr.index(n, 0, 0, 0);
        for (int c = 0; c < co2; ++c) {
          S acc = S(0);
          const S* row = gp + static_cast<std::size_t>(c) * ohw2;
          for (std::size_t i = 0; i < ohw2; ++i) acc += row[i];
          db[c] += acc;
        }
      }
      if (wx) {
        cg.noalias() = wm2.transpose() * gm;
        col2im_add(cg.data(), ci2, kh2, kw2, stride, pad, ho2, wo2, g.gacc(x),
                   n);
      }
    }
  };
  return push(std::move(out), want, std::move(back));
}

template <typename S>
typename Graph<S>::Id Graph<S>::linear(Id x, Id w, Id b) {
  const Tensor<S>& xv = val(x, "linear");
  const Tensor<S>& wv = val(w, "linear");
  const Tensor<S>& bv = val(b, "linear");
  const int nb = xv.n(), fin = xv.c(), gout = wv.n();
  if (xv.h() != 1 || xv.w() != 1 || wv.h() != 1 || wv.w() != 1)
    throw std::invalid_argument("linear: expects (N,F,1,1) x and (G,F,1,1) w");
  if (wv.c() != fin)
    throw std::invalid_argument("linear: feature mismatch " + xv.shape_str() +
                                " vs " + wv.shape_str());
  if (bv.n() != 1 || bv.c() != gout || bv.h() != 1 || bv.w() != 1)
    throw std::invalid_argument("linear: bias shape " + bv.shape_str());

  // scalar dots in fixed order: value must not depend on buffer addresses
  Tensor<S> out(nb, gout, 1, 1);
  for (int n = 0; n < nb; ++n) {
    const S* xn = xv.data() + xv.index(n, 0, 0, 0);
    S* yn = out.data() + out.index(n, 0, 0, 0);
    for (int gidx = 0; gidx < gout; ++gidx) {
      S acc = bv[gidx];
      const S* wrow = wv.data() + static_cast<std::size_t>(gidx) * fin;
      for (int f = 0; f < fin; ++f) acc += wrow[f] * xn[f];
      yn[gidx] = acc;
    }
  }

  bool want = nodes_[x].want || nodes_[w].want || nodes_[b].want;
  Id self = num_nodes();
  auto back = [x, w, b, self](Graph& g) {
    const Tensor<S>& gr = g.nodes_[self].gbuf;
    const Tensor<S>& xv2 = g.val(x, "linear.back");
    const Tensor<S>& wv2 = g.val(w, "linear.back");
    const int nb2 = xv2.n(), fin2 = xv2.c(), gout2 = wv2.n();
    for (int n = 0; n < nb2; ++n) {
      const S* gn = gr.data() + gr.index(n, 0, 0, 0);
      const S* xn = xv2.data() + xv2.index(n, 0, 0, 0);
      if (g.nodes_[w].want) {
        Tensor<S>& dw = g.gacc(w);
        for (int gi = 0; gi < gout2; ++gi) {
          S* drow = dw.data() + static_cast<std::size_t>(gi) * fin2;
          for (int f = 0; f < fin2; ++f) drow[f] += gn[gi] * xn[f];
        }
      }
      if (g.nodes_[b].want) {
        Tensor<S>& db = g.gacc(b);
        for (int gi = 0; gi < gout2; ++gi) db[gi] += gn[gi];
      }
      if (g.nodes_[x].want) {
        S* dx = g.gacc(x).data() + xv2.index(n, 0, 0, 0);
        for (int gi = 0; gi < gout2; ++gi) {
          const S* wrow = wv2.data() + static_cast<std::size_t>(gi) * fin2;
          for (int f = 0; f < fin2; ++f) dx[f] += gn[gi] * wrow[f];
        }
      }
    }
  };
  return push(std::move(out), want, std::move(back));
}

// --- normalization / pooling -----------------------------------------

template <typename S>
typename Graph<S>::Id Graph<S>::layer_norm_channels(Id x, Id gamma, Id beta) {
  const Tensor<S>& xv = val(x, "layer_norm");
  const Tensor<S>& gv = val(gamma, "layer_norm");
  const Tensor<S>& bv = val(beta, "layer_norm");
  const int nb = xv.n(), cc = xv.c(), hh = xv.h(), ww = xv.w();
  if (gv.n() != 1 || gv.c() != cc || gv.h() != 1 || gv.w() != 1 ||
      !gv.same_shape(bv))
    throw std::invalid_argument("layer_norm: affine params must be (1,C,1,1)");

  const std::size_t plane = static_cast<std::size_t>(hh) * ww;
  Tensor<S> out(nb, cc, hh, ww);
  for (int n = 0; n < nb; ++n) {
    const S* xs = xv.data() + xv.index(n, 0, 0, 0);
    S* ys = out.data() + out.index(n, 0, 0, 0);
    for (std::size_t p = 0; p < plane; ++p) {
      S mean = S(0);
      for (int c = 0; c < cc; ++c) mean += xs[c * plane + p];
      mean /= S(cc);
      S var = S(0);
      for (int c = 0; c < cc; ++c) {
        S d = xs[c * plane + p] - mean;
        var += d * d;
      }
      var /= S(cc);
      S inv = S(1) / std::sqrt(var + S(kLnEps));
      for (int c = 0; c < cc; ++c)
        ys[c * plane + p] =
            gv[c] * (xs[c * plane + p] - mean) * inv + bv[c];
    }
  }

  bool want = nodes_[x].want || nodes_[gamma].want || nodes_[beta].want;
  Id self = num_nodes();
  auto back = [x, gamma, beta, self](Graph& g) {
    const Tensor<S>& gr = g.nodes_[self].gbuf;
    const Tensor<S>& xv2 = g.val(x, "layer_norm.back");
    const Tensor<S>& gv2 = g.val(gamma, "layer_norm.back");
    const int nb2 = xv2.n(), cc2 = xv2.c(), hh2 = xv2.h(), ww2 = xv2.w();
    const std::size_t plane = static_cast<std::size_t>(hh2) * ww2;
    const bool wx = g.nodes_[x].want, wg = g.nodes_[gamma].want,
               wb = g.nodes_[beta].want;
    std::vector<S> xhat(cc2);
    for (int n = 0; n < nb2; ++n) {
      const S* xs = xv2.data() + xv2.index(n, 0, 0, 0);
      const S* gs = gr.data() + gr.index(n, 0, 0, 0);
      for (std::size_t p = 0; p < plane; ++p) {
        S mean = S(0);
        for (int c = 0; c < cc2; ++c) mean += xs[c * plane + p];
        mean /= S(cc2);
        S var = S(0);
        for (int c = 0; c < cc2; ++c) {
          S d = xs[c * plane + p] - mean;
          var += d * d;
        }
        var /= S(cc2);
        S inv = S(1) / std::sqrt(var + S(kLnEps));
        S sum_gd = S(0), sum_gdx = S(0);
        for (int c = 0; c < cc2; ++c) {
          xhat[c] = (xs[c * plane + p] - mean) * inv;
          S gd = gv2[c] * gs[c * plane + p];
          sum_gd += gd;
          sum_gdx += gd * xhat[c];
        }
        if (wg) {
          Tensor<S>& dg = g.gacc(gamma);
          for (int c = 0; c < cc2; ++c) dg[c] += gs[c * plane + p] * xhat[c];
        }
        if (wb) {
          Tensor<S>& db = g.gacc(beta);
          for (int c = 0; c < cc2; ++c) db[c] += gs[c * plane + p];
        }
        if (wx) {
          Tensor<S>& dx = g.gacc(x);
          S* ds = dx.data() + dx.index(n, 0, 0, 0);
          for (int c = 0; c < cc2; ++c) {
            S gd = gv2[c] * gs[c * plane + p];
            ds[c * plane + p] +=
                inv * (gd - sum_gd / S(cc2) - xhat[c] * sum_gdx / S(cc2));
          }
        }
      }
    }
  };
  return push(std::move(out), want, std::move(back));
}

template <typename S>
typename Graph<S>::Id Graph<S>::global_avg_pool(Id x) {
  const Tensor<S>& xv = val(x, "gap");
  const int nb = xv.n(), cc = xv.c();
  const std::size_t plane = static_cast<std::size_t>(xv.h()) * xv.w();
  Tensor<S> out(nb, cc, 1, 1);
  for (int n = 0; n < nb; ++n)
    for (int c = 0; c < cc; ++c) {
      const S* xs = xv.data() + xv.index(n, c, 0, 0);
      S sum = S(0);
      for (std::size_t p = 0; p < plane; ++p) sum += xs[p];
      out.at(n, c, 0, 0) = sum / S(plane);
    }
  Id self = num_nodes();
  return push(std::move(out), nodes_[x].want, [x, self](Graph& g) {
    const Tensor<S>& gr = g.nodes_[self].gbuf;
    Tensor<S>& dx = g.gacc(x);
    const int nb2 = dx.n(), cc2 = dx.c();
    const std::size_t plane = static_cast<std::size_t>(dx.h()) * dx.w();
    for (int n = 0; n < nb2; ++n)
      for (int c = 0; c < cc2; ++c) {
        S gi = gr.at(n, c, 0, 0) / S(plane);
        S* ds = dx.data() + dx.index(n, c, 0, 0);
        for (std::size_t p = 0; p < plane; ++p) ds[p] += gi;
      }
  });
}

// --- broadcast products / sums ---------------------------------------

template <typename S>
typename Graph<S>::Id Graph<S>::mul_pixel_map(Id x, Id p) {
  const Tensor<S>& xv = val(x, "mul_pixel");
  const Tensor<S>& pv = val(p, "mul_pixel");
  if (pv.n() != xv.n() || pv.c() != 1 || pv.h() != xv.h() || pv.w() != xv.w())
    throw std::invalid_argument("mul_pixel: map must be (N,1,H,W), got " +
                                pv.shape_str());
  const int nb = xv.n(), cc = xv.c();
  const std::size_t plane = static_cast<std::size_t>(xv.h()) * xv.w();
  Tensor<S> out = xv;
  for (int n = 0; n < nb; ++n) {
    const S* ps = pv.data() + pv.index(n, 0, 0, 0);
    for (int c = 0; c < cc; ++c) {
      S* ys = out.data() + out.index(n, c, 0, 0);
      for (std::size_t q = 0; q < plane; ++q) ys[q] *= ps[q];
    }
  }
  bool want = nodes_[x].want || nodes_[p].want;
  Id self = num_nodes();
  return push(std::move(out), want, [x, p, self](Graph& g) {
    const Tensor<S>& gr = g.nodes_[self].gbuf;
    const Tensor<S>& xv2 = g.val(x, "mul_pixel.back");
    const Tensor<S>& pv2 = g.val(p, "mul_pixel.back");
    const int nb2 = xv2.n(), cc2 = xv2.c();
    const std::size_t plane = static_cast<std::size_t>(xv2.h()) * xv2.w();
    for (int n = 0; n < nb2; ++n) {
      const S* ps = pv2.data() + pv2.index(n, 0, 0, 0);
      for (int c = 0; c < cc2; ++c) {
        const S* gs = gr.data() + gr.index(n, c, 0, 0);
        const S* xs = xv2.data() + xv2.index(n, c, 0, 0);
        if (g.nodes_[x].want) {
          S* ds = g.gacc(x).data() + xv2.index(n, c, 0, 0);
          for (std::size_t q = 0; q < plane; ++q) ds[q] += gs[q] * ps[q];
        }
        if (g.nodes_[p].want) {
          S* dp = g.gacc(p).data() + pv2.index(n, 0, 0, 0);
          for (std::size_t q = 0; q < plane; ++q) dp[q] += gs[q] * xs[q];
        }
      }
    }
  });
}

template <typename S>
typename Graph<S>::Id Graph<S>::mul_channel_vec(Id x, Id v) {
  const Tensor<S>& xv = val(x, "mul_channel");
  const Tensor<S>& vv = val(v, "mul_channel");
  if (vv.n() != xv.n() || vv.c() != xv.c() || vv.h() != 1 || vv.w() != 1)
    throw std::invalid_argument("mul_channel: vec must be (N,C,1,1), got " +
                                vv.shape_str());
  const int nb = xv.n(), cc = xv.c();
  const std::size_t plane = static_cast<std::size_t>(xv.h()) * xv.w();
  Tensor<S> out = xv;
  for (int n = 0; n < nb; ++n)
    for (int c = 0; c < cc; ++c) {
      S s = vv.at(n, c, 0, 0);
      S* ys = out.data() + out.index(n, c, 0, 0);
      for (std::size_t q = 0; q < plane; ++q) ys[q] *= s;
    }
  bool want = nodes_[x].want || nodes_[v].want;
  Id self = num_nodes();
  return push(std::move(out), want, [x, v, self](Graph& g) {
    const Tensor<S>& gr = g.nodes_[self].gbuf;
    const Tensor<S>& xv2 = g.val(x, "mul_channel.back");
    const Tensor<S>& vv2 = g.val(v, "mul_channel.back");
    const int nb2 = xv2.n(), cc2 = xv2.c();
    const std::size_t plane = static_cast<std::size_t>(xv2.h()) * xv2.w();
    for (int n = 0; n < nb2; ++n)
      for (int c = 0; c < cc2; ++c) {
        const S* gs = gr.data() + gr.index(n, c, 0, 0);
        const S* xs = xv2.data() + xv2.index(n, c, 0, 0);
        if (g.nodes_[x].want) {
          S s = vv2.at(n, c, 0, 0);
          S* ds = g.gacc(x).data() + xv2.index(n, c, 0, 0);
          for (std::size_t q = 0; q < plane; ++q) ds[q] += gs[q] * s;
        }
        if (g.nodes_[v].want) {
          S acc = S(0);
          for (std::size_t q = 0; q < plane; ++q) acc += gs[q] * xs[q];
          g.gacc(v).at(n, c, 0, 0) += acc;
        }
      }
  });
}

template <typename S>
typename Graph<S>::Id Graph<S>::add_channel_vec(Id x, Id v) {
  const Tensor<S>& xv = val(x, "add_channel");
  const Tensor<S>& vv = val(v, "add_channel");
  if (vv.n() != xv.n() || vv.c() != xv.c() || vv.h() != 1 || vv.w() != 1)
    throw std::invalid_argument("add_channel: vec must be (N,C,1,1), got " +
                                vv.shape_str());
  const int nb = xv.n(), cc = xv.c();
  const std::size_t plane = static_cast<std::size_t>(xv.h()) * xv.w();
  Tensor<S> out = xv;
  for (int n = 0; n < nb; ++n)
    for (int c = 0; c < cc; ++c) {
      S s = vv.at(n, c, 0, 0);
      S* ys = out.data() + out.index(n, c, 0, 0);
      for (std::size_t q = 0; q < plane; ++q) ys[q] += s;
    }
  bool want = nodes_[x].want || nodes_[v].want;
  Id self = num_nodes();
  return push(std::move(out), want, [x, v, self](Graph& g) {
    const Tensor<S>& gr = g.nodes_[self].gbuf;
    const int nb2 = gr.n(), cc2 = gr.c();
    const std::size_t plane = static_cast<std::size_t>(gr.h()) * gr.w();
    for (int n = 0; n < nb2; ++n)
      for (int c = 0; c < cc2; ++c) {
        const S* gs = gr.data() + gr.index(n, c, 0, 0);
        if (g.nodes_[x].want) {
          S* ds = g.gacc(x).data() + gr.index(n, c, 0, 0);
          for (std::size_t q = 0; q < plane; ++q) ds[q] += gs[q];
        }
        if (g.nodes_[v].want) {
          S acc = S(0);
          for (std::size_t q = 0; q < plane; ++q) acc += gs[q];
          g.gacc(v).at(n, c, 0, 0) += acc;
        }
      }
  });
}

// --- spectral filter --------------------------------------------------

template <typename S>
typename Graph<S>::Id Graph<S>::spectral_filter(Id x, Id a) {
  const Tensor<S>& xv = val(x, "spectral_filter");
  const Tensor<S>& av = val(a, "spectral_filter");
  const int nb = xv.n(), cc = xv.c(), hh = xv.h(), ww = xv.w();
  const int wh = half_spectrum_w(ww);
  if (av.n() != 1 || av.c() != cc || av.h() != hh || av.w() != wh)
    throw std::invalid_argument(
        "spectral_filter: filter must be (1,C,H,W/2+1), got " + av.shape_str() +
        " for input " + xv.shape_str());

  const std::size_t plane = static_cast<std::size_t>(hh) * ww;
  Tensor<S> out(nb, cc, hh, ww);
  std::vector<double> pin(plane), pout(plane), afc(static_cast<std::size_t>(hh) * wh);
  for (int n = 0; n < nb; ++n)
    for (int c = 0; c < cc; ++c) {
      const S* xs = xv.data() + xv.index(n, c, 0, 0);
      for (std::size_t q = 0; q < plane; ++q) pin[q] = static_cast<double>(xs[q]);
      const S* as = av.data() + av.index(0, c, 0, 0);
      for (std::size_t q = 0; q < afc.size(); ++q) afc[q] = static_cast<double>(as[q]);
      filter_plane(pin.data(), pout.data(), afc.data(), hh, ww);
      S* ys = out.data() + out.index(n, c, 0, 0);
      for (std::size_t q = 0; q < plane; ++q) ys[q] = static_cast<S>(pout[q]);
    }

  bool want = nodes_[x].want || nodes_[a].want;
  Id self = num_nodes();
  auto back = [x, a, self](Graph& g) {
    const Tensor<S>& gr = g.nodes_[self].gbuf;
    const Tensor<S>& xv2 = g.val(x, "spectral_filter.back");
    const Tensor<S>& av2 = g.val(a, "spectral_filter.back");
    const int nb2 = xv2.n(), cc2 = xv2.c(), hh2 = xv2.h(), ww2 = xv2.w();
    const int wh2 = half_spectrum_w(ww2);
    const std::size_t plane = static_cast<std::size_t>(hh2) * ww2;
    const std::size_t spec_n = static_cast<std::size_t>(hh2) * wh2;
    const bool wx = g.nodes_[x].want, wa = g.nodes_[a].want;
    std::vector<double> gin(plane), gout(plane), xin(plane), afc(spec_n);
    std::vector<std::complex<double>> xs_spec(spec_n), gs_spec(spec_n);
    const double inv_hw = 1.0 / (static_cast<double>(hh2) * ww2);
    for (int n = 0; n < nb2; ++n)
      for (int c = 0; c < cc2; ++c) {
        const S* gs = gr.data() + gr.index(n, c, 0, 0);
        for (std::size_t q = 0; q < plane; ++q)
          gin[q] = static_cast<double>(gs[q]);
        if (wx) {
          // the filter is self-adjoint, so dx is the filter applied to g
          const S* as = av2.data() + av2.index(0, c, 0, 0);
          for (std::size_t q = 0; q < spec_n; ++q)
            afc[q] = static_cast<double>(as[q]);
          filter_plane(gin.data(), gout.data(), afc.data(), hh2, ww2);
          S* dxs = g.gacc(x).data() + xv2.index(n, c, 0, 0);
          for (std::size_t q = 0; q < plane; ++q)
            dxs[q] += static_cast<S>(gout[q]);
        }
        if (wa) {
          const S* xs = xv2.data() + xv2.index(n, c, 0, 0);
          for (std::size_t q = 0; q < plane; ++q)
            xin[q] = static_cast<double>(xs[q]);
          rfft2(xin.data(), xs_spec.data(), hh2, ww2);
          rfft2(gin.data(), gs_spec.data(), hh2, ww2);
          S* da = g.gacc(a).data() + av2.index(0, c, 0, 0);
          for (int u = 0; u < hh2; ++u)
            for (int v = 0; v < wh2; ++v) {
              std::size_t q = static_cast<std::size_t>(u) * wh2 + v;
              double s = redundant_col(v, ww2) ? 1.0 : 2.0;
              double re = xs_spec[q].real() * gs_spec[q].real() +
                          xs_spec[q].imag() * gs_spec[q].imag();
              da[q] += static_cast<S>(s * re * inv_hw);
            }
        }
      }
  };
  return push(std::move(out), want, std::move(back));
}

// --- resampling / batching -------------------------------------------

template <typename S>
typename Graph<S>::Id Graph<S>::upsample2x(Id x) {
  const Tensor<S>& xv = val(x, "upsample2x");
  const int nb = xv.n(), cc = xv.c(), hh = xv.h(), ww = xv.w();
  Tensor<S> out(nb, cc, hh * 2, ww * 2);
  for (int n = 0; n < nb; ++n)
    for (int c = 0; c < cc; ++c)
      for (int y = 0; y < hh * 2; ++y) {
        const S* xs = xv.data() + xv.index(n, c, y / 2, 0);
        S* ys = out.data() + out.index(n, c, y, 0);
        for (int xo = 0; xo < ww * 2; ++xo) ys[xo] = xs[xo / 2];
      }
  Id self = num_nodes();
  return push(std::move(out), nodes_[x].want, [x, self](Graph& g) {
    const Tensor<S>& gr = g.nodes_[self].gbuf;
    Tensor<S>& dx = g.gacc(x);
    const int nb2 = dx.n(), cc2 = dx.c(), hh2 = dx.h(), ww2 = dx.w();
    for (int n = 0; n < nb2; ++n)
      for (int c = 0; c < cc2; ++c)
        for (int y = 0; y < hh2 * 2; ++y) {
          const S* gs = gr.data() + gr.index(n, c, y, 0);
          S* ds = dx.data() + dx.index(n, c, y / 2, 0);
          for (int xo = 0; xo < ww2 * 2; ++xo) ds[xo / 2] += gs[xo];
        }
  });
}

template <typename S>
typename Graph<S>::Id Graph<S>::repeat_batch(Id x, int n) {
  const Tensor<S>& xv = val(x, "repeat_batch");
  if (xv.n() != 1)
    throw std::invalid_argument("repeat_batch: source batch must be 1");
  if (n < 1) throw std::invalid_argument("repeat_batch: bad count");
  Tensor<S> out(n, xv.c(), xv.h(), xv.w());
  const std::size_t chw = xv.size();
  for (int m = 0; m < n; ++m)
    std::copy(xv.data(), xv.data() + chw, out.data() + m * chw);
  Id self = num_nodes();
  return push(std::move(out), nodes_[x].want, [x, self](Graph& g) {
    const Tensor<S>& gr = g.nodes_[self].gbuf;
    Tensor<S>& dx = g.gacc(x);
    const std::size_t chw = dx.size();
    for (int m = 0; m < gr.n(); ++m) {
      const S* gs = gr.data() + m * chw;
      for (std::size_t q = 0; q < chw; ++q) dx[q] += gs[q];
    }
  });
}

template <typename S>
typename Graph<S>::Id Graph<S>::mean_sq_diff(Id a, Id b) {
  const Tensor<S>& av = val(a, "mean_sq_diff");
  const Tensor<S>& bv = val(b, "mean_sq_diff");
  check_same_shape(av, bv, "mean_sq_diff");
  S acc = S(0);
  for (std::size_t i = 0; i < av.size(); ++i) {
    S d = av[i] - bv[i];
    acc += d * d;
  }
  Tensor<S> out(1, 1, 1, 1);
  out[0] = acc / S(av.size());
  bool want = nodes_[a].want || nodes_[b].want;
  Id self = num_nodes();
  return push(std::move(out), want, [a, b, self](Graph& g) {
    const S gr = g.nodes_[self].gbuf[0];
    const Tensor<S>& av2 = g.val(a, "mean_sq_diff.back");
    const Tensor<S>& bv2 = g.val(b, "mean_sq_diff.back");
    const S k = gr * S(2) / S(av2.size());
    if (g.nodes_[a].want) {
      Tensor<S>& da = g.gacc(a);
      for (std::size_t i = 0; i < av2.size(); ++i)
        da[i] += k * (av2[i] - bv2[i]);
    }
    if (g.nodes_[b].want) {
      Tensor<S>& db = g.gacc(b);
      for (std::size_t i = 0; i < av2.size(); ++i)
        db[i] -= k * (av2[i] - bv2[i]);
    }
  });
}

template class Graph<float>;
template class Graph<double>;

}  // namespace cadm

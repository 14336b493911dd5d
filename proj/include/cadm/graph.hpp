#pragma once

#include <functional>
#include <vector>

#include "cadm/tensor.hpp"

namespace cadm {

// Reverse-mode tape over NCHW tensors. Nodes are created in topological order
// by construction; backward() walks the tape from the root down, accumulating
// gradients. Parameter nodes reference external value/grad storage (see
// ParamStore) so several tapes can share one parameter set; callers zero the
// external grads before backward(). Interior-node gradients are kept after
// backward() for attribution maps.
template <typename S>
class Graph {
 public:
  using Id = int;

  Id input(Tensor<S> v);                               // constant leaf
  Id param(const Tensor<S>* val, Tensor<S>* grad);     // learnable leaf

  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  const Tensor<S>& value(Id id) const;
  bool wants_grad(Id id) const;
  bool has_grad(Id id) const;
  const Tensor<S>& grad(Id id) const;  // valid after backward()

  // Seeds the root gradient and propagates to all reachable ancestors.
  void backward(Id root, const Tensor<S>& seed);

  // --- ops ------------------------------------------------------------
  Id add(Id a, Id b);
  Id sub(Id a, Id b);
  Id scale(Id x, S k);
  Id silu(Id x);
  // x:(N,Ci,H,W)  w:(Co,Ci,kh,kw)  b:(1,Co,1,1)
  Id conv2d(Id x, Id w, Id b, int stride, int pad);
  // x:(N,F,1,1)   w:(G,F,1,1)     b:(1,G,1,1)
  Id linear(Id x, Id w, Id b);
  // normalization over the channel axis at each (n,h,w); gamma/beta:(1,C,1,1)
  Id layer_norm_channels(Id x, Id gamma, Id beta);
  Id global_avg_pool(Id x);            // -> (N,C,1,1)
  Id mul_pixel_map(Id x, Id p);        // p:(N,1,H,W), broadcast over channels
  Id mul_channel_vec(Id x, Id v);      // v:(N,C,1,1), broadcast over pixels
  Id add_channel_vec(Id x, Id v);      // v:(N,C,1,1), broadcast over pixels
  // learnable real filter on the half spectrum; a:(1,C,H,W/2+1)
  Id spectral_filter(Id x, Id a);
  Id upsample2x(Id x);                 // nearest neighbor
  Id repeat_batch(Id x, int n);        // (1,C,H,W) -> (n,C,H,W)
  Id mean_sq_diff(Id a, Id b);         // -> scalar (1,1,1,1)

 private:
  struct Node {
    Tensor<S> owned;                  // value storage unless external
    const Tensor<S>* ext = nullptr;   // external value (params)
    Tensor<S>* pgrad = nullptr;       // external grad sink (params)
    Tensor<S> gbuf;                   // local grad, allocated on demand
    bool has_g = false;
    bool want = false;
    std::function<void(Graph&)> back;
  };

  Id push(Tensor<S> v, bool want, std::function<void(Graph&)> back);
  const Tensor<S>& val(Id id, const char* op) const;
  Tensor<S>& gacc(Id id);  // grad accumulator, allocating if needed

  std::vector<Node> nodes_;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace cadm

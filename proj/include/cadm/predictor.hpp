#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cadm/graph.hpp"
#include "cadm/schedule.hpp"
#include "cadm/tensor.hpp"

namespace cadm {

inline constexpr int kNumLevels = 3;

// Named parameter tensors with matching gradient buffers. Entry addresses are
// stable after creation (tapes hold pointers into the store).
template <typename S>
class ParamStore {
 public:
  Tensor<S>& create(const std::string& name, int n, int c, int h, int w);
  bool has(const std::string& name) const;
  Tensor<S>& value(const std::string& name);
  const Tensor<S>& value(const std::string& name) const;
  Tensor<S>& grad(const std::string& name);

  int count() const { return static_cast<int>(entries_.size()); }
  const std::string& name(int i) const { return entries_[i].name; }
  Tensor<S>& value(int i) { return entries_[i].val; }
  const Tensor<S>& value(int i) const { return entries_[i].val; }
  Tensor<S>& grad(int i) { return entries_[i].grad; }
  const Tensor<S>& grad(int i) const { return entries_[i].grad; }

  void zero_grads();
  std::size_t total_params() const;

  // element-wise copy from a store with identical names/shapes
  template <typename S2>
  void copy_from(const ParamStore<S2>& o) {
    if (o.count() != count())
      throw std::invalid_argument("ParamStore: tensor count mismatch");
    for (int i = 0; i < count(); ++i) {
      if (o.name(i) != name(i) || o.value(i).size() != value(i).size())
        throw std::invalid_argument("ParamStore: layout mismatch at " +
                                    name(i));
      for (std::size_t j = 0; j < value(i).size(); ++j)
        value(i)[j] = static_cast<S>(o.value(i)[j]);
    }
  }

 private:
  struct Entry {
    std::string name;
    Tensor<S> val, grad;
  };
  std::deque<Entry> entries_;  // deque: stable addresses on growth
  std::map<std::string, int> index_;
};

struct PredictorConfig {
  int image_size = 64;       // square input edge, divisible by 8
  int image_channels = 3;
  int base_channels = 32;    // channels at the finest pyramid level
  int blocks_per_level = 1;  // residual blocks per encoder/decoder stage
  int time_embed_dim = 64;   // sinusoidal embedding width, even

  void validate() const;
  int level_channels(int k) const { return base_channels << k; }
  int level_size(int k) const { return image_size >> (k + 1); }
  bool operator==(const PredictorConfig&) const = default;
};

// Which difference scales feed the decoder and whether the spectral
// enhancement path is active. scale_on[k] indexes pyramid level k
// (k = 2 is the deepest level, injected at the decoder bottleneck).
struct AblationFlags {
  std::array<bool, kNumLevels> scale_on = {true, true, true};
  bool use_nsse = true;
};

// Scale labels are 1-based and counted from the finest level (scale 1) to the
// bottleneck (scale 3). The active set must include scale 3 and be contiguous,
// i.e. one of {3}, {2,3}, {1,2,3}.
AblationFlags flags_from_scales(const std::vector<int>& scales, bool use_nsse);
std::vector<int> scales_from_flags(const AblationFlags& fl);

// sinusoidal embedding of integer timesteps -> (N, dim, 1, 1)
template <typename S>
Tensor<S> time_embedding(std::span<const int> t, int dim);

// channel concatenation; y may have batch 1, in which case it is broadcast
template <typename S>
Tensor<S> concat_channels(const Tensor<S>& x, const Tensor<S>& y);

// Change-aware conditioned noise predictor. Two weight-shared encoders: one
// over each condition image, one over x_t concatenated with each condition.
// Per level the x-branch features are spectrally denoised and turned into
// pixel/channel attention over the condition features; the decoder consumes
// the attended difference (b minus a) plus the averaged x-branch embedding,
// from the bottleneck up.
//
// The output decomposes as gate(t)*x_t + head_gate(t)*F, where F is the
// feature-path head and the two scalar gates are affine in the schedule
// constants 1/sqrt(1-alpha_bar_t) and sqrt(alpha_bar_t/(1-alpha_bar_t)).
// Those are the coefficients x_t and the clean map carry in the exact
// inversion of the forward noising, so when F approaches the negated change
// map the prediction approaches the exact noise at every timestep; the
// network's task is timestep-free while the gates span coefficients that
// vary by three orders of magnitude across the chain. The schedule the
// constants come from is fixed at construction (defaults to the shipped
// 1000-step linear schedule respaced to 100).
template <typename S>
class CadmModel {
 public:
  using Id = typename Graph<S>::Id;

  // sched: source of the gate constants; null means the default schedule.
  // Pass the run's schedule whenever it differs from the default.
  CadmModel(const PredictorConfig& cfg, std::uint64_t init_seed,
            const NoiseSchedule* sched = nullptr);

  const PredictorConfig& config() const { return cfg_; }
  ParamStore<S>& params() { return params_; }
  const ParamStore<S>& params() const { return params_; }

  struct Tape {
    Graph<S> g;
    Id eps = -1;                          // predicted noise (N,1,H,W)
    std::array<Id, kNumLevels> dif{};     // guided difference features
    std::array<Id, kNumLevels> xdif{};    // raw x-branch differences
    std::array<Id, kNumLevels> dec{};     // decoder stage outputs
  };

  // Full differentiable forward. x_t: (N,1,S,S); ia/ib: (N,C,S,S); one
  // timestep per sample.
  Tape forward(const Tensor<S>& x_t, const Tensor<S>& ia, const Tensor<S>& ib,
               std::span<const int> t, const AblationFlags& fl = {});

  Tensor<S> predict_noise(const Tensor<S>& x_t, const Tensor<S>& ia,
                          const Tensor<S>& ib, std::span<const int> t,
                          const AblationFlags& fl = {});

  // Conditional pyramids for one pair (batch 1), reusable across a whole
  // sampling chain and ensemble.
  struct CondCache {
    std::array<Tensor<S>, kNumLevels> pyr_a, pyr_b;
  };
  CondCache encode_conditions(const Tensor<S>& ia, const Tensor<S>& ib);
  Tensor<S> predict_with_cache(const CondCache& cache, const Tensor<S>& x_t,
                               const Tensor<S>& ia, const Tensor<S>& ib,
                               std::span<const int> t,
                               const AblationFlags& fl = {});

  // The four feature pyramids (values only).
  struct Pyramids {
    std::array<Tensor<S>, kNumLevels> cond_a, cond_b, x_a, x_b;
  };
  Pyramids encode_branches(const Tensor<S>& x_t, const Tensor<S>& ia,
                           const Tensor<S>& ib);

  // Standalone feature ops (values only), for inspection and tests.
  Tensor<S> noise_suppress(int level, const Tensor<S>& m_x);
  Tensor<S> attention_fuse(int level, const Tensor<S>& m_cond,
                           const Tensor<S>& m_prime);
  std::array<Tensor<S>, kNumLevels> dif_features(const Pyramids& pyr,
                                                 const AblationFlags& fl = {});

  template <typename S2>
  CadmModel<S2> cast() const {
    CadmModel<S2> m(cfg_, 0);
    m.params().copy_from(params_);
    m.kappa_id_.assign(kappa_id_.begin(), kappa_id_.end());
    m.kappa_mask_.assign(kappa_mask_.begin(), kappa_mask_.end());
    return m;
  }

 private:
  template <typename S2>
  friend class CadmModel;

  void init_params(std::uint64_t seed);
  Id pnode(Graph<S>& g, const std::string& name);
  Id res_block(Graph<S>& g, Id x, const std::string& prefix);
  Id stage(Graph<S>& g, Id x, const std::string& prefix);
  std::array<Id, kNumLevels> encoder(Graph<S>& g, Id x,
                                     const std::string& prefix);
  Id ns_part(Graph<S>& g, int level, Id m_x);
  Id att_part(Graph<S>& g, int level, Id m_cond, Id m_prime);
  Id time_feat(Graph<S>& g, std::span<const int> t);
  Tensor<S> kappa_feat(std::span<const int> t, bool mask) const;
  void decode(Tape& tp, const std::array<Id, kNumLevels>& comb, Id tfeat,
              Id xskip, Id hgate);
  void check_pair(const Tensor<S>& ia, const Tensor<S>& ib) const;

  PredictorConfig cfg_;
  ParamStore<S> params_;
  // Per-timestep gate bases, indexed by t (entry 0 unused).
  std::vector<S> kappa_id_, kappa_mask_;
};

// Minimal predictor interface used by the sampler and the interface-level
// loss: bind a pair once, then predict for any batch of noisy states (one
// timestep per row) under that pair.
template <typename S>
class NoisePredictor {
 public:
  virtual ~NoisePredictor() = default;
  virtual void bind_pair(const Tensor<S>& ia, const Tensor<S>& ib) = 0;
  virtual Tensor<S> predict(const Tensor<S>& x_t, std::span<const int> t) = 0;
};

// Adapter running CadmModel with per-pair cached conditional features.
template <typename S>
class ModelPredictor : public NoisePredictor<S> {
 public:
  explicit ModelPredictor(CadmModel<S>& model, const AblationFlags& fl = {})
      : model_(&model), fl_(fl) {}
  void bind_pair(const Tensor<S>& ia, const Tensor<S>& ib) override {
    cache_ = model_->encode_conditions(ia, ib);
    ia_ = ia;
    ib_ = ib;
    bound_ = true;
  }
  Tensor<S> predict(const Tensor<S>& x_t, std::span<const int> t) override {
    if (!bound_)
      throw std::runtime_error("ModelPredictor: no pair bound");
    return model_->predict_with_cache(cache_, x_t, ia_, ib_, t, fl_);
  }

 private:
  CadmModel<S>* model_;
  AblationFlags fl_;
  typename CadmModel<S>::CondCache cache_;
  Tensor<S> ia_, ib_;
  bool bound_ = false;
};

extern template class ParamStore<float>;
extern template class ParamStore<double>;
extern template class CadmModel<float>;
extern template class CadmModel<double>;
extern template Tensor<float> time_embedding<float>(std::span<const int>, int);
extern template Tensor<double> time_embedding<double>(std::span<const int>,
                                                      int);
extern template Tensor<float> concat_channels<float>(const Tensor<float>&,
                                                     const Tensor<float>&);
extern template Tensor<double> concat_channels<double>(const Tensor<double>&,
                                                       const Tensor<double>&);

}  // namespace cadm

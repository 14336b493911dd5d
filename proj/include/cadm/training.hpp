#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cadm/data.hpp"
#include "cadm/predictor.hpp"
#include "cadm/rng.hpp"
#include "cadm/schedule.hpp"

namespace cadm {

struct TrainConfig {
  int epochs = 20;      // full-scale reference runs use 200
  int batch_size = 8;   // full-scale reference runs use 32
  double learning_rate = 1e-4;
  double momentum = 0.99;
  double weight_decay = 5e-4;
  std::uint64_t seed = 0;
  int val_steps = 10;     // respaced chain length for per-epoch validation
  int val_ensemble = 1;   // chains per pair during validation
  double threshold = 0.5;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

// Momentum SGD with decoupled-from-nothing classic L2: v = m*v + g + wd*p,
// then p -= lr*v. Velocities are named after their parameters so they can be
// checkpointed and restored independently of creation order.
template <typename S>
class MomentumSgd {
 public:
  explicit MomentumSgd(const ParamStore<S>& params);

  void step(ParamStore<S>& params, double lr, double momentum,
            double weight_decay);

  int count() const { return static_cast<int>(vel_.size()); }
  const std::string& name(int i) const { return vel_[i].first; }
  Tensor<S>& velocity(int i) { return vel_[i].second; }
  const Tensor<S>& velocity(int i) const { return vel_[i].second; }
  Tensor<S>& velocity(const std::string& nm);

 private:
  std::vector<std::pair<std::string, Tensor<S>>> vel_;
};

// Mean squared error between predicted and injected noise over a mini-batch.
// Per example, in index order: draw t uniform on [1, T], then eps ~ N(0, I)
// row-major; x0 = 2*label - 1 and x_t = q_sample(x0, t, eps). The predictor
// overload runs one example at a time through the interface; the model
// overload runs a single batched tape and, when accumulate_grads is set,
// backpropagates into the parameter gradients (caller zeroes them first).
template <typename S>
double diffusion_loss(NoisePredictor<S>& pred, const Dataset& data,
                      std::span<const int> idx, const NoiseSchedule& sched,
                      Rng& rng);
template <typename S>
double diffusion_loss(CadmModel<S>& model, const Dataset& data,
                      std::span<const int> idx, const NoiseSchedule& sched,
                      Rng& rng, const AblationFlags& fl = {},
                      bool accumulate_grads = true);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_f1 = 0.0;
  double lr = 0.0;
};

// Epoch loop: linearly decayed lr, stateless per-epoch shuffles, and a short
// respaced-ensemble validation pass after each epoch. Resuming from a
// checkpoint restores next_epoch, the optimizer state and the draw stream,
// making a split run reproduce an uninterrupted one.
class Trainer {
 public:
  Trainer(CadmModel<float>& model, const TrainConfig& cfg,
          const NoiseSchedule& sched, const AblationFlags& fl = {});

  // Runs epochs [next_epoch, cfg.epochs); invokes on_epoch after each.
  std::vector<EpochLog> run(const Dataset& train, const Dataset& val,
                            const std::function<void(const EpochLog&)>&
                                on_epoch = {});

  // lr for epoch e (0-based): lr0 * (E - e) / E.
  double epoch_lr(int epoch) const;
  // Deterministic data order for epoch e, independent of run position.
  std::vector<int> epoch_order(int epoch, int n) const;
  double validate_f1(const Dataset& val, int epoch);

  int next_epoch() const { return next_epoch_; }
  void set_next_epoch(int e) { next_epoch_ = e; }
  CadmModel<float>& model() { return *model_; }
  MomentumSgd<float>& optimizer() { return opt_; }
  Rng& rng() { return rng_; }
  const TrainConfig& config() const { return cfg_; }
  const NoiseSchedule& schedule() const { return sched_; }
  const AblationFlags& flags() const { return fl_; }

 private:
  CadmModel<float>* model_;
  TrainConfig cfg_;
  NoiseSchedule sched_;
  AblationFlags fl_;
  MomentumSgd<float> opt_;
  Rng rng_;
  int next_epoch_ = 0;
};

// Finite-difference gradient verification against any scalar objective with
// externally stored parameters. Implementations must make loss() a pure
// function of the parameter values (fixed draws inside).
class GradCheckTarget {
 public:
  virtual ~GradCheckTarget() = default;
  virtual ParamStore<double>& params() = 0;
  // Zeroes grads, evaluates the objective once and fills them.
  virtual double loss_and_grads() = 0;
  // Evaluates the objective without touching grads.
  virtual double loss() = 0;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  int checked = 0;
};

// Central differences with step fd_step on n_params coordinates picked
// round-robin across tensors (offset chosen by pick_seed), so every tensor
// with enough picks gets probed. Relative error uses
// |g_fd - g| / max(|g_fd|, |g|, 1e-8).
GradCheckReport grad_check(GradCheckTarget& target, int n_params,
                           double fd_step, std::uint64_t pick_seed);

// The training objective as a grad-check target: fixed batch, fixed draw
// seed, double precision throughout.
class DiffusionLossTarget : public GradCheckTarget {
 public:
  DiffusionLossTarget(CadmModel<double>& model, const Dataset& data,
                      std::vector<int> idx, const NoiseSchedule& sched,
                      std::uint64_t draw_seed, const AblationFlags& fl = {});

  ParamStore<double>& params() override;
  double loss_and_grads() override;
  double loss() override;

 private:
  double eval(bool grads);

  CadmModel<double>* model_;
  const Dataset* data_;
  std::vector<int> idx_;
  NoiseSchedule sched_;
  std::uint64_t draw_seed_;
  AblationFlags fl_;
};

extern template class MomentumSgd<float>;
extern template class MomentumSgd<double>;
extern template double diffusion_loss<float>(NoisePredictor<float>&,
                                             const Dataset&,
                                             std::span<const int>,
                                             const NoiseSchedule&, Rng&);
extern template double diffusion_loss<double>(NoisePredictor<double>&,
                                              const Dataset&,
                                              std::span<const int>,
                                              const NoiseSchedule&, Rng&);
extern template double diffusion_loss<float>(CadmModel<float>&, const Dataset&,
                                             std::span<const int>,
                                             const NoiseSchedule&, Rng&,
                                             const AblationFlags&, bool);
extern template double diffusion_loss<double>(CadmModel<double>&,
                                              const Dataset&,
                                              std::span<const int>,
                                              const NoiseSchedule&, Rng&,
                                              const AblationFlags&, bool);

}  // namespace cadm

#include "cadm/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>

#include "cadm/sampler.hpp"

namespace cadm {
namespace {

// Stream tags for the trainer's independent reproducible seeds.
constexpr std::uint64_t kDrawTag = 0x7d4a;     // t/eps draws during training
constexpr std::uint64_t kShuffleTag = 0x51af;  // per-epoch data order
constexpr std::uint64_t kValTag = 0x3a1d;      // per-epoch validation chains

template <typename S>
Tensor<S> slice_batch(const Tensor<S>& t, int i) {
  Tensor<S> out(1, t.c(), t.h(), t.w());
  std::copy_n(t.data() + out.size() * static_cast<std::size_t>(i), out.size(),
              out.data());
  return out;
}

template <typename S>
struct DrawnBatch {
  Tensor<S> x_t, ia, ib, eps;
  std::vector<int> t;
};

// Materializes a mini-batch with the documented draw order: per example, in
// index order, t first and then the noise grid.
template <typename S>
DrawnBatch<S> draw_batch(const Dataset& data, std::span<const int> idx,
                         const NoiseSchedule& sched, Rng& rng) {
  if (idx.empty()) throw std::invalid_argument("diffusion_loss: empty batch");
  for (int j : idx)
    if (j < 0 || j >= static_cast<int>(data.size()))
      throw std::invalid_argument("diffusion_loss: index out of range");

  const BitemporalPair& first = data[idx[0]];
  const int C = first.image_a.c(), H = first.image_a.h(),
            W = first.image_a.w();
  const int N = static_cast<int>(idx.size());
  DrawnBatch<S> b{Tensor<S>(N, 1, H, W), Tensor<S>(N, C, H, W),
                  Tensor<S>(N, C, H, W), Tensor<S>(N, 1, H, W),
                  std::vector<int>(N)};
  const int T = sched.steps();
  const std::size_t plane = static_cast<std::size_t>(H) * W;

  for (int i = 0; i < N; ++i) {
    const BitemporalPair& p = data[idx[i]];
    if (p.image_a.c() != C || p.image_a.h() != H || p.image_a.w() != W)
      throw std::invalid_argument("diffusion_loss: mixed image shapes in batch");
    b.t[i] = rng.uniform_int(1, T);
    Tensor<S> eps_i(1, 1, H, W);
    rng.fill_normal(eps_i);

    Tensor<S> x0(1, 1, H, W);
    for (std::size_t j = 0; j < plane; ++j)
      x0[j] = static_cast<S>(2.0f * p.label[j] - 1.0f);
    Tensor<S> xt = q_sample(x0, b.t[i], eps_i, sched);

    std::copy_n(eps_i.data(), plane, b.eps.data() + plane * i);
    std::copy_n(xt.data(), plane, b.x_t.data() + plane * i);
    const std::size_t iplane = plane * C;
    for (std::size_t j = 0; j < iplane; ++j) {
      b.ia[iplane * i + j] = static_cast<S>(p.image_a[j]);
      b.ib[iplane * i + j] = static_cast<S>(p.image_b[j]);
    }
  }
  return b;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
  if (batch_size < 1)
    throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(learning_rate > 0.0))
    throw std::invalid_argument("train: learning_rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw std::invalid_argument("train: momentum must be in [0, 1)");
  if (weight_decay < 0.0)
    throw std::invalid_argument("train: weight_decay must be >= 0");
  if (val_steps < 1) throw std::invalid_argument("train: val_steps must be >= 1");
  if (val_ensemble < 1)
    throw std::invalid_argument("train: val_ensemble must be >= 1");
  if (!(threshold > 0.0 && threshold < 1.0))
    throw std::invalid_argument("train: threshold must be in (0, 1)");
}

template <typename S>
MomentumSgd<S>::MomentumSgd(const ParamStore<S>& params) {
  vel_.reserve(params.count());
  for (int i = 0; i < params.count(); ++i) {
    const Tensor<S>& v = params.value(i);
    vel_.emplace_back(params.name(i), Tensor<S>(v.n(), v.c(), v.h(), v.w()));
  }
}

template <typename S>
Tensor<S>& MomentumSgd<S>::velocity(const std::string& nm) {
  for (auto& [n, t] : vel_)
    if (n == nm) return t;
  throw std::invalid_argument("MomentumSgd: unknown velocity " + nm);
}

template <typename S>
void MomentumSgd<S>::step(ParamStore<S>& params, double lr, double momentum,
                          double weight_decay) {
  if (params.count() != count())
    throw std::invalid_argument("MomentumSgd: parameter store mismatch");
  for (int i = 0; i < count(); ++i) {
    if (params.name(i) != vel_[i].first)
      throw std::invalid_argument("MomentumSgd: parameter order mismatch at " +
                                  params.name(i));
    Tensor<S>& p = params.value(i);
    const Tensor<S>& g = params.grad(i);
    Tensor<S>& v = vel_[i].second;
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double vj = momentum * static_cast<double>(v[j]) +
                        static_cast<double>(g[j]) +
                        weight_decay * static_cast<double>(p[j]);
      v[j] = static_cast<S>(vj);
      p[j] = static_cast<S>(static_cast<double>(p[j]) - lr * vj);
    }
  }
}

template <typename S>
double diffusion_loss(NoisePredictor<S>& pred, const Dataset& data,
                      std::span<const int> idx, const NoiseSchedule& sched,
                      Rng& rng) {
  DrawnBatch<S> b = draw_batch<S>(data, idx, sched, rng);
  const int N = static_cast<int>(b.t.size());
  double acc = 0.0;
  std::size_t count = 0;
  for (int i = 0; i < N; ++i) {
    pred.bind_pair(slice_batch(b.ia, i), slice_batch(b.ib, i));
    Tensor<S> xt = slice_batch(b.x_t, i);
    const int tv[] = {b.t[i]};
    Tensor<S> e = pred.predict(xt, tv);
    Tensor<S> tgt = slice_batch(b.eps, i);
    check_same_shape(e, tgt, "diffusion_loss");
    for (std::size_t j = 0; j < e.size(); ++j) {
      const double d = static_cast<double>(e[j]) - static_cast<double>(tgt[j]);
      acc += d * d;
    }
    count += e.size();
  }
  return acc / static_cast<double>(count);
}

template <typename S>
double diffusion_loss(CadmModel<S>& model, const Dataset& data,
                      std::span<const int> idx, const NoiseSchedule& sched,
                      Rng& rng, const AblationFlags& fl, bool accumulate_grads) {
  DrawnBatch<S> b = draw_batch<S>(data, idx, sched, rng);
  auto tape = model.forward(b.x_t, b.ia, b.ib, b.t, fl);
  auto tgt = tape.g.input(b.eps);
  auto lid = tape.g.mean_sq_diff(tape.eps, tgt);
  const double loss = static_cast<double>(tape.g.value(lid)[0]);
  if (accumulate_grads) {
    Tensor<S> seed(1, 1, 1, 1);
    seed.fill(S(1));
    tape.g.backward(lid, seed);
  }
  return loss;
}

Trainer::Trainer(CadmModel<float>& model, const TrainConfig& cfg,
                 const NoiseSchedule& sched, const AblationFlags& fl)
    : model_(&model),
      cfg_(cfg),
      sched_(sched),
      fl_(fl),
      opt_(model.params()),
      rng_(mix_seed(cfg.seed, kDrawTag)) {
  cfg_.validate();
}

double Trainer::epoch_lr(int epoch) const {
  if (cfg_.epochs <= 0) return cfg_.learning_rate;
  return cfg_.learning_rate * static_cast<double>(cfg_.epochs - epoch) /
         static_cast<double>(cfg_.epochs);
}

std::vector<int> Trainer::epoch_order(int epoch, int n) const {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng r(mix_seed(mix_seed(cfg_.seed, kShuffleTag),
                 static_cast<std::uint64_t>(epoch)));
  for (int i = n - 1; i > 0; --i) {
    const int j = r.uniform_int(0, i);
    std::swap(order[i], order[j]);
  }
  return order;
}

double Trainer::validate_f1(const Dataset& val, int epoch) {
  NoiseSchedule vs = sched_.respaced(std::min(cfg_.val_steps, sched_.steps()));
  ModelPredictor<float> pred(*model_, fl_);
  SamplerConfig sc;
  sc.steps = vs.steps();
  sc.ensemble = cfg_.val_ensemble;
  sc.threshold = cfg_.threshold;
  sc.seed =
      mix_seed(mix_seed(cfg_.seed, kValTag), static_cast<std::uint64_t>(epoch));
  return evaluate_dataset(pred, val, vs, sc).metrics.f1;
}

std::vector<EpochLog> Trainer::run(
    const Dataset& train, const Dataset& val,
    const std::function<void(const EpochLog&)>& on_epoch) {
  if (train.empty()) throw std::invalid_argument("trainer: empty training set");
  std::vector<EpochLog> logs;
  for (int e = next_epoch_; e < cfg_.epochs; ++e) {
    const double lr = epoch_lr(e);
    const std::vector<int> order =
        epoch_order(e, static_cast<int>(train.size()));
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t s = 0; s < order.size();
         s += static_cast<std::size_t>(cfg_.batch_size)) {
      const std::size_t n =
          std::min<std::size_t>(cfg_.batch_size, order.size() - s);
      std::span<const int> idx(order.data() + s, n);
      model_->params().zero_grads();
      const double loss = diffusion_loss(*model_, train, idx, sched_, rng_,
                                         fl_, /*accumulate_grads=*/true);
      if (!std::isfinite(loss))
        throw std::runtime_error(
            "trainer: non-finite loss at epoch " + std::to_string(e) +
            ", batch " + std::to_string(s / cfg_.batch_size));
      opt_.step(model_->params(), lr, cfg_.momentum, cfg_.weight_decay);
      loss_sum += loss * static_cast<double>(n);
      seen += n;
    }
    EpochLog log{e, loss_sum / static_cast<double>(seen), 0.0, lr};
    if (!val.empty()) log.val_f1 = validate_f1(val, e);
    next_epoch_ = e + 1;
    logs.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return logs;
}

GradCheckReport grad_check(GradCheckTarget& target, int n_params,
                           double fd_step, std::uint64_t pick_seed) {
  ParamStore<double>& ps = target.params();
  if (ps.count() == 0)
    throw std::invalid_argument("grad_check: empty parameter store");
  if (n_params < 1 || !(fd_step > 0.0))
    throw std::invalid_argument("grad_check: bad probe settings");

  target.loss_and_grads();
  Rng pick(pick_seed);
  GradCheckReport rep;
  for (int i = 0; i < n_params; ++i) {
    const int ti = i % ps.count();
    const std::size_t off = static_cast<std::size_t>(
        pick.uniform_int(0, static_cast<int>(ps.value(ti).size()) - 1));
    const double ga = ps.grad(ti)[off];
    const double orig = ps.value(ti)[off];
    ps.value(ti)[off] = orig + fd_step;
    const double lp = target.loss();
    ps.value(ti)[off] = orig - fd_step;
    const double lm = target.loss();
    ps.value(ti)[off] = orig;
    const double gfd = (lp - lm) / (2.0 * fd_step);
    const double rel = std::abs(gfd - ga) /
                       std::max({std::abs(gfd), std::abs(ga), 1e-8});
    rep.max_rel_err = std::max(rep.max_rel_err, rel);
    ++rep.checked;
  }
  return rep;
}

DiffusionLossTarget::DiffusionLossTarget(CadmModel<double>& model,
                                         const Dataset& data,
                                         std::vector<int> idx,
                                         const NoiseSchedule& sched,
                                         std::uint64_t draw_seed,
                                         const AblationFlags& fl)
    : model_(&model),
      data_(&data),
      idx_(std::move(idx)),
      sched_(sched),
      draw_seed_(draw_seed),
      fl_(fl) {}

ParamStore<double>& DiffusionLossTarget::params() { return model_->params(); }

double DiffusionLossTarget::eval(bool grads) {
  Rng r(draw_seed_);
  if (grads) model_->params().zero_grads();
  return diffusion_loss(*model_, *data_, idx_, sched_, r, fl_, grads);
}

double DiffusionLossTarget::loss_and_grads() { return eval(true); }
double DiffusionLossTarget::loss() { return eval(false); }

template class MomentumSgd<float>;
template class MomentumSgd<double>;
template double diffusion_loss<float>(NoisePredictor<float>&, const Dataset&,
                                      std::span<const int>,
                                      const NoiseSchedule&, Rng&);
template double diffusion_loss<double>(NoisePredictor<double>&, const Dataset&,
                                       std::span<const int>,
                                       const NoiseSchedule&, Rng&);
template double diffusion_loss<float>(CadmModel<float>&, const Dataset&,
                                      std::span<const int>,
                                      const NoiseSchedule&, Rng&,
                                      const AblationFlags&, bool);
template double diffusion_loss<double>(CadmModel<double>&, const Dataset&,
                                       std::span<const int>,
                                       const NoiseSchedule&, Rng&,
                                       const AblationFlags&, bool);

}  // namespace cadm

#pragma once

#include <cmath>
#include <vector>

#include "cadm/tensor.hpp"

namespace cadm {

// Forward-process noise schedule. Steps are 1-based: t runs over [1, steps],
// and alpha_bar at step 0 is defined as 1 (it only enters the posterior
// variance). All schedule math is double precision; q_sample/p_sample cast to
// the model scalar type at the boundary.
class NoiseSchedule {
 public:
  static NoiseSchedule linear(int steps, double beta_start, double beta_end);

  // Subsequence schedule over `steps` of the original steps: keeps the
  // cumulative signal decay at the retained points so a model trained on the
  // fine schedule can be sampled on the coarse one.
  NoiseSchedule respaced(int steps) const;

  int steps() const { return static_cast<int>(betas_.size()); }
  double beta(int t) const { return betas_[check_t(t)]; }
  double alpha(int t) const { return alphas_[check_t(t)]; }
  double alpha_bar(int t) const {
    if (t == 0) return 1.0;
    return alpha_bars_[check_t(t)];
  }
  double posterior_var(int t) const { return posterior_vars_[check_t(t)]; }

  const std::vector<double>& betas() const { return betas_; }

 private:
  NoiseSchedule() = default;
  void finalize(bool require_monotone_betas);
  std::size_t check_t(int t) const;

  std::vector<double> betas_, alphas_, alpha_bars_, posterior_vars_;
};

// x_t = sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps
template <typename S>
Tensor<S> q_sample(const Tensor<S>& x0, int t, const Tensor<S>& eps,
                   const NoiseSchedule& sched) {
  check_same_shape(x0, eps, "q_sample");
  double ab = sched.alpha_bar(t);  // validates t
  double sa = std::sqrt(ab), sn = std::sqrt(1.0 - ab);
  Tensor<S> out = x0;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<S>(sa * static_cast<double>(x0[i]) +
                            sn * static_cast<double>(eps[i]));
  return out;
}

// One reverse step: mean = (x_t - beta_t/sqrt(1-alpha_bar_t) * eps_hat)
// / sqrt(alpha_t), plus posterior noise for t > 1. The final step (t = 1) is
// deterministic: passing z there is a contract violation.
template <typename S>
Tensor<S> p_sample(const Tensor<S>& xt, int t, const Tensor<S>& eps_hat,
                   const NoiseSchedule& sched, const Tensor<S>* z = nullptr) {
  check_same_shape(xt, eps_hat, "p_sample");
  double ab = sched.alpha_bar(t);
  double coef = sched.beta(t) / std::sqrt(1.0 - ab);
  double inv_sa = 1.0 / std::sqrt(sched.alpha(t));
  if (t == 1) {
    if (z) throw std::invalid_argument("p_sample: no noise is added at t=1");
  } else {
    if (!z) throw std::invalid_argument("p_sample: z required for t>1");
    check_same_shape(xt, *z, "p_sample z");
  }
  double sigma = (t > 1) ? std::sqrt(sched.posterior_var(t)) : 0.0;
  Tensor<S> out = xt;
  for (std::size_t i = 0; i < out.size(); ++i) {
    double mean = (static_cast<double>(xt[i]) -
                   coef * static_cast<double>(eps_hat[i])) *
                  inv_sa;
    if (t > 1) mean += sigma * static_cast<double>((*z)[i]);
    out[i] = static_cast<S>(mean);
  }
  return out;
}

}  // namespace cadm

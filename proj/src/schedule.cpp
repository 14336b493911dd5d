#include "cadm/schedule.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cadm {

std::size_t NoiseSchedule::check_t(int t) const {
  if (t < 1 || t > steps())
    throw std::invalid_argument("schedule: step " + std::to_string(t) +
                                " outside [1, " + std::to_string(steps()) +
                                "]");
  return static_cast<std::size_t>(t - 1);
}

void NoiseSchedule::finalize(bool require_monotone_betas) {
  if (betas_.empty())
    throw std::invalid_argument("schedule: needs at least one step");
  alphas_.resize(betas_.size());
  alpha_bars_.resize(betas_.size());
  posterior_vars_.resize(betas_.size());
  double prod = 1.0;
  for (std::size_t i = 0; i < betas_.size(); ++i) {
    double b = betas_[i];
    if (!(b > 0.0 && b < 1.0))
      throw std::invalid_argument("schedule: beta[" + std::to_string(i + 1) +
                                  "]=" + std::to_string(b) +
                                  " outside (0,1)");
    if (require_monotone_betas && i > 0 && b < betas_[i - 1] - 1e-15)
      throw std::invalid_argument("schedule: betas must be non-decreasing");
    double prev = prod;
    alphas_[i] = 1.0 - b;
    prod *= alphas_[i];
    alpha_bars_[i] = prod;
    if (prod >= prev)
      throw std::invalid_argument(
          "schedule: alpha_bar must decrease strictly");
    // posterior variance of x_{t-1} given (x_t, x_0); the t=1 entry is
    // clamped to beta_1 (the exact value is 0 and never used: the last
    // reverse step is deterministic)
    posterior_vars_[i] =
        (i == 0) ? b : (1.0 - alpha_bars_[i - 1]) / (1.0 - prod) * b;
  }
}

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start,
                                    double beta_end) {
  if (steps < 1)
    throw std::invalid_argument("schedule: steps must be >= 1");
  if (beta_end < beta_start)
    throw std::invalid_argument("schedule: beta_end < beta_start");
  NoiseSchedule s;
  s.betas_.resize(steps);
  for (int i = 0; i < steps; ++i)
    s.betas_[i] =
        (steps == 1)
            ? beta_start
            : beta_start + (beta_end - beta_start) * i / (steps - 1.0);
  s.finalize(/*require_monotone_betas=*/true);
  return s;
}

NoiseSchedule NoiseSchedule::respaced(int steps) const {
  int t_full = this->steps();
  if (steps < 1 || steps > t_full)
    throw std::invalid_argument("schedule: respaced steps " +
                                std::to_string(steps) + " outside [1, " +
                                std::to_string(t_full) + "]");
  NoiseSchedule s;
  s.betas_.resize(steps);
  long long prev_tau = 0;
  for (int i = 1; i <= steps; ++i) {
    long long tau = std::llround(static_cast<double>(i) * t_full / steps);
    if (tau <= prev_tau || tau > t_full)
      throw std::invalid_argument("schedule: degenerate respacing");
    double ab_prev = alpha_bar(static_cast<int>(prev_tau));
    double ab = alpha_bar(static_cast<int>(tau));
    s.betas_[i - 1] = 1.0 - ab / ab_prev;
    prev_tau = tau;
  }
  s.finalize(/*require_monotone_betas=*/false);
  return s;
}

}  // namespace cadm

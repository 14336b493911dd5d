#include "cadm/fft.hpp"

#include <fftw3.h>

#include <map>
#include <stdexcept>
#include <vector>

namespace cadm {
namespace {

struct PlanPair {
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
};

// Plans are created once per (h, w) with FFTW_ESTIMATE (deterministic) and
// FFTW_UNALIGNED so they can be executed on any caller buffer via the
// new-array interface.
PlanPair& plans_for(int h, int w) {
  static std::map<std::pair<int, int>, PlanPair> cache;
  auto key = std::make_pair(h, w);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;

  int wh = half_spectrum_w(w);
  std::vector<double> real(static_cast<std::size_t>(h) * w);
  std::vector<fftw_complex> cplx(static_cast<std::size_t>(h) * wh);
  PlanPair p;
  unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  p.fwd = fftw_plan_dft_r2c_2d(h, w, real.data(), cplx.data(), flags);
  p.bwd = fftw_plan_dft_c2r_2d(h, w, cplx.data(), real.data(), flags);
  if (!p.fwd || !p.bwd) throw std::runtime_error("fft: plan creation failed");
  return cache.emplace(key, p).first->second;
}

}  // namespace

void rfft2(const double* in, std::complex<double>* out, int h, int w) {
  if (h <= 0 || w <= 0) throw std::invalid_argument("rfft2: bad dims");
  PlanPair& p = plans_for(h, w);
  // r2c does not modify its input
  fftw_execute_dft_r2c(p.fwd, const_cast<double*>(in),
                       reinterpret_cast<fftw_complex*>(out));
}

void irfft2(const std::complex<double>* in, double* out, int h, int w) {
  if (h <= 0 || w <= 0) throw std::invalid_argument("irfft2: bad dims");
  PlanPair& p = plans_for(h, w);
  // c2r destroys its input, so run it on a scratch copy
  std::size_t n = static_cast<std::size_t>(h) * half_spectrum_w(w);
  std::vector<std::complex<double>> scratch(in, in + n);
  fftw_execute_dft_c2r(p.bwd, reinterpret_cast<fftw_complex*>(scratch.data()),
                       out);
  double norm = 1.0 / (static_cast<double>(h) * w);
  std::size_t total = static_cast<std::size_t>(h) * w;
  for (std::size_t i = 0; i < total; ++i) out[i] *= norm;
}

}  // namespace cadm

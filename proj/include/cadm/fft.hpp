#pragma once

#include <complex>

namespace cadm {

// Real 2-D FFT helpers (double precision). The half-spectrum layout is
// h x (w/2 + 1), row-major, matching FFTW's r2c convention.
// irfft2 includes the 1/(h*w) normalization so irfft2(rfft2(x)) == x.
void rfft2(const double* in, std::complex<double>* out, int h, int w);
void irfft2(const std::complex<double>* in, double* out, int h, int w);

inline int half_spectrum_w(int w) { return w / 2 + 1; }

}  // namespace cadm

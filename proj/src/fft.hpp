#pragma once

// Thin FFTW wrapper. Plans are created once per size under a lock and
// executed through the thread-safe new-array interface.

#include <complex>

namespace bdecon::fft {

/// Unnormalized forward real 2D DFT: out has n * (n/2 + 1) entries.
void rfft2(const double* in, std::complex<double>* out, int n);
/// Unnormalized inverse of rfft2. `in` is clobbered.
void irfft2(std::complex<double>* in, double* out, int n);
/// In-place unnormalized complex 2D DFT; sign -1 forward, +1 backward.
void cfft2(std::complex<double>* data, int n, int sign);
/// Unnormalized 2D DCT-II (FFTW REDFT10) and DCT-III (REDFT01).
void redft10_2d(const double* in, double* out, int n);
void redft01_2d(const double* in, double* out, int n);

}  // namespace bdecon::fft

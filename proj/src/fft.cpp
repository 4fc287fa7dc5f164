#include "fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>
#include <vector>

namespace bdecon::fft {
namespace {

enum class Kind { R2C, C2R, CFwd, CBwd, Dct2, Dct3 };

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

fftw_plan make_plan(Kind kind, int n) {
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  const int nc = n * (n / 2 + 1);
  std::vector<double> r(static_cast<size_t>(n) * n);
  std::vector<double> r2(static_cast<size_t>(n) * n);
  std::vector<std::complex<double>> c(static_cast<size_t>(n) * n);
  auto* cp = reinterpret_cast<fftw_complex*>(c.data());
  (void)nc;
  switch (kind) {
    case Kind::R2C:
      return fftw_plan_dft_r2c_2d(n, n, r.data(), cp, flags);
    case Kind::C2R:
      return fftw_plan_dft_c2r_2d(n, n, cp, r.data(), flags);
    case Kind::CFwd:
      return fftw_plan_dft_2d(n, n, cp, cp, FFTW_FORWARD, flags);
    case Kind::CBwd:
      return fftw_plan_dft_2d(n, n, cp, cp, FFTW_BACKWARD, flags);
    case Kind::Dct2:
      return fftw_plan_r2r_2d(n, n, r.data(), r2.data(), FFTW_REDFT10, FFTW_REDFT10, flags);
    case Kind::Dct3:
      return fftw_plan_r2r_2d(n, n, r.data(), r2.data(), FFTW_REDFT01, FFTW_REDFT01, flags);
  }
  return nullptr;
}

fftw_plan plan_for(Kind kind, int n) {
  // Plans live for the lifetime of the process.
  static std::map<std::tuple<Kind, int>, fftw_plan> cache;
  std::lock_guard lock(planner_mutex());
  auto key = std::make_tuple(kind, n);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  fftw_plan p = make_plan(kind, n);
  cache.emplace(key, p);
  return p;
}

}  // namespace

void rfft2(const double* in, std::complex<double>* out, int n) {
  fftw_execute_dft_r2c(plan_for(Kind::R2C, n), const_cast<double*>(in),
                       reinterpret_cast<fftw_complex*>(out));
}

void irfft2(std::complex<double>* in, double* out, int n) {
  fftw_execute_dft_c2r(plan_for(Kind::C2R, n), reinterpret_cast<fftw_complex*>(in), out);
}

void cfft2(std::complex<double>* data, int n, int sign) {
  auto* p = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(plan_for(sign < 0 ? Kind::CFwd : Kind::CBwd, n), p, p);
}

void redft10_2d(const double* in, double* out, int n) {
  fftw_execute_r2r(plan_for(Kind::Dct2, n), const_cast<double*>(in), out);
}

void redft01_2d(const double* in, double* out, int n) {
  fftw_execute_r2r(plan_for(Kind::Dct3, n), const_cast<double*>(in), out);
}

}  // namespace bdecon::fft

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "bdecon/conv.hpp"
#include "bdecon/random.hpp"

namespace bdecon {

/// alpha ~ Laplace(mu_alpha, b) coordinatewise, x = D^T alpha.
struct SignalPrior {
  Dictionary dict;
  double b = 0.5;
};

/// sigma ~ Gamma(shape a, rate beta); h = normalized Gaussian of spread sigma on d x d.
struct KernelPrior {
  int d = 15;
  double a = 2.0;
  double beta = 1.0;
};

/// eps ~ N(0, c_eps I).
struct NoiseModel {
  double c_eps = 9e-4;
};

struct ProblemInstance {
  Vector alpha;
  Image x;
  double sigma = 0.0;
  Kernel h;
  Image eps;
  Image y;
};

struct Dataset {
  SignalPrior signal;
  KernelPrior kernel;
  NoiseModel noise;
  std::uint64_t base_seed = 0;
  std::vector<ProblemInstance> instances;

  int count() const noexcept { return static_cast<int>(instances.size()); }
};

void validate(const SignalPrior& p);
void validate(const KernelPrior& p);
void validate(const NoiseModel& p);

Vector sample_alpha(const SignalPrior& prior, RandomStream& rng);
/// Gamma draw, resampled while below 1e-6.
double sample_sigma(const KernelPrior& prior, RandomStream& rng);

/// h_ij = exp(-(i^2 + j^2) / (2 sigma^2)) / Z over offsets i, j in [-r, r].
Kernel gaussian_kernel(double sigma, int d);
/// d h / d sigma of the normalized Gaussian; entries sum to zero.
Grid dgaussian_dsigma(double sigma, int d);

ProblemInstance generate_instance(const SignalPrior& signal, const KernelPrior& kernel,
                                  const NoiseModel& noise, RandomStream& rng);

/// Instance i is drawn from RandomStream::split(base_seed, i).
ProblemInstance generate_instance_at(const SignalPrior& signal, const KernelPrior& kernel,
                                     const NoiseModel& noise, std::uint64_t base_seed,
                                     std::uint64_t index);

/// `workers` == 0 uses the hardware concurrency; output does not depend on it.
Dataset generate_dataset(const SignalPrior& signal, const KernelPrior& kernel, const NoiseModel& noise,
                         int count, std::uint64_t base_seed, int workers = 1);

/// Directory layout: manifest.json plus inst<i>_{alpha,x,h,eps,y,sigma}.f64
/// (row-major, little-endian IEEE doubles).
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

inline constexpr int kDatasetFormatVersion = 1;

}  // namespace bdecon

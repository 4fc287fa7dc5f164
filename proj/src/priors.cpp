#include "bdecon/priors.hpp"

#include <cmath>
#include <string>

#include "bdecon/error.hpp"
#include "bdecon/parallel.hpp"
#include "blob.hpp"

namespace bdecon {

using detail::require;

void validate(const SignalPrior& p) {
  p.dict.validate();
  require(p.b > 0.0, "SignalPrior: b must be positive");
}

void validate(const KernelPrior& p) {
  require(p.d >= 1 && p.d % 2 == 1, "KernelPrior: d must be odd and positive");
  require(p.a > 0.0 && p.beta > 0.0, "KernelPrior: a and beta must be positive");
}

void validate(const NoiseModel& p) { require(p.c_eps > 0.0, "NoiseModel: c_eps must be positive"); }

Vector sample_alpha(const SignalPrior& prior, RandomStream& rng) {
  Vector alpha(prior.dict.size());
  for (int k = 0; k < alpha.size(); ++k) alpha(k) = prior.dict.mu_alpha(k) + prior.b * rng.standard_laplace();
  return alpha;
}

double sample_sigma(const KernelPrior& prior, RandomStream& rng) {
  double s;
  do {
    s = rng.gamma(prior.a, prior.beta);
  } while (s < 1e-6);
  return s;
}

Kernel gaussian_kernel(double sigma, int d) {
  require(sigma > 0.0, "gaussian_kernel: sigma must be positive");
  require(d >= 1 && d % 2 == 1, "gaussian_kernel: d must be odd and positive");
  const int r = (d - 1) / 2;
  const double inv = 1.0 / (2.0 * sigma * sigma);
  Grid w(d, d);
  for (int i = -r; i <= r; ++i)
    for (int j = -r; j <= r; ++j) w(i + r, j + r) = std::exp(-(i * i + j * j) * inv);
  w /= w.sum();
  return Kernel::from_weights(std::move(w), 1e-12);
}

Grid dgaussian_dsigma(double sigma, int d) {
  require(sigma > 0.0, "dgaussian_dsigma: sigma must be positive");
  const Grid h = gaussian_kernel(sigma, d).weights();
  const int r = (d - 1) / 2;
  Grid r2(d, d);
  for (int i = -r; i <= r; ++i)
    for (int j = -r; j <= r; ++j) r2(i + r, j + r) = i * i + j * j;
  const double mean_r2 = (h.array() * r2.array()).sum();
  const double s3 = sigma * sigma * sigma;
  return (h.array() * (r2.array() - mean_r2) / s3).matrix();
}

ProblemInstance generate_instance(const SignalPrior& signal, const KernelPrior& kernel, const NoiseModel& noise,
                                  RandomStream& rng) {
  ProblemInstance inst;
  inst.alpha = sample_alpha(signal, rng);
  inst.sigma = sample_sigma(kernel, rng);
  const int n = signal.dict.n;
  inst.eps.resize(n, n);
  const double sd = std::sqrt(noise.c_eps);
  for (Eigen::Index i = 0; i < inst.eps.size(); ++i) inst.eps.data()[i] = sd * rng.standard_normal();
  inst.x = synthesize(signal.dict, inst.alpha);
  inst.h = gaussian_kernel(inst.sigma, kernel.d);
  inst.y = conv2_circ(inst.x, inst.h) + inst.eps;
  return inst;
}

ProblemInstance generate_instance_at(const SignalPrior& signal, const KernelPrior& kernel, const NoiseModel& noise,
                                     std::uint64_t base_seed, std::uint64_t index) {
  auto rng = RandomStream::split(base_seed, index);
  return generate_instance(signal, kernel, noise, rng);
}

Dataset generate_dataset(const SignalPrior& signal, const KernelPrior& kernel, const NoiseModel& noise, int count,
                         std::uint64_t base_seed, int workers) {
  require(count >= 1, "generate_dataset: count must be at least one");
  validate(signal);
  validate(kernel);
  validate(noise);
  require(kernel.d <= signal.dict.n, "generate_dataset: kernel side exceeds image side");
  Dataset ds{signal, kernel, noise, base_seed, std::vector<ProblemInstance>(count)};
  parallel_for(count, workers, [&](int i) {
    ds.instances[i] = generate_instance_at(signal, kernel, noise, base_seed, static_cast<std::uint64_t>(i));
  });
  return ds;
}

namespace {

std::string blob_name(int i, const char* field) { return "inst" + std::to_string(i) + "_" + field + ".f64"; }

Grid read_grid(const std::filesystem::path& p, int rows, int cols) {
  auto v = blob::read_f64(p, static_cast<size_t>(rows) * cols);
  return Eigen::Map<Grid>(v.data(), rows, cols);
}

template <typename T>
T get_field(const nlohmann::json& j, const char* key, const std::filesystem::path& path) {
  if (!j.contains(key)) throw MalformedFile(path.string() + ": missing manifest field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFile(path.string() + ": bad manifest field '" + key + "': " + e.what());
  }
}

}  // namespace

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  const auto& dict = ds.signal.dict;
  nlohmann::json m;
  m["version"] = kDatasetFormatVersion;
  m["n"] = dict.n;
  m["K"] = dict.size();
  m["d"] = ds.kernel.d;
  m["a"] = ds.kernel.a;
  m["beta"] = ds.kernel.beta;
  m["b"] = ds.signal.b;
  m["c_eps"] = ds.noise.c_eps;
  m["count"] = ds.count();
  m["base_seed"] = ds.base_seed;
  auto idx = nlohmann::json::array();
  for (const auto& [p, q] : dict.atom_indices) idx.push_back({p, q});
  m["atom_indices"] = idx;
  m["mu_alpha"] = std::vector<double>(dict.mu_alpha.data(), dict.mu_alpha.data() + dict.mu_alpha.size());
  for (int i = 0; i < ds.count(); ++i) {
    const auto& inst = ds.instances[i];
    blob::write_f64(dir / blob_name(i, "alpha"), inst.alpha.data(), inst.alpha.size());
    blob::write_f64(dir / blob_name(i, "x"), inst.x.data(), inst.x.size());
    blob::write_f64(dir / blob_name(i, "h"), inst.h.weights().data(), inst.h.weights().size());
    blob::write_f64(dir / blob_name(i, "eps"), inst.eps.data(), inst.eps.size());
    blob::write_f64(dir / blob_name(i, "y"), inst.y.data(), inst.y.size());
    blob::write_f64(dir / blob_name(i, "sigma"), &inst.sigma, 1);
  }
  // Manifest last so a partially written directory is not mistaken for a dataset.
  blob::write_json(dir / "manifest.json", m);
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto mpath = dir / "manifest.json";
  const auto m = blob::read_json(mpath);
  if (!m.is_object()) throw MalformedFile(mpath.string() + ": manifest is not an object");
  const int version = get_field<int>(m, "version", mpath);
  if (version != kDatasetFormatVersion) {
    throw VersionMismatch(mpath.string() + ": unsupported dataset version " + std::to_string(version) +
                          " (expected " + std::to_string(kDatasetFormatVersion) + ")");
  }
  Dataset ds;
  auto& dict = ds.signal.dict;
  dict.n = get_field<int>(m, "n", mpath);
  const int K = get_field<int>(m, "K", mpath);
  ds.kernel.d = get_field<int>(m, "d", mpath);
  ds.kernel.a = get_field<double>(m, "a", mpath);
  ds.kernel.beta = get_field<double>(m, "beta", mpath);
  ds.signal.b = get_field<double>(m, "b", mpath);
  ds.noise.c_eps = get_field<double>(m, "c_eps", mpath);
  const int count = get_field<int>(m, "count", mpath);
  ds.base_seed = get_field<std::uint64_t>(m, "base_seed", mpath);
  const auto idx = get_field<std::vector<std::pair<int, int>>>(m, "atom_indices", mpath);
  const auto mu = get_field<std::vector<double>>(m, "mu_alpha", mpath);
  if (static_cast<int>(idx.size()) != K || static_cast<int>(mu.size()) != K || count < 0) {
    throw MalformedFile(mpath.string() + ": inconsistent dictionary sizes");
  }
  dict.atom_indices = idx;
  dict.mu_alpha = Eigen::Map<const Vector>(mu.data(), K);
  try {
    validate(ds.signal);
    validate(ds.kernel);
    validate(ds.noise);
  } catch (const InvalidArgument& e) {
    throw MalformedFile(mpath.string() + ": " + e.what());
  }
  const int n = dict.n;
  const int d = ds.kernel.d;
  ds.instances.resize(count);
  for (int i = 0; i < count; ++i) {
    auto& inst = ds.instances[i];
    auto a = blob::read_f64(dir / blob_name(i, "alpha"), K);
    inst.alpha = Eigen::Map<Vector>(a.data(), K);
    inst.x = read_grid(dir / blob_name(i, "x"), n, n);
    try {
      inst.h = Kernel::from_weights(read_grid(dir / blob_name(i, "h"), d, d), 1e-10);
    } catch (const InvalidArgument& e) {
      throw MalformedFile((dir / blob_name(i, "h")).string() + ": " + e.what());
    }
    inst.eps = read_grid(dir / blob_name(i, "eps"), n, n);
    inst.y = read_grid(dir / blob_name(i, "y"), n, n);
    inst.sigma = blob::read_f64(dir / blob_name(i, "sigma"), 1)[0];
  }
  return ds;
}

}  // namespace bdecon

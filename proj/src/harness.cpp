#include "bdecon/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>

#include <json.hpp>

#include "bdecon/error.hpp"
#include "bdecon/parallel.hpp"

namespace bdecon {

std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t tag, std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = splitmix64(base_seed ^ splitmix64(tag));
  s = splitmix64(s + a);
  return splitmix64(s ^ (b * 0x9e3779b97f4a7c15ULL));
}

Dataset make_dataset(const ExperimentConfig& cfg) {
  cfg.validate();
  return generate_dataset(cfg.signal_prior(), cfg.kernel_prior(), cfg.noise_model(), cfg.dataset_size,
                          cfg.base_seed, cfg.workers);
}

std::uint64_t map_init_seed(const ExperimentConfig& cfg, int instance) {
  return derive_seed(cfg.base_seed, 0x1417, static_cast<std::uint64_t>(instance));
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods = {{MapVariant::Sigma, false},
                                              {MapVariant::Sigma, true},
                                              {MapVariant::KernelSmooth, false},
                                              {MapVariant::KernelSmooth, true}};
  return methods;
}

const GridRow* GridResult::find(const std::string& method, bool boost, double lambda_alpha, double lambda_h) const {
  for (const auto& r : rows) {
    if (r.method == method && r.boost == boost && r.lambda_alpha == lambda_alpha && r.lambda_h == lambda_h) return &r;
  }
  return nullptr;
}

const GridRow& GridResult::best(const std::string& method, bool boost) const {
  const GridRow* out = nullptr;
  for (const auto& r : rows) {
    if (r.method != method || r.boost != boost) continue;
    if (!out || r.mean_mse_x < out->mean_mse_x) out = &r;
  }
  if (!out) throw InvalidArgument("GridResult::best: no rows for method " + method);
  return *out;
}

namespace {

struct Baseline {
  std::shared_ptr<const MomentSet> moments;
  std::vector<LmmseEstimate> estimates;
  double mse_x = 0.0;
  double mse_h = 0.0;
};

Baseline lmmse_baseline(const ExperimentConfig& cfg, const Dataset& ds, const std::vector<int>& indices) {
  Baseline out;
  const auto rule = gamma_quadrature(ds.kernel.a, ds.kernel.beta, cfg.quad_nodes);
  out.moments = std::make_shared<const MomentSet>(theoretical_moments(ds.signal, ds.kernel, ds.noise, rule, cfg.workers));
  const LmmseEstimator est(out.moments, cfg.ridge);
  out.estimates.resize(indices.size());
  parallel_for(static_cast<int>(indices.size()), cfg.workers,
               [&](int k) { out.estimates[k] = est.estimate(ds.instances[indices[k]].y); });
  for (size_t k = 0; k < indices.size(); ++k) {
    const auto& inst = ds.instances[indices[k]];
    out.mse_x += mse(out.estimates[k].x_hat, inst.x);
    out.mse_h += mse(out.estimates[k].h_hat, inst.h.weights());
  }
  out.mse_x /= static_cast<double>(indices.size());
  out.mse_h /= static_cast<double>(indices.size());
  return out;
}

void check_dataset(const ExperimentConfig& cfg, const Dataset& ds) {
  if (ds.count() < 1) throw ConfigError("dataset is empty");
  if (ds.signal.dict.n != cfg.n || ds.kernel.d != cfg.d || ds.signal.dict.size() != cfg.K) {
    throw ConfigError("dataset dimensions do not match the configuration");
  }
}

/// Shortest text that reads back to the same double.
std::string num(double v) {
  char buf[40];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  return out;
}

std::string cell_label(const Method& m, double la, double lh) {
  return std::string(to_string(m.variant)) + (m.boost ? "+boost" : "") + " at (lambda_alpha=" + num(la) +
         ", lambda_h=" + num(lh) + ")";
}

}  // namespace

GridResult run_grid_search(const ExperimentConfig& cfg, const Dataset* dataset) {
  cfg.validate();
  Dataset generated;
  if (!dataset) {
    generated = make_dataset(cfg);
    dataset = &generated;
  }
  const Dataset& ds = *dataset;
  check_dataset(cfg, ds);
  const int count = ds.count();
  std::vector<int> all(count);
  for (int i = 0; i < count; ++i) all[i] = i;
  const Baseline base = lmmse_baseline(cfg, ds, all);

  const auto cells = cfg.cells();
  const auto& methods = all_methods();
  const int per_cell = static_cast<int>(methods.size()) * count;
  const int units = static_cast<int>(cells.size()) * per_cell;
  std::vector<double> ex(units), eh(units);
  parallel_for(units, cfg.workers, [&](int u) {
    const int c = u / per_cell;
    const int m = (u % per_cell) / count;
    const int i = u % count;
    const auto [la, lh] = cells[c];
    MapConfig mc = cfg.map_config(methods[m].variant, la, lh);
    mc.init_seed = map_init_seed(cfg, i);
    if (methods[m].boost) mc.init = BoostedInit{base.estimates[i]};
    const auto& inst = ds.instances[i];
    try {
      const MapResult r = map_solve(inst.y, ds.signal, ds.kernel, mc);
      ex[u] = mse(r.x_hat, inst.x);
      eh[u] = mse(r.h_hat.weights(), inst.h.weights());
    } catch (const Divergence& e) {
      throw Divergence(e.iteration(), cell_label(methods[m], la, lh) + ", instance " + std::to_string(i) + ": " +
                                          e.what());
    }
  });

  GridResult out;
  out.lmmse_mse_x = base.mse_x;
  out.lmmse_mse_h = base.mse_h;
  for (size_t c = 0; c < cells.size(); ++c) {
    for (size_t m = 0; m < methods.size(); ++m) {
      GridRow row{to_string(methods[m].variant), methods[m].boost, cells[c].first, cells[c].second, 0.0, 0.0};
      for (int i = 0; i < count; ++i) {
        const size_t u = c * per_cell + m * count + i;
        row.mean_mse_x += ex[u];
        row.mean_mse_h += eh[u];
      }
      row.mean_mse_x /= count;
      row.mean_mse_h /= count;
      out.rows.push_back(row);
    }
  }
  return out;
}

void write_grid_csv(const GridResult& r, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "method,boost,lambda_alpha,lambda_h,mean_mse_x,mean_mse_h\n";
  out << "lmmse,0,,," << num(r.lmmse_mse_x) << ',' << num(r.lmmse_mse_h) << '\n';
  for (const auto& row : r.rows) {
    out << row.method << ',' << (row.boost ? 1 : 0) << ',' << num(row.lambda_alpha) << ',' << num(row.lambda_h) << ','
        << num(row.mean_mse_x) << ',' << num(row.mean_mse_h) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<ParameterSet> default_parameter_sets() {
  return {{"opt", 0.1, 1e-3, 0.1, 1e-3}, {"non-opt", 1e-4, 1e-3, 1e-3, 1e-3}};
}

EvolutionResult run_evolution(const ExperimentConfig& cfg, int instance_index,
                              const std::vector<ParameterSet>& parameter_sets, const Dataset* dataset) {
  cfg.validate();
  Dataset generated;
  if (!dataset) {
    generated = make_dataset(cfg);
    dataset = &generated;
  }
  const Dataset& ds = *dataset;
  check_dataset(cfg, ds);
  detail::require(instance_index >= 0 && instance_index < ds.count(), "run_evolution: instance index out of range");
  const Baseline base = lmmse_baseline(cfg, ds, {instance_index});
  const auto& inst = ds.instances[instance_index];
  const GroundTruth truth{inst.x, inst.h.weights()};

  const auto& methods = all_methods();
  const int units = static_cast<int>(parameter_sets.size() * methods.size());
  EvolutionResult out;
  out.instance = instance_index;
  out.lmmse_mse_x = base.mse_x;
  out.lmmse_mse_h = base.mse_h;
  out.traces.resize(units);
  parallel_for(units, cfg.workers, [&](int u) {
    const auto& ps = parameter_sets[u / methods.size()];
    const auto& m = methods[u % methods.size()];
    const bool sig = m.variant == MapVariant::Sigma;
    const double la = sig ? ps.sigma_lambda_alpha : ps.kernel_lambda_alpha;
    const double lh = sig ? ps.sigma_lambda_h : ps.kernel_lambda_h;
    MapConfig mc = cfg.map_config(m.variant, la, lh);
    mc.init_seed = map_init_seed(cfg, instance_index);
    if (m.boost) mc.init = BoostedInit{base.estimates[0]};
    auto r = map_solve(inst.y, ds.signal, ds.kernel, mc, truth);
    out.traces[u] = TraceSet{ps.label, to_string(m.variant), m.boost, la, lh, std::move(r.trace)};
  });
  return out;
}

void write_trace_csv(const std::vector<TraceSet>& traces, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "method,boost,lambda_alpha,lambda_h,iter,mse_x,mse_h,objective\n";
  for (const auto& t : traces) {
    for (const auto& r : t.trace) {
      out << t.method << ',' << (t.boost ? 1 : 0) << ',' << num(t.lambda_alpha) << ',' << num(t.lambda_h) << ','
          << r.iter << ',' << num(r.mse_x) << ',' << num(r.mse_h) << ',' << num(r.objective) << '\n';
    }
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void write_trace_svg(const std::vector<TraceSet>& traces, const std::string& metric, double reference,
                     const std::filesystem::path& path) {
  detail::require(metric == "mse_x" || metric == "mse_h", "write_trace_svg: metric must be mse_x or mse_h");
  auto value = [&](const TraceRecord& r) { return metric == "mse_x" ? r.mse_x : r.mse_h; };
  double lo = reference, hi = reference;
  int iters = 1;
  for (const auto& t : traces) {
    iters = std::max(iters, static_cast<int>(t.trace.size()));
    for (const auto& r : t.trace) {
      const double v = value(r);
      if (v > 0 && std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  lo = std::log10(std::max(lo, 1e-300));
  hi = std::log10(std::max(hi, 1e-300));
  if (hi - lo < 1e-9) hi = lo + 1.0;
  const double W = 720, H = 420, L = 60, R = 180, T = 20, B = 40;
  auto px = [&](double i) { return L + (W - L - R) * i / std::max(iters - 1, 1); };
  auto py = [&](double v) { return T + (H - T - B) * (hi - std::log10(std::max(v, 1e-300))) / (hi - lo); };
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                 "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  auto out = open_out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << L << "\" y=\"14\" font-size=\"12\">" << metric << " (log scale) vs iteration</text>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << py(reference) << "\" x2=\"" << W - R << "\" y2=\"" << py(reference)
      << "\" stroke=\"black\" stroke-dasharray=\"4 3\"/>\n";
  for (size_t k = 0; k < traces.size(); ++k) {
    const auto& t = traces[k];
    out << "<polyline fill=\"none\" stroke=\"" << colors[k % 8] << "\" points=\"";
    for (size_t i = 0; i < t.trace.size(); ++i) out << px(static_cast<double>(i)) << ',' << py(value(t.trace[i])) << ' ';
    out << "\"/>\n";
    out << "<text x=\"" << W - R + 8 << "\" y=\"" << T + 14 * (k + 1) << "\" font-size=\"10\" fill=\"" << colors[k % 8]
        << "\">" << t.method << (t.boost ? "+boost" : "") << " " << t.label << "</text>\n";
  }
  out << "<text x=\"" << W - R + 8 << "\" y=\"" << T + 14 * (traces.size() + 1)
      << "\" font-size=\"10\">--- lmmse</text>\n";
  out << "</svg>\n";
  if (!out) throw IoError("write failed: " + path.string());
}

double loglog_slope_upper_half(const std::vector<int>& x, const std::vector<double>& y) {
  detail::require(x.size() == y.size() && x.size() >= 2, "loglog_slope: need at least two points");
  // At least two points are always fitted.
  const size_t start = std::min(x.size() / 2, x.size() - 2);
  const size_t m = x.size() - start;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = start; i < x.size(); ++i) {
    const double lx = std::log(static_cast<double>(x[i]));
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

EmpConvResult run_empirical_convergence(const ExperimentConfig& cfg) {
  cfg.validate();
  detail::require(!cfg.n_samples_list.empty(), "run_empirical_convergence: n_samples_list is empty");
  const SignalPrior signal = cfg.signal_prior();
  const KernelPrior kernel = cfg.kernel_prior();
  const NoiseModel noise = cfg.noise_model();

  // Held-out evaluation set, from a stream family disjoint from training draws.
  const std::uint64_t eval_base = derive_seed(cfg.base_seed, 0xe7a1);
  std::vector<ProblemInstance> eval(cfg.eval_size);
  for (int i = 0; i < cfg.eval_size; ++i) eval[i] = generate_instance_at(signal, kernel, noise, eval_base, i);

  const auto rule = gamma_quadrature(kernel.a, kernel.beta, cfg.quad_nodes);
  const auto theo = std::make_shared<const MomentSet>(theoretical_moments(signal, kernel, noise, rule, cfg.workers));
  const LmmseEstimator theo_est(theo, cfg.ridge);
  std::vector<LmmseEstimate> reference(eval.size());
  for (size_t i = 0; i < eval.size(); ++i) reference[i] = theo_est.estimate(eval[i].y);

  const auto& list = cfg.n_samples_list;
  const int units = static_cast<int>(list.size()) * cfg.repeats;
  std::vector<double> ex(units), eh(units);
  parallel_for(units, cfg.workers, [&](int u) {
    const int k = u / cfg.repeats;
    const int run = u % cfg.repeats;
    const int ns = list[k];
    const std::uint64_t train_base = derive_seed(cfg.base_seed, 0x7a11, static_cast<std::uint64_t>(ns), run);
    std::vector<ProblemInstance> train(ns);
    for (int i = 0; i < ns; ++i) train[i] = generate_instance_at(signal, kernel, noise, train_base, i);
    auto emp = std::make_shared<const MomentSet>(empirical_moments(std::span<const ProblemInstance>(train), ns));
    train.clear();
    const LmmseEstimator est(emp, default_ridge(*emp));
    double sx = 0, sh = 0;
    for (size_t i = 0; i < eval.size(); ++i) {
      const auto e = est.estimate(eval[i].y);
      sx += mse(e.x_hat, reference[i].x_hat);
      sh += mse(e.h_hat, reference[i].h_hat);
    }
    ex[u] = sx / static_cast<double>(eval.size());
    eh[u] = sh / static_cast<double>(eval.size());
  });

  EmpConvResult out;
  out.n_samples = list;
  for (size_t k = 0; k < list.size(); ++k) {
    double mx = 0, mh = 0;
    for (int run = 0; run < cfg.repeats; ++run) {
      const size_t u = k * cfg.repeats + run;
      out.rows.push_back({"x", list[k], run, ex[u]});
      mx += ex[u];
    }
    for (int run = 0; run < cfg.repeats; ++run) {
      const size_t u = k * cfg.repeats + run;
      out.rows.push_back({"h", list[k], run, eh[u]});
      mh += eh[u];
    }
    out.mean_x.push_back(mx / cfg.repeats);
    out.mean_h.push_back(mh / cfg.repeats);
  }
  if (list.size() >= 2) {
    out.slope_x = loglog_slope_upper_half(list, out.mean_x);
    out.slope_h = loglog_slope_upper_half(list, out.mean_h);
  } else {
    out.slope_x = out.slope_h = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

void write_empconv_csv(const EmpConvResult& r, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "target,n_samples,run,mse_vs_theoretical\n";
  for (const auto& row : r.rows) out << row.target << ',' << row.n_samples << ',' << row.run << ',' << num(row.mse_vs_theoretical) << '\n';
  for (size_t k = 0; k < r.n_samples.size(); ++k) out << "x," << r.n_samples[k] << ",mean," << num(r.mean_x[k]) << '\n';
  for (size_t k = 0; k < r.n_samples.size(); ++k) out << "h," << r.n_samples[k] << ",mean," << num(r.mean_h[k]) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

void write_run_manifest(const ExperimentConfig& cfg, const std::string& command, const std::filesystem::path& path) {
  nlohmann::json j;
  j["version"] = kVersion;
  j["command"] = command;
  j["seed"] = cfg.base_seed;
  nlohmann::json c = nlohmann::json::object();
  for (const auto& [k, v] : to_key_values(cfg)) c[k] = v;
  j["config"] = c;
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace bdecon

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "bdecon/error.hpp"
#include "bdecon/harness.hpp"
#include "properties.hpp"

using namespace bdecon;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("bdecon_harness_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("presets") {
  const auto p = ExperimentConfig::paper();
  CHECK(p.n == 32);
  CHECK(p.K == 512);
  CHECK(p.b == 0.5);
  CHECK(p.d == 15);
  CHECK(p.a == 2.0);
  CHECK(p.beta == 1.0);
  CHECK(p.c_eps == 9e-4);
  CHECK(p.dataset_size == 50);
  CHECK(p.max_iter == 1000);
  CHECK(p.step_alpha == 0.1);
  CHECK(p.step_h == 1e-3);
  CHECK(p.inner_steps == 5);
  CHECK(p.quad_nodes == 64);
  CHECK(p.repeats == 10);
  CHECK(p.lambda_alpha_grid == std::vector<double>{1e-4, 1e-3, 1e-2, 1e-1, 1.0});
  CHECK(p.lambda_h_grid == std::vector<double>{1e-4, 1e-3, 1e-2, 1e-1});
  CHECK_NOTHROW(p.validate());

  const auto d = ExperimentConfig::desk();
  CHECK(d.n == 16);
  CHECK(d.K == 128);
  CHECK(d.d == 7);
  CHECK(d.dataset_size == 10);
  CHECK(d.max_iter == 300);
  CHECK(d.lambda_alpha_grid.size() * d.lambda_h_grid.size() == 12);
  CHECK(d.n_samples_list == std::vector<int>{64, 128, 256, 512, 1024, 2048});
  CHECK_NOTHROW(d.validate());
}

TEST_CASE("cells: product grid then extras, without duplicates") {
  ExperimentConfig c = ExperimentConfig::desk();
  c.lambda_alpha_grid = {0.1, 1.0};
  c.lambda_h_grid = {1e-3};
  c.extra_cells = {{9e-4, 9e-4}, {0.1, 1e-3}};
  const auto cells = c.cells();
  REQUIRE(cells.size() == 3);
  CHECK(cells[0] == std::pair{0.1, 1e-3});
  CHECK(cells[1] == std::pair{1.0, 1e-3});
  CHECK(cells[2] == std::pair{9e-4, 9e-4});
}

TEST_CASE("config validation") {
  auto bad = [](auto mutate) {
    ExperimentConfig c = ExperimentConfig::desk();
    mutate(c);
    return c;
  };
  CHECK_THROWS_AS(bad([](auto& c) { c.d = 8; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](auto& c) { c.K = 300; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](auto& c) { c.lambda_h_grid.clear(); }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](auto& c) { c.dataset_size = 0; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](auto& c) { c.repeats = 0; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](auto& c) { c.n_samples_list = {64, 32}; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](auto& c) { c.c_eps = 0; }).validate(), ConfigError);
}

TEST_CASE("config text") {
  const auto kv = parse_config_text(
      "# comment\n"
      "n = 8\n"
      "  lambda_alpha_grid = 0.1, 1   # trailing\n"
      "extra_cells = 0.0009:0.0009\n"
      "\n");
  CHECK(kv.size() == 3);
  CHECK(kv.at("n") == "8");
  ExperimentConfig c = ExperimentConfig::desk();
  c.K = 16;
  c.d = 5;
  apply_config(c, kv, false);
  CHECK(c.n == 8);
  CHECK(c.lambda_alpha_grid == std::vector<double>{0.1, 1.0});
  REQUIRE(c.extra_cells.size() == 1);
  CHECK(c.extra_cells[0] == std::pair{9e-4, 9e-4});

  CHECK_THROWS_AS(apply_config(c, {{"nope", "1"}}, false), ConfigError);
  CHECK_THROWS_AS(apply_config(c, {{"n", "abc"}}, false), ConfigError);
  CHECK_THROWS_AS(apply_config(c, {{"n", "8"}}, true), ConfigError);
  CHECK_THROWS_AS(parse_config_text("just words\n"), ConfigError);
  CHECK_THROWS_AS(read_config_file("/nonexistent/x.cfg"), IoError);
}

TEST_CASE("config round trip through key/value text") {
  ExperimentConfig c = ExperimentConfig::paper();
  c.ridge = 1.0 / 3.0;
  c.base_seed = 0xffffffffffffffffULL;
  const auto kv = to_key_values(c);
  CHECK(kv.size() == config_keys().size());
  std::string text;
  for (const auto& [k, v] : kv) text += k + " = " + v + "\n";
  ExperimentConfig back = ExperimentConfig::desk();
  apply_config(back, parse_config_text(text), true);
  CHECK(to_key_values(back) == kv);
  CHECK(back.ridge == c.ridge);
  CHECK(back.base_seed == c.base_seed);
  CHECK(back.extra_cells == c.extra_cells);
}

TEST_CASE("seeds") {
  const auto c = ExperimentConfig::desk();
  CHECK(derive_seed(7, 1) != derive_seed(7, 2));
  CHECK(derive_seed(7, 1) != derive_seed(8, 1));
  CHECK(derive_seed(7, 1, 3) != derive_seed(7, 1, 4));
  CHECK(derive_seed(7, 1, 3, 0) != derive_seed(7, 1, 3, 1));
  CHECK(map_init_seed(c, 0) != map_init_seed(c, 1));
  const Dataset a = make_dataset(c), b = make_dataset(c);
  CHECK(a.signal.dict.atom_indices == b.signal.dict.atom_indices);
  CHECK(a.instances[3].y == b.instances[3].y);
}

TEST_CASE("grid search") {
  const ExperimentConfig cfg = props::tiny_config();
  const Dataset ds = make_dataset(cfg);
  const GridResult g = run_grid_search(cfg, &ds);
  const auto cells = cfg.cells();
  REQUIRE(g.rows.size() == cells.size() * 4);
  for (const auto& r : g.rows) {
    CHECK(std::isfinite(r.mean_mse_x));
    CHECK(std::isfinite(r.mean_mse_h));
  }
  CHECK(g.find("map_h", true, 0.1, 1e-3) != nullptr);
  CHECK(g.find("map_h", true, 0.5, 1e-3) == nullptr);
  const GridRow& best = g.best("map_sigma", false);
  for (const auto& r : g.rows)
    if (r.method == "map_sigma" && !r.boost) CHECK(best.mean_mse_x <= r.mean_mse_x);

  SUBCASE("baseline equals the LMMSE over the dataset") {
    const MomentSet m = theoretical_moments(ds.signal, ds.kernel, ds.noise, gamma_quadrature(2, 1, cfg.quad_nodes));
    double sx = 0, sh = 0;
    for (const auto& inst : ds.instances) {
      const auto e = lmmse_estimate(m, inst.y, 0.0);
      sx += mse(e.x_hat, inst.x);
      sh += mse(e.h_hat, inst.h.weights());
    }
    CHECK(g.lmmse_mse_x == doctest::Approx(sx / ds.count()).epsilon(1e-12));
    CHECK(g.lmmse_mse_h == doctest::Approx(sh / ds.count()).epsilon(1e-12));
  }

  SUBCASE("a cell alone reproduces its row") {
    ExperimentConfig one = cfg;
    one.lambda_alpha_grid = {0.1};
    one.lambda_h_grid = {1e-3};
    one.extra_cells.clear();
    const GridResult g1 = run_grid_search(one, &ds);
    REQUIRE(g1.rows.size() == 4);
    for (const auto& r : g1.rows) {
      const GridRow* full = g.find(r.method, r.boost, r.lambda_alpha, r.lambda_h);
      REQUIRE(full != nullptr);
      CHECK(full->mean_mse_x == r.mean_mse_x);
      CHECK(full->mean_mse_h == r.mean_mse_h);
    }
  }

  SUBCASE("degenerate grid") {
    ExperimentConfig one = cfg;
    one.lambda_alpha_grid = {0.1};
    one.lambda_h_grid = {1e-3};
    one.extra_cells.clear();
    one.dataset_size = 1;
    one.max_iter = 1;
    const GridResult a = run_grid_search(one), b = run_grid_search(one);
    CHECK(a.rows.size() == 4);
    for (size_t i = 0; i < 4; ++i) CHECK(a.rows[i].mean_mse_x == b.rows[i].mean_mse_x);
  }

  SUBCASE("csv") {
    const fs::path dir = scratch("grid");
    write_grid_csv(g, dir / "grid.csv");
    const auto lines = read_lines(dir / "grid.csv");
    REQUIRE(lines.size() == g.rows.size() + 2);
    CHECK(lines[0] == "method,boost,lambda_alpha,lambda_h,mean_mse_x,mean_mse_h");
    CHECK(lines[1].rfind("lmmse,0,,,", 0) == 0);
    CHECK(lines[2].rfind("map_sigma,0,0.01,0.001,", 0) == 0);
    CHECK(lines[3].rfind("map_sigma,1,0.01,0.001,", 0) == 0);
    CHECK(lines[4].rfind("map_h,0,", 0) == 0);
    fs::remove_all(dir);
  }

  SUBCASE("dataset mismatch") {
    ExperimentConfig other = cfg;
    other.n = 16;
    CHECK_THROWS_AS(run_grid_search(other, &ds), ConfigError);
  }
}

TEST_CASE("evolution traces") {
  ExperimentConfig cfg = props::tiny_config();
  const Dataset ds = make_dataset(cfg);
  const EvolutionResult ev = run_evolution(cfg, 2, default_parameter_sets(), &ds);
  REQUIRE(ev.traces.size() == 8);
  for (const auto& t : ev.traces) {
    CHECK(t.trace.size() == static_cast<size_t>(cfg.max_iter));
    if (t.boost) CHECK(t.trace[0].mse_x == doctest::Approx(ev.lmmse_mse_x).epsilon(1e-9));
  }
  const auto sets = default_parameter_sets();
  CHECK(sets[0].sigma_lambda_alpha == 0.1);
  CHECK(sets[0].kernel_lambda_h == 1e-3);
  CHECK(sets[1].sigma_lambda_alpha == 1e-4);
  CHECK(sets[1].kernel_lambda_alpha == 1e-3);
  CHECK_THROWS_AS(run_evolution(cfg, 3, sets, &ds), InvalidArgument);

  cfg.max_iter = 1;
  for (const auto& t : run_evolution(cfg, 0, sets, &ds).traces) CHECK(t.trace.size() == 1);

  const fs::path dir = scratch("evolve");
  write_trace_csv(ev.traces, dir / "trace.csv");
  const auto lines = read_lines(dir / "trace.csv");
  CHECK(lines[0] == "method,boost,lambda_alpha,lambda_h,iter,mse_x,mse_h,objective");
  CHECK(lines.size() == 1 + 8 * 15);
  write_trace_svg(ev.traces, "mse_x", ev.lmmse_mse_x, dir / "mse_x.svg");
  std::ifstream svg(dir / "mse_x.svg");
  std::stringstream ss;
  ss << svg.rdbuf();
  CHECK(ss.str().find("<svg") != std::string::npos);
  CHECK(ss.str().find("stroke-dasharray") != std::string::npos);
  CHECK_THROWS_AS(write_trace_svg(ev.traces, "objective", 1.0, dir / "bad.svg"), InvalidArgument);
  fs::remove_all(dir);
}

TEST_CASE("empirical convergence") {
  const ExperimentConfig cfg = props::tiny_config();
  const EmpConvResult r = run_empirical_convergence(cfg);
  CHECK(r.rows.size() == 2 * 2 * static_cast<size_t>(cfg.repeats));
  CHECK(r.mean_x.size() == 2);
  for (const auto& row : r.rows) CHECK(row.mse_vs_theoretical > 0);

  const EmpConvResult again = run_empirical_convergence(cfg);
  for (size_t i = 0; i < r.rows.size(); ++i) CHECK(r.rows[i].mse_vs_theoretical == again.rows[i].mse_vs_theoretical);

  const fs::path dir = scratch("empconv");
  write_empconv_csv(r, dir / "empconv.csv");
  const auto lines = read_lines(dir / "empconv.csv");
  CHECK(lines[0] == "target,n_samples,run,mse_vs_theoretical");
  CHECK(lines.size() == 1 + r.rows.size() + 4);
  CHECK(lines.back().rfind("h,16,mean,", 0) == 0);
  fs::remove_all(dir);

  ExperimentConfig bad = cfg;
  bad.n_samples_list = {1, 4};
  CHECK_THROWS_AS(run_empirical_convergence(bad), ConfigError);
}

TEST_CASE("log-log slope over the upper half") {
  const std::vector<int> x{64, 128, 256, 512, 1024, 2048};
  std::vector<double> y;
  for (int v : x) y.push_back(3.0 / v);
  CHECK(loglog_slope_upper_half(x, y) == doctest::Approx(-1.0).epsilon(1e-12));
  y[0] = 100.0;  // pre-asymptotic points are ignored
  CHECK(loglog_slope_upper_half(x, y) == doctest::Approx(-1.0).epsilon(1e-12));
  for (size_t i = 0; i < x.size(); ++i) y[i] = std::pow(x[i], -2.0);
  CHECK(loglog_slope_upper_half(x, y) == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK_THROWS_AS(loglog_slope_upper_half({1}, {1.0}), InvalidArgument);
}

TEST_CASE("run manifest") {
  const fs::path dir = scratch("manifest");
  const ExperimentConfig cfg = ExperimentConfig::desk();
  write_run_manifest(cfg, "grid", dir / "manifest.json");
  nlohmann::json j;
  std::ifstream(dir / "manifest.json") >> j;
  CHECK(j["version"] == kVersion);
  CHECK(j["command"] == "grid");
  CHECK(j["seed"] == cfg.base_seed);
  CHECK(j["config"].size() == config_keys().size());
  fs::remove_all(dir);
}

TEST_CASE("determinism under varying worker counts") { CHECK(props::runs_deterministic_across_workers()); }

TEST_CASE("dataset round trip is bit-exact") {
  CHECK(props::dataset_roundtrip_exact(fs::temp_directory_path() / ("bdecon_rt_" + std::to_string(::getpid()))));
}

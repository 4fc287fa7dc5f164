#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "bdecon/error.hpp"
#include "bdecon/harness.hpp"

namespace bdecon {

ExperimentConfig ExperimentConfig::desk() {
  ExperimentConfig c;
  c.n = 16;
  c.K = 128;
  c.d = 7;
  c.dataset_size = 10;
  c.max_iter = 300;
  c.lambda_alpha_grid = {1e-3, 1e-2, 1e-1, 1.0};
  c.lambda_h_grid = {1e-4, 1e-3, 1e-2};
  c.extra_cells = {{9e-4, 9e-4}};
  c.n_samples_list = {64, 128, 256, 512, 1024, 2048};
  return c;
}

ExperimentConfig ExperimentConfig::paper() {
  ExperimentConfig c = desk();
  c.n = 32;
  c.K = 512;
  c.d = 15;
  c.dataset_size = 50;
  c.max_iter = 1000;
  c.lambda_alpha_grid = {1e-4, 1e-3, 1e-2, 1e-1, 1.0};
  c.lambda_h_grid = {1e-4, 1e-3, 1e-2, 1e-1};
  return c;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (n < 1 || K < 1 || K > n * n) fail("config: need 1 <= K <= n^2");
  if (d < 1 || d % 2 == 0 || d > n) fail("config: d must be odd and at most n");
  if (!(b > 0) || !(a > 0) || !(beta > 0) || !(c_eps > 0)) fail("config: b, a, beta, c_eps must be positive");
  if (dataset_size < 1) fail("config: dataset_size must be at least one");
  if (lambda_alpha_grid.empty() || lambda_h_grid.empty()) fail("config: lambda grids must be non-empty");
  if (quad_nodes < 2) fail("config: quad_nodes must be at least 2");
  if (ridge < 0) fail("config: ridge must be nonnegative");
  if (repeats < 1) fail("config: repeats must be at least one");
  if (eval_size < 1) fail("config: eval_size must be at least one");
  for (size_t i = 0; i < n_samples_list.size(); ++i) {
    if (n_samples_list[i] < 2) fail("config: n_samples_list entries must be at least 2");
    if (i > 0 && n_samples_list[i] <= n_samples_list[i - 1]) fail("config: n_samples_list must be ascending");
  }
  try {
    map_config(MapVariant::Sigma, 0.0, 0.0).validate();
  } catch (const InvalidArgument& e) {
    fail(std::string("config: ") + e.what());
  }
}

SignalPrior ExperimentConfig::signal_prior() const {
  return {make_dictionary(n, K, derive_seed(base_seed, 0xd1c7)), b};
}

MapConfig ExperimentConfig::map_config(MapVariant variant, double lambda_alpha, double lambda_h) const {
  MapConfig m;
  m.variant = variant;
  m.lambda_alpha = lambda_alpha;
  m.lambda_h = lambda_h;
  m.step_alpha = step_alpha;
  m.step_h = step_h;
  m.inner_steps = inner_steps;
  m.max_iter = max_iter;
  m.sigma_floor = sigma_floor;
  m.rel_tol = rel_tol;
  return m;
}

std::vector<std::pair<double, double>> ExperimentConfig::cells() const {
  std::vector<std::pair<double, double>> out;
  for (double la : lambda_alpha_grid)
    for (double lh : lambda_h_grid) out.emplace_back(la, lh);
  for (const auto& c : extra_cells) {
    if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  }
  return out;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError("config: bad value for '" + key + "': " + text);
  return v;
}

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += fmt(xs[i]);
    } else {
      out += std::to_string(xs[i]);
    }
  }
  return out;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "n",           "K",           "b",           "d",           "a",          "beta",
      "c_eps",       "dataset_size", "base_seed",  "lambda_alpha_grid", "lambda_h_grid", "extra_cells",
      "quad_nodes",  "ridge",       "step_alpha",  "step_h",      "inner_steps", "max_iter",
      "sigma_floor", "rel_tol",     "n_samples_list", "repeats",  "eval_size",  "workers"};
  return keys;
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config: line " + std::to_string(lineno) + ": expected key = value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void apply_config(ExperimentConfig& cfg, const std::map<std::string, std::string>& kv, bool require_all) {
  const auto& keys = config_keys();
  const std::set<std::string> known(keys.begin(), keys.end());
  for (const auto& [k, v] : kv) {
    if (!known.count(k)) throw ConfigError("config: unknown key '" + k + "'");
  }
  if (require_all) {
    for (const auto& k : keys) {
      if (!kv.count(k)) throw ConfigError("config: missing key '" + k + "'");
    }
  }
  auto get = [&](const char* k) -> const std::string* {
    auto it = kv.find(k);
    return it == kv.end() ? nullptr : &it->second;
  };
  auto set_int = [&](const char* k, int& dst) {
    if (auto* v = get(k)) dst = parse_number<int>(k, *v);
  };
  auto set_double = [&](const char* k, double& dst) {
    if (auto* v = get(k)) dst = parse_number<double>(k, *v);
  };
  set_int("n", cfg.n);
  set_int("K", cfg.K);
  set_double("b", cfg.b);
  set_int("d", cfg.d);
  set_double("a", cfg.a);
  set_double("beta", cfg.beta);
  set_double("c_eps", cfg.c_eps);
  set_int("dataset_size", cfg.dataset_size);
  if (auto* v = get("base_seed")) cfg.base_seed = parse_number<std::uint64_t>("base_seed", *v);
  if (auto* v = get("lambda_alpha_grid")) {
    cfg.lambda_alpha_grid.clear();
    for (const auto& s : split(*v, ',')) cfg.lambda_alpha_grid.push_back(parse_number<double>("lambda_alpha_grid", s));
  }
  if (auto* v = get("lambda_h_grid")) {
    cfg.lambda_h_grid.clear();
    for (const auto& s : split(*v, ',')) cfg.lambda_h_grid.push_back(parse_number<double>("lambda_h_grid", s));
  }
  if (auto* v = get("extra_cells")) {
    cfg.extra_cells.clear();
    for (const auto& s : split(*v, ',')) {
      const auto parts = split(s, ':');
      if (parts.size() != 2) throw ConfigError("config: extra_cells entries must be la:lh, got " + s);
      cfg.extra_cells.emplace_back(parse_number<double>("extra_cells", parts[0]),
                                   parse_number<double>("extra_cells", parts[1]));
    }
  }
  set_int("quad_nodes", cfg.quad_nodes);
  set_double("ridge", cfg.ridge);
  set_double("step_alpha", cfg.step_alpha);
  set_double("step_h", cfg.step_h);
  set_int("inner_steps", cfg.inner_steps);
  set_int("max_iter", cfg.max_iter);
  set_double("sigma_floor", cfg.sigma_floor);
  set_double("rel_tol", cfg.rel_tol);
  if (auto* v = get("n_samples_list")) {
    cfg.n_samples_list.clear();
    for (const auto& s : split(*v, ',')) cfg.n_samples_list.push_back(parse_number<int>("n_samples_list", s));
  }
  set_int("repeats", cfg.repeats);
  set_int("eval_size", cfg.eval_size);
  set_int("workers", cfg.workers);
}

std::map<std::string, std::string> to_key_values(const ExperimentConfig& cfg) {
  std::map<std::string, std::string> kv;
  kv["n"] = std::to_string(cfg.n);
  kv["K"] = std::to_string(cfg.K);
  kv["b"] = fmt(cfg.b);
  kv["d"] = std::to_string(cfg.d);
  kv["a"] = fmt(cfg.a);
  kv["beta"] = fmt(cfg.beta);
  kv["c_eps"] = fmt(cfg.c_eps);
  kv["dataset_size"] = std::to_string(cfg.dataset_size);
  kv["base_seed"] = std::to_string(cfg.base_seed);
  kv["lambda_alpha_grid"] = join(cfg.lambda_alpha_grid);
  kv["lambda_h_grid"] = join(cfg.lambda_h_grid);
  std::string extra;
  for (size_t i = 0; i < cfg.extra_cells.size(); ++i) {
    if (i) extra += ',';
    extra += fmt(cfg.extra_cells[i].first) + ":" + fmt(cfg.extra_cells[i].second);
  }
  kv["extra_cells"] = extra;
  kv["quad_nodes"] = std::to_string(cfg.quad_nodes);
  kv["ridge"] = fmt(cfg.ridge);
  kv["step_alpha"] = fmt(cfg.step_alpha);
  kv["step_h"] = fmt(cfg.step_h);
  kv["inner_steps"] = std::to_string(cfg.inner_steps);
  kv["max_iter"] = std::to_string(cfg.max_iter);
  kv["sigma_floor"] = fmt(cfg.sigma_floor);
  kv["rel_tol"] = fmt(cfg.rel_tol);
  kv["n_samples_list"] = join(cfg.n_samples_list);
  kv["repeats"] = std::to_string(cfg.repeats);
  kv["eval_size"] = std::to_string(cfg.eval_size);
  kv["workers"] = std::to_string(cfg.workers);
  return kv;
}

}  // namespace bdecon

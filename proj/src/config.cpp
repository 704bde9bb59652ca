#include "kamtori/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "kamtori/errors.hpp"
#include "kamtori/expression.hpp"
#include "kamtori/format.hpp"
#include "kamtori/resonance.hpp"

namespace kamtori {

namespace {

constexpr std::pair<ExperimentKind, std::string_view> kKinds[] = {
    {ExperimentKind::kIntegrate, "integrate"}, {ExperimentKind::kSpectrum, "spectrum"},
    {ExperimentKind::kScan, "scan"},           {ExperimentKind::kDrift, "drift"},
    {ExperimentKind::kLabel, "label"},         {ExperimentKind::kPortrait, "portrait"},
    {ExperimentKind::kFigure1, "figure1"},     {ExperimentKind::kFigure2, "figure2"},
    {ExperimentKind::kFigure3, "figure3"},     {ExperimentKind::kFigure4, "figure4"},
};

// Canonical key for aliases.
std::string_view canonical(std::string_view key) {
  if (key == "x0") return "p0";
  if (key == "y0") return "q0";
  return key;
}

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "experiment", "system",      "hamiltonian", "integrals",      "dof",       "observable",
      "scheme",     "p0",          "q0",          "x0",             "y0",        "h",
      "h_start",    "h_stop",      "h_step",      "h_values",       "n_steps",   "tol",
      "max_iter",   "solver",      "n_lines",     "component",      "omega",     "k_max",
      "l_max",      "label_tol",   "peak_window", "peak_factor",    "peak_invariant",
      "threads",    "output_dir",  "seed"};
  return keys;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Numbers go through the expression evaluator so "0.4*sqrt(2)" and "2*pi"
// are accepted.
double parse_real(std::string_view key, std::string_view text) {
  const std::string src = trim(text);
  if (src.empty()) throw ConfigError("empty value for '" + std::string(key) + "'");
  double v = 0.0;
  try {
    const Expression expr(src, 1);
    const double zero = 0.0;
    v = expr.evaluate(std::span<const double>(&zero, 1), std::span<const double>(&zero, 1));
  } catch (const ConfigError& e) {
    throw ConfigError("bad number for '" + std::string(key) + "': " + e.what());
  }
  if (!std::isfinite(v)) throw ConfigError("non-finite value for '" + std::string(key) + "'");
  return v;
}

std::uint64_t parse_count(std::string_view key, std::string_view text) {
  const double v = parse_real(key, text);
  if (v < 0.0 || v != std::floor(v) || v > 9.0e15)
    throw ConfigError("'" + std::string(key) + "' must be a non-negative integer");
  return static_cast<std::uint64_t>(v);
}

int parse_int(std::string_view key, std::string_view text) {
  const double v = parse_real(key, text);
  if (v != std::floor(v) || std::abs(v) > 1e9)
    throw ConfigError("'" + std::string(key) + "' must be an integer");
  return static_cast<int>(v);
}

std::vector<double> parse_list(std::string_view key, std::string_view text) {
  std::string body = trim(text);
  if (!body.empty() && body.front() == '[') {
    if (body.back() != ']') throw ConfigError("unbalanced '[' in '" + std::string(key) + "'");
    body = body.substr(1, body.size() - 2);
  }
  std::vector<double> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = body.find(',', pos);
    out.push_back(parse_real(key, std::string_view(body).substr(pos, comma - pos)));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::vector<std::string> split_semicolons(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto semi = text.find(';', pos);
    std::string part = trim(text.substr(pos, semi - pos));
    if (!part.empty()) out.push_back(std::move(part));
    if (semi == std::string_view::npos) break;
    pos = semi + 1;
  }
  return out;
}

std::string join_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += format_real(v[i]);
  }
  return s;
}

bool is_builtin(std::string_view name) {
  const auto names = builtin_system_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

bool is_scan_kind(ExperimentKind k) {
  return k == ExperimentKind::kScan || k == ExperimentKind::kFigure2 ||
         k == ExperimentKind::kFigure4;
}

bool uses_h_values(ExperimentKind k) {
  return k == ExperimentKind::kDrift || k == ExperimentKind::kFigure1 ||
         k == ExperimentKind::kFigure3;
}

}  // namespace

std::string_view experiment_name(ExperimentKind kind) {
  for (const auto& [k, name] : kKinds)
    if (k == kind) return name;
  return "unknown";
}

ExperimentKind experiment_from_name(std::string_view name) {
  for (const auto& [k, n] : kKinds)
    if (n == name) return k;
  std::string valid;
  for (const auto& [k, n] : kKinds) valid += (valid.empty() ? "" : ", ") + std::string(n);
  throw ConfigError("unknown experiment '" + std::string(name) + "' (valid: " + valid + ")");
}

std::vector<std::string> config_keys() { return known_keys(); }

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view raw) {
  const std::string value = trim(raw);
  const std::string k(key);
  if (k == "experiment") {
    cfg.kind = experiment_from_name(value);
  } else if (k == "system") {
    if (value.empty()) throw ConfigError("empty system name");
    cfg.system = value;
  } else if (k == "hamiltonian") {
    cfg.hamiltonian = value;
  } else if (k == "integrals") {
    cfg.integrals = split_semicolons(value);
  } else if (k == "dof") {
    cfg.dof = parse_count(k, value);
  } else if (k == "observable") {
    if (value == "angle") cfg.observable = ObservableKind::kAngle;
    else if (value == "cartesian") cfg.observable = ObservableKind::kCartesian;
    else throw ConfigError("observable must be 'angle' or 'cartesian', got '" + value + "'");
  } else if (k == "scheme") {
    scheme_from_name(value);
    cfg.scheme = value;
  } else if (k == "p0" || k == "x0") {
    cfg.p0 = parse_list(k, value);
  } else if (k == "q0" || k == "y0") {
    cfg.q0 = parse_list(k, value);
  } else if (k == "h") {
    cfg.h = parse_real(k, value);
  } else if (k == "h_start") {
    cfg.h_start = parse_real(k, value);
  } else if (k == "h_stop") {
    cfg.h_stop = parse_real(k, value);
  } else if (k == "h_step") {
    cfg.h_step = parse_real(k, value);
  } else if (k == "h_values") {
    cfg.h_values = parse_list(k, value);
  } else if (k == "n_steps") {
    cfg.n_steps = parse_count(k, value);
  } else if (k == "tol") {
    cfg.solver.tol = parse_real(k, value);
  } else if (k == "max_iter") {
    cfg.solver.max_iter = parse_int(k, value);
  } else if (k == "solver") {
    if (value == "newton") cfg.solver.method = SolverMethod::kNewton;
    else if (value == "fixed-point" || value == "fixed_point")
      cfg.solver.method = SolverMethod::kFixedPoint;
    else throw ConfigError("solver must be 'newton' or 'fixed-point', got '" + value + "'");
  } else if (k == "n_lines") {
    cfg.n_lines = parse_count(k, value);
  } else if (k == "component") {
    cfg.component = parse_count(k, value);
  } else if (k == "omega") {
    cfg.omega = parse_list(k, value);
  } else if (k == "k_max") {
    cfg.k_max = parse_int(k, value);
  } else if (k == "l_max") {
    cfg.l_max = parse_int(k, value);
  } else if (k == "label_tol") {
    cfg.label_tol = parse_real(k, value);
  } else if (k == "peak_window") {
    cfg.peak_window = parse_count(k, value);
  } else if (k == "peak_factor") {
    cfg.peak_factor = parse_real(k, value);
  } else if (k == "peak_invariant") {
    cfg.peak_invariant = parse_count(k, value);
  } else if (k == "threads") {
    cfg.threads = parse_count(k, value);
  } else if (k == "output_dir") {
    cfg.output_dir = value;
  } else if (k == "seed") {
    cfg.seed = parse_count(k, value);
  } else {
    throw ConfigError("unknown key '" + k + "'");
  }
}

RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string content = trim(line);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value'", line_no);
    const std::string key = trim(std::string_view(content).substr(0, eq));
    const std::string value = trim(std::string_view(content).substr(eq + 1));
    const auto& keys = known_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      throw ConfigError("unknown key '" + key + "'", line_no);
    if (!seen.insert(std::string(canonical(key))).second)
      throw ConfigError("duplicate key '" + key + "'", line_no);
    try {
      apply_setting(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(e.what(), line_no);
    } catch (const ArgumentError& e) {
      throw ConfigError(e.what(), line_no);
    }
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

SystemPtr build_system(const RunConfig& cfg) {
  const std::string name = cfg.system.value_or("pendulum");
  if (cfg.hamiltonian)
    return std::make_shared<ExpressionSystem>(name, cfg.dof, *cfg.hamiltonian, cfg.integrals,
                                              cfg.observable);
  return make_system(name);
}

PhaseState initial_state(const RunConfig& cfg, const SystemModel& system) {
  if (cfg.p0 && cfg.q0) return PhaseState(*cfg.p0, *cfg.q0);
  if (system.name() == "pendulum") return PhaseState({0.7}, {0.0});
  if (system.name() == "ruessmann3") return RuessmannModel::reference_initial_state();
  throw ConfigError("system '" + std::string(system.name()) + "' needs p0 and q0");
}

RunConfig resolve(RunConfig cfg) {
  const ExperimentKind kind = cfg.kind;
  if (!cfg.system) cfg.system = kind == ExperimentKind::kFigure4 ? "ruessmann3" : "pendulum";
  if (!cfg.hamiltonian && !is_builtin(*cfg.system)) {
    std::string valid;
    for (const auto& n : builtin_system_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw ConfigError("unknown system '" + *cfg.system + "' (built-in: " + valid +
                      "; or give 'hamiltonian')");
  }
  if (cfg.hamiltonian && is_builtin(*cfg.system))
    throw ConfigError("'hamiltonian' cannot redefine built-in system '" + *cfg.system + "'");
  if (!cfg.hamiltonian && (!cfg.integrals.empty()))
    throw ConfigError("'integrals' only applies to config-defined systems");

  const SystemPtr system = build_system(cfg);
  const std::size_t n = system->dof();
  const bool ruessmann = *cfg.system == "ruessmann3";

  if (!cfg.scheme) cfg.scheme = "im";
  scheme_from_name(*cfg.scheme);

  if (cfg.p0.has_value() != cfg.q0.has_value())
    throw ConfigError("p0 and q0 must be given together");
  if (!cfg.p0) {
    const PhaseState s = initial_state(cfg, *system);
    cfg.p0 = s.p;
    cfg.q0 = s.q;
  }
  if (cfg.p0->size() != n || cfg.q0->size() != n)
    throw ConfigError("initial state needs " + std::to_string(n) + " component(s) in p0 and q0");

  const bool portrait_like =
      kind == ExperimentKind::kPortrait || kind == ExperimentKind::kFigure3;
  if (!cfg.n_steps) cfg.n_steps = portrait_like ? 10000 : 100000;

  if (!cfg.h) cfg.h = 0.01;
  if (*cfg.h == 0.0) throw ConfigError("h must be non-zero");

  if (is_scan_kind(kind)) {
    double start = 0.01, stop = 3.0, step = 0.01;
    if (kind == ExperimentKind::kFigure2) stop = 6.0;
    if (ruessmann || kind == ExperimentKind::kFigure4) {
      stop = 1.5;
      step = 0.005;
    }
    if (!cfg.h_start) cfg.h_start = start;
    if (!cfg.h_stop) cfg.h_stop = stop;
    if (!cfg.h_step) cfg.h_step = step;
    if (*cfg.h_start <= 0.0) throw ConfigError("h_start must be positive");
    if (*cfg.h_step <= 0.0) throw ConfigError("h_step must be positive");
    if (*cfg.h_stop < *cfg.h_start) throw ConfigError("h grid has h_stop < h_start");
  } else if (cfg.h_start || cfg.h_stop || cfg.h_step) {
    throw ConfigError("h grid keys only apply to scan experiments");
  }

  if (uses_h_values(kind) && !cfg.h_values) {
    if (kind == ExperimentKind::kFigure3)
      cfg.h_values = std::vector<double>{0.01, 1.9, 2.0, 2.05, 2.1, 3.4, 3.45, 3.5, 3.55};
    else
      cfg.h_values = std::vector<double>{0.01, 0.02, 0.05, 0.1, 0.2, 0.5};
  }
  if (cfg.h_values) {
    if (cfg.h_values->empty()) throw ConfigError("h_values is empty");
    for (double h : *cfg.h_values)
      if (!(h > 0.0)) throw ConfigError("h_values must be positive");
    if (kind == ExperimentKind::kDrift || kind == ExperimentKind::kFigure1) {
      if (cfg.h_values->size() < 3) throw ConfigError("drift fit needs at least 3 h_values");
    }
  }

  try {
    cfg.solver.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  if (cfg.n_lines < 1) throw ConfigError("n_lines must be >= 1");
  if (cfg.component < 1 || cfg.component > n)
    throw ConfigError("component must lie in 1.." + std::to_string(n));
  if (cfg.omega && cfg.omega->size() != n)
    throw ConfigError("omega needs " + std::to_string(n) + " component(s)");
  if (cfg.k_max < 1 || cfg.l_max < 1) throw ConfigError("k_max and l_max must be >= 1");
  if (!(cfg.label_tol > 0.0)) throw ConfigError("label_tol must be positive");
  if (cfg.peak_window < 3 || cfg.peak_window % 2 == 0)
    throw ConfigError("peak_window must be odd and >= 3");
  if (!(cfg.peak_factor > 1.0)) throw ConfigError("peak_factor must exceed 1");
  const std::size_t columns = system->first_integral_count() + 1;
  if (!cfg.peak_invariant) cfg.peak_invariant = columns;
  if (*cfg.peak_invariant < 1 || *cfg.peak_invariant > columns)
    throw ConfigError("peak_invariant must lie in 1.." + std::to_string(columns));
  if ((portrait_like || kind == ExperimentKind::kFigure2) && n != 1)
    throw UnsupportedDimensionError(std::string(experiment_name(kind)) +
                                    " needs a one-degree-of-freedom system");
  if (cfg.output_dir.empty()) cfg.output_dir = std::string(experiment_name(kind));
  return cfg;
}

std::vector<double> config_grid(const RunConfig& cfg) {
  if (!cfg.h_start || !cfg.h_stop || !cfg.h_step) throw ConfigError("config has no h grid");
  return make_grid(*cfg.h_start, *cfg.h_stop, *cfg.h_step);
}

std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> e;
  e.emplace_back("experiment", std::string(experiment_name(cfg.kind)));
  if (cfg.system) e.emplace_back("system", *cfg.system);
  if (cfg.hamiltonian) {
    e.emplace_back("hamiltonian", *cfg.hamiltonian);
    std::string joined;
    for (const auto& s : cfg.integrals) joined += (joined.empty() ? "" : "; ") + s;
    e.emplace_back("integrals", joined);
    e.emplace_back("dof", std::to_string(cfg.dof));
    e.emplace_back("observable",
                   cfg.observable == ObservableKind::kAngle ? "angle" : "cartesian");
  }
  if (cfg.scheme) e.emplace_back("scheme", *cfg.scheme);
  if (cfg.p0) e.emplace_back("p0", join_list(*cfg.p0));
  if (cfg.q0) e.emplace_back("q0", join_list(*cfg.q0));
  if (cfg.h) e.emplace_back("h", format_real(*cfg.h));
  if (cfg.h_start) e.emplace_back("h_start", format_real(*cfg.h_start));
  if (cfg.h_stop) e.emplace_back("h_stop", format_real(*cfg.h_stop));
  if (cfg.h_step) e.emplace_back("h_step", format_real(*cfg.h_step));
  if (cfg.h_values) e.emplace_back("h_values", join_list(*cfg.h_values));
  if (cfg.n_steps) e.emplace_back("n_steps", std::to_string(*cfg.n_steps));
  e.emplace_back("tol", format_real(cfg.solver.tol));
  e.emplace_back("max_iter", std::to_string(cfg.solver.max_iter));
  e.emplace_back("solver",
                 cfg.solver.method == SolverMethod::kNewton ? "newton" : "fixed-point");
  e.emplace_back("n_lines", std::to_string(cfg.n_lines));
  e.emplace_back("component", std::to_string(cfg.component));
  if (cfg.omega) e.emplace_back("omega", join_list(*cfg.omega));
  e.emplace_back("k_max", std::to_string(cfg.k_max));
  e.emplace_back("l_max", std::to_string(cfg.l_max));
  e.emplace_back("label_tol", format_real(cfg.label_tol));
  e.emplace_back("peak_window", std::to_string(cfg.peak_window));
  e.emplace_back("peak_factor", format_real(cfg.peak_factor));
  if (cfg.peak_invariant) e.emplace_back("peak_invariant", std::to_string(*cfg.peak_invariant));
  e.emplace_back("threads", std::to_string(cfg.threads));
  if (!cfg.output_dir.empty()) e.emplace_back("output_dir", cfg.output_dir);
  e.emplace_back("seed", std::to_string(cfg.seed));
  return e;
}

std::string config_echo(const RunConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : config_entries(cfg)) out += k + " = " + v + "\n";
  return out;
}

}  // namespace kamtori

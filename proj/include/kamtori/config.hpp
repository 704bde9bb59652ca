#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kamtori/dynamics.hpp"
#include "kamtori/integrators.hpp"

namespace kamtori {

enum class ExperimentKind {
  kIntegrate,
  kSpectrum,
  kScan,
  kDrift,
  kLabel,
  kPortrait,
  kFigure1,
  kFigure2,
  kFigure3,
  kFigure4,
};

std::string_view experiment_name(ExperimentKind kind);
ExperimentKind experiment_from_name(std::string_view name);

// Declarative run description. Optional fields left empty take the
// per-experiment defaults in resolve().
struct RunConfig {
  ExperimentKind kind = ExperimentKind::kIntegrate;
  std::optional<std::string> system;

  // Config-defined system.
  std::optional<std::string> hamiltonian;
  std::vector<std::string> integrals;
  std::size_t dof = 1;
  ObservableKind observable = ObservableKind::kAngle;

  std::optional<std::string> scheme;
  std::optional<std::vector<double>> p0, q0;
  std::optional<double> h;
  std::optional<double> h_start, h_stop, h_step;
  std::optional<std::vector<double>> h_values;
  std::optional<std::size_t> n_steps;
  SolverConfig solver;

  std::size_t n_lines = 5;
  std::size_t component = 1;  // 1-based degree of freedom for spectrum output

  std::optional<std::vector<double>> omega;
  int k_max = 8;
  int l_max = 2;
  double label_tol = 0.05;

  std::size_t peak_window = 11;
  double peak_factor = 10.0;
  std::optional<std::size_t> peak_invariant;  // 1-based; default: energy column

  std::size_t threads = 0;
  std::string output_dir;
  std::uint64_t seed = 0;
};

// Parses "key = value" lines; '#' starts a comment. Unknown or repeated keys,
// malformed numbers and non-finite values raise ConfigError with the line.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);

// Applies a single key/value pair, as the parser does. Used by the CLI flags.
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);

std::vector<std::string> config_keys();

// Fills experiment defaults, then checks names and numeric ranges. Throws
// ArgumentError / ConfigError before anything runs.
RunConfig resolve(RunConfig cfg);

// Model for cfg.system (registry or config-defined).
SystemPtr build_system(const RunConfig& cfg);
PhaseState initial_state(const RunConfig& cfg, const SystemModel& system);

// Step-size grid of a resolved scan-type config.
std::vector<double> config_grid(const RunConfig& cfg);

// Canonical (key, value) listing of a config; config_echo joins it as
// "key = value" lines that parse_config reads back.
std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg);
std::string config_echo(const RunConfig& cfg);

}  // namespace kamtori

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "kamtori/config.hpp"
#include "kamtori/dynamics.hpp"
#include "kamtori/integrators.hpp"
#include "kamtori/resonance.hpp"
#include "kamtori/spectral.hpp"

namespace kamtori {

std::string_view artifact_version();

struct ManifestFile {
  std::string path;  // relative to the run directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct RunManifest {
  std::string experiment;
  std::string version;
  std::string started;
  std::string finished;
  std::string status;  // "ok" or "failed"
  std::string failed_stage;
  std::string error;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<ManifestFile> files;
  std::filesystem::path directory;
};

// KAMTORI_OUT when set, else "runs".
std::filesystem::path output_root();
// output_dir under output_root(), or output_dir itself when absolute.
std::filesystem::path run_directory(const RunConfig& cfg);

// Resolves and validates cfg, runs the experiment and writes its files plus
// manifest.json. Validation errors escape before anything is written. A
// numerical failure writes a manifest with status "failed" and rethrows.
RunManifest run(const RunConfig& cfg);

std::string manifest_json(const RunManifest& m);

// --- experiment pieces, shared with the acceptance suite ---------------------

// Exact frequency vector at state0: 2 pi / T for the pendulum, the action
// frequency map for systems with action-angle variables.
std::vector<double> reference_frequency(const SystemModel& system, const PhaseState& state0);

struct DriftPoint {
  double h = 0.0;
  double omega_h = 0.0;
  double omega_exact = 0.0;
  double error = 0.0;
};

struct FrequencyDrift {
  std::vector<DriftPoint> points;
  ConvergenceFit fit;
};

// |omega_h - omega| of one degree of freedom (0-based) for each h, plus the
// log-log fit.
FrequencyDrift frequency_drift(const Scheme& scheme, const SystemModel& system,
                               const PhaseState& state0, std::span<const double> h_values,
                               std::size_t n_steps, const SolverConfig& cfg,
                               std::size_t component = 0,
                               std::size_t n_lines = kDefaultNaffLines);

// --- file formats ------------------------------------------------------------

// n, t, p1..pn, q1..qn, H
std::string trajectory_csv(const Trajectory& traj, const SystemModel& system);
// line_index, omega, re_amp, im_amp, abs_amp
std::string spectrum_csv(const std::vector<SpectrumLine>& lines);
// h, err_I1..err_Im, err_H, converged
std::vector<std::string> scan_columns(const SystemModel& system);
std::string scan_csv(const std::vector<ScanRow>& rows, const SystemModel& system);
// h, omega_h, omega_exact, abs_error
std::string drift_csv(const FrequencyDrift& drift);
// n, p, q with q reduced to [0, 2 pi). UnsupportedDimensionError unless the
// trajectory has one degree of freedom; an empty trajectory gives the header.
std::string portrait_csv(const Trajectory& traj);
void emit_phase_portrait(const Trajectory& traj, const std::filesystem::path& path);

}  // namespace kamtori

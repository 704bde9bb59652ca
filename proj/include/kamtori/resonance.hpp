#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "kamtori/dynamics.hpp"
#include "kamtori/integrators.hpp"

namespace kamtori {

using IntVector = std::vector<std::int64_t>;

struct DiophantineParams {
  double gamma = 1e-3;
  double tau = 3.0;
  int k_max = 32;

  // gamma = 1e-3, tau = n + 2, k_max = 32.
  static DiophantineParams defaults_for(std::size_t n);
  void validate() const;
};

struct DiophantineResult {
  bool passed = false;
  IntVector worst_k;  // minimizer of the margin
  double worst_margin = 0.0;
};

// Tests |exp(i <k, h omega>) - 1| >= h gamma / |k|^tau for 0 < |k|_1 <= k_max
// over the half lattice (first non-zero component positive). Throws
// LatticeSizeError beyond kMaxLatticePoints.
DiophantineResult diophantine_check(std::span<const double> omega, double h,
                                    const DiophantineParams& params);

// Same test over the full lattice; used to cross-check the k <-> -k symmetry.
DiophantineResult diophantine_check_full_lattice(std::span<const double> omega, double h,
                                                 const DiophantineParams& params);

struct ResonanceLabel {
  IntVector k;
  std::int64_t l = 0;
  double residual = 0.0;  // |h <k, omega_h> - 2 pi l|
  std::int64_t order = 0;  // |k|_1
};

ResonanceLabel verify_resonance(const IntVector& k, std::int64_t l, double h,
                                std::span<const double> omega_h);

// Brute force over 0 < |k|_1 <= k_max (half lattice) and 0 < |l| <= l_max.
// Minimum residual wins; ties go to the lower order, then the
// lexicographically smaller k. Returns nullopt unless residual < tol.
std::optional<ResonanceLabel> search_resonance(std::span<const double> omega_h, double h,
                                               int k_max, int l_max, double tol);

inline constexpr double kMaxLatticePoints = 1e8;

// Number of non-zero integer vectors of dimension n with |k|_1 <= k_max.
double lattice_size(std::size_t n, int k_max);

struct ScanRow {
  double h = 0.0;
  // One entry per declared first integral, then total energy.
  std::vector<double> errors;
  // True where |I_j(z_0)| < 1e-12 and errors[j] is absolute.
  std::vector<bool> absolute;
  bool converged = true;
};

struct ScanOptions {
  std::size_t threads = 0;  // 0: hardware concurrency
};

// Infinity-norm relative errors max_n |I_j(z_n) - I_j(z_0)| / |I_j(z_0)| per
// grid value. Rows are independent; they run concurrently and come back in
// grid order. A failing solve marks the row converged = false and keeps the
// errors accumulated up to the failure.
std::vector<ScanRow> scan_step_sizes(const Scheme& scheme, const SystemModel& system,
                                     const PhaseState& state0, std::span<const double> h_grid,
                                     std::size_t n_steps, const SolverConfig& cfg = {},
                                     const ScanOptions& options = {});

// Inclusive grid start, start + step, ..., up to stop (with a half-step slack).
std::vector<double> make_grid(double start, double stop, double step);

struct Peak {
  double h = 0.0;
  double error = 0.0;
  std::size_t index = 0;
};

// A row is a peak when its error is the strict maximum of the centered
// window and exceeds factor times the window median. Unconverged rows and
// non-finite errors are skipped as candidates.
std::vector<Peak> detect_peaks(std::span<const ScanRow> rows, std::size_t invariant_index,
                               std::size_t window = 11, double factor = 10.0);

struct ConvergenceFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

// Least squares of log(error) against log(h).
ConvergenceFit fit_convergence_order(std::span<const double> h_values,
                                     std::span<const double> errors);

struct DriftCheck {
  bool passed = false;
  double c_est = 0.0;
  double max_error = 0.0;
  double first_half_max = 0.0;
  double second_half_max = 0.0;
};

// max_n |H(z_n) - H(z_0)| and c_est = max / h^s. Passes when the error shows
// no trend: the second-half maximum is at most twice the first-half maximum.
DriftCheck energy_drift_check(const Trajectory& traj, const SystemModel& system, double h, int s);

}  // namespace kamtori

#include "kamtori/resonance.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <thread>

#include "kamtori/errors.hpp"

namespace kamtori {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Calls visit(k, order) for every non-zero k with |k|_1 <= k_max. With
// half_lattice only the representative whose first non-zero entry is
// positive is visited.
void enumerate_lattice(std::size_t n, int k_max, bool half_lattice,
                       const std::function<void(const IntVector&, std::int64_t)>& visit) {
  IntVector k(n, 0);
  std::function<void(std::size_t, int, bool)> rec = [&](std::size_t pos, int budget, bool leading) {
    if (pos == n) {
      const std::int64_t order = k_max - budget;
      if (order > 0) visit(k, order);
      return;
    }
    // While every entry so far is zero, the half lattice forces this one >= 0.
    const int lo = (half_lattice && leading) ? 0 : -budget;
    for (int v = lo; v <= budget; ++v) {
      k[pos] = v;
      rec(pos + 1, budget - std::abs(v), leading && v == 0);
    }
    k[pos] = 0;
  };
  rec(0, k_max, true);
}

void guard_lattice(std::size_t n, int k_max) {
  const double size = lattice_size(n, k_max);
  if (size > kMaxLatticePoints)
    throw LatticeSizeError("lattice search over " + std::to_string(n) + " dimensions with |k| <= " +
                           std::to_string(k_max) + " would visit " + std::to_string(size) +
                           " points (limit 1e8)");
}

double dot(const IntVector& k, std::span<const double> omega) {
  double s = 0.0;
  for (std::size_t i = 0; i < k.size(); ++i) s += static_cast<double>(k[i]) * omega[i];
  return s;
}

DiophantineResult run_diophantine(std::span<const double> omega, double h,
                                  const DiophantineParams& params, bool half_lattice) {
  params.validate();
  if (!(h > 0.0) || !std::isfinite(h)) throw ArgumentError("h must be positive");
  if (omega.empty()) throw ArgumentError("frequency vector is empty");
  for (double w : omega)
    if (!std::isfinite(w)) throw ArgumentError("frequency vector must be finite");
  guard_lattice(omega.size(), params.k_max);

  DiophantineResult result;
  result.worst_margin = std::numeric_limits<double>::infinity();
  enumerate_lattice(omega.size(), params.k_max, half_lattice,
                    [&](const IntVector& k, std::int64_t order) {
                      const double phase = h * dot(k, omega);
                      const double lhs = 2.0 * std::abs(std::sin(0.5 * phase));
                      const double rhs = h * params.gamma / std::pow(static_cast<double>(order), params.tau);
                      const double margin = lhs - rhs;
                      if (margin < result.worst_margin) {
                        result.worst_margin = margin;
                        result.worst_k = k;
                      }
                    });
  result.passed = result.worst_margin >= 0.0;
  return result;
}

}  // namespace

DiophantineParams DiophantineParams::defaults_for(std::size_t n) {
  return {1e-3, static_cast<double>(n) + 2.0, 32};
}

void DiophantineParams::validate() const {
  if (!(gamma > 0.0)) throw ArgumentError("gamma must be positive");
  if (!(tau > 0.0)) throw ArgumentError("tau must be positive");
  if (k_max < 1) throw ArgumentError("k_max must be at least 1");
}

double lattice_size(std::size_t n, int k_max) {
  // sum_i 2^i C(n, i) C(k_max, i): i non-zero entries, their signs, and
  // positive magnitudes summing to at most k_max.
  double total = 0.0;
  const std::size_t top = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(k_max, 0)));
  for (std::size_t i = 1; i <= top; ++i) {
    double cn = 1.0, ck = 1.0;
    for (std::size_t j = 0; j < i; ++j) {
      cn = cn * static_cast<double>(n - j) / static_cast<double>(j + 1);
      ck = ck * static_cast<double>(static_cast<std::size_t>(k_max) - j) / static_cast<double>(j + 1);
    }
    total += std::ldexp(cn * ck, static_cast<int>(i));
  }
  return total;
}

DiophantineResult diophantine_check(std::span<const double> omega, double h,
                                    const DiophantineParams& params) {
  return run_diophantine(omega, h, params, true);
}

DiophantineResult diophantine_check_full_lattice(std::span<const double> omega, double h,
                                                 const DiophantineParams& params) {
  return run_diophantine(omega, h, params, false);
}

ResonanceLabel verify_resonance(const IntVector& k, std::int64_t l, double h,
                                std::span<const double> omega_h) {
  if (k.size() != omega_h.size())
    throw ArgumentError("k has " + std::to_string(k.size()) + " entries but omega has " +
                        std::to_string(omega_h.size()));
  if (std::all_of(k.begin(), k.end(), [](std::int64_t v) { return v == 0; }))
    throw ArgumentError("resonance vector k must be non-zero");
  ResonanceLabel label;
  label.k = k;
  label.l = l;
  label.residual = std::abs(h * dot(k, omega_h) - kTwoPi * static_cast<double>(l));
  for (auto v : k) label.order += std::abs(v);
  return label;
}

std::optional<ResonanceLabel> search_resonance(std::span<const double> omega_h, double h,
                                               int k_max, int l_max, double tol) {
  if (k_max < 1 || l_max < 1) throw ArgumentError("k_max and l_max must be at least 1");
  if (omega_h.empty()) throw ArgumentError("frequency vector is empty");
  guard_lattice(omega_h.size(), k_max);

  std::optional<ResonanceLabel> best;
  enumerate_lattice(omega_h.size(), k_max, true, [&](const IntVector& k, std::int64_t order) {
    const double phase = h * dot(k, omega_h);
    auto l = static_cast<std::int64_t>(std::llround(phase / kTwoPi));
    l = std::clamp<std::int64_t>(l, -l_max, l_max);
    if (l == 0) l = phase < 0.0 ? -1 : 1;  // h = 2 pi l / <k, omega> needs l != 0
    const double residual = std::abs(phase - kTwoPi * static_cast<double>(l));
    const bool better =
        !best || residual < best->residual ||
        (residual == best->residual &&
         (order < best->order || (order == best->order && k < best->k)));
    if (better) best = ResonanceLabel{k, l, residual, order};
  });
  if (best && best->residual < tol) return best;
  return std::nullopt;
}

// --- scans ------------------------------------------------------------------

std::vector<double> make_grid(double start, double stop, double step) {
  if (!(step > 0.0) || !std::isfinite(start) || !std::isfinite(stop))
    throw ArgumentError("grid needs finite bounds and a positive step");
  if (stop < start) throw ArgumentError("grid stop must not be below start");
  std::vector<double> grid;
  const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 0.5)) + 1;
  grid.reserve(count);
  for (std::size_t i = 0; i < count; ++i) grid.push_back(start + static_cast<double>(i) * step);
  return grid;
}

namespace {

constexpr double kAbsoluteFloor = 1e-12;

ScanRow scan_one(const Scheme& scheme, const SystemModel& system, const PhaseState& state0,
                 double h, std::size_t n_steps, const SolverConfig& cfg) {
  const std::size_t m = system.first_integral_count();
  std::vector<double> reference(m + 1), current(m + 1);
  system.first_integrals(state0.p, state0.q, std::span<double>(reference.data(), m));
  reference[m] = system.hamiltonian(state0.p, state0.q);

  ScanRow row;
  row.h = h;
  row.errors.assign(m + 1, 0.0);
  row.absolute.resize(m + 1);
  for (std::size_t j = 0; j <= m; ++j) row.absolute[j] = std::abs(reference[j]) < kAbsoluteFloor;

  auto observe = [&](std::size_t, std::span<const double> p, std::span<const double> q) {
    system.first_integrals(p, q, std::span<double>(current.data(), m));
    current[m] = system.hamiltonian(p, q);
    for (std::size_t j = 0; j <= m; ++j) {
      double e = std::abs(current[j] - reference[j]);
      if (!row.absolute[j]) e /= std::abs(reference[j]);
      row.errors[j] = std::max(row.errors[j], e);
    }
  };
  try {
    integrate_observed(scheme, system, state0, h, n_steps, cfg, observe);
  } catch (const NumericalError&) {
    row.converged = false;
  }
  return row;
}

}  // namespace

std::vector<ScanRow> scan_step_sizes(const Scheme& scheme, const SystemModel& system,
                                     const PhaseState& state0, std::span<const double> h_grid,
                                     std::size_t n_steps, const SolverConfig& cfg,
                                     const ScanOptions& options) {
  cfg.validate();
  for (std::size_t i = 0; i < h_grid.size(); ++i) {
    if (!(h_grid[i] > 0.0)) throw ArgumentError("scan step sizes must be positive");
    if (i > 0 && !(h_grid[i] > h_grid[i - 1]))
      throw ArgumentError("scan step sizes must be strictly increasing");
  }
  if (state0.dof() != system.dof()) throw ArgumentError("initial state does not match the system");

  std::vector<ScanRow> rows(h_grid.size());
  if (rows.empty()) return rows;

  std::size_t threads = options.threads != 0 ? options.threads : std::thread::hardware_concurrency();
  threads = std::clamp<std::size_t>(threads, 1, rows.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < rows.size(); i = next++)
      rows[i] = scan_one(scheme, system, state0, h_grid[i], n_steps, cfg);
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  return rows;
}

std::vector<Peak> detect_peaks(std::span<const ScanRow> rows, std::size_t invariant_index,
                               std::size_t window, double factor) {
  if (window < 3 || window % 2 == 0) throw ArgumentError("peak window must be odd and >= 3");
  if (!(factor > 1.0)) throw ArgumentError("peak factor must exceed 1");
  std::vector<Peak> peaks;
  if (rows.size() < window) return peaks;
  for (const auto& r : rows)
    if (invariant_index >= r.errors.size()) throw ArgumentError("invariant index out of range");

  const std::size_t half = window / 2;
  std::vector<double> buf(window);
  for (std::size_t i = half; i + half < rows.size(); ++i) {
    // A diverged or unconverged row is never a peak; in windows it counts as +inf.
    const double e = rows[i].errors[invariant_index];
    if (!rows[i].converged || !std::isfinite(e)) continue;
    bool strict = true;
    for (std::size_t j = i - half; j <= i + half; ++j) {
      double v = rows[j].errors[invariant_index];
      if (!std::isfinite(v)) v = std::numeric_limits<double>::infinity();
      buf[j - (i - half)] = v;
      if (j != i && !(e > v)) strict = false;
    }
    if (!strict) continue;
    std::nth_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(half), buf.end());
    if (e > factor * buf[half]) peaks.push_back({rows[i].h, e, i});
  }
  return peaks;
}

ConvergenceFit fit_convergence_order(std::span<const double> h_values,
                                     std::span<const double> errors) {
  if (h_values.size() != errors.size()) throw ArgumentError("h and error arrays differ in length");
  if (h_values.size() < 3) throw ArgumentError("convergence fit needs at least 3 points");
  const auto n = static_cast<double>(h_values.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < h_values.size(); ++i) {
    if (!(h_values[i] > 0.0) || !(errors[i] > 0.0) || !std::isfinite(h_values[i]) ||
        !std::isfinite(errors[i]))
      throw ArgumentError("convergence fit needs positive finite h and errors");
    const double x = std::log(h_values[i]);
    const double y = std::log(errors[i]);
    xs.push_back(x);
    ys.push_back(y);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = n * sxx - sx * sx;
  if (!(denom > 0.0)) throw ArgumentError("convergence fit needs distinct h values");
  ConvergenceFit fit;
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / n;
  const double mean = sy / n;
  double ss_res = 0, ss_tot = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double pred = fit.intercept + fit.slope * xs[i];
    ss_res += (ys[i] - pred) * (ys[i] - pred);
    ss_tot += (ys[i] - mean) * (ys[i] - mean);
  }
  fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

DriftCheck energy_drift_check(const Trajectory& traj, const SystemModel& system, double h, int s) {
  if (traj.states.empty()) throw ArgumentError("trajectory is empty");
  if (!(h > 0.0)) throw ArgumentError("h must be positive");
  const double h0 = eval_hamiltonian(system, traj.states.front());
  const std::size_t count = traj.states.size();
  const std::size_t mid = count / 2;
  DriftCheck out;
  for (std::size_t i = 0; i < count; ++i) {
    const double e = std::abs(system.hamiltonian(traj.states[i].p, traj.states[i].q) - h0);
    if (i < mid) out.first_half_max = std::max(out.first_half_max, e);
    else out.second_half_max = std::max(out.second_half_max, e);
  }
  out.max_error = std::max(out.first_half_max, out.second_half_max);
  out.c_est = out.max_error / std::pow(h, s);
  out.passed = out.second_half_max <= 2.0 * out.first_half_max;
  return out;
}

}  // namespace kamtori

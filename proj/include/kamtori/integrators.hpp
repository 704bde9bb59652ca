#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "kamtori/dynamics.hpp"
#include "kamtori/errors.hpp"

namespace kamtori {

enum class SchemeKind {
  kImplicitMidpoint,
  kStoermerVerlet,
  kSymplecticEuler,
  kRungeExplicitMidpoint,
};

struct Scheme {
  SchemeKind kind;
  int order;
  bool symplectic;

  static Scheme of(SchemeKind kind);
  // "im", "sv", "se", "runge".
  std::string_view cli_name() const;
  std::string_view display_name() const;

  bool operator==(const Scheme&) const = default;
};

// Throws ArgumentError naming the valid choices.
Scheme scheme_from_name(std::string_view name);
std::vector<std::string> scheme_names();

enum class SolverMethod { kFixedPoint, kNewton };

struct SolverConfig {
  double tol = 1e-13;
  int max_iter = 50;
  SolverMethod method = SolverMethod::kNewton;

  void validate() const;
};

struct Trajectory {
  Scheme scheme;
  double h = 0.0;
  std::vector<PhaseState> states;
  std::string system;
};

// Root of residual(z) = 0 starting from guess, to |residual|_inf <= cfg.tol.
//
// Every residual handled here has the fixed-point shape r(z) = z - G(z); the
// fixed-point method iterates z <- G(z) and the singular-Jacobian fallback of
// Newton takes the damped step z <- z - r/2. Newton differentiates the
// residual by forward differences with step sqrt(eps) * (1 + |z_j|). Once the
// tolerance is met one extra correction is attempted with the last Jacobian
// and kept only if it lowers the residual, so converged solutions sit at
// round-off rather than just under the tolerance.
class ImplicitSolver {
 public:
  explicit ImplicitSolver(SolverConfig cfg = {});

  const SolverConfig& config() const { return cfg_; }

  // Solves in place. Residual: void(std::span<const double> z, std::span<double> r).
  template <class Residual>
  void solve(Residual&& residual, std::span<double> z);

 private:
  void resize(std::size_t m);

  SolverConfig cfg_;
  Eigen::VectorXd z_, r_, trial_r_, step_, candidate_;
  Eigen::MatrixXd jac_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

using ResidualFn = std::function<void(std::span<const double>, std::span<double>)>;
std::vector<double> solve_implicit(const ResidualFn& residual, std::vector<double> guess,
                                   const SolverConfig& cfg = {});

// One-step map of a scheme with reusable solver workspace. Not thread-safe;
// use one Stepper per thread.
class Stepper {
 public:
  Stepper(Scheme scheme, const SystemModel& system, SolverConfig cfg = {});

  // Advances (p, q) by one step of size h in place.
  void advance(std::span<double> p, std::span<double> q, double h);

  // q-implicit symplectic Euler, the adjoint of the p-implicit variant.
  void advance_adjoint_euler(std::span<double> p, std::span<double> q, double h);

  const Scheme& scheme() const { return scheme_; }
  const SystemModel& system() const { return *system_; }

 private:
  void implicit_midpoint(std::span<double> p, std::span<double> q, double h);
  void symplectic_euler(std::span<double> p, std::span<double> q, double h);
  void stoermer_verlet(std::span<double> p, std::span<double> q, double h);
  void explicit_midpoint(std::span<double> p, std::span<double> q, double h);

  Scheme scheme_;
  const SystemModel* system_;
  ImplicitSolver solver_;
  std::size_t n_;
  std::vector<double> z_, a_, b_, c_, d_, e_;
};

// Checked single step. Throws ArgumentError for h == 0 or a bad state,
// NonConvergenceError / DivergenceError from the solve.
PhaseState step(const Scheme& scheme, const SystemModel& system, const PhaseState& state, double h,
                const SolverConfig& cfg = {});

// Adjoint (q-implicit) symplectic Euler step.
PhaseState step_adjoint_euler(const SystemModel& system, const PhaseState& state, double h,
                              const SolverConfig& cfg = {});

// n_steps applications of step(). Errors carry the index of the failing step.
Trajectory integrate(const Scheme& scheme, const SystemModel& system, const PhaseState& state0,
                     double h, std::size_t n_steps, const SolverConfig& cfg = {});

// Streaming variant: observer(n, p, q) is called for n = 0..n_steps without
// storing the states. Returns the number of completed steps; on a solver
// failure it stops and rethrows with the step index attached.
using StateObserver =
    std::function<void(std::size_t, std::span<const double>, std::span<const double>)>;
std::size_t integrate_observed(const Scheme& scheme, const SystemModel& system,
                               const PhaseState& state0, double h, std::size_t n_steps,
                               const SolverConfig& cfg, const StateObserver& observer);

// 2n x 2n Jacobian of the one-step map by central differences (step 1e-6),
// ordered (p_1..p_n, q_1..q_n).
Eigen::MatrixXd step_jacobian(const Scheme& scheme, const SystemModel& system,
                              const PhaseState& state, double h, const SolverConfig& cfg = {},
                              double fd_step = 1e-6);

double jacobian_determinant(const Scheme& scheme, const SystemModel& system,
                            const PhaseState& state, double h, const SolverConfig& cfg = {});

// max_ij |M^T J M - J|_ij for the step Jacobian M.
double symplectic_defect(const Scheme& scheme, const SystemModel& system, const PhaseState& state,
                         double h, const SolverConfig& cfg = {});

// --- ImplicitSolver template body -------------------------------------------

template <class Residual>
void ImplicitSolver::solve(Residual&& residual, std::span<double> z) {
  const std::size_t m = z.size();
  resize(m);
  for (std::size_t j = 0; j < m; ++j) z_[j] = z[j];

  auto eval = [&](const Eigen::VectorXd& at, Eigen::VectorXd& out) {
    residual(std::span<const double>(at.data(), m), std::span<double>(out.data(), m));
  };
  auto norm_of = [](const Eigen::VectorXd& v) {
    double n = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double a = std::abs(v[i]);
      if (!(a <= std::numeric_limits<double>::max())) return std::numeric_limits<double>::infinity();
      n = std::max(n, a);
    }
    return n;
  };

  static const double kFdBase = std::sqrt(std::numeric_limits<double>::epsilon());
  const bool newton = cfg_.method == SolverMethod::kNewton;
  bool have_lu = false;

  eval(z_, r_);
  double norm = norm_of(r_);
  int iter = 0;
  while (norm > cfg_.tol) {
    if (!std::isfinite(norm)) throw DivergenceError("implicit solve produced a non-finite residual");
    if (iter++ >= cfg_.max_iter) throw NonConvergenceError(norm);

    bool took_newton = false;
    if (newton) {
      for (std::size_t j = 0; j < m; ++j) {
        const double zj = z_[j];
        const double e = kFdBase * (1.0 + std::abs(zj));
        z_[j] = zj + e;
        eval(z_, trial_r_);
        z_[j] = zj;
        jac_.col(static_cast<Eigen::Index>(j)) = (trial_r_ - r_) / e;
      }
      lu_.compute(jac_);
      const double rcond = lu_.rcond();
      if (std::isfinite(rcond) && rcond > 1e-14) {
        step_ = lu_.solve(r_);
        if (step_.allFinite()) {
          z_ -= step_;
          took_newton = true;
          have_lu = true;
        }
      }
    }
    if (!took_newton) z_ -= (newton ? 0.5 : 1.0) * r_;

    eval(z_, r_);
    norm = norm_of(r_);
  }

  // Polish.
  if (iter > 0) {
    if (newton && have_lu) {
      step_ = lu_.solve(r_);
      candidate_ = z_ - step_;
      eval(candidate_, trial_r_);
      if (norm_of(trial_r_) < norm) z_ = candidate_;
    } else if (!newton) {
      candidate_ = z_ - r_;
      eval(candidate_, trial_r_);
      if (norm_of(trial_r_) < norm) z_ = candidate_;
    }
  }

  for (std::size_t j = 0; j < m; ++j) z[j] = z_[j];
}

}  // namespace kamtori

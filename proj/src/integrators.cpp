#include "kamtori/integrators.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace kamtori {

// --- schemes ----------------------------------------------------------------

Scheme Scheme::of(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::kImplicitMidpoint: return {kind, 2, true};
    case SchemeKind::kStoermerVerlet: return {kind, 2, true};
    case SchemeKind::kSymplecticEuler: return {kind, 1, true};
    case SchemeKind::kRungeExplicitMidpoint: return {kind, 2, false};
  }
  throw ArgumentError("unknown scheme kind");
}

std::string_view Scheme::cli_name() const {
  switch (kind) {
    case SchemeKind::kImplicitMidpoint: return "im";
    case SchemeKind::kStoermerVerlet: return "sv";
    case SchemeKind::kSymplecticEuler: return "se";
    case SchemeKind::kRungeExplicitMidpoint: return "runge";
  }
  return "?";
}

std::string_view Scheme::display_name() const {
  switch (kind) {
    case SchemeKind::kImplicitMidpoint: return "implicit midpoint";
    case SchemeKind::kStoermerVerlet: return "Stoermer-Verlet";
    case SchemeKind::kSymplecticEuler: return "symplectic Euler";
    case SchemeKind::kRungeExplicitMidpoint: return "Runge (explicit midpoint)";
  }
  return "?";
}

std::vector<std::string> scheme_names() { return {"im", "sv", "se", "runge"}; }

Scheme scheme_from_name(std::string_view name) {
  if (name == "im") return Scheme::of(SchemeKind::kImplicitMidpoint);
  if (name == "sv") return Scheme::of(SchemeKind::kStoermerVerlet);
  if (name == "se") return Scheme::of(SchemeKind::kSymplecticEuler);
  if (name == "runge") return Scheme::of(SchemeKind::kRungeExplicitMidpoint);
  throw ArgumentError("unknown scheme '" + std::string(name) + "' (valid: im, sv, se, runge)");
}

void SolverConfig::validate() const {
  if (!(tol > 0.0) || !std::isfinite(tol)) throw ArgumentError("solver tol must be positive");
  if (max_iter < 1) throw ArgumentError("solver max_iter must be at least 1");
}

// --- solver -----------------------------------------------------------------

ImplicitSolver::ImplicitSolver(SolverConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void ImplicitSolver::resize(std::size_t m) {
  const auto mm = static_cast<Eigen::Index>(m);
  if (z_.size() == mm) return;
  z_.resize(mm);
  r_.resize(mm);
  trial_r_.resize(mm);
  step_.resize(mm);
  candidate_.resize(mm);
  jac_.resize(mm, mm);
}

std::vector<double> solve_implicit(const ResidualFn& residual, std::vector<double> guess,
                                   const SolverConfig& cfg) {
  if (guess.empty()) throw ArgumentError("solve_implicit needs a non-empty guess");
  ImplicitSolver solver(cfg);
  solver.solve(residual, std::span<double>(guess));
  return guess;
}

// --- stepper ----------------------------------------------------------------

Stepper::Stepper(Scheme scheme, const SystemModel& system, SolverConfig cfg)
    : scheme_(scheme), system_(&system), solver_(cfg), n_(system.dof()) {
  z_.resize(2 * n_);
  a_.resize(n_);
  b_.resize(n_);
  c_.resize(n_);
  d_.resize(n_);
  e_.resize(n_);
}

void Stepper::advance(std::span<double> p, std::span<double> q, double h) {
  switch (scheme_.kind) {
    case SchemeKind::kImplicitMidpoint: implicit_midpoint(p, q, h); break;
    case SchemeKind::kStoermerVerlet: stoermer_verlet(p, q, h); break;
    case SchemeKind::kSymplecticEuler: symplectic_euler(p, q, h); break;
    case SchemeKind::kRungeExplicitMidpoint: explicit_midpoint(p, q, h); break;
  }
  for (std::size_t i = 0; i < n_; ++i)
    if (!std::isfinite(p[i]) || !std::isfinite(q[i]))
      throw DivergenceError("step produced a non-finite state");
}

// z+ = z + h J grad H((z + z+)/2), unknown z+ = (p+, q+).
void Stepper::implicit_midpoint(std::span<double> p, std::span<double> q, double h) {
  const SystemModel& sys = *system_;
  const std::size_t n = n_;
  // Start from z itself. An explicit Euler guess lands in the basin of a spurious
  // root once h exceeds about 3.7 on the pendulum.
  for (std::size_t i = 0; i < n; ++i) {
    z_[i] = p[i];
    z_[n + i] = q[i];
  }
  auto residual = [&](std::span<const double> z, std::span<double> r) {
    for (std::size_t i = 0; i < n; ++i) {
      c_[i] = 0.5 * (p[i] + z[i]);
      d_[i] = 0.5 * (q[i] + z[n + i]);
    }
    sys.gradients(c_, d_, a_, b_);
    for (std::size_t i = 0; i < n; ++i) {
      r[i] = z[i] - p[i] + h * b_[i];
      r[n + i] = z[n + i] - q[i] - h * a_[i];
    }
  };
  solver_.solve(residual, std::span<double>(z_));
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = z_[i];
    q[i] = z_[n + i];
  }
}

// p+ = p - h dH/dq(p+, q), q+ = q + h dH/dp(p+, q).
void Stepper::symplectic_euler(std::span<double> p, std::span<double> q, double h) {
  const SystemModel& sys = *system_;
  const std::size_t n = n_;
  std::span<double> unknown(z_.data(), n);
  sys.gradients(p, q, a_, b_);
  for (std::size_t i = 0; i < n; ++i) unknown[i] = p[i] - h * b_[i];
  auto residual = [&](std::span<const double> pp, std::span<double> r) {
    sys.gradients(pp, q, a_, b_);
    for (std::size_t i = 0; i < n; ++i) r[i] = pp[i] - p[i] + h * b_[i];
  };
  solver_.solve(residual, unknown);
  sys.gradients(unknown, q, a_, b_);
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = unknown[i];
    q[i] += h * a_[i];
  }
}

// q+ = q + h dH/dp(p, q+), p+ = p - h dH/dq(p, q+).
void Stepper::advance_adjoint_euler(std::span<double> p, std::span<double> q, double h) {
  const SystemModel& sys = *system_;
  const std::size_t n = n_;
  std::span<double> unknown(z_.data(), n);
  sys.gradients(p, q, a_, b_);
  for (std::size_t i = 0; i < n; ++i) unknown[i] = q[i] + h * a_[i];
  auto residual = [&](std::span<const double> qq, std::span<double> r) {
    sys.gradients(p, qq, a_, b_);
    for (std::size_t i = 0; i < n; ++i) r[i] = qq[i] - q[i] - h * a_[i];
  };
  solver_.solve(residual, unknown);
  sys.gradients(p, unknown, a_, b_);
  for (std::size_t i = 0; i < n; ++i) {
    q[i] = unknown[i];
    p[i] -= h * b_[i];
  }
}

// Generalized Stoermer-Verlet, momentum half-steps first:
//   P  = p - h/2 dH/dq(P, q)
//   q+ = q + h/2 (dH/dp(P, q) + dH/dp(P, q+))
//   p+ = P - h/2 dH/dq(P, q+)
void Stepper::stoermer_verlet(std::span<double> p, std::span<double> q, double h) {
  const SystemModel& sys = *system_;
  const std::size_t n = n_;
  const double half = 0.5 * h;

  std::span<double> mid(z_.data(), n);
  sys.gradients(p, q, a_, b_);
  for (std::size_t i = 0; i < n; ++i) mid[i] = p[i] - half * b_[i];
  auto r_mid = [&](std::span<const double> pp, std::span<double> r) {
    sys.gradients(pp, q, a_, b_);
    for (std::size_t i = 0; i < n; ++i) r[i] = pp[i] - p[i] + half * b_[i];
  };
  solver_.solve(r_mid, mid);

  // e_ holds dH/dp(P, q), fixed during the second solve.
  sys.gradients(mid, q, e_, b_);
  std::span<double> qnew(z_.data() + n, n);
  for (std::size_t i = 0; i < n; ++i) qnew[i] = q[i] + h * e_[i];
  auto r_q = [&](std::span<const double> qq, std::span<double> r) {
    sys.gradients(mid, qq, a_, b_);
    for (std::size_t i = 0; i < n; ++i) r[i] = qq[i] - q[i] - half * (e_[i] + a_[i]);
  };
  solver_.solve(r_q, qnew);

  sys.gradients(mid, qnew, a_, b_);
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = mid[i] - half * b_[i];
    q[i] = qnew[i];
  }
}

// k1 = f(z), z+ = z + h f(z + h/2 k1).
void Stepper::explicit_midpoint(std::span<double> p, std::span<double> q, double h) {
  const SystemModel& sys = *system_;
  const std::size_t n = n_;
  const double half = 0.5 * h;
  sys.gradients(p, q, a_, b_);
  for (std::size_t i = 0; i < n; ++i) {
    c_[i] = p[i] - half * b_[i];
    d_[i] = q[i] + half * a_[i];
  }
  sys.gradients(c_, d_, a_, b_);
  for (std::size_t i = 0; i < n; ++i) {
    p[i] -= h * b_[i];
    q[i] += h * a_[i];
  }
}

// --- checked entry points ---------------------------------------------------

namespace {

void check_step_inputs(const SystemModel& system, const PhaseState& state, double h) {
  if (h == 0.0 || !std::isfinite(h)) throw ArgumentError("step size h must be finite and non-zero");
  if (state.p.size() != system.dof() || state.q.size() != system.dof())
    throw ArgumentError("state dimension does not match system '" + std::string(system.name()) +
                        "'");
  for (std::size_t i = 0; i < state.dof(); ++i)
    if (!std::isfinite(state.p[i]) || !std::isfinite(state.q[i]))
      throw ArgumentError("state must be finite");
}

}  // namespace

PhaseState step(const Scheme& scheme, const SystemModel& system, const PhaseState& state, double h,
                const SolverConfig& cfg) {
  check_step_inputs(system, state, h);
  Stepper stepper(scheme, system, cfg);
  PhaseState out = state;
  stepper.advance(out.p, out.q, h);
  return out;
}

PhaseState step_adjoint_euler(const SystemModel& system, const PhaseState& state, double h,
                              const SolverConfig& cfg) {
  check_step_inputs(system, state, h);
  Stepper stepper(Scheme::of(SchemeKind::kSymplecticEuler), system, cfg);
  PhaseState out = state;
  stepper.advance_adjoint_euler(out.p, out.q, h);
  return out;
}

std::size_t integrate_observed(const Scheme& scheme, const SystemModel& system,
                               const PhaseState& state0, double h, std::size_t n_steps,
                               const SolverConfig& cfg, const StateObserver& observer) {
  check_step_inputs(system, state0, h);
  Stepper stepper(scheme, system, cfg);
  std::vector<double> p = state0.p;
  std::vector<double> q = state0.q;
  observer(0, p, q);
  for (std::size_t n = 1; n <= n_steps; ++n) {
    try {
      stepper.advance(p, q, h);
    } catch (const NonConvergenceError& e) {
      throw e.at_step(n);
    } catch (const DivergenceError& e) {
      throw DivergenceError(std::string(e.what()) + " at step " + std::to_string(n));
    }
    observer(n, p, q);
  }
  return n_steps;
}

Trajectory integrate(const Scheme& scheme, const SystemModel& system, const PhaseState& state0,
                     double h, std::size_t n_steps, const SolverConfig& cfg) {
  Trajectory traj{scheme, h, {}, std::string(system.name())};
  traj.states.reserve(n_steps + 1);
  traj.states.push_back(state0);
  integrate_observed(scheme, system, state0, h, n_steps, cfg,
                     [&](std::size_t n, std::span<const double> p, std::span<const double> q) {
                       if (n == 0) return;
                       PhaseState s;
                       s.p.assign(p.begin(), p.end());
                       s.q.assign(q.begin(), q.end());
                       traj.states.push_back(std::move(s));
                     });
  return traj;
}

// --- symplecticity diagnostics ----------------------------------------------

Eigen::MatrixXd step_jacobian(const Scheme& scheme, const SystemModel& system,
                              const PhaseState& state, double h, const SolverConfig& cfg,
                              double fd_step) {
  check_step_inputs(system, state, h);
  const std::size_t n = system.dof();
  const auto dim = static_cast<Eigen::Index>(2 * n);
  Stepper stepper(scheme, system, cfg);
  Eigen::MatrixXd jac(dim, dim);

  auto mapped = [&](std::size_t j, double delta) {
    std::vector<double> p = state.p;
    std::vector<double> q = state.q;
    (j < n ? p[j] : q[j - n]) += delta;
    stepper.advance(p, q, h);
    Eigen::VectorXd out(dim);
    for (std::size_t i = 0; i < n; ++i) {
      out[static_cast<Eigen::Index>(i)] = p[i];
      out[static_cast<Eigen::Index>(n + i)] = q[i];
    }
    return out;
  };

  for (std::size_t j = 0; j < 2 * n; ++j)
    jac.col(static_cast<Eigen::Index>(j)) =
        (mapped(j, fd_step) - mapped(j, -fd_step)) / (2.0 * fd_step);
  return jac;
}

double jacobian_determinant(const Scheme& scheme, const SystemModel& system,
                            const PhaseState& state, double h, const SolverConfig& cfg) {
  return step_jacobian(scheme, system, state, h, cfg).determinant();
}

double symplectic_defect(const Scheme& scheme, const SystemModel& system, const PhaseState& state,
                         double h, const SolverConfig& cfg) {
  const Eigen::MatrixXd m = step_jacobian(scheme, system, state, h, cfg);
  const auto n = static_cast<Eigen::Index>(system.dof());
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  j.topRightCorner(n, n) = -Eigen::MatrixXd::Identity(n, n);
  j.bottomLeftCorner(n, n) = Eigen::MatrixXd::Identity(n, n);
  return (m.transpose() * j * m - j).cwiseAbs().maxCoeff();
}

}  // namespace kamtori

#include "kamtori/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "kamtori/errors.hpp"

namespace kamtori {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_dof(const SystemModel& system, const PhaseState& state) {
  if (state.p.size() != state.q.size())
    throw ArgumentError("phase state has p of length " + std::to_string(state.p.size()) +
                        " but q of length " + std::to_string(state.q.size()));
  if (state.dof() != system.dof())
    throw ArgumentError("system '" + std::string(system.name()) + "' has " +
                        std::to_string(system.dof()) + " degrees of freedom, state has " +
                        std::to_string(state.dof()));
}

}  // namespace

PhaseState::PhaseState(std::vector<double> p_in, std::vector<double> q_in)
    : p(std::move(p_in)), q(std::move(q_in)) {
  if (p.size() != q.size()) throw ArgumentError("p and q must have the same length");
  if (p.empty()) throw ArgumentError("phase state needs at least one degree of freedom");
  for (std::size_t i = 0; i < p.size(); ++i)
    if (!std::isfinite(p[i]) || !std::isfinite(q[i]))
      throw ArgumentError("phase state components must be finite");
}

double wrap_angle(double angle) {
  double r = std::fmod(angle, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  // fmod of a tiny negative number can round back up to 2 pi.
  if (r >= kTwoPi) r = 0.0;
  return r;
}

PhaseState SystemModel::cartesian_to_action_angle(const PhaseState&) const {
  throw ArgumentError("system '" + std::string(name()) + "' has no action-angle map");
}

PhaseState SystemModel::action_angle_to_cartesian(const PhaseState&) const {
  throw ArgumentError("system '" + std::string(name()) + "' has no action-angle map");
}

// --- pendulum -------------------------------------------------------------

double PendulumModel::hamiltonian(std::span<const double> p, std::span<const double> q) const {
  return 0.5 * p[0] * p[0] + (1.0 - std::cos(q[0]));
}

void PendulumModel::gradients(std::span<const double> p, std::span<const double> q,
                              std::span<double> dh_dp, std::span<double> dh_dq) const {
  dh_dp[0] = p[0];
  dh_dq[0] = std::sin(q[0]);
}

// --- Ruessmann ------------------------------------------------------------

namespace {

struct Actions {
  double i1, i2, i3;
};

Actions actions_of(std::span<const double> x, std::span<const double> y) {
  return {0.5 * (x[0] * x[0] + y[0] * y[0]), 0.5 * (x[1] * x[1] + y[1] * y[1]),
          0.5 * (x[2] * x[2] + y[2] * y[2])};
}

// dH/dI of H(I) = I1^2 + I1^2 I2 + I1^3 I3.
void action_frequencies(const Actions& a, double out[3]) {
  const double i1sq = a.i1 * a.i1;
  out[0] = 2.0 * a.i1 * (1.0 + a.i2) + 3.0 * i1sq * a.i3;
  out[1] = i1sq;
  out[2] = i1sq * a.i1;
}

}  // namespace

double RuessmannModel::hamiltonian(std::span<const double> x, std::span<const double> y) const {
  const Actions a = actions_of(x, y);
  const double i1sq = a.i1 * a.i1;
  return i1sq * (1.0 + a.i2) + i1sq * a.i1 * a.i3;
}

void RuessmannModel::gradients(std::span<const double> x, std::span<const double> y,
                               std::span<double> dk_dx, std::span<double> dk_dy) const {
  double w[3];
  action_frequencies(actions_of(x, y), w);
  for (int i = 0; i < 3; ++i) {
    dk_dx[i] = w[i] * x[i];
    dk_dy[i] = w[i] * y[i];
  }
}

void RuessmannModel::first_integrals(std::span<const double> x, std::span<const double> y,
                                     std::span<double> out) const {
  const Actions a = actions_of(x, y);
  out[0] = a.i1;
  out[1] = a.i2;
  out[2] = a.i3;
}

PhaseState RuessmannModel::cartesian_to_action_angle(const PhaseState& cartesian) const {
  return polar_to_action_angle(cartesian);
}

PhaseState RuessmannModel::action_angle_to_cartesian(const PhaseState& aa) const {
  return polar_from_action_angle(aa);
}

std::optional<std::vector<double>> RuessmannModel::exact_frequency(
    std::span<const double> actions) const {
  if (actions.size() != 3) throw ArgumentError("ruessmann3 expects 3 actions");
  double w[3];
  action_frequencies({actions[0], actions[1], actions[2]}, w);
  return std::vector<double>{w[0], w[1], w[2]};
}

std::optional<double> RuessmannModel::action_hamiltonian(std::span<const double> actions) const {
  if (actions.size() != 3) throw ArgumentError("ruessmann3 expects 3 actions");
  const double p1 = actions[0];
  return p1 * p1 + p1 * p1 * actions[1] + p1 * p1 * p1 * actions[2];
}

PhaseState RuessmannModel::reference_initial_state() {
  return PhaseState({0.2, 0.1, 0.4 * std::numbers::sqrt2}, {0.37, 0.2, 0.53});
}

// --- polar action-angle map -------------------------------------------------

PhaseState polar_to_action_angle(const PhaseState& cartesian) {
  const std::size_t n = cartesian.dof();
  PhaseState aa;
  aa.p.resize(n);
  aa.q.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = cartesian.p[i];
    const double y = cartesian.q[i];
    if (x == 0.0 && y == 0.0)
      throw DegenerateAngleError("angle of component " + std::to_string(i + 1) +
                                 " is undefined at zero action");
    aa.p[i] = 0.5 * (x * x + y * y);
    aa.q[i] = wrap_angle(std::atan2(y, x));
  }
  return aa;
}

PhaseState polar_from_action_angle(const PhaseState& aa) {
  const std::size_t n = aa.dof();
  PhaseState cartesian;
  cartesian.p.resize(n);
  cartesian.q.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(aa.p[i] >= 0.0))
      throw ArgumentError("action " + std::to_string(i + 1) + " must be non-negative");
    const double r = std::sqrt(2.0 * aa.p[i]);
    cartesian.p[i] = r * std::cos(aa.q[i]);
    cartesian.q[i] = r * std::sin(aa.q[i]);
  }
  return cartesian;
}

// --- expression-defined systems ---------------------------------------------

ExpressionSystem::ExpressionSystem(std::string name, std::size_t dof, std::string_view hamiltonian,
                                   const std::vector<std::string>& first_integrals,
                                   ObservableKind observable)
    : name_(std::move(name)), dof_(dof), hamiltonian_(hamiltonian, dof), observable_(observable) {
  integrals_.reserve(first_integrals.size());
  for (const auto& src : first_integrals) integrals_.emplace_back(src, dof);
}

double ExpressionSystem::hamiltonian(std::span<const double> p, std::span<const double> q) const {
  return hamiltonian_.evaluate(p, q);
}

void ExpressionSystem::gradients(std::span<const double> p, std::span<const double> q,
                                 std::span<double> dh_dp, std::span<double> dh_dq) const {
  static const double kBase = std::cbrt(std::numeric_limits<double>::epsilon());
  std::vector<double> pp(p.begin(), p.end());
  std::vector<double> qq(q.begin(), q.end());

  auto central4 = [&](std::vector<double>& v, std::size_t j) {
    const double x0 = v[j];
    const double step = kBase * std::max(1.0, std::abs(x0));
    double f[4];
    const double offsets[4] = {-2.0, -1.0, 1.0, 2.0};
    for (int k = 0; k < 4; ++k) {
      v[j] = x0 + offsets[k] * step;
      f[k] = hamiltonian_.evaluate(pp, qq);
    }
    v[j] = x0;
    return (f[0] - 8.0 * f[1] + 8.0 * f[2] - f[3]) / (12.0 * step);
  };

  for (std::size_t j = 0; j < dof_; ++j) {
    dh_dp[j] = central4(pp, j);
    dh_dq[j] = central4(qq, j);
  }
}

std::size_t ExpressionSystem::first_integral_count() const {
  return integrals_.empty() ? 1 : integrals_.size();
}

void ExpressionSystem::first_integrals(std::span<const double> p, std::span<const double> q,
                                       std::span<double> out) const {
  if (integrals_.empty()) {
    out[0] = hamiltonian_.evaluate(p, q);
    return;
  }
  for (std::size_t k = 0; k < integrals_.size(); ++k) out[k] = integrals_[k].evaluate(p, q);
}

// --- registry ---------------------------------------------------------------

SystemPtr make_system(std::string_view name) {
  if (name == "pendulum") return std::make_shared<PendulumModel>();
  if (name == "ruessmann3") return std::make_shared<RuessmannModel>();
  std::string valid;
  for (const auto& n : builtin_system_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ArgumentError("unknown system '" + std::string(name) + "' (valid: " + valid + ")");
}

std::vector<std::string> builtin_system_names() { return {"pendulum", "ruessmann3"}; }

// --- checked operations -----------------------------------------------------

double eval_hamiltonian(const SystemModel& system, const PhaseState& state) {
  require_dof(system, state);
  return system.hamiltonian(state.p, state.q);
}

std::pair<std::vector<double>, std::vector<double>> eval_gradients(const SystemModel& system,
                                                                   const PhaseState& state) {
  require_dof(system, state);
  std::vector<double> dp(system.dof()), dq(system.dof());
  system.gradients(state.p, state.q, dp, dq);
  return {std::move(dp), std::move(dq)};
}

std::vector<double> first_integral_values(const SystemModel& system, const PhaseState& state) {
  require_dof(system, state);
  std::vector<double> out(system.first_integral_count());
  system.first_integrals(state.p, state.q, out);
  return out;
}

PhaseState to_action_angle(const SystemModel& system, const PhaseState& cartesian) {
  require_dof(system, cartesian);
  if (!system.has_action_angle())
    throw ArgumentError("system '" + std::string(system.name()) + "' has no action-angle map");
  return system.cartesian_to_action_angle(cartesian);
}

PhaseState from_action_angle(const SystemModel& system, const PhaseState& aa) {
  require_dof(system, aa);
  if (!system.has_action_angle())
    throw ArgumentError("system '" + std::string(system.name()) + "' has no action-angle map");
  return system.action_angle_to_cartesian(aa);
}

// --- pendulum period --------------------------------------------------------

namespace {

double libration_amplitude(double energy) {
  if (!(energy > 0.0 && energy < 2.0))
    throw OutOfRegimeError("pendulum energy " + std::to_string(energy) +
                           " is outside the libration regime (0, 2)");
  return std::acos(1.0 - energy);
}

}  // namespace

double pendulum_period(double energy) {
  const double qm = libration_amplitude(energy);
  // K(k) = pi / (2 AGM(1, k')) with k = sin(q_m / 2), k' = cos(q_m / 2).
  double a = 1.0;
  double b = std::cos(0.5 * qm);
  for (int it = 0; it < 64 && std::abs(a - b) > 1e-16 * a; ++it) {
    const double an = 0.5 * (a + b);
    b = std::sqrt(a * b);
    a = an;
  }
  return 4.0 * (std::numbers::pi / (2.0 * a));
}

double pendulum_period_quadrature(double energy) {
  const double qm = libration_amplitude(energy);
  // q = q_m sin(theta); the product form keeps cos q - cos q_m accurate near q_m.
  auto integrand = [qm](double theta) {
    const double s = std::sin(theta);
    const double half_gap = std::sin(0.25 * std::numbers::pi - 0.5 * theta);
    const double one_minus_s = 2.0 * half_gap * half_gap;
    const double q = qm * s;
    const double diff = 2.0 * std::sin(0.5 * (qm + q)) * std::sin(0.5 * qm * one_minus_s);
    return qm * std::cos(theta) / std::sqrt(diff);
  };
  double err = 0.0;
  const double integral = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      integrand, 0.0, 0.5 * std::numbers::pi, 20, 1e-14, &err);
  return 2.0 * std::numbers::sqrt2 * integral;
}

}  // namespace kamtori

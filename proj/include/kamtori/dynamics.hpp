#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kamtori/expression.hpp"

namespace kamtori {

// A point (p, q) of canonical phase space. For Cartesian systems such as the
// Ruessmann oscillator the same shape holds (x, y) with x in p and y in q.
struct PhaseState {
  std::vector<double> p;
  std::vector<double> q;

  PhaseState() = default;
  PhaseState(std::vector<double> p_in, std::vector<double> q_in);

  std::size_t dof() const { return p.size(); }
  bool operator==(const PhaseState&) const = default;
};

// Which complex observable carries the rotation of degree of freedom i.
enum class ObservableKind {
  kAngle,      // exp(i q_i)
  kCartesian,  // p_i + i q_i, i.e. x_i + i y_i
};

// A Hamiltonian system. Implementations are immutable after construction and
// may be shared across threads.
//
// The span-based virtuals are the hot path used by the integrators; they do
// not validate sizes. The free functions below are the checked entry points.
class SystemModel {
 public:
  virtual ~SystemModel() = default;

  virtual std::string_view name() const = 0;
  virtual std::size_t dof() const = 0;

  virtual double hamiltonian(std::span<const double> p, std::span<const double> q) const = 0;
  virtual void gradients(std::span<const double> p, std::span<const double> q,
                         std::span<double> dh_dp, std::span<double> dh_dq) const = 0;

  // Defaults to the single integral H.
  virtual std::size_t first_integral_count() const { return 1; }
  virtual void first_integrals(std::span<const double> p, std::span<const double> q,
                               std::span<double> out) const {
    out[0] = hamiltonian(p, q);
  }

  virtual ObservableKind observable() const { return ObservableKind::kAngle; }

  virtual bool has_action_angle() const { return false; }
  // Unchecked transforms; only meaningful when has_action_angle().
  virtual PhaseState cartesian_to_action_angle(const PhaseState& cartesian) const;
  virtual PhaseState action_angle_to_cartesian(const PhaseState& aa) const;

  // omega(p) = dH/dp of the action-form Hamiltonian, when known in closed form.
  virtual std::optional<std::vector<double>> exact_frequency(std::span<const double> actions) const {
    (void)actions;
    return std::nullopt;
  }
  virtual std::optional<double> action_hamiltonian(std::span<const double> actions) const {
    (void)actions;
    return std::nullopt;
  }
};

// H(p, q) = p^2/2 + (1 - cos q).
class PendulumModel final : public SystemModel {
 public:
  std::string_view name() const override { return "pendulum"; }
  std::size_t dof() const override { return 1; }
  double hamiltonian(std::span<const double> p, std::span<const double> q) const override;
  void gradients(std::span<const double> p, std::span<const double> q, std::span<double> dh_dp,
                 std::span<double> dh_dq) const override;
};

// Three coupled oscillators in Cartesian variables (x, y) with actions
// I_i = (x_i^2 + y_i^2)/2 and
//
//   K(x, y) = I1^2 (1 + I2) + I1^3 I3.
//
// In action-angle form H(p) = p1^2 + p1^2 p2 + p1^3 p3, so every I_i is a
// first integral and each oscillator rotates at omega_i(I) = dH/dp_i.
class RuessmannModel final : public SystemModel {
 public:
  std::string_view name() const override { return "ruessmann3"; }
  std::size_t dof() const override { return 3; }
  double hamiltonian(std::span<const double> x, std::span<const double> y) const override;
  void gradients(std::span<const double> x, std::span<const double> y, std::span<double> dk_dx,
                 std::span<double> dk_dy) const override;

  std::size_t first_integral_count() const override { return 3; }
  void first_integrals(std::span<const double> x, std::span<const double> y,
                       std::span<double> out) const override;

  ObservableKind observable() const override { return ObservableKind::kCartesian; }

  bool has_action_angle() const override { return true; }
  PhaseState cartesian_to_action_angle(const PhaseState& cartesian) const override;
  PhaseState action_angle_to_cartesian(const PhaseState& aa) const override;

  std::optional<std::vector<double>> exact_frequency(std::span<const double> actions) const override;
  std::optional<double> action_hamiltonian(std::span<const double> actions) const override;

  // Initial condition used by the reference experiments.
  static PhaseState reference_initial_state();
};

// A system defined at run time by closed-form expressions. Gradients come
// from fourth-order central differences with step cbrt(eps) * max(1, |z_j|).
class ExpressionSystem final : public SystemModel {
 public:
  ExpressionSystem(std::string name, std::size_t dof, std::string_view hamiltonian,
                   const std::vector<std::string>& first_integrals = {},
                   ObservableKind observable = ObservableKind::kAngle);

  std::string_view name() const override { return name_; }
  std::size_t dof() const override { return dof_; }
  double hamiltonian(std::span<const double> p, std::span<const double> q) const override;
  void gradients(std::span<const double> p, std::span<const double> q, std::span<double> dh_dp,
                 std::span<double> dh_dq) const override;

  std::size_t first_integral_count() const override;
  void first_integrals(std::span<const double> p, std::span<const double> q,
                       std::span<double> out) const override;

  ObservableKind observable() const override { return observable_; }

 private:
  std::string name_;
  std::size_t dof_;
  Expression hamiltonian_;
  std::vector<Expression> integrals_;
  ObservableKind observable_;
};

using SystemPtr = std::shared_ptr<const SystemModel>;

// Built-in registry: "pendulum", "ruessmann3".
SystemPtr make_system(std::string_view name);
std::vector<std::string> builtin_system_names();

// Checked operations. All throw ArgumentError on a dimension mismatch.
double eval_hamiltonian(const SystemModel& system, const PhaseState& state);
std::pair<std::vector<double>, std::vector<double>> eval_gradients(const SystemModel& system,
                                                                   const PhaseState& state);
std::vector<double> first_integral_values(const SystemModel& system, const PhaseState& state);

// (x, y) -> (p, q) with p_i = (x_i^2 + y_i^2)/2 and q_i = atan2(y_i, x_i) in
// [0, 2 pi). Throws DegenerateAngleError when an action vanishes.
PhaseState to_action_angle(const SystemModel& system, const PhaseState& cartesian);
// (p, q) -> (x, y) = (sqrt(2p) cos q, sqrt(2p) sin q). Throws on p_i < 0.
PhaseState from_action_angle(const SystemModel& system, const PhaseState& aa);

// Free-standing action-angle transform used by RuessmannModel.
PhaseState polar_to_action_angle(const PhaseState& cartesian);
PhaseState polar_from_action_angle(const PhaseState& aa);

// Libration period of the unit pendulum at energy E in (0, 2):
//   T = 4 K(k),  k = sin(q_m / 2),  q_m = arccos(1 - E),
// with K evaluated by the arithmetic-geometric mean. Throws OutOfRegimeError
// outside the libration band.
double pendulum_period(double energy);

// The same period by adaptive Gauss-Kronrod quadrature of
//   T = 2 sqrt(2) * integral_0^{q_m} dq / sqrt(cos q - cos q_m)
// after the substitution sin(q/2) = k sin(phi), which removes the endpoint
// singularity. Kept as an independent cross-check.
double pendulum_period_quadrature(double energy);

// Reduce an angle to [0, 2 pi).
double wrap_angle(double angle);

}  // namespace kamtori

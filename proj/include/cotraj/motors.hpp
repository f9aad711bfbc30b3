#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "cotraj/expr.hpp"

namespace cotraj {

struct MonotonicityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InfeasibleTorque : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MotorSpec {
  std::string name;
  double extent_x = 0, extent_y = 0, extent_z = 0;  // m
  double mass = 0;                                   // kg
  double max_torque = 0;                             // N*m
  double voltage = 0;                                // V
  double top_speed = 0;                              // rad/s
};

/// Conservative piecewise-linear upper envelope of a motor property as a
/// function of required torque xi. Knots: (0, v1), (tau1, v2), ...,
/// (tau_{M-1}, vM), (tauM, 1.05 vM). Strictly increasing slope everywhere
/// so the curve never goes flat.
class BoundCurve {
 public:
  BoundCurve() = default;
  BoundCurve(std::vector<double> torques, std::vector<double> values);

  /// Numeric query; throws InfeasibleTorque outside [0, largest rating].
  double operator()(double xi) const;
  /// Symbolic query (no range check; the NLP bounds u instead).
  Expr operator()(const Expr& xi) const;

 private:
  // y = a + b*xi + sum_i c_i * |xi - t_i|, the standard hinge decomposition
  // of a piecewise-linear function.
  double a_ = 0, b_ = 0;
  double torque_limit_ = 0;
  std::vector<double> knots_;
  std::vector<double> c_;
};

class MotorLibrary {
 public:
  explicit MotorLibrary(std::vector<MotorSpec> motors);

  const std::vector<MotorSpec>& motors() const { return motors_; }
  double max_torque() const { return motors_.back().max_torque; }

  const BoundCurve& mass_bound() const { return mass_; }
  const BoundCurve& extent_x_bound() const { return x_; }
  const BoundCurve& extent_y_bound() const { return y_; }
  const BoundCurve& extent_z_bound() const { return z_; }

  /// Smallest motor whose rating covers the requested torque.
  const MotorSpec& select_motor(double xi) const;

 private:
  std::vector<MotorSpec> motors_;  // sorted by torque
  BoundCurve mass_, x_, y_, z_;
};

}  // namespace cotraj

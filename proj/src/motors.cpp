#include "cotraj/motors.hpp"

#include <algorithm>
#include <cmath>

namespace cotraj {

BoundCurve::BoundCurve(std::vector<double> torques, std::vector<double> values) {
  // Knot points of the envelope: (0, v1), (tau1, v2), ..., (tau_{M-1}, vM),
  // (tauM, 1.05 vM). Between two ratings the bound is already the next
  // motor's value at the lower rating, so the curve sits above the step
  // function everywhere.
  const size_t m = torques.size();
  std::vector<double> xs(m + 1), ys(m + 1);
  xs[0] = 0.0;
  ys[0] = values[0];
  for (size_t i = 1; i < m; ++i) {
    xs[i] = torques[i - 1];
    ys[i] = values[i];
  }
  xs[m] = torques[m - 1];
  ys[m] = 1.05 * values[m - 1];
  torque_limit_ = torques[m - 1];

  std::vector<double> slope(m);
  for (size_t i = 0; i < m; ++i)
    slope[i] = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);

  // Hinge decomposition y = a + b x + sum_i c_i |x - t_i| over the interior
  // knots, so the symbolic form needs only one smooth_abs per knot.
  b_ = 0.5 * (slope.front() + slope.back());
  for (size_t i = 1; i < m; ++i) {
    knots_.push_back(xs[i]);
    c_.push_back(0.5 * (slope[i] - slope[i - 1]));
  }
  a_ = ys[0];
  for (size_t i = 0; i < knots_.size(); ++i) a_ -= c_[i] * knots_[i];
}

double BoundCurve::operator()(double xi) const {
  if (xi < -1e-12 || xi > torque_limit_ + 1e-12)
    throw InfeasibleTorque("torque " + std::to_string(xi) +
                           " outside [0, " + std::to_string(torque_limit_) +
                           "]");
  double y = a_ + b_ * xi;
  for (size_t i = 0; i < knots_.size(); ++i)
    y += c_[i] * std::abs(xi - knots_[i]);
  return y;
}

Expr BoundCurve::operator()(const Expr& xi) const {
  Expr y = Expr::constant(a_) + Expr::constant(b_) * xi;
  for (size_t i = 0; i < knots_.size(); ++i)
    y = y + Expr::constant(c_[i]) * smooth_abs(xi - Expr::constant(knots_[i]));
  return y;
}

MotorLibrary::MotorLibrary(std::vector<MotorSpec> motors)
    : motors_(std::move(motors)) {
  if (motors_.empty()) throw MonotonicityError("empty motor library");
  std::sort(motors_.begin(), motors_.end(),
            [](const MotorSpec& a, const MotorSpec& b) {
              return a.max_torque < b.max_torque;
            });
  for (size_t i = 1; i < motors_.size(); ++i) {
    const MotorSpec& lo = motors_[i - 1];
    const MotorSpec& hi = motors_[i];
    if (hi.max_torque <= lo.max_torque)
      throw MonotonicityError("duplicate torque rating at " + hi.name);
    if (hi.mass < lo.mass || hi.extent_x < lo.extent_x ||
        hi.extent_y < lo.extent_y || hi.extent_z < lo.extent_z)
      throw MonotonicityError("mass or extent decreases with torque at " +
                              hi.name);
  }
  std::vector<double> t, vm, vx, vy, vz;
  for (const MotorSpec& s : motors_) {
    t.push_back(s.max_torque);
    vm.push_back(s.mass);
    vx.push_back(s.extent_x);
    vy.push_back(s.extent_y);
    vz.push_back(s.extent_z);
  }
  mass_ = BoundCurve(t, vm);
  x_ = BoundCurve(t, vx);
  y_ = BoundCurve(t, vy);
  z_ = BoundCurve(t, vz);
}

const MotorSpec& MotorLibrary::select_motor(double xi) const {
  for (const MotorSpec& s : motors_)
    if (s.max_torque >= xi - 1e-12) return s;
  throw InfeasibleTorque("no motor rated for " + std::to_string(xi) + " N*m");
}

}  // namespace cotraj

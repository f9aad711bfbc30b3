#pragma once

#include <string>
#include <vector>

#include "cotraj/robot.hpp"

namespace cotraj {

struct BadKeyframe : ModelError {
  using ModelError::ModelError;
};

/// Sparse configuration sample used to seed the initial guess.
struct Keyframe {
  int knot = 0;  // 0-based
  std::vector<double> q;
};

struct TaskConstraint {
  enum class Kind {
    ConfigEquality,   // q[dof] = value at each listed knot
    PointPosition,    // world position of a link point inside a box
    DofVelocity,      // qd[dof] = value
    ComHeightWindow,  // lower <= world COM z <= upper
  };
  Kind kind = Kind::ConfigEquality;
  std::vector<int> knots;  // 0-based

  std::vector<int> dofs;        // ConfigEquality / DofVelocity
  std::vector<double> values;

  int link = -1;                // PointPosition
  double local_point[3] = {0, 0, 0};
  bool axis_active[3] = {true, true, true};
  double lower[3] = {0, 0, 0};  // per axis; ComHeightWindow uses index 2
  double upper[3] = {0, 0, 0};
};

struct ObjectiveSpec {
  enum class Mode { Actuation, Time } mode = Mode::Actuation;
  double alpha = 1.0;
  double beta = 0.0;
};

struct TaskSpec {
  int knots = 0;            // K
  double duration_max = 0;  // T, seconds
  // Knot spacing window as multiples of the nominal T/(K-1); [1, 1] pins it.
  double dt_min_factor = 0.2;
  double dt_max_factor = 5.0;
  Terrain terrain;
  ObjectiveSpec objective;
  std::vector<Keyframe> keyframes;
  std::vector<TaskConstraint> constraints;
  uint64_t seed = 0;
};

}  // namespace cotraj

#pragma once

#include "ellmpc/dynamics.hpp"

#include <vector>

namespace ellmpc {

/// Reference for one horizon: N+1 states, N inputs, one timestamp per state.
struct ReferenceTrajectory {
  std::vector<RobotState> states;
  std::vector<ControlInput> inputs;
  std::vector<double> timestamps;

  int horizon() const { return static_cast<int>(inputs.size()); }
  /// Throws std::invalid_argument unless the lengths describe an N-stage horizon.
  void validate(int n) const;
};

}  // namespace ellmpc

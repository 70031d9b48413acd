#pragma once

#include "apg/net.hpp"
#include "apg/scenario.hpp"

namespace apg {

inline constexpr double kComfortBrake = 2.4;  // 80% of the 3.0 m/s^2 limit

struct LightDecisionInput {
  double front_vehicle_stopped_s = 0.0;
  bool passed_stop_line = false;
  Phase phase = Phase::Green;
  double remaining_yellow = 0.0;      // t_y [s]
  double distance_to_stop_line = 0.0; // D_y [m]
  double v_x = 0.0;
  double a_m = kComfortBrake;         // braking magnitude, > 0
};

// C2: the ego can still halt before the line within the remaining yellow.
// D_e = v_x^2 / (2 a_m), t_e = v_x / a_m.
bool stop_feasible(double v_x, double a_m, double d_y, double t_y);

// Traffic-light flowchart, evaluated every control step:
// congestion ahead -> stop; already past the line -> pass; red -> stop;
// green -> pass; yellow -> stop iff stopping is feasible (else rush through).
VelocityMode select_velocity_mode(const LightDecisionInput& in);

// Tracks how long the nearest vehicle ahead on the path corridor has been
// standing still (within 20 m ahead, under 2 m laterally, v < 0.1 m/s).
class CongestionMonitor {
 public:
  double update(const EgoState& ego, const CandidatePath& path,
                const std::vector<ParticipantState>& perceived, double dt);
  double stopped_s() const { return stopped_s_; }

 private:
  double stopped_s_ = 0.0;
};

struct PathChoice {
  int index = 0;
  double value = 0.0;
  DrivingState state;
};

// Builds the driving state for every candidate path under the given mode and
// picks the one the value network scores lowest (ties: lowest index).
PathChoice select_path(const Simulation& sim, VelocityMode mode,
                       const std::vector<ParticipantState>& perceived,
                       const MLPSpec& value_spec, const ParameterVector& value);

// Closed-loop driver: mode from the flowchart, path from the value network,
// action from the deterministic policy mean.
class Controller {
 public:
  Controller(MLPSpec policy_spec, ParameterVector policy, MLPSpec value_spec,
             ParameterVector value, double a_m = kComfortBrake);

  Action step(Simulation& sim);  // selects mode and path, applies the action

  VelocityMode mode() const { return mode_; }
  int path_index() const { return path_index_; }

 private:
  MLPSpec policy_spec_;
  ParameterVector policy_;
  MLPSpec value_spec_;
  ParameterVector value_;
  double a_m_;
  CongestionMonitor congestion_;
  VelocityMode mode_ = VelocityMode::Stop;
  int path_index_ = 0;
};

}  // namespace apg

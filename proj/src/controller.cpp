#include "apg/controller.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace apg {

bool stop_feasible(double v_x, double a_m, double d_y, double t_y) {
  if (a_m <= 0.0) throw std::invalid_argument("stop_feasible: a_m must be > 0");
  const double d_e = v_x * v_x / (2.0 * a_m);
  const double t_e = v_x / a_m;
  return d_y >= d_e && t_y >= t_e;
}

VelocityMode select_velocity_mode(const LightDecisionInput& in) {
  if (in.front_vehicle_stopped_s > 3.0) return VelocityMode::Stop;
  if (in.passed_stop_line) return VelocityMode::Pass;
  switch (in.phase) {
    case Phase::Red:
      return VelocityMode::Stop;
    case Phase::Green:
      return VelocityMode::Pass;
    case Phase::Yellow:
      return stop_feasible(in.v_x, in.a_m, in.distance_to_stop_line, in.remaining_yellow)
                 ? VelocityMode::Stop
                 : VelocityMode::Pass;
  }
  return VelocityMode::Stop;
}

double CongestionMonitor::update(const EgoState& ego, const CandidatePath& path,
                                 const std::vector<ParticipantState>& perceived,
                                 double dt) {
  const double s_ego = path.arc_length[path.closest_index({ego.p_x, ego.p_y})];
  bool blocked = false;
  for (const ParticipantState& p : perceived) {
    if (p.kind != ParticipantKind::Vehicle || p.v >= 0.1) continue;
    const Vec2 pos(p.p_x, p.p_y);
    const int ci = path.closest_index(pos);
    const double lateral = (pos - path.points[ci]).norm();
    const double ahead = path.arc_length[ci] - s_ego;
    if (lateral < 2.0 && ahead > 0.0 && ahead <= 20.0) {
      blocked = true;
      break;
    }
  }
  stopped_s_ = blocked ? stopped_s_ + dt : 0.0;
  return stopped_s_;
}

PathChoice select_path(const Simulation& sim, VelocityMode mode,
                       const std::vector<ParticipantState>& perceived,
                       const MLPSpec& value_spec, const ParameterVector& value) {
  const Eigen::VectorXd& scaling = state_input_scaling();
  PathChoice best;
  bool first = true;
  for (int i = 0; i < static_cast<int>(sim.paths().size()); ++i) {
    DrivingState s = sim.observe_for_path(i, mode, perceived);
    const EvalOut out = mlp_eval(value_spec, value, scaling.cwiseProduct(s.features));
    const double v = out.mean[0];
    if (first || v < best.value) {
      best.index = i;
      best.value = v;
      best.state = std::move(s);
      first = false;
    }
  }
  return best;
}

Controller::Controller(MLPSpec policy_spec, ParameterVector policy, MLPSpec value_spec,
                       ParameterVector value, double a_m)
    : policy_spec_(std::move(policy_spec)),
      policy_(std::move(policy)),
      value_spec_(std::move(value_spec)),
      value_(std::move(value)),
      a_m_(a_m) {}

Action Controller::step(Simulation& sim) {
  const std::vector<ParticipantState> perceived = sim.perceive_now();
  const CandidatePath& current = sim.paths()[path_index_];
  const EgoState& ego = sim.ego();
  const double dt = sim.scenario().vehicle.dt;

  LightDecisionInput in;
  in.front_vehicle_stopped_s = congestion_.update(ego, current, perceived, dt);
  const double s_ego = current.arc_length[current.closest_index({ego.p_x, ego.p_y})];
  in.passed_stop_line = s_ego > current.s_stop_line;
  in.distance_to_stop_line = std::max(0.0, current.s_stop_line - s_ego);
  const PhaseInfo phase = sim.ego_signal();
  in.phase = phase.phase;
  in.remaining_yellow = phase.phase == Phase::Yellow ? phase.remaining_s : 0.0;
  in.v_x = ego.v_x;
  in.a_m = a_m_;
  mode_ = select_velocity_mode(in);

  const PathChoice choice = select_path(sim, mode_, perceived, value_spec_, value_);
  path_index_ = choice.index;
  sim.set_path(path_index_);

  const Eigen::VectorXd& scaling = state_input_scaling();
  const EvalOut out =
      mlp_eval(policy_spec_, policy_, scaling.cwiseProduct(choice.state.features));
  const Action u = clamp_action({out.mean[0], out.mean[1]});
  sim.apply(u);
  return u;
}

}  // namespace apg

#include "apg/controller.hpp"
#include "apg/rollout.hpp"

#include "doctest.h"

#include <cmath>
#include <random>

using namespace apg;

namespace {

IntersectionTopology straight_road() {
  IntersectionTopology topo;
  topo.entrances.push_back({{0.0, 0.0}, 0.0, 10.0, 50.0});
  topo.exits.push_back({{20.0, 0.0}, 0.0, 10.0, 50.0});
  topo.connections.push_back({0, 0, Movement::Straight});
  return topo;
}

CandidatePath straight_path() {
  const IntersectionTopology topo = straight_road();
  CandidatePath p = build_route(topo, 0, 0.6, 0.5);
  build_velocity_profiles(p, topo);
  return p;
}

ParameterVector zeroed_head(const MLPSpec& spec, std::uint64_t seed) {
  ParameterVector p = init_params(spec, seed);
  const auto dims = spec.layer_dims();
  const int head = dims[dims.size() - 2] * dims.back() + dims.back();
  p.data.tail(head).setZero();
  return p;
}

}  // namespace

TEST_CASE("stop feasibility worked examples") {
  // 10 m/s at 2.4 m/s^2: 20.83 m and 4.17 s to stand still
  CHECK(stop_feasible(10.0, 2.4, 25.0, 5.0));
  CHECK_FALSE(stop_feasible(10.0, 2.4, 20.0, 5.0));   // line too close
  CHECK_FALSE(stop_feasible(10.0, 2.4, 25.0, 4.0));   // yellow too short
  CHECK(stop_feasible(10.0, 2.4, 100.0 / 4.8, 10.0 / 2.4));  // exactly at the margin
  CHECK(stop_feasible(0.0, 2.4, 0.0, 0.0));  // standing still is always feasible
  CHECK_THROWS_AS(stop_feasible(5.0, 0.0, 10.0, 10.0), std::invalid_argument);
  CHECK_THROWS_AS(stop_feasible(5.0, -1.0, 10.0, 10.0), std::invalid_argument);
}

TEST_CASE("stop feasibility is monotone") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> uv(0.0, 15.0), ud(0.0, 40.0), ut(0.0, 6.0);
  for (int k = 0; k < 2000; ++k) {
    const double v = uv(rng), d = ud(rng), t = ut(rng);
    const bool base = stop_feasible(v, 2.4, d, t);
    if (base) {
      CHECK(stop_feasible(v, 2.4, d + 1.0, t));
      CHECK(stop_feasible(v, 2.4, d, t + 1.0));
      CHECK(stop_feasible(v, 3.0, d, t));  // stronger brakes only help
    } else {
      CHECK_FALSE(stop_feasible(v + 1.0, 2.4, d, t));
    }
  }
}

TEST_CASE("velocity mode flowchart truth table") {
  struct Row {
    double congestion;
    bool passed;
    Phase phase;
    double v_x, d_y, t_y;
    VelocityMode expect;
  };
  // feasible yellow: 10 m/s, 25 m, 5 s; infeasible yellow: 10 m/s, 15 m, 5 s
  const Row rows[] = {
      // congestion ahead always wins
      {4.0, false, Phase::Green, 10.0, 25.0, 0.0, VelocityMode::Stop},
      {4.0, false, Phase::Red, 10.0, 25.0, 0.0, VelocityMode::Stop},
      {4.0, true, Phase::Yellow, 10.0, 25.0, 5.0, VelocityMode::Stop},
      {4.0, false, Phase::Yellow, 10.0, 15.0, 5.0, VelocityMode::Stop},
      // past the line: keep going whatever the light says
      {0.0, true, Phase::Red, 10.0, 0.0, 0.0, VelocityMode::Pass},
      {0.0, true, Phase::Green, 10.0, 0.0, 0.0, VelocityMode::Pass},
      {0.0, true, Phase::Yellow, 10.0, 0.0, 1.0, VelocityMode::Pass},
      // before the line: phase decides
      {0.0, false, Phase::Red, 10.0, 25.0, 0.0, VelocityMode::Stop},
      {0.0, false, Phase::Green, 10.0, 25.0, 0.0, VelocityMode::Pass},
      {0.0, false, Phase::Yellow, 10.0, 25.0, 5.0, VelocityMode::Stop},
      {0.0, false, Phase::Yellow, 10.0, 15.0, 5.0, VelocityMode::Pass},
      {0.0, false, Phase::Yellow, 10.0, 25.0, 4.0, VelocityMode::Pass},
  };
  for (const Row& r : rows) {
    LightDecisionInput in;
    in.front_vehicle_stopped_s = r.congestion;
    in.passed_stop_line = r.passed;
    in.phase = r.phase;
    in.v_x = r.v_x;
    in.distance_to_stop_line = r.d_y;
    in.remaining_yellow = r.t_y;
    CHECK(select_velocity_mode(in) == r.expect);
  }
  // boundary: exactly 3 s of congestion does not yet force a stop
  LightDecisionInput in;
  in.front_vehicle_stopped_s = 3.0;
  in.phase = Phase::Green;
  CHECK(select_velocity_mode(in) == VelocityMode::Pass);
}

TEST_CASE("congestion monitor tracks a stopped leader in the corridor") {
  const CandidatePath path = straight_path();
  EgoState ego;
  ego.p_x = -10.0;

  ParticipantState stopped;
  stopped.p_x = 0.0;  // 10 m ahead on the path
  stopped.v = 0.0;

  CongestionMonitor mon;
  for (int k = 0; k < 40; ++k) mon.update(ego, path, {stopped}, 0.1);
  CHECK(mon.stopped_s() == doctest::Approx(4.0));

  // a moving leader clears the counter
  ParticipantState moving = stopped;
  moving.v = 5.0;
  mon.update(ego, path, {moving}, 0.1);
  CHECK(mon.stopped_s() == 0.0);

  auto accumulated = [&](const ParticipantState& p) {
    CongestionMonitor m;
    for (int k = 0; k < 5; ++k) m.update(ego, path, {p}, 0.1);
    return m.stopped_s();
  };
  ParticipantState lateral = stopped;
  lateral.p_y = 3.0;  // outside the 2 m corridor
  CHECK(accumulated(lateral) == 0.0);
  ParticipantState behind = stopped;
  behind.p_x = -20.0;
  CHECK(accumulated(behind) == 0.0);
  ParticipantState far = stopped;
  far.p_x = 15.0;  // 25 m ahead, past the 20 m window
  CHECK(accumulated(far) == 0.0);
  ParticipantState cyclist = stopped;
  cyclist.kind = ParticipantKind::Cyclist;
  CHECK(accumulated(cyclist) == 0.0);
  CHECK(accumulated(stopped) == doctest::Approx(0.5));
}

TEST_CASE("path selection is the value argmin with ties to the lowest index") {
  Scenario sc = make_desk_scenario();
  sc.noise = sc.noise.noiseless();
  Simulation sim(sc);
  sim.reset(4, 0);
  REQUIRE(sim.paths().size() >= 2);

  const MLPSpec value_spec = make_value_spec({16});
  const std::vector<ParticipantState> perceived = sim.perceive_now();

  // flat zero critic: every path scores 0, lowest index wins
  const ParameterVector flat = zeroed_head(value_spec, 1);
  const PathChoice tie = select_path(sim, VelocityMode::Pass, perceived, value_spec, flat);
  CHECK(tie.index == 0);
  CHECK(tie.value == 0.0);

  // random critic: matches a manual argmin over observe_for_path
  const ParameterVector value = init_params(value_spec, 77);
  const PathChoice got = select_path(sim, VelocityMode::Pass, perceived, value_spec, value);
  const Eigen::VectorXd& scaling = state_input_scaling();
  int best = -1;
  double best_v = 0.0;
  for (int i = 0; i < static_cast<int>(sim.paths().size()); ++i) {
    const DrivingState s = sim.observe_for_path(i, VelocityMode::Pass, perceived);
    const double v = mlp_eval(value_spec, value, scaling.cwiseProduct(s.features)).mean[0];
    if (best < 0 || v < best_v) {
      best = i;
      best_v = v;
    }
  }
  CHECK(got.index == best);
  CHECK(got.value == best_v);
  CHECK(got.state.path_id == best);
  CHECK(got.state.mode == VelocityMode::Pass);
}

TEST_CASE("controller closes the loop on the desk scenario") {
  Scenario sc = make_desk_scenario();
  sc.noise = sc.noise.noiseless();
  sc.traffic.vehicle_rate_per_h = 0.0;
  sc.traffic.cyclist_rate_per_h = 0.0;
  sc.traffic.pedestrian_rate_per_h = 0.0;
  Simulation sim(sc);
  sim.reset(1, 0);

  const MLPSpec policy_spec = make_policy_spec({16});
  const MLPSpec value_spec = make_value_spec({16});
  Controller ctl(policy_spec, zeroed_head(policy_spec, 2), value_spec,
                 zeroed_head(value_spec, 3));

  const double t0 = sim.time();
  const Action u = ctl.step(sim);
  CHECK(sim.time() == doctest::Approx(t0 + sc.vehicle.dt));
  CHECK(u.d_delta >= kDDeltaMin);
  CHECK(u.d_delta <= kDDeltaMax);
  CHECK(u.d_a >= kDAccelMin);
  CHECK(u.d_a <= kDAccelMax);
  CHECK(ctl.path_index() == sim.path_index());

  // empty road, fresh green: the flowchart keeps the ego in pass mode
  CHECK(sim.ego_signal().phase == Phase::Green);
  CHECK(ctl.mode() == VelocityMode::Pass);

  for (int k = 0; k < 50; ++k) ctl.step(sim);
  CHECK(std::isfinite(sim.ego().p_x));
  CHECK(sim.ego().v_x >= 0.0);
}

#include "apg/scenario.hpp"
#include "apg/traffic.hpp"

#include "doctest.h"

#include <cmath>
#include <set>

using namespace apg;

namespace {

World make_world(TrafficConfig cfg, SignalSchedule sch = {}) {
  return World(make_desk_topology(1), cfg, sch);
}

}  // namespace

TEST_CASE("turn radius is infinite on straights and finite in a turn") {
  const IntersectionTopology topo = make_desk_topology(1);
  const auto paths = generate_path_set(topo, Movement::Left);
  REQUIRE_FALSE(paths.empty());
  const CandidatePath& left = paths.front();

  CHECK(std::isinf(path_turn_radius(left, 1.0)));  // entrance straight
  CHECK(std::isinf(path_turn_radius(left, left.total_length() - 1.0)));

  const double mid = 0.5 * (left.s_curve_start + left.s_junction_exit);
  const double r = path_turn_radius(left, mid);
  REQUIRE(std::isfinite(r));
  CHECK(r > 0.0);  // left turns bend the heading upward
  CHECK(std::abs(r) < 100.0);

  // radius oracle: ds / dheading around the same arc position
  const double ds = 2.0;
  const double dh = wrap_angle(left.heading_at(mid + ds) - left.heading_at(mid - ds));
  CHECK(r == doctest::Approx(2.0 * ds / dh).epsilon(0.2));

  const auto straights = generate_path_set(topo, Movement::Straight);
  const CandidatePath& st = straights.front();
  const double mid_s = 0.5 * (st.s_curve_start + st.s_junction_exit);
  CHECK(std::isinf(path_turn_radius(st, mid_s)));
}

TEST_CASE("world evolution is seed-deterministic") {
  TrafficConfig cfg;
  World a = make_world(cfg), b = make_world(cfg);
  a.reset(7);
  b.reset(7);
  for (int k = 0; k < 600; ++k) {
    a.step(0.1);
    b.step(0.1);
  }
  REQUIRE(a.agents().size() == b.agents().size());
  CHECK_FALSE(a.agents().empty());
  for (size_t i = 0; i < a.agents().size(); ++i) {
    CHECK(a.agents()[i].state.p_x == b.agents()[i].state.p_x);
    CHECK(a.agents()[i].state.p_y == b.agents()[i].state.p_y);
    CHECK(a.agents()[i].state.v == b.agents()[i].state.v);
    CHECK(a.agents()[i].s == b.agents()[i].s);
  }
  World c = make_world(cfg);
  c.reset(8);
  for (int k = 0; k < 600; ++k) c.step(0.1);
  bool differs = c.agents().size() != a.agents().size();
  for (size_t i = 0; !differs && i < a.agents().size(); ++i) {
    differs = a.agents()[i].state.p_x != c.agents()[i].state.p_x;
  }
  CHECK(differs);
}

TEST_CASE("agent cap and participant mirror") {
  TrafficConfig cfg;
  cfg.vehicle_rate_per_h = 4000.0;
  cfg.cyclist_rate_per_h = 1000.0;
  cfg.pedestrian_rate_per_h = 1000.0;
  World w = make_world(cfg);
  w.reset(3);
  for (int k = 0; k < 1200; ++k) {
    w.step(0.1);
    CHECK(static_cast<int>(w.agents().size()) <= cfg.max_agents);
  }
  const auto parts = w.participants();
  REQUIRE(parts.size() == w.agents().size());
  for (size_t i = 0; i < parts.size(); ++i) {
    CHECK(parts[i].p_x == w.agents()[i].state.p_x);
    CHECK(parts[i].kind == w.agents()[i].state.kind);
  }
}

TEST_CASE("gap keeping avoids background pileups") {
  TrafficConfig cfg;
  cfg.vehicle_rate_per_h = 1200.0;
  World w = make_world(cfg);
  w.reset(11);
  for (int k = 0; k < 2000; ++k) w.step(0.1);

  // followers on a shared route keep a positive bumper gap
  for (const auto& a : w.agents()) {
    if (a.route_id < 0) continue;
    for (const auto& b : w.agents()) {
      if (&a == &b || b.route_id != a.route_id) continue;
      if (b.s <= a.s) continue;
      CHECK(b.s - b.state.length / 2.0 - (a.s + a.state.length / 2.0) > 0.0);
    }
  }
}

TEST_CASE("non right-turn traffic holds at the stop line on red") {
  TrafficConfig cfg;
  cfg.vehicle_rate_per_h = 1500.0;
  cfg.cyclist_rate_per_h = 400.0;
  cfg.pedestrian_rate_per_h = 0.0;
  SignalSchedule sch;
  sch.green_s = 1.0;
  sch.yellow_s = 1.0;
  sch.red_s = 1000.0;  // everything is red after t = 2 s
  World w = make_world(cfg, sch);
  w.reset(5);
  bool saw_queued = false;
  for (int k = 0; k < 1200; ++k) {
    w.step(0.1);
    if (w.time() < 10.0) continue;
    for (const auto& a : w.agents()) {
      if (a.route_id < 0 || a.movement == Movement::Right) continue;
      const double front = a.s + a.state.length / 2.0;
      const double line = w.routes()[a.route_id].s_stop_line;
      CHECK(front <= line + 0.3);
      if (front > line - 5.0 && a.state.v < 0.1) saw_queued = true;
    }
  }
  CHECK(saw_queued);
}

TEST_CASE("right turns flow through the permanent green") {
  TrafficConfig cfg;
  cfg.vehicle_rate_per_h = 2000.0;
  cfg.cyclist_rate_per_h = 0.0;
  cfg.pedestrian_rate_per_h = 0.0;
  SignalSchedule sch;
  sch.green_s = 1.0;
  sch.yellow_s = 1.0;
  sch.red_s = 1000.0;
  World w = make_world(cfg, sch);
  w.reset(9);
  bool right_crossed = false;
  for (int k = 0; k < 2400 && !right_crossed; ++k) {
    w.step(0.1);
    if (w.time() < 10.0) continue;
    for (const auto& a : w.agents()) {
      if (a.route_id >= 0 && a.movement == Movement::Right &&
          a.s > w.routes()[a.route_id].s_stop_line + 2.0)
        right_crossed = true;
    }
  }
  CHECK(right_crossed);
}

TEST_CASE("perturbation assignment is nested across levels") {
  auto count = [](double fraction) {
    TrafficConfig cfg;
    cfg.vehicle_rate_per_h = 1200.0;
    cfg.overspeed_fraction = fraction;
    cfg.overspeed_factor = 1.0 + fraction;
    World w = make_world(cfg);
    w.reset(13);
    for (int k = 0; k < 1800; ++k) w.step(0.1);
    return w.perturbed_agent_count();
  };
  const long c0 = count(0.0);
  const long c1 = count(0.1);
  const long c2 = count(0.2);
  const long c5 = count(0.5);
  const long cf = count(1.0);
  CHECK(c0 == 0);
  CHECK(c1 <= c2);
  CHECK(c2 <= c5);
  CHECK(c5 <= cf);
  CHECK(cf > 0);
}

TEST_CASE("overspeed perturbs exactly the straight-movement vehicles") {
  TrafficConfig cfg;
  cfg.overspeed_fraction = 1.0;
  cfg.overspeed_factor = 1.5;
  cfg.cyclist_rate_per_h = 300.0;
  cfg.vehicle_rate_per_h = 1500.0;
  World w = make_world(cfg);
  w.reset(17);
  for (int k = 0; k < 900; ++k) w.step(0.1);
  int straight_vehicles = 0;
  for (const auto& a : w.agents()) {
    if (a.state.kind == ParticipantKind::Vehicle && a.movement == Movement::Straight) {
      CHECK(a.speed_factor == 1.5);
      ++straight_vehicles;
    } else {
      CHECK(a.speed_factor == 1.0);
    }
  }
  CHECK(straight_vehicles > 0);
}

TEST_CASE("corner rounding diverts straight vehicles past the stop line") {
  TrafficConfig cfg;
  cfg.rounding_fraction = 1.0;
  cfg.vehicle_rate_per_h = 1500.0;
  cfg.cyclist_rate_per_h = 0.0;
  cfg.pedestrian_rate_per_h = 0.0;
  World w = make_world(cfg);
  w.reset(19);
  bool saw_rounded = false;
  for (int k = 0; k < 2400 && !saw_rounded; ++k) {
    w.step(0.1);
    for (const auto& a : w.agents()) {
      if (a.rounded) saw_rounded = true;
    }
  }
  CHECK(saw_rounded);
}

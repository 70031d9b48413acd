#include "apg/path_planner.hpp"
#include "apg/scenario.hpp"

#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

using namespace apg;

namespace {

// Independent oracle: bisect the chord at fraction (1-rho) from the own
// endpoint and project onto the lane line.
Vec2 project_x2(const Vec2& x1, double theta_in, const Vec2& x4, double rho) {
  const Vec2 d(std::cos(theta_in), std::sin(theta_in));
  return x1 + (1.0 - rho) * ((x4 - x1).dot(d)) * d;
}

Vec2 project_x3(const Vec2& x1, const Vec2& x4, double theta_out, double rho) {
  const Vec2 d(std::cos(theta_out), std::sin(theta_out));
  return x4 + (1.0 - rho) * ((x1 - x4).dot(d)) * d;
}

IntersectionTopology two_lane_left() {
  IntersectionTopology topo;
  topo.entrances.push_back({{5.0, -20.0}, M_PI / 2, 37.5 / 3.6, 60.0});
  topo.exits.push_back({{-20.0, 5.0}, M_PI, 37.5 / 3.6, 45.0});
  topo.connections.push_back({0, 0, Movement::Left});
  topo.stop_line_distance = 2.0;
  return topo;
}

}  // namespace

TEST_CASE("control points match the projection oracle on worked examples") {
  {
    const auto r = compute_control_points({0, -20}, M_PI / 2, {0, 20}, M_PI / 2, 0.6);
    CHECK(r.x2.isApprox(Vec2(0, -4), 1e-12));
    CHECK(r.x3.isApprox(Vec2(0, 4), 1e-12));
  }
  {
    const auto r = compute_control_points({5, -20}, M_PI / 2, {-20, 5}, M_PI, 0.6);
    CHECK((r.x2 - Vec2(5, -10)).norm() < 1e-9);
    CHECK((r.x3 - Vec2(-10, 5)).norm() < 1e-9);
    CHECK_FALSE(r.degenerate_entrance);
    CHECK_FALSE(r.degenerate_exit);
  }
}

TEST_CASE("control points match the projection oracle on random sweeps") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> pos(-40.0, 40.0);
  std::uniform_real_distribution<double> ang(-M_PI, M_PI);
  std::uniform_real_distribution<double> rho(0.05, 0.95);
  for (int k = 0; k < 1000; ++k) {
    const Vec2 x1(pos(rng), pos(rng));
    const Vec2 x4(pos(rng), pos(rng));
    if ((x4 - x1).norm() < 1e-3) continue;
    const double ti = ang(rng), to = ang(rng), r = rho(rng);
    const auto got = compute_control_points(x1, ti, x4, to, r);
    CHECK((got.x2 - project_x2(x1, ti, x4, r)).norm() < 1e-9);
    CHECK((got.x3 - project_x3(x1, x4, to, r)).norm() < 1e-9);
  }
}

TEST_CASE("rho near 1 pulls the middle control points onto the endpoints") {
  const Vec2 x1(5, -20), x4(-20, 5);
  const auto r = compute_control_points(x1, M_PI / 2, x4, M_PI, 1.0 - 1e-9);
  CHECK((r.x2 - x1).norm() < 1e-6);
  CHECK((r.x3 - x4).norm() < 1e-6);
}

TEST_CASE("control point preconditions") {
  CHECK_THROWS(compute_control_points({0, 0}, 0.0, {1, 0}, 0.0, 0.0));
  CHECK_THROWS(compute_control_points({0, 0}, 0.0, {1, 0}, 0.0, 1.0));
  CHECK_THROWS(compute_control_points({2, 3}, 0.0, {2, 3}, 0.0, 0.5));
}

TEST_CASE("bezier evaluation") {
  const Vec2 x1(5, -20), x2(5, -10), x3(-10, 5), x4(-20, 5);
  CHECK(bezier_point(x1, x2, x3, x4, 0.0).isApprox(x1));
  CHECK(bezier_point(x1, x2, x3, x4, 1.0).isApprox(x4));
  CHECK((bezier_point(x1, x2, x3, x4, 0.5) - Vec2(-3.75, -3.75)).norm() < 1e-12);
  const Vec2 p(3, 4);
  for (double t : {0.0, 0.25, 0.9}) {
    CHECK((bezier_point(p, p, p, p, t) - p).norm() == 0.0);
  }
  CHECK_THROWS(bezier_point(x1, x2, x3, x4, -0.01));
  CHECK_THROWS(bezier_point(x1, x2, x3, x4, 1.01));
}

TEST_CASE("bezier stays inside the control-point convex hull") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pos(-30.0, 30.0);
  std::uniform_real_distribution<double> ang(-M_PI, M_PI);
  for (int k = 0; k < 200; ++k) {
    const Vec2 pts[4] = {{pos(rng), pos(rng)},
                         {pos(rng), pos(rng)},
                         {pos(rng), pos(rng)},
                         {pos(rng), pos(rng)}};
    for (int j = 0; j < 8; ++j) {
      const double a = ang(rng);
      const Vec2 d(std::cos(a), std::sin(a));
      double support = -1e300;
      for (const Vec2& p : pts) support = std::max(support, d.dot(p));
      for (int i = 0; i <= 20; ++i) {
        const Vec2 b = bezier_point(pts[0], pts[1], pts[2], pts[3], i / 20.0);
        CHECK(d.dot(b) <= support + 1e-9);
      }
    }
  }
}

TEST_CASE("routes are C0, tangent at both ends, and arc-length consistent") {
  for (int variant = 0; variant < desk_topology_count(); ++variant) {
    const IntersectionTopology topo = make_desk_topology(variant);
    for (int c = 0; c < static_cast<int>(topo.connections.size()); ++c) {
      const CandidatePath path = build_route(topo, c, 0.6, 0.5);
      REQUIRE(path.points.size() >= 3);
      REQUIRE(path.arc_length.size() == path.points.size());
      double total = 0.0;
      for (size_t i = 1; i < path.points.size(); ++i) {
        const double ds = (path.points[i] - path.points[i - 1]).norm();
        CHECK(ds > 0.0);
        CHECK(ds <= 0.5 + 1e-6);
        total += ds;
        CHECK(path.arc_length[i] > path.arc_length[i - 1]);
        const double dh =
            std::abs(std::remainder(path.headings[i] - path.headings[i - 1], 2 * M_PI));
        CHECK(dh < 0.2);
      }
      CHECK(path.arc_length.back() == doctest::Approx(total).epsilon(1e-12));

      const LaneRef& in = topo.entrances[path.entrance_index];
      const LaneRef& out = topo.exits[path.exit_index];
      const auto cp = compute_control_points(in.endpoint, in.heading, out.endpoint,
                                             out.heading, 0.6);
      if (!cp.degenerate_entrance) {
        const Vec2 t0 = bezier_tangent(in.endpoint, cp.x2, cp.x3, out.endpoint, 0.0);
        const double angle = std::atan2(t0.y(), t0.x());
        CHECK(std::abs(std::remainder(angle - in.heading, 2 * M_PI)) < 1e-6);
      }
      if (!cp.degenerate_exit) {
        const Vec2 t1 = bezier_tangent(in.endpoint, cp.x2, cp.x3, out.endpoint, 1.0);
        const double angle = std::atan2(t1.y(), t1.x());
        CHECK(std::abs(std::remainder(angle - out.heading, 2 * M_PI)) < 1e-6);
      }

      // Curve length can't beat the straight chord.
      CHECK(path.s_junction_exit - path.s_curve_start >=
            (out.endpoint - in.endpoint).norm() - 1e-9);
    }
  }
}

TEST_CASE("velocity profiles reproduce the reference speeds") {
  IntersectionTopology topo = two_lane_left();
  CandidatePath path = build_route(topo, 0, 0.6, 0.5);
  build_velocity_profiles(path, topo);

  const double v_limit = 37.5 / 3.6;
  const double v_out = 0.8 * v_limit;  // 30 km/h
  CHECK(v_out == doctest::Approx(30.0 / 3.6));

  // Pass: cruise outside, the lower of 0.5 V_limit and 30 km/h inside.
  CHECK(path.pass_profile.speed_at(0.0) == doctest::Approx(v_out));
  CHECK(path.pass_profile.speed_at(path.s_stop_line - 1.0) == doctest::Approx(v_out));
  const double inside = path.pass_profile.speed_at(0.5 * (path.s_stop_line + path.s_junction_exit));
  CHECK(inside == doctest::Approx(18.75 / 3.6));
  CHECK(path.pass_profile.speed_at(path.s_junction_exit + 1.0) == doctest::Approx(v_out));

  // Stop: sqrt ramp over the last 30 m, zero through the junction.
  CHECK(path.stop_profile.speed_at(path.s_stop_line - 31.0) == doctest::Approx(v_out));
  CHECK(path.stop_profile.speed_at(path.s_stop_line - 15.0) ==
        doctest::Approx(v_out * std::sqrt(0.5)));
  CHECK(path.stop_profile.speed_at(path.s_stop_line) == 0.0);
  CHECK(path.stop_profile.speed_at(0.5 * (path.s_stop_line + path.s_junction_exit)) == 0.0);
  CHECK(path.stop_profile.speed_at(path.s_junction_exit + 0.5) == doctest::Approx(v_out));

  for (double s = 0.0; s < path.total_length(); s += 0.7) {
    CHECK(path.pass_profile.speed_at(s) >= 0.0);
    CHECK(path.stop_profile.speed_at(s) >= 0.0);
  }
}

TEST_CASE("deceleration zone must fit before the stop line") {
  IntersectionTopology topo = two_lane_left();
  topo.entrances[0].length = 20.0;
  CandidatePath path = build_route(topo, 0, 0.6, 0.5);
  CHECK_THROWS_WITH_AS(build_velocity_profiles(path, topo),
                       doctest::Contains("deceleration zone"), std::runtime_error);
}

namespace {

// Restricts to the connections leaving one approach, the per-task view the
// ego uses.
IntersectionTopology from_entrance(IntersectionTopology topo, int entrance) {
  std::erase_if(topo.connections,
                [entrance](const Connection& c) { return c.entrance != entrance; });
  return topo;
}

}  // namespace

TEST_CASE("path sets are ordered by exit and deterministic") {
  const IntersectionTopology topo = from_entrance(make_desk_topology(2), 0);  // 3 lanes
  const auto left = generate_path_set(topo, Movement::Left);
  CHECK(left.size() == 3);
  for (size_t i = 1; i < left.size(); ++i) CHECK(left[i - 1].exit_index < left[i].exit_index);

  const auto again = generate_path_set(topo, Movement::Left);
  REQUIRE(again.size() == left.size());
  for (size_t i = 0; i < left.size(); ++i) {
    CHECK(path_to_csv(left[i]) == path_to_csv(again[i]));
  }

  const IntersectionTopology one = from_entrance(make_desk_topology(0), 0);
  CHECK(generate_path_set(one, Movement::Right).size() == 1);

  IntersectionTopology no_left = one;
  no_left.connections.erase(
      std::remove_if(no_left.connections.begin(), no_left.connections.end(),
                     [](const Connection& c) { return c.tag == Movement::Left; }),
      no_left.connections.end());
  CHECK_THROWS(generate_path_set(no_left, Movement::Left));
}

TEST_CASE("degenerate projection is reported with the connection") {
  IntersectionTopology topo = two_lane_left();
  // Exit dead ahead but with a perpendicular exit heading: the chord is
  // orthogonal to the exit line, so X3 collapses onto X4.
  topo.exits[0] = {{5.0, 20.0}, 0.0, 10.0, 45.0};
  CHECK_THROWS_WITH_AS(build_route(topo, 0, 0.6, 0.5), doctest::Contains("connection 0"),
                       std::runtime_error);
}

TEST_CASE("topology JSON round trip") {
  const char* doc = R"({
    "entrances": [{"x": 5.0, "y": -20.0, "heading_rad": 1.5707963267948966,
                   "speed_limit_mps": 10.4, "length_m": 60.0}],
    "exits": [{"x": -20.0, "y": 5.0, "heading_rad": 3.141592653589793,
               "speed_limit_mps": 10.4, "length_m": 45.0}],
    "connections": [{"from": 0, "to": 0, "tag": "left"}],
    "stop_line_m": 2.0
  })";
  const IntersectionTopology topo = topology_from_json(doc);
  REQUIRE(topo.entrances.size() == 1);
  REQUIRE(topo.exits.size() == 1);
  REQUIRE(topo.connections.size() == 1);
  CHECK(topo.connections[0].tag == Movement::Left);
  CHECK(topo.stop_line_distance == 2.0);
  CHECK(topo.entrances[0].endpoint.x() == 5.0);
  CHECK_NOTHROW(generate_path_set(topo, Movement::Left));
}

TEST_CASE("csv export carries the profile columns") {
  IntersectionTopology topo = two_lane_left();
  CandidatePath path = build_route(topo, 0, 0.6, 0.5);
  build_velocity_profiles(path, topo);
  const std::string csv = path_to_csv(path);
  CHECK(csv.rfind("s,x,y,heading,v_pass,v_stop\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') ==
        static_cast<long>(path.points.size()) + 1);
}

#include "apg/traffic.hpp"

#include "apg/driving_state.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace apg {

double path_turn_radius(const CandidatePath& path, double s) {
  if (s <= path.s_curve_start || s >= path.s_junction_exit) return kInfiniteRadius;
  const auto it = std::lower_bound(path.arc_length.begin(), path.arc_length.end(), s);
  size_t i = static_cast<size_t>(it - path.arc_length.begin());
  i = std::clamp<size_t>(i, 1, path.points.size() - 2);
  const double ds = path.arc_length[i + 1] - path.arc_length[i - 1];
  if (ds < 1e-9) return kInfiniteRadius;
  const double kappa = wrap_angle(path.headings[i + 1] - path.headings[i - 1]) / ds;
  if (std::abs(kappa) < 1e-4) return kInfiniteRadius;
  return 1.0 / kappa;
}

World::World(IntersectionTopology topo, TrafficConfig cfg, SignalSchedule schedule)
    : topo_(std::move(topo)), cfg_(cfg), schedule_(std::move(schedule)) {
  topo_.validate();
  if (schedule_.approach_offsets.empty()) {
    schedule_.approach_offsets = default_approach_offsets(topo_, schedule_);
  }
  for (int i = 0; i < static_cast<int>(topo_.connections.size()); ++i) {
    CandidatePath p = build_route(topo_, i, 0.6, 0.5);
    build_velocity_profiles(p, topo_);
    routes_.push_back(std::move(p));
  }
  reset(cfg_.seed);
}

void World::reset(std::uint64_t seed) {
  agents_.clear();
  time_ = 0.0;
  background_collisions_ = 0;
  perturbed_agents_ = 0;
  rng_.seed(seed);
  assign_rng_.seed(seed ^ 0x9e3779b97f4a7c15ULL);
  next_arrival_.assign(topo_.entrances.size() * 3, 0.0);
  std::exponential_distribution<double> exp1(1.0);
  const double rates[3] = {cfg_.vehicle_rate_per_h, cfg_.cyclist_rate_per_h,
                           cfg_.pedestrian_rate_per_h};
  for (size_t e = 0; e < topo_.entrances.size(); ++e) {
    for (int k = 0; k < 3; ++k) {
      const double rate = rates[k] / 3600.0;
      next_arrival_[e * 3 + k] =
          rate > 0.0 ? exp1(rng_) / rate : std::numeric_limits<double>::infinity();
    }
  }
}

std::vector<ParticipantState> World::participants() const {
  std::vector<ParticipantState> out;
  out.reserve(agents_.size());
  for (const auto& a : agents_) out.push_back(a.state);
  return out;
}

void World::spawn_vehicle_like(int entrance, ParticipantKind kind) {
  std::vector<int> options;
  for (int i = 0; i < static_cast<int>(routes_.size()); ++i) {
    if (routes_[i].entrance_index == entrance) options.push_back(i);
  }
  if (options.empty()) return;
  // Route and perturbation draws come before any state-dependent rejection so
  // both rng streams stay aligned across configurations with the same seed.
  const int route_id =
      options[std::uniform_int_distribution<int>(0, static_cast<int>(options.size()) - 1)(rng_)];
  const double u_speed = std::uniform_real_distribution<double>(0.0, 1.0)(assign_rng_);
  const double u_round = std::uniform_real_distribution<double>(0.0, 1.0)(assign_rng_);
  const CandidatePath& route = routes_[route_id];

  Agent a;
  a.route_id = route_id;
  a.approach = entrance;
  a.movement = route.tag;
  a.s = 0.0;
  a.state.kind = kind;
  if (kind == ParticipantKind::Vehicle) {
    a.state.length = 4.8;
    a.state.width = 2.0;
    if (route.tag == Movement::Straight) {
      if (u_speed < cfg_.overspeed_fraction) a.speed_factor = cfg_.overspeed_factor;
      if (u_round < cfg_.rounding_fraction) a.rounding = true;
      if (a.speed_factor > 1.0 || a.rounding) ++perturbed_agents_;
    }
  } else {
    a.state.length = 1.8;
    a.state.width = 0.6;
  }
  if (static_cast<int>(agents_.size()) >= cfg_.max_agents) return;
  // Reject a spawn that would start on top of an existing agent.
  for (const auto& other : agents_) {
    if (other.route_id == route_id && other.s < 10.0) return;
  }
  const double limit = topo_.entrances[entrance].speed_limit;
  double desired =
      (kind == ParticipantKind::Cyclist ? std::min(limit, 5.0) : limit) * a.speed_factor;
  // Entering behind a queue: start no faster than the gap can absorb.
  double lead = std::numeric_limits<double>::infinity();
  for (const auto& other : agents_) {
    if (other.route_id == route_id) lead = std::min(lead, other.s - other.state.length / 2.0);
  }
  if (std::isfinite(lead)) {
    const double usable = std::max(0.0, lead - a.state.length / 2.0 - kMinGap);
    desired = std::min(desired, std::sqrt(2.0 * kFollowerDecel * usable));
  }
  a.state.v = desired;
  const Vec2 p = route.points.front();
  a.state.p_x = p.x();
  a.state.p_y = p.y();
  a.state.phi = route.headings.front();
  a.state.turn_radius = path_turn_radius(route, a.s);
  agents_.push_back(a);
}

void World::spawn_pedestrian(int entrance) {
  const bool from_left = std::uniform_int_distribution<int>(0, 1)(rng_) == 1;
  if (static_cast<int>(agents_.size()) >= cfg_.max_agents) return;
  const LaneRef& lane = topo_.entrances[entrance];
  const Vec2 d(std::cos(lane.heading), std::sin(lane.heading));
  const Vec2 perp(-d.y(), d.x());
  const Vec2 center = lane.endpoint - topo_.stop_line_distance * d;
  constexpr double kHalfSpan = 8.0;
  Agent a;
  a.state.kind = ParticipantKind::Pedestrian;
  a.state.length = 0.5;
  a.state.width = 0.5;
  a.approach = entrance;
  a.walk_from = center + (from_left ? kHalfSpan : -kHalfSpan) * perp;
  a.walk_to = center + (from_left ? -kHalfSpan : kHalfSpan) * perp;
  a.walk_s = 0.0;
  a.curb_s = kHalfSpan - 4.0;  // lane crossing starts 4 m from the curb
  a.state.p_x = a.walk_from.x();
  a.state.p_y = a.walk_from.y();
  const Vec2 dir = (a.walk_to - a.walk_from).normalized();
  a.state.phi = std::atan2(dir.y(), dir.x());
  a.state.v = kPedestrianSpeed;
  agents_.push_back(a);
}

void World::spawn_due(double dt) {
  std::exponential_distribution<double> exp1(1.0);
  const double rates[3] = {cfg_.vehicle_rate_per_h, cfg_.cyclist_rate_per_h,
                           cfg_.pedestrian_rate_per_h};
  for (size_t e = 0; e < topo_.entrances.size(); ++e) {
    for (int k = 0; k < 3; ++k) {
      const double rate = rates[k] / 3600.0;
      if (rate <= 0.0) continue;
      double& next = next_arrival_[e * 3 + k];
      while (next <= time_) {
        if (k == 0) {
          spawn_vehicle_like(static_cast<int>(e), ParticipantKind::Vehicle);
        } else if (k == 1) {
          spawn_vehicle_like(static_cast<int>(e), ParticipantKind::Cyclist);
        } else {
          spawn_pedestrian(static_cast<int>(e));
        }
        next += exp1(rng_) / rate;
      }
    }
  }
  (void)dt;
}

double World::allowed_speed(const Agent& a, double dt) const {
  const CandidatePath& route = routes_[a.route_id];
  const double limit = topo_.entrances[a.approach].speed_limit;
  double v = (a.state.kind == ParticipantKind::Cyclist ? std::min(limit, 5.0) : limit) *
             a.speed_factor;

  // Gap keeping against the nearest leader on the same route.
  const double front = a.s + a.state.length / 2.0;
  double gap = std::numeric_limits<double>::infinity();
  for (const auto& other : agents_) {
    if (&other == &a || other.route_id != a.route_id) continue;
    if (other.s <= a.s) continue;
    gap = std::min(gap, other.s - other.state.length / 2.0 - front);
  }
  if (std::isfinite(gap)) {
    const double usable = std::max(0.0, gap - kMinGap - dt * a.state.v);
    v = std::min({v, std::sqrt(2.0 * kFollowerDecel * usable), usable / kHeadway});
  }

  // Red-light stop at the stop line. The chosen speed is applied for a whole
  // step before the distance is re-read, so brake against the post-step gap.
  if (front < route.s_stop_line &&
      signal(a.approach, a.movement).phase == Phase::Red) {
    const double d = std::max(0.0, route.s_stop_line - front - 0.5 - dt * a.state.v);
    v = std::min(v, std::sqrt(2.0 * kFollowerDecel * d));
  }
  return v;
}

void World::maybe_round(Agent& a) {
  if (!a.rounding || a.rounded || a.movement != Movement::Straight) return;
  const CandidatePath& route = routes_[a.route_id];
  if (a.s < route.s_stop_line) return;
  // Divert to the inside exit lane of the same movement, if one exists.
  int best = -1;
  for (int i = 0; i < static_cast<int>(routes_.size()); ++i) {
    if (i == a.route_id) continue;
    const CandidatePath& r = routes_[i];
    if (r.entrance_index != route.entrance_index || r.tag != Movement::Straight) continue;
    if (best < 0 || r.exit_index < routes_[best].exit_index) best = i;
  }
  a.rounded = true;
  if (best < 0 || routes_[best].exit_index >= route.exit_index) return;
  const Vec2 pos(a.state.p_x, a.state.p_y);
  const CandidatePath& nr = routes_[best];
  a.route_id = best;
  a.s = nr.arc_length[nr.closest_index(pos)];
}

void World::advance_agent(Agent& a, double dt) {
  if (a.state.kind == ParticipantKind::Pedestrian) {
    const double total = (a.walk_to - a.walk_from).norm();
    bool held = false;
    if (a.walk_s >= a.curb_s - 0.1 && a.walk_s < a.curb_s + 0.1) {
      // Waits at the curb while vehicles on the crossed approach have way.
      const Phase p = signal(a.approach, Movement::Straight).phase;
      held = (p != Phase::Red);
    }
    a.state.v = held ? 0.0 : kPedestrianSpeed;
    a.walk_s = std::min(total, a.walk_s + a.state.v * dt);
    const Vec2 p = a.walk_from + (a.walk_to - a.walk_from).normalized() * a.walk_s;
    a.state.p_x = p.x();
    a.state.p_y = p.y();
    return;
  }

  maybe_round(a);
  const CandidatePath& route = routes_[a.route_id];
  const double target = allowed_speed(a, dt);
  double v = a.state.v;
  if (target < v) {
    v = std::max(target, v - kFollowerDecel * dt);
  } else {
    v = std::min(target, v + kFollowerAccel * dt);
  }
  a.state.v = std::max(0.0, v);
  a.s += a.state.v * dt;
  const Vec2 p = route.point_at(a.s);
  a.state.p_x = p.x();
  a.state.p_y = p.y();
  a.state.phi = route.heading_at(a.s);
  a.state.turn_radius = path_turn_radius(route, a.s);
}

void World::step(double dt) {
  time_ += dt;
  spawn_due(dt);
  for (auto& a : agents_) advance_agent(a, dt);

  // Finished agents leave the world.
  agents_.erase(std::remove_if(agents_.begin(), agents_.end(),
                               [this](const Agent& a) {
                                 if (a.state.kind == ParticipantKind::Pedestrian) {
                                   return a.walk_s >= (a.walk_to - a.walk_from).norm() - 1e-9;
                                 }
                                 return a.s >= routes_[a.route_id].total_length() - 0.5;
                               }),
                agents_.end());

  // Background-on-background contact is allowed by the rule set; count it.
  for (size_t i = 0; i < agents_.size(); ++i) {
    for (size_t j = i + 1; j < agents_.size(); ++j) {
      const double dx = agents_[i].state.p_x - agents_[j].state.p_x;
      const double dy = agents_[i].state.p_y - agents_[j].state.p_y;
      if (dx * dx + dy * dy < 1.0) ++background_collisions_;
    }
  }
}

}  // namespace apg

#pragma once

#include "apg/dynamics.hpp"
#include "apg/path_planner.hpp"
#include "apg/signal.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace apg {

struct TrafficConfig {
  double pedestrian_rate_per_h = 100.0;  // per entrance lane
  double cyclist_rate_per_h = 100.0;
  double vehicle_rate_per_h = 400.0;
  std::uint64_t seed = 0;
  double overspeed_fraction = 0.0;  // of straight-movement vehicles
  double overspeed_factor = 1.0;    // >= 1
  double rounding_fraction = 0.0;   // of straight-movement vehicles
  int max_agents = 64;
};

// Signed turning radius at arc length s; infinity on straight sections.
double path_turn_radius(const CandidatePath& path, double s);

struct Agent {
  ParticipantState state;
  int route_id = -1;  // vehicles / cyclists: index into World::routes()
  double s = 0.0;
  double speed_factor = 1.0;
  bool rounding = false;
  bool rounded = false;
  int approach = -1;
  Movement movement = Movement::Straight;
  // Pedestrians walk a straight crosswalk instead of a route.
  Vec2 walk_from{0.0, 0.0};
  Vec2 walk_to{0.0, 0.0};
  double walk_s = 0.0;
  double curb_s = 0.0;
};

// Rule-based background traffic: route-following vehicles and cyclists with
// gap keeping and red-light stops, crosswalk pedestrians, Poisson arrivals.
class World {
 public:
  World(IntersectionTopology topo, TrafficConfig cfg, SignalSchedule schedule);

  void reset(std::uint64_t seed);
  void step(double dt);

  double time() const { return time_; }
  const IntersectionTopology& topology() const { return topo_; }
  const TrafficConfig& config() const { return cfg_; }
  const SignalSchedule& schedule() const { return schedule_; }
  const std::vector<CandidatePath>& routes() const { return routes_; }
  const std::vector<Agent>& agents() const { return agents_; }
  PhaseInfo signal(int approach, Movement m) const {
    return signal_at(schedule_, approach, m, time_);
  }
  std::vector<ParticipantState> participants() const;
  long background_collisions() const { return background_collisions_; }
  long perturbed_agent_count() const { return perturbed_agents_; }

  static constexpr double kFollowerDecel = 3.0;    // [m/s^2]
  static constexpr double kFollowerAccel = 1.5;    // [m/s^2]
  static constexpr double kMinGap = 2.0;           // [m]
  static constexpr double kHeadway = 1.5;          // [s]
  static constexpr double kPedestrianSpeed = 1.4;  // [m/s]

 private:
  void spawn_due(double dt);
  void spawn_vehicle_like(int entrance, ParticipantKind kind);
  void spawn_pedestrian(int entrance);
  void advance_agent(Agent& a, double dt);
  void maybe_round(Agent& a);
  double allowed_speed(const Agent& a, double dt) const;

  IntersectionTopology topo_;
  TrafficConfig cfg_;
  SignalSchedule schedule_;
  std::vector<CandidatePath> routes_;
  std::vector<Agent> agents_;
  std::vector<double> next_arrival_;  // per (entrance, kind)
  std::mt19937_64 rng_;
  std::mt19937_64 assign_rng_;  // perturbation draws, kept on their own stream
  double time_ = 0.0;
  long background_collisions_ = 0;
  long perturbed_agents_ = 0;
};

}  // namespace apg

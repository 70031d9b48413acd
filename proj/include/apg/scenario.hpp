#pragma once

#include "apg/driving_state.hpp"
#include "apg/perception.hpp"
#include "apg/traffic.hpp"

#include <memory>
#include <string>

namespace apg {

struct Scenario {
  IntersectionTopology topology;
  TrafficConfig traffic;
  SignalSchedule signal;
  PerceptionSpec perception;
  SensorNoiseSpec noise;
  EgoParams vehicle;
  EgoGeometry ego_geometry;
  Movement task = Movement::Left;
  int ego_entrance = 0;
  double rho_bisect = 0.6;
  double sample_ds = 0.5;
  std::string name = "scenario";
};

Scenario scenario_from_json(const std::string& json_text);
Scenario load_scenario(const std::string& path);
std::string scenario_to_json(const Scenario& sc);

// Six built-in desk-scale crossroads: three regular (1/2/3 exit lanes per
// direction) and three irregular variants (skewed axes, offset lanes,
// green-belt split). Index 0..5.
IntersectionTopology make_desk_topology(int variant);
int desk_topology_count();

// Small single-intersection left-turn scenario used as the training default.
Scenario make_desk_scenario();

// Closed-loop episode runner: background world plus the ego vehicle on one
// candidate path of the task's path set.
class Simulation {
 public:
  explicit Simulation(const Scenario& sc);

  void reset(std::uint64_t seed, int path_index = -1);  // -1: seeded random path
  void set_path(int path_index);

  // Advances ego and world by one control period (the ego dt).
  void apply(const Action& u);

  const std::vector<CandidatePath>& paths() const { return paths_; }
  const CandidatePath& current_path() const { return paths_[path_index_]; }
  int path_index() const { return path_index_; }
  const EgoState& ego() const { return ego_; }
  EgoState& ego() { return ego_; }
  World& world() { return world_; }
  const World& world() const { return world_; }
  const Scenario& scenario() const { return sc_; }
  double time() const { return world_.time(); }

  PhaseInfo ego_signal() const { return world_.signal(sc_.ego_entrance, sc_.task); }
  // Training-time mode rule: pass on green, stop otherwise.
  VelocityMode training_mode() const {
    return ego_signal().phase == Phase::Green ? VelocityMode::Pass : VelocityMode::Stop;
  }

  std::vector<ParticipantState> perceive_now();
  DrivingState observe(VelocityMode mode);
  DrivingState observe_for_path(int path_index, VelocityMode mode,
                                const std::vector<ParticipantState>& perceived) const;

  double worst_violation(const std::vector<ParticipantState>& ground_truth) const;

 private:
  Scenario sc_;
  World world_;
  std::vector<CandidatePath> paths_;
  int path_index_ = 0;
  EgoState ego_;
  std::mt19937_64 noise_rng_;
};

}  // namespace apg

#pragma once

#include "apg/driving_state.hpp"
#include "apg/net.hpp"
#include "apg/tape.hpp"

#include <random>
#include <stdexcept>
#include <vector>

namespace apg {

// Network shapes used throughout training. The adversary emits one noise
// vector per participant slot; empty slots are ignored downstream.
MLPSpec make_policy_spec(const std::vector<int>& hidden);
MLPSpec make_adversary_spec(const std::vector<int>& hidden);
MLPSpec make_value_spec(const std::vector<int>& hidden);

struct RolloutSingular : std::runtime_error {
  explicit RolloutSingular(double v_x);
  double v_x;
};

struct RolloutOptions {
  int horizon = 25;
  double rho_penalty = 15.0;
  bool use_adversary = true;   // false: xi == 0 everywhere (DPG)
  bool deterministic = false;  // mean actions / mean noise instead of samples
  bool zero_noise = false;     // keep the adversary in the graph, force xi = 0
};

// Scalar node handles for one ego state; the same graph pieces the full
// rollout is built from, exposed so gradients can be checked in isolation.
struct EgoNodeState {
  Tape::Index p_x, p_y, v_x, v_y, phi, omega, delta, a;
};

struct ParticipantNodeState {
  Tape::Index p_x, p_y, v, phi;
  double turn_radius = kInfiniteRadius;
};

EgoNodeState make_ego_nodes(Tape& tape, const EgoState& s);

// One bicycle-model step on the tape; throws RolloutSingular on a degenerate
// v_x-dependent denominator.
EgoNodeState step_ego_nodes(Tape& tape, const EgoNodeState& s, Tape::Index d_delta,
                            Tape::Index d_a, const EgoParams& p);

ParticipantNodeState step_participant_nodes(Tape& tape, const ParticipantNodeState& s,
                                            Tape::Index xi_x, Tape::Index xi_y,
                                            Tape::Index xi_v, Tape::Index xi_phi,
                                            double dt);

struct RolloutGraph {
  Tape::Index j_track = -1;  // sum_i l_i
  Tape::Index j_safe = -1;   // sum_i sum_slots penalty(g)
  Tape::Index j_pi = -1;     // j_track + rho * j_safe
  std::vector<Tape::Index> step_utility;
  std::vector<Tape::Index> step_penalty;
  std::vector<Tape::Index> step_action;
  std::vector<Tape::Index> step_noise;  // -1 when the adversary is off
};

// Records the whole T-step predicted trajectory on the tape: actions from the
// policy bank, model noise from the adversary bank, ego and participant
// transitions, tracking utilities against the fixed path/mode, and the
// distance-constraint penalties. Everything downstream of the two banks is
// differentiable; throws RolloutSingular if the ego dynamics degenerate.
RolloutGraph build_rollout(Tape& tape, int policy_bank, const MLPSpec& policy_spec,
                           int adversary_bank, const MLPSpec& adversary_spec,
                           const DrivingState& s0, const CandidatePath& path,
                           const EgoParams& params, const EgoGeometry& geom,
                           const RolloutOptions& opt, std::mt19937_64& policy_rng,
                           std::mt19937_64& adversary_rng);

}  // namespace apg

#pragma once

#include "apg/dynamics.hpp"
#include "apg/path_planner.hpp"

#include <Eigen/Dense>
#include <array>
#include <vector>

namespace apg {

inline constexpr int kVehicleSlots = 8;
inline constexpr int kCyclistSlots = 4;
inline constexpr int kPedestrianSlots = 4;
inline constexpr int kParticipantSlots = kVehicleSlots + kCyclistSlots + kPedestrianSlots;
inline constexpr int kEgoDim = 8;
inline constexpr int kTrackDim = 4;
inline constexpr int kSlotDim = 6;
inline constexpr int kStateDim = kEgoDim + kTrackDim + kParticipantSlots * kSlotDim;  // 108

inline constexpr double kPlaceholderDistance = 100.0;  // beyond every sensor range

struct TrackError {
  double dx = 0.0;   // longitudinal error in the path-point frame [m]
  double dy = 0.0;   // lateral error, left of path positive [m]
  double dv = 0.0;   // v_x minus the profile speed [m/s]
  double dphi = 0.0; // wrapped heading error (-pi, pi]
};

// Per-slot metadata that rides along with the flat feature vector; the
// rollout model needs kind, occupancy and the turning radius, none of which
// are network inputs beyond the six observed fields.
struct SlotInfo {
  bool occupied = false;
  ParticipantKind kind = ParticipantKind::Vehicle;
  double turn_radius = kInfiniteRadius;
};

struct DrivingState {
  Eigen::VectorXd features = Eigen::VectorXd::Zero(kStateDim);  // [x_ego, x_track, x_other]
  std::array<SlotInfo, kParticipantSlots> slots{};
  VelocityMode mode = VelocityMode::Pass;
  int path_id = 0;

  TrackError track() const {
    return {features[kEgoDim], features[kEgoDim + 1], features[kEgoDim + 2],
            features[kEgoDim + 3]};
  }
};

double wrap_angle(double a);  // to (-pi, pi]

TrackError track_error(const EgoState& ego, const CandidatePath& path, VelocityMode mode);

// Participant slots are filled nearest-first per kind; positions and headings
// go in relative to the ego pose. Empty slots hold the far placeholder.
DrivingState build_state(const EgoState& ego, const CandidatePath& path, VelocityMode mode,
                         const std::vector<ParticipantState>& perceived);

double utility(const TrackError& track, const EgoState& ego, const Action& u);

struct EgoGeometry {
  double length = 4.8;
  double width = 2.0;
  double safety_margin = 0.5;  // added to the disc-radius sum
};

// Disc-based clearance: g <= 0 is safe, positive g measures the violation.
double safety_g(const EgoState& ego, const EgoGeometry& geom, const ParticipantState& other);

// Exterior penalty of the constraint g <= 0: zero on the safe set, quadratic
// in the violation, C1 at the boundary.
inline double penalty(double g) { return g > 0.0 ? g * g : 0.0; }

}  // namespace apg

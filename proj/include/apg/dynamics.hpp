#pragma once

#include <limits>

namespace apg {

struct EgoState {
  double p_x = 0.0;
  double p_y = 0.0;
  double v_x = 0.0;
  double v_y = 0.0;
  double phi = 0.0;    // heading [rad]
  double omega = 0.0;  // yaw rate [rad/s]
  double delta = 0.0;  // front wheel angle [rad]
  double a = 0.0;      // longitudinal acceleration [m/s^2]
};

// Bicycle model parameters; defaults match the reference vehicle.
struct EgoParams {
  double k_f = -155495.0;  // [N/rad]
  double k_r = -155495.0;  // [N/rad]
  double l_f = 1.19;       // [m]
  double l_r = 1.46;       // [m]
  double mass = 1520.0;    // [kg]
  double i_z = 2642.0;     // [kg m^2]
  double dt = 0.1;         // [s]
};

struct Action {
  double d_delta = 0.0;  // [rad/s]
  double d_a = 0.0;      // [m/s^3]
};

inline constexpr double kDeltaMin = -0.4, kDeltaMax = 0.4;
inline constexpr double kAccelMin = -3.0, kAccelMax = 1.5;
inline constexpr double kDDeltaMin = -0.4, kDDeltaMax = 0.4;
inline constexpr double kDAccelMin = -4.5, kDAccelMax = 4.5;

Action clamp_action(const Action& u);

enum class ParticipantKind { Vehicle, Cyclist, Pedestrian };

inline constexpr double kInfiniteRadius = std::numeric_limits<double>::infinity();

struct ParticipantState {
  double p_x = 0.0;
  double p_y = 0.0;
  double v = 0.0;    // [m/s]
  double phi = 0.0;  // [rad]
  double length = 4.8;
  double width = 2.0;
  ParticipantKind kind = ParticipantKind::Vehicle;
  double turn_radius = kInfiniteRadius;  // signed; infinity = straight
};

struct NoiseVector {
  double xi_x = 0.0;
  double xi_y = 0.0;
  double xi_v = 0.0;
  double xi_phi = 0.0;
};

inline constexpr double kXiPosBound = 0.8;
inline constexpr double kXiVMin = -0.075, kXiVMax = 0.225;
inline constexpr double kXiPhiBound = 0.025;

// One Euler step of the bicycle dynamics, then hard clamps on delta and a.
// Throws on a singular v_x-dependent denominator.
EgoState step_ego(const EgoState& s, const Action& u, const EgoParams& p);

// Kinematic step of a surrounding participant with additive uncertainty.
ParticipantState step_participant(const ParticipantState& s, const NoiseVector& xi,
                                  double dt);

}  // namespace apg

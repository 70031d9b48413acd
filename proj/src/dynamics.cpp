#include "apg/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace apg {

Action clamp_action(const Action& u) {
  return {std::clamp(u.d_delta, kDDeltaMin, kDDeltaMax),
          std::clamp(u.d_a, kDAccelMin, kDAccelMax)};
}

EgoState step_ego(const EgoState& s, const Action& u, const EgoParams& p) {
  const double dt = p.dt;
  const double den_vy = p.mass * s.v_x - dt * (p.k_f + p.k_r);
  const double den_w = dt * (p.l_f * p.l_f * p.k_f + p.l_r * p.l_r * p.k_r) - p.i_z * s.v_x;
  if (std::abs(den_vy) < 1e-9 || std::abs(den_w) < 1e-9) {
    std::ostringstream os;
    os << "singular dynamics denominator at v_x=" << s.v_x;
    throw std::runtime_error(os.str());
  }
  const double c = std::cos(s.phi), sn = std::sin(s.phi);
  EgoState n;
  n.p_x = s.p_x + dt * (s.v_x * c - s.v_y * sn);
  n.p_y = s.p_y + dt * (s.v_x * sn + s.v_y * c);
  n.v_x = s.v_x + dt * (s.a + s.v_y * s.omega);
  n.v_y = (p.mass * s.v_x * s.v_y +
           dt * ((p.l_f * p.k_f - p.l_r * p.k_r) * s.omega - p.k_f * s.delta * s.v_x -
                 p.mass * s.v_x * s.v_x * s.omega)) /
          den_vy;
  n.phi = s.phi + dt * s.omega;
  n.omega = (-p.i_z * s.omega * s.v_x -
             dt * ((p.l_f * p.k_f - p.l_r * p.k_r) * s.v_y - p.l_f * p.k_f * s.delta * s.v_x)) /
            den_w;
  n.delta = std::clamp(s.delta + dt * u.d_delta, kDeltaMin, kDeltaMax);
  n.a = std::clamp(s.a + dt * u.d_a, kAccelMin, kAccelMax);
  return n;
}

ParticipantState step_participant(const ParticipantState& s, const NoiseVector& xi,
                                  double dt) {
  ParticipantState n = s;
  n.p_x = s.p_x + dt * s.v * std::cos(s.phi) + xi.xi_x;
  n.p_y = s.p_y + dt * s.v * std::sin(s.phi) + xi.xi_y;
  n.v = std::max(0.0, s.v + xi.xi_v);
  const double turn = std::isinf(s.turn_radius) ? 0.0 : dt * s.v / s.turn_radius;
  n.phi = s.phi + turn + xi.xi_phi;
  return n;
}

}  // namespace apg

#include "apg/driving_state.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace apg {

double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * M_PI);
  if (w <= -M_PI) w += 2.0 * M_PI;
  return w;
}

TrackError track_error(const EgoState& ego, const CandidatePath& path, VelocityMode mode) {
  const Vec2 p(ego.p_x, ego.p_y);
  const CandidatePath::Projection pj = path.project(p);
  const Vec2 e = p - pj.point;
  const double th = pj.heading;
  const double c = std::cos(th), s = std::sin(th);
  TrackError t;
  t.dx = c * e.x() + s * e.y();
  t.dy = -s * e.x() + c * e.y();
  t.dphi = wrap_angle(ego.phi - th);
  t.dv = ego.v_x - path.profile(mode).speed_at(pj.s);
  return t;
}

DrivingState build_state(const EgoState& ego, const CandidatePath& path, VelocityMode mode,
                         const std::vector<ParticipantState>& perceived) {
  DrivingState st;
  st.mode = mode;
  auto& f = st.features;
  f[0] = ego.p_x;
  f[1] = ego.p_y;
  f[2] = ego.v_x;
  f[3] = ego.v_y;
  f[4] = ego.phi;
  f[5] = ego.omega;
  f[6] = ego.delta;
  f[7] = ego.a;

  const TrackError t = track_error(ego, path, mode);
  f[kEgoDim] = t.dx;
  f[kEgoDim + 1] = t.dy;
  f[kEgoDim + 2] = t.dv;
  f[kEgoDim + 3] = t.dphi;

  struct Ranked {
    double dist2;
    const ParticipantState* p;
  };
  std::array<std::vector<Ranked>, 3> by_kind;
  for (const auto& p : perceived) {
    const double dx = p.p_x - ego.p_x, dy = p.p_y - ego.p_y;
    by_kind[static_cast<int>(p.kind)].push_back({dx * dx + dy * dy, &p});
  }
  for (auto& v : by_kind) {
    std::stable_sort(v.begin(), v.end(),
                     [](const Ranked& a, const Ranked& b) { return a.dist2 < b.dist2; });
  }

  const double c = std::cos(ego.phi), s = std::sin(ego.phi);
  const std::array<std::pair<ParticipantKind, int>, 3> layout = {
      std::pair{ParticipantKind::Vehicle, kVehicleSlots},
      std::pair{ParticipantKind::Cyclist, kCyclistSlots},
      std::pair{ParticipantKind::Pedestrian, kPedestrianSlots}};
  int slot = 0;
  for (const auto& [kind, count] : layout) {
    const auto& ranked = by_kind[static_cast<int>(kind)];
    for (int i = 0; i < count; ++i, ++slot) {
      double* base = f.data() + kEgoDim + kTrackDim + slot * kSlotDim;
      if (i < static_cast<int>(ranked.size())) {
        const ParticipantState& p = *ranked[i].p;
        const double dx = p.p_x - ego.p_x, dy = p.p_y - ego.p_y;
        base[0] = c * dx + s * dy;   // relative longitudinal
        base[1] = -s * dx + c * dy;  // relative lateral
        base[2] = p.v;
        base[3] = wrap_angle(p.phi - ego.phi);
        base[4] = p.length;
        base[5] = p.width;
        st.slots[slot] = {true, kind, p.turn_radius};
      } else {
        base[0] = 0.0;
        base[1] = kPlaceholderDistance;
        base[2] = 0.0;
        base[3] = 0.0;
        base[4] = 1.0;
        base[5] = 1.0;
        st.slots[slot] = {false, kind, kInfiniteRadius};
      }
    }
  }
  return st;
}

double utility(const TrackError& t, const EgoState& ego, const Action& u) {
  return 0.03 * t.dv * t.dv + 0.8 * t.dx * t.dx + 0.8 * t.dy * t.dy +
         30.0 * t.dphi * t.dphi + 0.02 * ego.omega * ego.omega +
         5.0 * ego.delta * ego.delta + 0.05 * ego.a * ego.a +
         0.4 * u.d_delta * u.d_delta + 0.1 * u.d_a * u.d_a;
}

double safety_g(const EgoState& ego, const EgoGeometry& geom, const ParticipantState& other) {
  const double r_ego = std::max(geom.width / 2.0, geom.length / 4.0);
  std::array<Vec2, 2> ego_centers;
  const Vec2 ego_pos(ego.p_x, ego.p_y);
  const Vec2 ego_dir(std::cos(ego.phi), std::sin(ego.phi));
  ego_centers[0] = ego_pos + (geom.length / 4.0) * ego_dir;
  ego_centers[1] = ego_pos - (geom.length / 4.0) * ego_dir;

  double r_other;
  std::array<Vec2, 2> other_centers;
  int n_other;
  const Vec2 other_pos(other.p_x, other.p_y);
  if (other.kind == ParticipantKind::Pedestrian) {
    r_other = std::max(other.length, other.width) / 2.0;
    other_centers[0] = other_pos;
    n_other = 1;
  } else {
    r_other = std::max(other.width / 2.0, other.length / 4.0);
    const Vec2 dir(std::cos(other.phi), std::sin(other.phi));
    other_centers[0] = other_pos + (other.length / 4.0) * dir;
    other_centers[1] = other_pos - (other.length / 4.0) * dir;
    n_other = 2;
  }

  double min_d = std::numeric_limits<double>::infinity();
  for (const Vec2& a : ego_centers) {
    for (int j = 0; j < n_other; ++j) {
      min_d = std::min(min_d, (a - other_centers[j]).norm());
    }
  }
  const double d_safe = r_ego + r_other + geom.safety_margin;
  return d_safe - min_d;
}

}  // namespace apg

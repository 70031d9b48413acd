#include "apg/perception.hpp"

#include <cmath>

namespace apg {

SensorNoiseSpec SensorNoiseSpec::noiseless() const {
  SensorNoiseSpec z;
  for (KindNoise* k : {&z.vehicle, &z.cyclist, &z.pedestrian}) {
    for (FieldNoise* f : {&k->p_x, &k->p_y, &k->v, &k->phi, &k->length, &k->width}) {
      f->mean = 0.0;
      f->std = 0.0;
    }
  }
  return z;
}

bool sensor_covers(const PerceptionSpec& spec, double range, double bearing) {
  const double b = std::abs(std::remainder(bearing, 2.0 * M_PI));
  auto covered = [&](const SensorSpec& s) {
    return range <= s.range && b <= s.half_fov + 1e-12;
  };
  return covered(spec.lidar) || covered(spec.camera) || covered(spec.radar);
}

std::vector<ParticipantState> perceive(const std::vector<ParticipantState>& world,
                                       const EgoState& ego, const PerceptionSpec& spec,
                                       const SensorNoiseSpec& noise, std::mt19937_64& rng) {
  std::vector<ParticipantState> out;
  std::normal_distribution<double> unit(0.0, 1.0);
  auto draw = [&](const FieldNoise& f) {
    if (f.std == 0.0) return f.mean;
    return f.mean + f.std * unit(rng);
  };
  for (const auto& p : world) {
    const double dx = p.p_x - ego.p_x;
    const double dy = p.p_y - ego.p_y;
    const double range = std::hypot(dx, dy);
    const double bearing = std::atan2(dy, dx) - ego.phi;
    if (!sensor_covers(spec, range, bearing)) continue;
    const KindNoise& kn = noise.for_kind(p.kind);
    ParticipantState obs = p;
    obs.p_x = p.p_x + draw(kn.p_x);
    obs.p_y = p.p_y + draw(kn.p_y);
    obs.v = p.v + draw(kn.v);
    obs.phi = p.phi + draw(kn.phi);
    obs.length = p.length + draw(kn.length);
    obs.width = p.width + draw(kn.width);
    out.push_back(obs);
  }
  return out;
}

}  // namespace apg

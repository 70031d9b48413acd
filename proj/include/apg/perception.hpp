#pragma once

#include "apg/dynamics.hpp"

#include <array>
#include <random>
#include <vector>

namespace apg {

struct SensorSpec {
  double range = 70.0;     // [m]
  double half_fov = M_PI;  // [rad], pi means full 360 coverage
};

struct PerceptionSpec {
  SensorSpec lidar{70.0, M_PI};
  SensorSpec camera{80.0, 35.0 * M_PI / 180.0};
  SensorSpec radar{60.0, 45.0 * M_PI / 180.0};
};

struct FieldNoise {
  double mean = 0.0;
  double std = 0.0;
};

// Gaussian sensor noise per (participant kind, observed field).
struct KindNoise {
  FieldNoise p_x, p_y, v, phi, length, width;
};

struct SensorNoiseSpec {
  KindNoise vehicle{{-0.002, 0.157}, {-0.001, 0.151}, {-0.000, 0.205},
                    {0.000, 0.054},  {-0.011, 0.300}, {0.023, 0.142}};
  KindNoise cyclist{{0.001, 0.172},  {-0.008, 0.158}, {0.005, 0.176},
                    {-0.014, 0.171}, {-0.003, 0.165}, {0.035, 0.109}};
  KindNoise pedestrian{{0.001, 0.110},  {-0.001, 0.111}, {-0.000, 0.119},
                       {-0.003, 0.229}, {-0.000, 0.147}, {-0.002, 0.141}};

  const KindNoise& for_kind(ParticipantKind k) const {
    switch (k) {
      case ParticipantKind::Vehicle: return vehicle;
      case ParticipantKind::Cyclist: return cyclist;
      case ParticipantKind::Pedestrian: return pedestrian;
    }
    return vehicle;
  }

  SensorNoiseSpec noiseless() const;
};

// True iff at least one sensor covers the given relative range/bearing.
bool sensor_covers(const PerceptionSpec& spec, double range, double bearing);

// Filters the world participants by sensor coverage around the ego pose and
// perturbs every observed field with one Gaussian draw per field.
std::vector<ParticipantState> perceive(const std::vector<ParticipantState>& world,
                                       const EgoState& ego, const PerceptionSpec& spec,
                                       const SensorNoiseSpec& noise, std::mt19937_64& rng);

}  // namespace apg

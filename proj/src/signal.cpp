#include "apg/signal.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace apg {

PhaseInfo signal_at(const SignalSchedule& schedule, int approach, Movement movement,
                    double t) {
  if (t < 0.0) throw std::invalid_argument("signal time must be >= 0");
  if (movement == Movement::Right) {
    return {Phase::Green, std::numeric_limits<double>::infinity()};
  }
  const double cycle = schedule.cycle();
  double u = std::fmod(t + schedule.offset_for(approach), cycle);
  if (u < 0.0) u += cycle;
  if (u < schedule.green_s) return {Phase::Green, schedule.green_s - u};
  if (u < schedule.green_s + schedule.yellow_s)
    return {Phase::Yellow, schedule.green_s + schedule.yellow_s - u};
  return {Phase::Red, cycle - u};
}

std::vector<double> default_approach_offsets(const IntersectionTopology& topo,
                                             const SignalSchedule& schedule) {
  std::vector<double> offsets(topo.entrances.size(), 0.0);
  if (topo.entrances.empty()) return offsets;
  const double h0 = topo.entrances[0].heading;
  for (size_t i = 0; i < topo.entrances.size(); ++i) {
    const double d = std::abs(std::remainder(topo.entrances[i].heading - h0, M_PI));
    // Cross-axis approaches see red while the reference axis is green/yellow.
    if (d > M_PI / 4.0) offsets[i] = schedule.green_s + schedule.yellow_s;
  }
  return offsets;
}

}  // namespace apg

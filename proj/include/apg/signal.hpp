#pragma once

#include "apg/path_planner.hpp"

#include <vector>

namespace apg {

enum class Phase { Green, Yellow, Red };

struct PhaseInfo {
  Phase phase = Phase::Green;
  double remaining_s = 0.0;  // infinity for the permanent right-turn green
};

// Fixed-cycle signal: green -> yellow -> red, one offset per approach.
// Right-turn movements are permanently green.
struct SignalSchedule {
  double green_s = 60.0;
  double yellow_s = 3.0;
  double red_s = 40.0;
  std::vector<double> approach_offsets;  // seconds, indexed by entrance lane

  double cycle() const { return green_s + yellow_s + red_s; }
  double offset_for(int approach) const {
    if (approach >= 0 && approach < static_cast<int>(approach_offsets.size()))
      return approach_offsets[approach];
    return 0.0;
  }
};

PhaseInfo signal_at(const SignalSchedule& schedule, int approach, Movement movement,
                    double t);

// Offsets that put entrances whose heading is roughly perpendicular to
// entrance 0 on the opposing phase (shifted by green + yellow).
std::vector<double> default_approach_offsets(const IntersectionTopology& topo,
                                             const SignalSchedule& schedule);

}  // namespace apg

#pragma once

#include "apg/controller.hpp"

#include <string>
#include <vector>

namespace apg {

struct RunOutcome {
  bool reached_exit = false;
  bool collision = false;
  bool departure = false;
  bool red_violation = false;
  double travel_time = 0.0;  // stop line to junction exit, successful runs only
  bool success() const {
    return reached_exit && !collision && !departure && !red_violation;
  }
};

struct EvalReport {
  std::string method;
  std::string perturbation = "none";
  double level = 0.0;
  double passing_rate = 0.0;
  double travel_mean = 0.0;
  double travel_std = 0.0;
  long violation_count = 0;  // runs with at least one g > 0 event
  int runs = 0;
  std::vector<RunOutcome> outcomes;
};

struct TrackingRecord {
  std::vector<double> pos_err;    // sqrt(dx^2 + dy^2) per step
  std::vector<double> speed_err;  // |dv|
  std::vector<double> delta;
  std::vector<double> accel;
};

double percentile(std::vector<double> v, double p);  // p in [0,100]

// Empty-traffic tracking runs over the given scenarios, alternating pass and
// stop modes, deterministic policy on a seeded random candidate path.
TrackingRecord eval_tracking(const std::vector<Scenario>& scenarios,
                             const MLPSpec& policy_spec, const ParameterVector& policy,
                             int runs, int steps, std::uint64_t seed);

// Full closed-loop runs with the flowchart controller under one perturbation
// ("overspeed", "rounding" or "none") at the given level. The ego approach is
// held on green so runs probe the unprotected conflicts, not the signal.
EvalReport eval_generalization(const Scenario& sc, const MLPSpec& policy_spec,
                               const ParameterVector& policy, const MLPSpec& value_spec,
                               const ParameterVector& value, const std::string& perturbation,
                               double level, int runs, std::uint64_t seed,
                               const std::string& method);

// metrics.csv: method,perturbation,level,passing_rate,travel_mean,travel_std,n
std::string report_csv(const std::vector<EvalReport>& reports);
void write_report(const std::vector<EvalReport>& reports, const std::string& out_dir);

// Renders losses.csv (iteration,J_track,J_safe,J_pi,J_v,TAR) as a line chart.
void write_loss_plot(const std::string& losses_csv, const std::string& svg_path);

}  // namespace apg

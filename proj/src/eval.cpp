#include "apg/eval.hpp"

#include "apg/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace apg {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  return x;
}

double min_distance_to_any_path(const std::vector<CandidatePath>& paths, const Vec2& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const CandidatePath& path : paths) {
    best = std::min(best, (p - path.points[path.closest_index(p)]).norm());
  }
  return best;
}

}  // namespace

double percentile(std::vector<double> v, double p) {
  if (v.empty()) throw std::invalid_argument("percentile of empty sample");
  std::sort(v.begin(), v.end());
  const double pos = std::clamp(p, 0.0, 100.0) / 100.0 * (v.size() - 1);
  const size_t lo = static_cast<size_t>(pos);
  const size_t hi = std::min(lo + 1, v.size() - 1);
  const double f = pos - lo;
  return v[lo] * (1.0 - f) + v[hi] * f;
}

TrackingRecord eval_tracking(const std::vector<Scenario>& scenarios,
                             const MLPSpec& policy_spec, const ParameterVector& policy,
                             int runs, int steps, std::uint64_t seed) {
  if (scenarios.empty()) throw std::invalid_argument("eval_tracking: no scenarios");
  TrackingRecord rec;
  const Eigen::VectorXd& scaling = state_input_scaling();
  for (int r = 0; r < runs; ++r) {
    Scenario sc = scenarios[r % scenarios.size()];
    sc.traffic.vehicle_rate_per_h = 0.0;
    sc.traffic.cyclist_rate_per_h = 0.0;
    sc.traffic.pedestrian_rate_per_h = 0.0;
    Simulation sim(sc);
    sim.reset(mix_seed(seed, r), -1);
    const VelocityMode mode = (r % 2 == 0) ? VelocityMode::Pass : VelocityMode::Stop;
    for (int t = 0; t < steps; ++t) {
      const DrivingState s = sim.observe(mode);
      const TrackError e = s.track();
      rec.pos_err.push_back(std::hypot(e.dx, e.dy));
      rec.speed_err.push_back(std::abs(e.dv));
      rec.delta.push_back(sim.ego().delta);
      rec.accel.push_back(sim.ego().a);
      const EvalOut out = mlp_eval(policy_spec, policy, scaling.cwiseProduct(s.features));
      try {
        sim.apply(clamp_action({out.mean[0], out.mean[1]}));
      } catch (const std::runtime_error&) {
        break;
      }
      const CandidatePath& path = sim.current_path();
      const int ci = path.closest_index({sim.ego().p_x, sim.ego().p_y});
      if (path.arc_length[ci] > path.total_length() - 1.0) break;
    }
  }
  return rec;
}

EvalReport eval_generalization(const Scenario& base, const MLPSpec& policy_spec,
                               const ParameterVector& policy, const MLPSpec& value_spec,
                               const ParameterVector& value, const std::string& perturbation,
                               double level, int runs, std::uint64_t seed,
                               const std::string& method) {
  Scenario sc = base;
  sc.signal.green_s = 3600.0;  // hold the ego approach on green
  if (perturbation == "overspeed") {
    sc.traffic.overspeed_fraction = level;
    sc.traffic.overspeed_factor = 1.0 + level;
  } else if (perturbation == "rounding") {
    sc.traffic.rounding_fraction = level;
  } else if (perturbation != "none") {
    throw std::invalid_argument("unknown perturbation: " + perturbation);
  }

  EvalReport report;
  report.method = method;
  report.perturbation = perturbation;
  report.level = level;
  report.runs = runs;

  Simulation sim(sc);
  const int max_steps = 900;
  for (int r = 0; r < runs; ++r) {
    sim.reset(mix_seed(seed, r), -1);
    Controller ctrl(policy_spec, policy, value_spec, value);
    RunOutcome out;
    double t_stop_line = -1.0;
    for (int t = 0; t < max_steps; ++t) {
      const Phase phase_before = sim.ego_signal().phase;
      const CandidatePath* path = &sim.current_path();
      const double s_before =
          path->arc_length[path->closest_index({sim.ego().p_x, sim.ego().p_y})];
      try {
        ctrl.step(sim);
      } catch (const std::runtime_error&) {
        break;
      }
      path = &sim.current_path();
      const Vec2 pos(sim.ego().p_x, sim.ego().p_y);
      const double s_after = path->arc_length[path->closest_index(pos)];
      if (sim.worst_violation(sim.world().participants()) > 0.0) out.collision = true;
      if (min_distance_to_any_path(sim.paths(), pos) > 3.0) out.departure = true;
      if (s_before < path->s_stop_line && s_after >= path->s_stop_line) {
        if (t_stop_line < 0.0) t_stop_line = sim.time();
        if (phase_before == Phase::Red) out.red_violation = true;
      }
      if (s_after >= path->s_junction_exit) {
        out.reached_exit = true;
        out.travel_time = t_stop_line >= 0.0 ? sim.time() - t_stop_line : 0.0;
        break;
      }
    }
    if (out.collision) ++report.violation_count;
    report.outcomes.push_back(out);
  }

  int successes = 0;
  double sum = 0.0, sum2 = 0.0;
  for (const RunOutcome& o : report.outcomes) {
    if (!o.success()) continue;
    ++successes;
    sum += o.travel_time;
    sum2 += o.travel_time * o.travel_time;
  }
  report.passing_rate = runs > 0 ? static_cast<double>(successes) / runs : 0.0;
  if (successes > 0) {
    report.travel_mean = sum / successes;
    if (successes > 1) {
      const double var = (sum2 - sum * sum / successes) / (successes - 1);
      report.travel_std = std::sqrt(std::max(0.0, var));
    }
  }
  return report;
}

std::string report_csv(const std::vector<EvalReport>& reports) {
  std::ostringstream os;
  os << "method,perturbation,level,passing_rate,travel_mean,travel_std,n\n";
  char buf[160];
  for (const EvalReport& r : reports) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%g,%.4f,%.3f,%.3f,%d\n", r.method.c_str(),
                  r.perturbation.c_str(), r.level, r.passing_rate, r.travel_mean,
                  r.travel_std, r.runs);
    os << buf;
  }
  return os.str();
}

void write_report(const std::vector<EvalReport>& reports, const std::string& out_dir) {
  if (reports.empty()) throw std::invalid_argument("write_report: no reports");
  std::filesystem::create_directories(out_dir);
  write_text_file(out_dir + "/metrics.csv", report_csv(reports));
  std::vector<std::pair<std::string, double>> bars;
  for (const EvalReport& r : reports) {
    char label[96];
    std::snprintf(label, sizeof(label), "%s %s %g", r.method.c_str(),
                  r.perturbation.c_str(), r.level);
    bars.emplace_back(label, r.passing_rate);
  }
  write_text_file(out_dir + "/passing_rate.svg", bar_chart_svg(bars, "passing rate"));
}

void write_loss_plot(const std::string& losses_csv, const std::string& svg_path) {
  std::ifstream in(losses_csv);
  if (!in) throw std::runtime_error("cannot open " + losses_csv);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty losses file");
  std::stringstream header(line);
  std::vector<std::string> names;
  std::string cell;
  while (std::getline(header, cell, ',')) names.push_back(cell);
  if (names.size() < 2 || names[0] != "iteration") {
    throw std::runtime_error("unexpected losses.csv header");
  }
  std::vector<Series> series(names.size() - 1);
  for (size_t i = 1; i < names.size(); ++i) series[i - 1].label = names[i];
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::vector<double> vals;
    while (std::getline(row, cell, ',')) vals.push_back(std::stod(cell));
    if (vals.size() != names.size()) throw std::runtime_error("ragged losses.csv row");
    for (size_t i = 1; i < vals.size(); ++i) {
      series[i - 1].x.push_back(vals[0]);
      series[i - 1].y.push_back(vals[i]);
    }
  }
  write_text_file(svg_path, line_chart_svg(series, "training losses"));
}

}  // namespace apg

#include "apg/path_planner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace apg {

namespace {

constexpr double kDegenerateEps = 1e-9;

Eigen::Matrix2d own_matrix(double theta, double rho) {
  const double c = std::cos(theta), s = std::sin(theta);
  Eigen::Matrix2d m;
  m << rho * c * c + s * s, (rho - 1.0) * s * c,
       (rho - 1.0) * s * c, c * c + rho * s * s;
  return m;
}

Eigen::Matrix2d other_matrix(double theta, double rho) {
  const double c = std::cos(theta), s = std::sin(theta);
  Eigen::Matrix2d m;
  m << (1.0 - rho) * c * c, (1.0 - rho) * s * c,
       (1.0 - rho) * s * c, (1.0 - rho) * s * s;
  return m;
}

}  // namespace

const char* movement_name(Movement m) {
  switch (m) {
    case Movement::Left: return "left";
    case Movement::Straight: return "straight";
    case Movement::Right: return "right";
  }
  return "?";
}

Movement movement_from_string(const std::string& s) {
  if (s == "left") return Movement::Left;
  if (s == "straight") return Movement::Straight;
  if (s == "right") return Movement::Right;
  throw std::invalid_argument("unknown movement tag: " + s);
}

void IntersectionTopology::validate() const {
  for (const auto& c : connections) {
    if (c.entrance < 0 || c.entrance >= static_cast<int>(entrances.size()) ||
        c.exit < 0 || c.exit >= static_cast<int>(exits.size())) {
      throw std::invalid_argument("connection references invalid lane index");
    }
  }
  auto check_lane = [](const LaneRef& l) {
    if (!std::isfinite(l.heading)) throw std::invalid_argument("non-finite lane heading");
    if (l.length <= 0.0) throw std::invalid_argument("lane length must be > 0");
    if (l.speed_limit <= 0.0) throw std::invalid_argument("speed limit must be > 0");
  };
  for (const auto& l : entrances) check_lane(l);
  for (const auto& l : exits) check_lane(l);
  if (stop_line_distance < 0.0) throw std::invalid_argument("stop_line_distance must be >= 0");
}

ControlPointResult compute_control_points(const Vec2& x1, double theta_in,
                                          const Vec2& x4, double theta_out,
                                          double rho_bisect) {
  if (!(rho_bisect > 0.0 && rho_bisect < 1.0)) {
    throw std::invalid_argument("rho_bisect must lie in (0,1)");
  }
  if ((x4 - x1).norm() < kDegenerateEps) {
    throw std::invalid_argument("X1 and X4 coincide");
  }
  ControlPointResult r;
  r.x2 = own_matrix(theta_in, rho_bisect) * x1 + other_matrix(theta_in, rho_bisect) * x4;
  r.x3 = other_matrix(theta_out, rho_bisect) * x1 + own_matrix(theta_out, rho_bisect) * x4;
  r.degenerate_entrance = (r.x2 - x1).norm() < kDegenerateEps;
  r.degenerate_exit = (r.x3 - x4).norm() < kDegenerateEps;
  return r;
}

Vec2 bezier_point(const Vec2& x1, const Vec2& x2, const Vec2& x3,
                  const Vec2& x4, double t) {
  if (t < 0.0 || t > 1.0) throw std::invalid_argument("bezier parameter outside [0,1]");
  const double u = 1.0 - t;
  return u * u * u * x1 + 3.0 * x2 * t * u * u + 3.0 * x3 * t * t * u + t * t * t * x4;
}

Vec2 bezier_tangent(const Vec2& x1, const Vec2& x2, const Vec2& x3,
                    const Vec2& x4, double t) {
  if (t < 0.0 || t > 1.0) throw std::invalid_argument("bezier parameter outside [0,1]");
  const double u = 1.0 - t;
  return 3.0 * u * u * (x2 - x1) + 6.0 * u * t * (x3 - x2) + 3.0 * t * t * (x4 - x3);
}

double VelocityProfile::speed_at(double s) const {
  const double v_out = 0.8 * v_limit;
  if (mode == VelocityMode::Pass) {
    if (s < s_stop_line || s > s_junction_exit) return v_out;
    return std::min(0.5 * v_limit, 30.0 / 3.6);
  }
  // Stop mode.
  if (s > s_junction_exit) return v_out;
  if (s >= s_stop_line) return 0.0;
  const double d_remaining = s_stop_line - s;
  if (d_remaining >= decel_zone) return v_out;
  return v_out * std::sqrt(d_remaining / decel_zone);
}

int CandidatePath::closest_index(const Vec2& p) const {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < static_cast<int>(points.size()); ++i) {
    const double d = (points[i] - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

CandidatePath::Projection CandidatePath::project(const Vec2& p) const {
  const int n = static_cast<int>(points.size());
  const int ci = closest_index(p);
  Projection best;
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = std::max(0, ci - 1); i <= std::min(n - 2, ci); ++i) {
    const Vec2 a = points[i], b = points[i + 1];
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    const Vec2 foot = a + t * ab;
    const double d = (p - foot).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best.s = arc_length[i] + t * (arc_length[i + 1] - arc_length[i]);
      best.point = foot;
      best.heading = headings[i] + t * std::remainder(headings[i + 1] - headings[i], 2.0 * M_PI);
    }
  }
  if (n == 1) return {arc_length[0], points[0], headings[0]};
  return best;
}

Vec2 CandidatePath::point_at(double s) const {
  const auto it = std::lower_bound(arc_length.begin(), arc_length.end(), s);
  if (it == arc_length.begin()) return points.front();
  if (it == arc_length.end()) return points.back();
  const size_t i = static_cast<size_t>(it - arc_length.begin());
  const double s0 = arc_length[i - 1], s1 = arc_length[i];
  const double a = (s1 > s0) ? (s - s0) / (s1 - s0) : 0.0;
  return (1.0 - a) * points[i - 1] + a * points[i];
}

double CandidatePath::heading_at(double s) const {
  const auto it = std::lower_bound(arc_length.begin(), arc_length.end(), s);
  if (it == arc_length.begin()) return headings.front();
  if (it == arc_length.end()) return headings.back();
  const size_t i = static_cast<size_t>(it - arc_length.begin());
  // Nearest sample heading; segments are dense enough (<= 0.5 m).
  const double mid = 0.5 * (arc_length[i - 1] + arc_length[i]);
  return s < mid ? headings[i - 1] : headings[i];
}

CandidatePath build_route(const IntersectionTopology& topo, int connection_index,
                          double rho_bisect, double sample_ds) {
  topo.validate();
  if (sample_ds <= 0.0 || sample_ds > 0.5) {
    throw std::invalid_argument("sample_ds must lie in (0, 0.5]");
  }
  if (connection_index < 0 || connection_index >= static_cast<int>(topo.connections.size())) {
    throw std::invalid_argument("connection index out of range");
  }
  const Connection& conn = topo.connections[connection_index];
  const LaneRef& in = topo.entrances[conn.entrance];
  const LaneRef& out = topo.exits[conn.exit];
  const Vec2 x1 = in.endpoint;
  const Vec2 x4 = out.endpoint;
  const Vec2 d_in(std::cos(in.heading), std::sin(in.heading));
  const Vec2 d_out(std::cos(out.heading), std::sin(out.heading));
  const Vec2 x0 = x1 - in.length * d_in;
  const Vec2 x5 = x4 + out.length * d_out;

  const ControlPointResult cp =
      compute_control_points(x1, in.heading, x4, out.heading, rho_bisect);
  const bool straight_line =
      std::abs(std::remainder(in.heading - out.heading, 2.0 * M_PI)) < 1e-9 &&
      std::abs(d_in.x() * (x4 - x1).y() - d_in.y() * (x4 - x1).x()) < 1e-9;
  if (!straight_line && (cp.degenerate_entrance || cp.degenerate_exit)) {
    std::ostringstream os;
    os << "degenerate control-point projection for connection " << connection_index
       << " (entrance " << conn.entrance << " -> exit " << conn.exit << ")";
    throw std::runtime_error(os.str());
  }

  CandidatePath path;
  path.tag = conn.tag;
  path.entrance_index = conn.entrance;
  path.exit_index = conn.exit;

  auto push_sample = [&path](const Vec2& p, double heading) {
    if (!path.points.empty()) {
      const double ds = (p - path.points.back()).norm();
      if (ds < 1e-12) return;
      path.arc_length.push_back(path.arc_length.back() + ds);
    } else {
      path.arc_length.push_back(0.0);
    }
    path.points.push_back(p);
    path.headings.push_back(heading);
  };

  // Entrance segment X0 -> X1.
  const int n_in = std::max(1, static_cast<int>(std::ceil(in.length / sample_ds)));
  for (int i = 0; i <= n_in; ++i) {
    push_sample(x0 + (in.length * i / n_in) * d_in, in.heading);
  }
  path.s_curve_start = path.arc_length.back();
  path.s_stop_line = path.s_curve_start - topo.stop_line_distance;

  // Bezier section, re-parameterized to near-uniform arc length through a
  // 200-entry lookup of cumulative chord length over uniform t.
  constexpr int kTableN = 200;
  std::vector<double> table_s(kTableN + 1, 0.0);
  std::vector<Vec2> table_p(kTableN + 1);
  for (int i = 0; i <= kTableN; ++i) {
    table_p[i] = bezier_point(x1, cp.x2, cp.x3, x4, static_cast<double>(i) / kTableN);
    if (i > 0) table_s[i] = table_s[i - 1] + (table_p[i] - table_p[i - 1]).norm();
  }
  const double curve_len = table_s.back();
  // Tight turns need denser samples to keep the per-sample heading step small;
  // the 0.999 margin covers chord length underestimating the true arc.
  double kappa_max = 0.0;
  for (int i = 1; i <= kTableN; ++i) {
    const double ds = table_s[i] - table_s[i - 1];
    if (ds < 1e-9) continue;
    const Vec2 ta = bezier_tangent(x1, cp.x2, cp.x3, x4, static_cast<double>(i - 1) / kTableN);
    const Vec2 tb = bezier_tangent(x1, cp.x2, cp.x3, x4, static_cast<double>(i) / kTableN);
    if (ta.norm() < 1e-9 || tb.norm() < 1e-9) continue;
    const double dtheta = std::abs(std::remainder(
        std::atan2(tb.y(), tb.x()) - std::atan2(ta.y(), ta.x()), 2.0 * M_PI));
    kappa_max = std::max(kappa_max, dtheta / ds);
  }
  double ds_eff = 0.999 * sample_ds;
  if (kappa_max > 1e-9) ds_eff = std::min(ds_eff, 0.15 / kappa_max);
  ds_eff = std::max(ds_eff, 0.02);
  const int n_curve = std::max(1, static_cast<int>(std::ceil(curve_len / ds_eff)));
  for (int i = 1; i <= n_curve; ++i) {
    const double target = curve_len * i / n_curve;
    const auto it = std::lower_bound(table_s.begin(), table_s.end(), target);
    const size_t j = std::min<size_t>(static_cast<size_t>(it - table_s.begin()), kTableN);
    double t;
    if (j == 0) {
      t = 0.0;
    } else {
      const double a = (table_s[j] > table_s[j - 1])
                           ? (target - table_s[j - 1]) / (table_s[j] - table_s[j - 1])
                           : 0.0;
      t = (static_cast<double>(j - 1) + a) / kTableN;
    }
    t = std::clamp(t, 0.0, 1.0);
    const Vec2 tangent = bezier_tangent(x1, cp.x2, cp.x3, x4, t);
    const double heading = (tangent.norm() > 1e-12)
                               ? std::atan2(tangent.y(), tangent.x())
                               : path.headings.back();
    push_sample(bezier_point(x1, cp.x2, cp.x3, x4, t), heading);
  }
  path.s_junction_exit = path.arc_length.back();

  // Exit segment X4 -> X5.
  const int n_out = std::max(1, static_cast<int>(std::ceil(out.length / sample_ds)));
  for (int i = 1; i <= n_out; ++i) {
    push_sample(x4 + (out.length * i / n_out) * d_out, out.heading);
  }
  return path;
}

void build_velocity_profiles(CandidatePath& path, const IntersectionTopology& topo,
                             double decel_zone) {
  const LaneRef& in = topo.entrances[path.entrance_index];
  if (path.s_stop_line < decel_zone) {
    std::ostringstream os;
    os << "deceleration zone (" << decel_zone << " m) does not fit before the stop line at s="
       << path.s_stop_line;
    throw std::runtime_error(os.str());
  }
  VelocityProfile base;
  base.v_limit = in.speed_limit;
  base.s_stop_line = path.s_stop_line;
  base.s_junction_exit = path.s_junction_exit;
  base.decel_zone = decel_zone;

  path.pass_profile = base;
  path.pass_profile.mode = VelocityMode::Pass;
  path.stop_profile = base;
  path.stop_profile.mode = VelocityMode::Stop;
}

std::vector<CandidatePath> generate_path_set(const IntersectionTopology& topo,
                                             Movement task, double rho_bisect,
                                             double sample_ds) {
  topo.validate();
  std::vector<int> matching;
  for (int i = 0; i < static_cast<int>(topo.connections.size()); ++i) {
    if (topo.connections[i].tag == task) matching.push_back(i);
  }
  if (matching.empty()) {
    throw std::runtime_error(std::string("no connection matches task ") + movement_name(task));
  }
  std::sort(matching.begin(), matching.end(), [&topo](int a, int b) {
    if (topo.connections[a].exit != topo.connections[b].exit)
      return topo.connections[a].exit < topo.connections[b].exit;
    return a < b;
  });
  std::vector<CandidatePath> out;
  out.reserve(matching.size());
  for (int idx : matching) {
    CandidatePath p = build_route(topo, idx, rho_bisect, sample_ds);
    build_velocity_profiles(p, topo);
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

LaneRef lane_from_json(const nlohmann::json& j) {
  LaneRef l;
  l.endpoint = Vec2(j.at("x").get<double>(), j.at("y").get<double>());
  l.heading = j.at("heading_rad").get<double>();
  l.speed_limit = j.at("speed_limit_mps").get<double>();
  l.length = j.at("length_m").get<double>();
  return l;
}

}  // namespace

IntersectionTopology topology_from_json(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  IntersectionTopology topo;
  for (const auto& e : j.at("entrances")) topo.entrances.push_back(lane_from_json(e));
  for (const auto& e : j.at("exits")) topo.exits.push_back(lane_from_json(e));
  for (const auto& c : j.at("connections")) {
    Connection conn;
    conn.entrance = c.at("from").get<int>();
    conn.exit = c.at("to").get<int>();
    conn.tag = movement_from_string(c.at("tag").get<std::string>());
    topo.connections.push_back(conn);
  }
  topo.stop_line_distance = j.at("stop_line_m").get<double>();
  topo.validate();
  return topo;
}

IntersectionTopology load_topology(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open topology file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return topology_from_json(ss.str());
}

std::string path_to_csv(const CandidatePath& path) {
  std::ostringstream os;
  os.precision(9);
  os << "s,x,y,heading,v_pass,v_stop\n";
  for (size_t i = 0; i < path.points.size(); ++i) {
    const double s = path.arc_length[i];
    os << s << ',' << path.points[i].x() << ',' << path.points[i].y() << ','
       << path.headings[i] << ',' << path.pass_profile.speed_at(s) << ','
       << path.stop_profile.speed_at(s) << '\n';
  }
  return os.str();
}

}  // namespace apg

#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace apg {

using Vec2 = Eigen::Vector2d;

enum class Movement { Left, Straight, Right };

const char* movement_name(Movement m);
Movement movement_from_string(const std::string& s);

// One lane endpoint outside the junction: X1 for entrances, X4 for exits.
struct LaneRef {
  Vec2 endpoint{0.0, 0.0};
  double heading = 0.0;        // travel direction vs horizontal axis [rad]
  double speed_limit = 10.0;   // [m/s]
  double length = 50.0;        // straight segment kept outside the junction [m]
};

struct Connection {
  int entrance = 0;
  int exit = 0;
  Movement tag = Movement::Straight;
};

struct IntersectionTopology {
  std::vector<LaneRef> entrances;
  std::vector<LaneRef> exits;
  std::vector<Connection> connections;
  double stop_line_distance = 5.0;  // from X1, back along the entrance lane [m]

  void validate() const;  // throws on bad lane indices / non-finite headings
};

struct ControlPointResult {
  Vec2 x2;
  Vec2 x3;
  bool degenerate_entrance = false;  // projection foot collapsed onto X1
  bool degenerate_exit = false;      // projection foot collapsed onto X4
};

// Middle Bezier control points from the entrance/exit lines. rho in (0,1).
ControlPointResult compute_control_points(const Vec2& x1, double theta_in,
                                          const Vec2& x4, double theta_out,
                                          double rho_bisect);

// Cubic Bezier through (x1, x2, x3, x4); t must lie in [0,1].
Vec2 bezier_point(const Vec2& x1, const Vec2& x2, const Vec2& x3,
                  const Vec2& x4, double t);
Vec2 bezier_tangent(const Vec2& x1, const Vec2& x2, const Vec2& x3,
                    const Vec2& x4, double t);

enum class VelocityMode { Pass, Stop };

// Spatial speed profile over one candidate path. Evaluation only needs the
// path landmarks (stop line, junction exit) and the entrance speed limit.
struct VelocityProfile {
  VelocityMode mode = VelocityMode::Pass;
  double v_limit = 10.0;     // entrance lane speed limit [m/s]
  double s_stop_line = 0.0;  // arc length of the stop line
  double s_junction_exit = 0.0;
  double decel_zone = 30.0;  // stop-mode braking distance before the line [m]

  double speed_at(double s) const;
};

struct CandidatePath {
  std::vector<Vec2> points;
  std::vector<double> headings;    // tangent angle per sample [rad]
  std::vector<double> arc_length;  // cumulative, arc_length[0] == 0
  Movement tag = Movement::Straight;
  int entrance_index = 0;
  int exit_index = 0;
  double s_stop_line = 0.0;
  double s_curve_start = 0.0;  // arc length of X1
  double s_junction_exit = 0.0;  // arc length of X4
  VelocityProfile pass_profile;
  VelocityProfile stop_profile;

  double total_length() const { return arc_length.back(); }
  // Index of the sample closest to p.
  int closest_index(const Vec2& p) const;
  // Continuous foot point on the sampled polyline: arc length, position and
  // interpolated tangent heading. Snapping to the nearest sample instead
  // would alias the longitudinal error by up to half the sample spacing.
  struct Projection {
    double s = 0.0;
    Vec2 point{0.0, 0.0};
    double heading = 0.0;
  };
  Projection project(const Vec2& p) const;
  Vec2 point_at(double s) const;
  double heading_at(double s) const;
  const VelocityProfile& profile(VelocityMode m) const {
    return m == VelocityMode::Pass ? pass_profile : stop_profile;
  }
};

// Route geometry for one connection: straight entrance, cubic Bezier inside
// the junction re-sampled to near-uniform arc length, straight exit.
CandidatePath build_route(const IntersectionTopology& topo, int connection_index,
                          double rho_bisect, double sample_ds);

// Attaches the pass/stop profiles of the given path in place.
void build_velocity_profiles(CandidatePath& path, const IntersectionTopology& topo,
                             double decel_zone = 30.0);

// All candidate paths for one movement task, ordered by exit index.
std::vector<CandidatePath> generate_path_set(const IntersectionTopology& topo,
                                             Movement task, double rho_bisect = 0.6,
                                             double sample_ds = 0.5);

IntersectionTopology topology_from_json(const std::string& json_text);
IntersectionTopology load_topology(const std::string& path);

// CSV columns: s,x,y,heading,v_pass,v_stop
std::string path_to_csv(const CandidatePath& path);

}  // namespace apg

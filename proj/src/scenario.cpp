#include "apg/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace apg {

using nlohmann::json;

namespace {

json lane_to_json(const LaneRef& l) {
  return {{"x", l.endpoint.x()},
          {"y", l.endpoint.y()},
          {"heading_rad", l.heading},
          {"speed_limit_mps", l.speed_limit},
          {"length_m", l.length}};
}

json topology_to_json_obj(const IntersectionTopology& t) {
  json j;
  j["entrances"] = json::array();
  for (const auto& l : t.entrances) j["entrances"].push_back(lane_to_json(l));
  j["exits"] = json::array();
  for (const auto& l : t.exits) j["exits"].push_back(lane_to_json(l));
  j["connections"] = json::array();
  for (const auto& c : t.connections) {
    j["connections"].push_back(
        {{"from", c.entrance}, {"to", c.exit}, {"tag", movement_name(c.tag)}});
  }
  j["stop_line_m"] = t.stop_line_distance;
  return j;
}

json kind_noise_to_json(const KindNoise& k) {
  auto f = [](const FieldNoise& n) { return json::array({n.mean, n.std}); };
  return {{"p_x", f(k.p_x)},   {"p_y", f(k.p_y)},     {"v", f(k.v)},
          {"phi", f(k.phi)},   {"L", f(k.length)},    {"W", f(k.width)}};
}

void kind_noise_from_json(const json& j, KindNoise& k) {
  auto f = [&](const char* name, FieldNoise& n) {
    if (!j.contains(name)) return;
    n.mean = j.at(name).at(0).get<double>();
    n.std = j.at(name).at(1).get<double>();
  };
  f("p_x", k.p_x);
  f("p_y", k.p_y);
  f("v", k.v);
  f("phi", k.phi);
  f("L", k.length);
  f("W", k.width);
}

}  // namespace

std::string scenario_to_json(const Scenario& sc) {
  json j;
  j["name"] = sc.name;
  j["topology"] = topology_to_json_obj(sc.topology);
  j["traffic"] = {{"pedestrian_rate_per_h", sc.traffic.pedestrian_rate_per_h},
                  {"cyclist_rate_per_h", sc.traffic.cyclist_rate_per_h},
                  {"vehicle_rate_per_h", sc.traffic.vehicle_rate_per_h},
                  {"seed", sc.traffic.seed},
                  {"overspeed_fraction", sc.traffic.overspeed_fraction},
                  {"overspeed_factor", sc.traffic.overspeed_factor},
                  {"rounding_fraction", sc.traffic.rounding_fraction},
                  {"max_agents", sc.traffic.max_agents}};
  j["signal"] = {{"green", sc.signal.green_s},
                 {"yellow", sc.signal.yellow_s},
                 {"red", sc.signal.red_s},
                 {"approach_offsets", sc.signal.approach_offsets}};
  j["perception"] = {
      {"lidar", {{"range", sc.perception.lidar.range}, {"half_fov", sc.perception.lidar.half_fov}}},
      {"camera",
       {{"range", sc.perception.camera.range}, {"half_fov", sc.perception.camera.half_fov}}},
      {"radar", {{"range", sc.perception.radar.range}, {"half_fov", sc.perception.radar.half_fov}}}};
  j["noise"] = {{"vehicle", kind_noise_to_json(sc.noise.vehicle)},
                {"cyclist", kind_noise_to_json(sc.noise.cyclist)},
                {"pedestrian", kind_noise_to_json(sc.noise.pedestrian)}};
  j["vehicle"] = {{"k_f", sc.vehicle.k_f}, {"k_r", sc.vehicle.k_r}, {"L_f", sc.vehicle.l_f},
                  {"L_r", sc.vehicle.l_r}, {"mass", sc.vehicle.mass}, {"I_z", sc.vehicle.i_z},
                  {"dt", sc.vehicle.dt}};
  j["ego"] = {{"length", sc.ego_geometry.length},
              {"width", sc.ego_geometry.width},
              {"safety_margin", sc.ego_geometry.safety_margin},
              {"entrance", sc.ego_entrance},
              {"task", movement_name(sc.task)}};
  j["planner"] = {{"rho_bisect", sc.rho_bisect}, {"sample_ds", sc.sample_ds}};
  return j.dump(2);
}

Scenario scenario_from_json(const std::string& json_text) {
  const json j = json::parse(json_text);
  Scenario sc;
  if (j.contains("name")) sc.name = j.at("name").get<std::string>();
  sc.topology = topology_from_json(j.at("topology").dump());
  if (j.contains("traffic")) {
    const auto& t = j.at("traffic");
    auto get = [&](const char* k, double& v) {
      if (t.contains(k)) v = t.at(k).get<double>();
    };
    get("pedestrian_rate_per_h", sc.traffic.pedestrian_rate_per_h);
    get("cyclist_rate_per_h", sc.traffic.cyclist_rate_per_h);
    get("vehicle_rate_per_h", sc.traffic.vehicle_rate_per_h);
    get("overspeed_fraction", sc.traffic.overspeed_fraction);
    get("overspeed_factor", sc.traffic.overspeed_factor);
    get("rounding_fraction", sc.traffic.rounding_fraction);
    if (t.contains("seed")) sc.traffic.seed = t.at("seed").get<std::uint64_t>();
    if (t.contains("max_agents")) sc.traffic.max_agents = t.at("max_agents").get<int>();
  }
  if (j.contains("signal")) {
    const auto& s = j.at("signal");
    if (s.contains("green")) sc.signal.green_s = s.at("green").get<double>();
    if (s.contains("yellow")) sc.signal.yellow_s = s.at("yellow").get<double>();
    if (s.contains("red")) sc.signal.red_s = s.at("red").get<double>();
    if (s.contains("approach_offsets"))
      sc.signal.approach_offsets = s.at("approach_offsets").get<std::vector<double>>();
  }
  if (j.contains("perception")) {
    const auto& p = j.at("perception");
    auto get = [&](const char* k, SensorSpec& spec) {
      if (!p.contains(k)) return;
      spec.range = p.at(k).at("range").get<double>();
      spec.half_fov = p.at(k).at("half_fov").get<double>();
    };
    get("lidar", sc.perception.lidar);
    get("camera", sc.perception.camera);
    get("radar", sc.perception.radar);
  }
  if (j.contains("noise")) {
    const auto& n = j.at("noise");
    if (n.contains("vehicle")) kind_noise_from_json(n.at("vehicle"), sc.noise.vehicle);
    if (n.contains("cyclist")) kind_noise_from_json(n.at("cyclist"), sc.noise.cyclist);
    if (n.contains("pedestrian")) kind_noise_from_json(n.at("pedestrian"), sc.noise.pedestrian);
  }
  if (j.contains("vehicle")) {
    const auto& v = j.at("vehicle");
    auto get = [&](const char* k, double& out) {
      if (v.contains(k)) out = v.at(k).get<double>();
    };
    get("k_f", sc.vehicle.k_f);
    get("k_r", sc.vehicle.k_r);
    get("L_f", sc.vehicle.l_f);
    get("L_r", sc.vehicle.l_r);
    get("mass", sc.vehicle.mass);
    get("I_z", sc.vehicle.i_z);
    get("dt", sc.vehicle.dt);
  }
  if (j.contains("ego")) {
    const auto& e = j.at("ego");
    if (e.contains("length")) sc.ego_geometry.length = e.at("length").get<double>();
    if (e.contains("width")) sc.ego_geometry.width = e.at("width").get<double>();
    if (e.contains("safety_margin"))
      sc.ego_geometry.safety_margin = e.at("safety_margin").get<double>();
    if (e.contains("entrance")) sc.ego_entrance = e.at("entrance").get<int>();
    if (e.contains("task")) sc.task = movement_from_string(e.at("task").get<std::string>());
  }
  if (j.contains("planner")) {
    const auto& p = j.at("planner");
    if (p.contains("rho_bisect")) sc.rho_bisect = p.at("rho_bisect").get<double>();
    if (p.contains("sample_ds")) sc.sample_ds = p.at("sample_ds").get<double>();
  }
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return scenario_from_json(ss.str());
}

namespace {

// Four-approach crossroad, right-hand traffic, ego axis pointing north.
// n_ns / n_ew lanes per direction; skew rotates the east-west axis; median
// shifts lanes outward to model a green belt.
IntersectionTopology make_cross(int n_ns, int n_ew, double half_x, double half_y,
                                double skew, double median) {
  constexpr double kLaneW = 3.5;
  constexpr double kEntranceLen = 60.0;
  constexpr double kExitLen = 45.0;
  constexpr double kVLimit = 37.5 / 3.6;

  IntersectionTopology t;
  t.stop_line_distance = 2.0;

  auto offset = [&](int i) { return median + (i + 0.5) * kLaneW; };
  auto add_lane = [&](std::vector<LaneRef>& lanes, const Vec2& p, double heading,
                      double length) {
    LaneRef l;
    l.endpoint = p;
    l.heading = heading;
    l.speed_limit = kVLimit;
    l.length = length;
    lanes.push_back(l);
  };

  const double ce = std::cos(skew), se = std::sin(skew);
  auto ew = [&](double along, double across) {  // east-west axis frame
    return Vec2(along * ce - across * se, along * se + across * ce);
  };

  // Entrances: south lanes first (the ego approach), then north, east, west.
  std::vector<int> south, north, east, west;
  for (int i = 0; i < n_ns; ++i) {
    south.push_back(static_cast<int>(t.entrances.size()));
    add_lane(t.entrances, Vec2(offset(i), -half_y), M_PI / 2.0, kEntranceLen);
  }
  for (int i = 0; i < n_ns; ++i) {
    north.push_back(static_cast<int>(t.entrances.size()));
    add_lane(t.entrances, Vec2(-offset(i), half_y), -M_PI / 2.0, kEntranceLen);
  }
  for (int i = 0; i < n_ew; ++i) {
    east.push_back(static_cast<int>(t.entrances.size()));
    add_lane(t.entrances, ew(half_x, offset(i)), M_PI + skew, kEntranceLen);
  }
  for (int i = 0; i < n_ew; ++i) {
    west.push_back(static_cast<int>(t.entrances.size()));
    add_lane(t.entrances, ew(-half_x, -offset(i)), skew, kEntranceLen);
  }

  // Exits grouped by the side they leave on.
  std::vector<int> x_north, x_south, x_east, x_west;
  for (int i = 0; i < n_ns; ++i) {
    x_north.push_back(static_cast<int>(t.exits.size()));
    add_lane(t.exits, Vec2(offset(i), half_y), M_PI / 2.0, kExitLen);
  }
  for (int i = 0; i < n_ns; ++i) {
    x_south.push_back(static_cast<int>(t.exits.size()));
    add_lane(t.exits, Vec2(-offset(i), -half_y), -M_PI / 2.0, kExitLen);
  }
  for (int i = 0; i < n_ew; ++i) {
    x_east.push_back(static_cast<int>(t.exits.size()));
    add_lane(t.exits, ew(half_x, -offset(i)), skew, kExitLen);
  }
  for (int i = 0; i < n_ew; ++i) {
    x_west.push_back(static_cast<int>(t.exits.size()));
    add_lane(t.exits, ew(-half_x, offset(i)), M_PI + skew, kExitLen);
  }

  auto connect = [&](int from, int to, Movement tag) {
    t.connections.push_back({from, to, tag});
  };
  auto wire_approach = [&](const std::vector<int>& in, const std::vector<int>& straight_out,
                           const std::vector<int>& left_out,
                           const std::vector<int>& right_out) {
    const int n = static_cast<int>(in.size());
    for (int i = 0; i < n; ++i) {
      connect(in[i], straight_out[std::min(i, static_cast<int>(straight_out.size()) - 1)],
              Movement::Straight);
    }
    for (int e : left_out) connect(in[0], e, Movement::Left);           // leftmost lane
    connect(in[n - 1], right_out[0], Movement::Right);                  // rightmost lane
  };
  wire_approach(south, x_north, x_west, x_east);
  wire_approach(north, x_south, x_east, x_west);
  wire_approach(east, x_west, x_south, x_north);
  wire_approach(west, x_east, x_north, x_south);
  return t;
}

}  // namespace

int desk_topology_count() { return 6; }

IntersectionTopology make_desk_topology(int variant) {
  switch (variant) {
    case 0: return make_cross(1, 1, 12.0, 12.0, 0.0, 0.0);   // single-lane regular
    case 1: return make_cross(2, 2, 16.0, 16.0, 0.0, 0.0);   // two-lane regular
    case 2: return make_cross(3, 3, 20.0, 20.0, 0.0, 0.0);   // three-lane regular
    case 3: return make_cross(2, 2, 17.0, 15.0, 0.3, 0.0);   // skewed axes
    case 4: return make_cross(3, 2, 19.0, 15.0, -0.2, 0.0);  // mixed lane counts
    case 5: return make_cross(3, 2, 22.0, 18.0, 0.15, 3.0);  // green-belt median
  }
  throw std::invalid_argument("desk topology variant must lie in [0, 5]");
}

Scenario make_desk_scenario() {
  Scenario sc;
  sc.name = "desk-left-turn";
  sc.topology = make_desk_topology(1);
  sc.task = Movement::Left;
  sc.ego_entrance = 0;
  sc.traffic.vehicle_rate_per_h = 400.0;
  sc.traffic.cyclist_rate_per_h = 100.0;
  sc.traffic.pedestrian_rate_per_h = 100.0;
  return sc;
}

Simulation::Simulation(const Scenario& sc)
    : sc_(sc), world_(sc.topology, sc.traffic, sc.signal) {
  for (const auto& p :
       generate_path_set(sc_.topology, sc_.task, sc_.rho_bisect, sc_.sample_ds)) {
    if (p.entrance_index == sc_.ego_entrance) paths_.push_back(p);
  }
  if (paths_.empty()) {
    throw std::runtime_error("no candidate path for the ego task from the ego entrance");
  }
  reset(sc_.traffic.seed);
}

void Simulation::reset(std::uint64_t seed, int path_index) {
  world_.reset(seed);
  noise_rng_.seed(seed ^ 0xd1b54a32d192ed03ULL);
  if (path_index < 0) {
    path_index_ = static_cast<int>(seed % paths_.size());
  } else {
    set_path(path_index);
  }
  const CandidatePath& path = paths_[path_index_];
  const double s0 = 5.0;
  const Vec2 p = path.point_at(s0);
  ego_ = EgoState{};
  ego_.p_x = p.x();
  ego_.p_y = p.y();
  ego_.phi = path.heading_at(s0);
  ego_.v_x = path.pass_profile.speed_at(s0);
}

void Simulation::set_path(int path_index) {
  if (path_index < 0 || path_index >= static_cast<int>(paths_.size())) {
    throw std::invalid_argument("path index out of range");
  }
  path_index_ = path_index;
}

void Simulation::apply(const Action& u) {
  ego_ = step_ego(ego_, clamp_action(u), sc_.vehicle);
  world_.step(sc_.vehicle.dt);
}

std::vector<ParticipantState> Simulation::perceive_now() {
  return perceive(world_.participants(), ego_, sc_.perception, sc_.noise, noise_rng_);
}

DrivingState Simulation::observe(VelocityMode mode) {
  DrivingState st = build_state(ego_, paths_[path_index_], mode, perceive_now());
  st.path_id = path_index_;
  return st;
}

DrivingState Simulation::observe_for_path(int path_index, VelocityMode mode,
                                          const std::vector<ParticipantState>& perceived) const {
  DrivingState st = build_state(ego_, paths_.at(path_index), mode, perceived);
  st.path_id = path_index;
  return st;
}

double Simulation::worst_violation(const std::vector<ParticipantState>& ground_truth) const {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& p : ground_truth) {
    worst = std::max(worst, safety_g(ego_, sc_.ego_geometry, p));
  }
  return worst;
}

}  // namespace apg

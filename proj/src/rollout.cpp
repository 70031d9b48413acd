#include "apg/rollout.hpp"

#include <cmath>
#include <sstream>

namespace apg {

namespace {

std::string singular_message(double v_x) {
  std::ostringstream os;
  os << "rollout hit a singular dynamics denominator at v_x=" << v_x;
  return os.str();
}

}  // namespace

RolloutSingular::RolloutSingular(double v) : std::runtime_error(singular_message(v)), v_x(v) {}

MLPSpec make_policy_spec(const std::vector<int>& hidden) {
  MLPSpec spec;
  spec.input_dim = kStateDim;
  spec.hidden = hidden;
  spec.output_dim = 2;
  spec.head = HeadKind::Gaussian;
  spec.bound_lo = Eigen::Vector2d(kDDeltaMin, kDAccelMin);
  spec.bound_hi = Eigen::Vector2d(kDDeltaMax, kDAccelMax);
  return spec;
}

MLPSpec make_adversary_spec(const std::vector<int>& hidden) {
  MLPSpec spec;
  spec.input_dim = kStateDim;
  spec.hidden = hidden;
  spec.output_dim = 4 * kParticipantSlots;
  spec.head = HeadKind::Gaussian;
  spec.bound_lo.resize(spec.output_dim);
  spec.bound_hi.resize(spec.output_dim);
  for (int j = 0; j < kParticipantSlots; ++j) {
    spec.bound_lo.segment<4>(4 * j) << -kXiPosBound, -kXiPosBound, kXiVMin, -kXiPhiBound;
    spec.bound_hi.segment<4>(4 * j) << kXiPosBound, kXiPosBound, kXiVMax, kXiPhiBound;
  }
  return spec;
}

MLPSpec make_value_spec(const std::vector<int>& hidden) {
  MLPSpec spec;
  spec.input_dim = kStateDim;
  spec.hidden = hidden;
  spec.output_dim = 1;
  spec.head = HeadKind::ScalarNonneg;
  return spec;
}

EgoNodeState make_ego_nodes(Tape& tape, const EgoState& s) {
  return {tape.constant(s.p_x),  tape.constant(s.p_y),   tape.constant(s.v_x),
          tape.constant(s.v_y),  tape.constant(s.phi),   tape.constant(s.omega),
          tape.constant(s.delta), tape.constant(s.a)};
}

EgoNodeState step_ego_nodes(Tape& tape, const EgoNodeState& s, Tape::Index d_delta,
                            Tape::Index d_a, const EgoParams& p) {
  const double dt = p.dt;
  const double vxv = tape.value(s.v_x);
  const double den_vy_v = p.mass * vxv - dt * (p.k_f + p.k_r);
  const double den_w_v =
      dt * (p.l_f * p.l_f * p.k_f + p.l_r * p.l_r * p.k_r) - p.i_z * vxv;
  if (std::abs(den_vy_v) < 1e-9 || std::abs(den_w_v) < 1e-9) throw RolloutSingular(vxv);

  auto scale = [&](Tape::Index x, double alpha) { return tape.axpb(x, alpha, 0.0); };
  const double a_kf = p.l_f * p.k_f - p.l_r * p.k_r;
  const Tape::Index cphi = tape.cos(s.phi);
  const Tape::Index sphi = tape.sin(s.phi);
  EgoNodeState n;
  n.p_x = tape.add(s.p_x,
                   scale(tape.sub(tape.mul(s.v_x, cphi), tape.mul(s.v_y, sphi)), dt));
  n.p_y = tape.add(s.p_y,
                   scale(tape.add(tape.mul(s.v_x, sphi), tape.mul(s.v_y, cphi)), dt));
  n.v_x = tape.add(s.v_x, scale(tape.add(s.a, tape.mul(s.v_y, s.omega)), dt));
  {
    Tape::Index num = scale(tape.mul(s.v_x, s.v_y), p.mass);
    num = tape.add(num, scale(s.omega, dt * a_kf));
    num = tape.add(num, scale(tape.mul(s.delta, s.v_x), -dt * p.k_f));
    num = tape.add(num, scale(tape.mul(tape.square(s.v_x), s.omega), -dt * p.mass));
    const Tape::Index den = tape.axpb(s.v_x, p.mass, -dt * (p.k_f + p.k_r));
    n.v_y = tape.div(num, den);
  }
  n.phi = tape.add(s.phi, scale(s.omega, dt));
  {
    Tape::Index num = scale(tape.mul(s.omega, s.v_x), -p.i_z);
    num = tape.add(num, scale(s.v_y, -dt * a_kf));
    num = tape.add(num, scale(tape.mul(s.delta, s.v_x), dt * p.l_f * p.k_f));
    const Tape::Index den = tape.axpb(
        s.v_x, -p.i_z, dt * (p.l_f * p.l_f * p.k_f + p.l_r * p.l_r * p.k_r));
    n.omega = tape.div(num, den);
  }
  n.delta = tape.clamp(tape.add(s.delta, scale(d_delta, dt)), kDeltaMin, kDeltaMax);
  n.a = tape.clamp(tape.add(s.a, scale(d_a, dt)), kAccelMin, kAccelMax);
  return n;
}

ParticipantNodeState step_participant_nodes(Tape& tape, const ParticipantNodeState& s,
                                            Tape::Index xi_x, Tape::Index xi_y,
                                            Tape::Index xi_v, Tape::Index xi_phi,
                                            double dt) {
  auto scale = [&](Tape::Index x, double alpha) { return tape.axpb(x, alpha, 0.0); };
  ParticipantNodeState n;
  n.turn_radius = s.turn_radius;
  n.p_x = tape.add(tape.add(s.p_x, scale(tape.mul(s.v, tape.cos(s.phi)), dt)), xi_x);
  n.p_y = tape.add(tape.add(s.p_y, scale(tape.mul(s.v, tape.sin(s.phi)), dt)), xi_y);
  n.v = tape.max0(tape.add(s.v, xi_v));
  if (std::isinf(s.turn_radius)) {
    n.phi = tape.add(s.phi, xi_phi);
  } else {
    n.phi = tape.add(tape.add(s.phi, scale(s.v, dt / s.turn_radius)), xi_phi);
  }
  return n;
}

namespace {

struct SlotNodes {
  int slot = 0;
  ParticipantNodeState node;
  double length = 1.0, width = 1.0;
  ParticipantKind kind = ParticipantKind::Vehicle;
};

}  // namespace

RolloutGraph build_rollout(Tape& tape, int policy_bank, const MLPSpec& policy_spec,
                           int adversary_bank, const MLPSpec& adversary_spec,
                           const DrivingState& s0, const CandidatePath& path,
                           const EgoParams& params, const EgoGeometry& geom,
                           const RolloutOptions& opt, std::mt19937_64& policy_rng,
                           std::mt19937_64& adversary_rng) {
  const double dt = params.dt;
  auto k = [&](double v) { return tape.constant(v); };
  auto scale = [&](Tape::Index x, double alpha) { return tape.axpb(x, alpha, 0.0); };

  EgoNodeState ego = make_ego_nodes(
      tape, {s0.features[0], s0.features[1], s0.features[2], s0.features[3],
             s0.features[4], s0.features[5], s0.features[6], s0.features[7]});

  // Recover absolute participant states from the relative slot features.
  std::vector<SlotNodes> others;
  {
    const double c0 = std::cos(s0.features[4]), sn0 = std::sin(s0.features[4]);
    for (int j = 0; j < kParticipantSlots; ++j) {
      if (!s0.slots[j].occupied) continue;
      const int base = kEgoDim + kTrackDim + j * kSlotDim;
      const double rx = s0.features[base + 0], ry = s0.features[base + 1];
      SlotNodes sn;
      sn.slot = j;
      sn.node.p_x = k(s0.features[0] + c0 * rx - sn0 * ry);
      sn.node.p_y = k(s0.features[1] + sn0 * rx + c0 * ry);
      sn.node.v = k(s0.features[base + 2]);
      sn.node.phi = k(s0.features[4] + s0.features[base + 3]);
      sn.node.turn_radius = s0.slots[j].turn_radius;
      sn.length = s0.features[base + 4];
      sn.width = s0.features[base + 5];
      sn.kind = s0.slots[j].kind;
      others.push_back(sn);
    }
  }

  const double placeholder[kSlotDim] = {0.0, kPlaceholderDistance, 0.0, 0.0, 1.0, 1.0};
  const Tape::Index placeholder_block =
      tape.constant(std::span<const double>{placeholder, kSlotDim});
  const Tape::Index zero_noise = tape.constant(Eigen::Vector4d::Zero().eval());

  const double r_ego = std::max(geom.width / 2.0, geom.length / 4.0);
  const VelocityProfile& profile = path.profile(s0.mode);

  auto dist = [&](Tape::Index ax, Tape::Index ay, Tape::Index bx, Tape::Index by) {
    return tape.sqrt(
        tape.add(tape.square(tape.sub(ax, bx)), tape.square(tape.sub(ay, by))));
  };

  RolloutGraph g;
  Tape::Index track_sum = -1;
  Tape::Index safe_sum = -1;

  std::normal_distribution<double> unit(0.0, 1.0);

  for (int i = 0; i < opt.horizon; ++i) {
    // Tracking errors in the frame of the closest path sample.
    const Vec2 ep(tape.value(ego.p_x), tape.value(ego.p_y));
    const CandidatePath::Projection pj = path.project(ep);
    // The route is over once the ego reaches its last metre; past the final
    // sample the longitudinal "error" just measures overrun, and charging it
    // teaches the policy to brake hard on the closing straight.
    if (i > 0 && pj.s > path.total_length() - 1.0) break;
    const Vec2 pr = pj.point;
    const double th = pj.heading;
    const double v_ref = profile.speed_at(pj.s);
    const double c = std::cos(th), s = std::sin(th);
    const Tape::Index dxn = tape.axpb(ego.p_x, 1.0, -pr.x());
    const Tape::Index dyn = tape.axpb(ego.p_y, 1.0, -pr.y());
    const Tape::Index t_dx = tape.add(scale(dxn, c), scale(dyn, s));
    const Tape::Index t_dy = tape.add(scale(dxn, -s), scale(dyn, c));
    const Tape::Index t_dv = tape.axpb(ego.v_x, 1.0, -v_ref);
    const double raw_dphi = tape.value(ego.phi) - th;
    const Tape::Index t_dphi =
        tape.axpb(ego.phi, 1.0, -th + (wrap_angle(raw_dphi) - raw_dphi));

    // Network input: ego, track errors, then the relative slot features.
    std::vector<Tape::Index> parts;
    parts.reserve(kEgoDim + kTrackDim + kParticipantSlots);
    parts.insert(parts.end(), {ego.p_x, ego.p_y, ego.v_x, ego.v_y, ego.phi, ego.omega,
                               ego.delta, ego.a, t_dx, t_dy, t_dv, t_dphi});
    const Tape::Index ce = tape.cos(ego.phi);
    const Tape::Index se = tape.sin(ego.phi);
    size_t next_other = 0;
    for (int j = 0; j < kParticipantSlots; ++j) {
      if (next_other >= others.size() || others[next_other].slot != j) {
        parts.push_back(placeholder_block);
        continue;
      }
      const SlotNodes& o = others[next_other++];
      const Tape::Index dxp = tape.sub(o.node.p_x, ego.p_x);
      const Tape::Index dyp = tape.sub(o.node.p_y, ego.p_y);
      const Tape::Index rx = tape.add(tape.mul(ce, dxp), tape.mul(se, dyp));
      const Tape::Index ry = tape.sub(tape.mul(ce, dyp), tape.mul(se, dxp));
      const double raw_rphi = tape.value(o.node.phi) - tape.value(ego.phi);
      const Tape::Index rphi =
          tape.axpb(tape.sub(o.node.phi, ego.phi), 1.0, wrap_angle(raw_rphi) - raw_rphi);
      const Tape::Index block = tape.concat(
          std::array<Tape::Index, 6>{rx, ry, o.node.v, rphi, k(o.length), k(o.width)});
      parts.push_back(block);
    }
    const Eigen::VectorXd& scaling = state_input_scaling();
    const Tape::Index input = tape.scale_vec(
        tape.concat({parts.data(), parts.size()}),
        {scaling.data(), static_cast<size_t>(scaling.size())});

    const GaussianOut pol = mlp_forward(tape, policy_bank, policy_spec, input);
    Tape::Index u;
    if (opt.deterministic) {
      u = pol.mean;
    } else {
      Eigen::VectorXd z(2);
      z << unit(policy_rng), unit(policy_rng);
      u = gaussian_sample(tape, policy_spec, pol, z);
    }
    const Tape::Index u_ddelta = tape.slice(u, 0, 1);
    const Tape::Index u_da = tape.slice(u, 1, 1);
    g.step_action.push_back(u);

    // Stage utility on the current state and action.
    Tape::Index l = scale(tape.square(t_dv), 0.03);
    l = tape.add(l, scale(tape.square(t_dx), 0.8));
    l = tape.add(l, scale(tape.square(t_dy), 0.8));
    l = tape.add(l, scale(tape.square(t_dphi), 30.0));
    l = tape.add(l, scale(tape.square(ego.omega), 0.02));
    l = tape.add(l, scale(tape.square(ego.delta), 5.0));
    l = tape.add(l, scale(tape.square(ego.a), 0.05));
    l = tape.add(l, scale(tape.square(u_ddelta), 0.4));
    l = tape.add(l, scale(tape.square(u_da), 0.1));
    g.step_utility.push_back(l);
    track_sum = (track_sum < 0) ? l : tape.add(track_sum, l);

    Tape::Index xi = -1;
    if (opt.use_adversary) {
      const GaussianOut adv = mlp_forward(tape, adversary_bank, adversary_spec, input);
      if (opt.deterministic) {
        xi = adv.mean;
      } else {
        Eigen::VectorXd z(adversary_spec.output_dim);
        for (int t = 0; t < z.size(); ++t) z[t] = unit(adversary_rng);
        xi = gaussian_sample(tape, adversary_spec, adv, z);
      }
      if (opt.zero_noise) {
        xi = tape.constant(Eigen::VectorXd::Zero(adversary_spec.output_dim).eval());
      }
    }
    g.step_noise.push_back(xi);

    ego = step_ego_nodes(tape, ego, u_ddelta, u_da, params);

    // Participant transitions under the adversarial (or zero) noise.
    for (SlotNodes& o : others) {
      Tape::Index xi_x, xi_y, xi_v, xi_phi;
      if (xi >= 0) {
        xi_x = tape.slice(xi, 4 * o.slot + 0, 1);
        xi_y = tape.slice(xi, 4 * o.slot + 1, 1);
        xi_v = tape.slice(xi, 4 * o.slot + 2, 1);
        xi_phi = tape.slice(xi, 4 * o.slot + 3, 1);
      } else {
        xi_x = xi_y = xi_v = xi_phi = tape.slice(zero_noise, 0, 1);
      }
      o.node = step_participant_nodes(tape, o.node, xi_x, xi_y, xi_v, xi_phi, dt);
    }

    // Clearance penalties on the successor state.
    Tape::Index pen = -1;
    if (!others.empty()) {
      const double off_e = geom.length / 4.0;
      const Tape::Index cn = tape.cos(ego.phi);
      const Tape::Index sn = tape.sin(ego.phi);
      const Tape::Index e1x = tape.add(ego.p_x, scale(cn, off_e));
      const Tape::Index e1y = tape.add(ego.p_y, scale(sn, off_e));
      const Tape::Index e2x = tape.add(ego.p_x, scale(cn, -off_e));
      const Tape::Index e2y = tape.add(ego.p_y, scale(sn, -off_e));
      for (const SlotNodes& o : others) {
        Tape::Index min_d;
        double r_o;
        if (o.kind == ParticipantKind::Pedestrian) {
          r_o = std::max(o.length, o.width) / 2.0;
          min_d = tape.min2(dist(e1x, e1y, o.node.p_x, o.node.p_y),
                            dist(e2x, e2y, o.node.p_x, o.node.p_y));
        } else {
          r_o = std::max(o.width / 2.0, o.length / 4.0);
          const double off_o = o.length / 4.0;
          const Tape::Index ocn = tape.cos(o.node.phi);
          const Tape::Index osn = tape.sin(o.node.phi);
          const Tape::Index o1x = tape.add(o.node.p_x, scale(ocn, off_o));
          const Tape::Index o1y = tape.add(o.node.p_y, scale(osn, off_o));
          const Tape::Index o2x = tape.add(o.node.p_x, scale(ocn, -off_o));
          const Tape::Index o2y = tape.add(o.node.p_y, scale(osn, -off_o));
          min_d = tape.min2(
              tape.min2(dist(e1x, e1y, o1x, o1y), dist(e1x, e1y, o2x, o2y)),
              tape.min2(dist(e2x, e2y, o1x, o1y), dist(e2x, e2y, o2x, o2y)));
        }
        const double d_safe = r_ego + r_o + geom.safety_margin;
        const Tape::Index gv = tape.axpb(min_d, -1.0, d_safe);
        const Tape::Index p = tape.square(tape.max0(gv));
        pen = (pen < 0) ? p : tape.add(pen, p);
      }
    } else {
      pen = k(0.0);
    }
    g.step_penalty.push_back(pen);
    safe_sum = (safe_sum < 0) ? pen : tape.add(safe_sum, pen);
  }

  g.j_track = (track_sum < 0) ? k(0.0) : track_sum;
  g.j_safe = (safe_sum < 0) ? k(0.0) : safe_sum;
  g.j_pi = tape.add(g.j_track, scale(g.j_safe, opt.rho_penalty));
  return g;
}

}  // namespace apg

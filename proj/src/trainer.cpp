#include "apg/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace apg {

const char* train_mode_name(TrainMode m) { return m == TrainMode::APG ? "apg" : "dpg"; }

void TrainerConfig::validate() const {
  if (horizon < 1) throw std::invalid_argument("trainer: horizon must be >= 1");
  if (update_interval < 1) throw std::invalid_argument("trainer: update_interval must be >= 1");
  if (rho_penalty <= 0.0) throw std::invalid_argument("trainer: rho_penalty must be > 0");
  if (batch < 1) throw std::invalid_argument("trainer: batch must be >= 1");
  if (buffer_capacity < batch) throw std::invalid_argument("trainer: buffer smaller than batch");
}

TrainerConfig desk_trainer_config() {
  TrainerConfig cfg;
  cfg.batch = 8;
  return cfg;
}

RolloutBuffer::RolloutBuffer(int capacity) : capacity_(capacity) {
  if (capacity < 1) throw std::invalid_argument("buffer capacity must be >= 1");
  items_.reserve(capacity);
}

void RolloutBuffer::push(const DrivingState& s) {
  if (static_cast<int>(items_.size()) < capacity_) {
    items_.push_back(s);
  } else {
    items_[next_] = s;
    next_ = (next_ + 1) % capacity_;
  }
}

std::vector<int> RolloutBuffer::fetch(int batch, std::mt19937_64& rng) const {
  const int n = static_cast<int>(items_.size());
  const int take = std::min(batch, n);
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  for (int i = 0; i < take; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(take);
  return idx;
}

namespace {

double ground_truth_penalty(const Simulation& sim) {
  double sum = 0.0;
  for (const ParticipantState& p : sim.world().participants()) {
    sum += penalty(safety_g(sim.ego(), sim.scenario().ego_geometry, p));
  }
  return sum;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  return x;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

double total_average_return(const Scenario& sc, const MLPSpec& policy_spec,
                            const ParameterVector& policy, double rho_penalty,
                            int episodes, int steps, std::uint64_t seed) {
  Simulation sim(sc);
  const Eigen::VectorXd& scaling = state_input_scaling();
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    sim.reset(mix_seed(seed, e), -1);
    for (int t = 0; t < steps; ++t) {
      // A clearly reversing ego has left the model's envelope; near the
      // singular speed the stage utilities overflow, so end the episode here.
      if (sim.ego().v_x < -1.0) break;
      const VelocityMode mode = sim.training_mode();
      const DrivingState s = sim.observe(mode);
      const EvalOut out = mlp_eval(policy_spec, policy, scaling.cwiseProduct(s.features));
      const Action u = clamp_action({out.mean[0], out.mean[1]});
      total += utility(s.track(), sim.ego(), u);
      try {
        sim.apply(u);
      } catch (const std::runtime_error&) {
        break;  // singular dynamics; score what we have
      }
      total += rho_penalty * ground_truth_penalty(sim);
    }
  }
  return total / episodes;
}

TrainResult train(const Scenario& sc, const TrainerConfig& cfg, TrainMode mode,
                  const std::string& out_dir) {
  cfg.validate();
  const auto t_start = std::chrono::steady_clock::now();
  const bool apg = mode == TrainMode::APG;

  const MLPSpec policy_spec = make_policy_spec(cfg.hidden);
  const MLPSpec adversary_spec = make_adversary_spec(cfg.hidden);
  const MLPSpec value_spec = make_value_spec(cfg.hidden);

  TrainResult res;
  res.policy = init_params(policy_spec, mix_seed(cfg.seed, 101));
  res.value = init_params(value_spec, mix_seed(cfg.seed, 202));
  res.adversary = init_params(adversary_spec, mix_seed(cfg.seed, 303));

  Eigen::VectorXd policy_g = Eigen::VectorXd::Zero(res.policy.data.size());
  Eigen::VectorXd value_g = Eigen::VectorXd::Zero(res.value.data.size());
  Eigen::VectorXd adversary_g = Eigen::VectorXd::Zero(res.adversary.data.size());
  AdamState policy_adam(policy_g.size());
  AdamState value_adam(value_g.size());
  AdamState adversary_adam(adversary_g.size());

  Simulation sim(sc);
  RolloutBuffer buffer(cfg.buffer_capacity);
  std::mt19937_64 env_rng(mix_seed(cfg.seed, 1));
  std::mt19937_64 policy_rng(mix_seed(cfg.seed, 2));
  std::mt19937_64 adversary_rng(mix_seed(cfg.seed, 3));
  std::mt19937_64 fetch_rng(mix_seed(cfg.seed, 4));

  const Eigen::VectorXd& scaling = state_input_scaling();
  std::uint64_t episode = 0;
  int ep_step = cfg.episode_len;  // forces a reset on the first step
  VelocityMode ep_mode = VelocityMode::Pass;

  auto env_step = [&] {
    if (ep_step >= cfg.episode_len) {
      sim.reset(mix_seed(cfg.seed, 1000 + episode++), -1);
      // Start episodes anywhere along the route, in either velocity mode and
      // off the reference; a fixed start at the route head leaves the curve
      // exit and the stop profile outside the training data. The speed and
      // lateral offsets are wide on purpose: recovery states (slow and
      // offset after a curve) otherwise never appear in the buffer and the
      // policy never learns to speed back up or steer back in.
      const CandidatePath& path = sim.current_path();
      std::uniform_real_distribution<double> us(5.0, path.total_length() - 15.0);
      std::uniform_real_distribution<double> uy(-1.0, 1.0), uh(-0.1, 0.1),
          uv(-3.0, 1.5);
      const double s0 = us(env_rng);
      ep_mode = (env_rng() & 1) ? VelocityMode::Pass : VelocityMode::Stop;
      const Vec2 p = path.point_at(s0);
      const double heading = path.heading_at(s0);
      const double dy = uy(env_rng);
      EgoState& e = sim.ego();
      e = EgoState{};
      e.p_x = p.x() - std::sin(heading) * dy;
      e.p_y = p.y() + std::cos(heading) * dy;
      e.phi = heading + uh(env_rng);
      e.v_x = std::max(0.0, path.profile(ep_mode).speed_at(s0) + uv(env_rng));
      ep_step = 0;
    }
    // Abandon episodes where exploration drove the ego into reverse. Left
    // unchecked, sustained braking walks v_x toward the speed where a bicycle
    // state-update denominator crosses zero, and rollouts from nearby buffered
    // states amplify through the tiny denominator until the loss overflows.
    if (sim.ego().v_x < -1.0) {
      ep_step = cfg.episode_len;
      return;
    }
    const DrivingState s = sim.observe(ep_mode);
    buffer.push(s);
    const EvalOut out = mlp_eval(policy_spec, res.policy, scaling.cwiseProduct(s.features));
    const Action u_raw = [&] {
      const Eigen::VectorXd v = gaussian_sample_eval(policy_spec, out, env_rng);
      return Action{v[0], v[1]};
    }();
    try {
      sim.apply(clamp_action(u_raw));
    } catch (const std::runtime_error&) {
      ep_step = cfg.episode_len;
      return;
    }
    ++ep_step;
    // Roll over once the route is done; the path set has nothing left to track.
    const CandidatePath& path = sim.current_path();
    const int ci = path.closest_index({sim.ego().p_x, sim.ego().p_y});
    if (path.arc_length[ci] > path.total_length() - 1.0) ep_step = cfg.episode_len;
  };

  while (buffer.size() < std::min(cfg.batch, cfg.buffer_capacity)) env_step();

  std::ofstream csv;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    csv.open(out_dir + "/losses.csv");
    if (!csv) throw std::runtime_error("cannot write losses.csv under " + out_dir);
    csv << "iteration,J_track,J_safe,J_pi,J_v,TAR\n";
  }

  auto checkpoint = [&](std::int64_t iter) {
    res.checkpoint_iterations.push_back(iter);
    if (out_dir.empty()) return;
    char tag[16];
    std::snprintf(tag, sizeof(tag), "%06lld", static_cast<long long>(iter));
    res.policy.iteration = iter;
    res.value.iteration = iter;
    res.adversary.iteration = iter;
    save_params(res.policy, out_dir + "/policy_" + tag + ".bin");
    save_params(res.value, out_dir + "/value_" + tag + ".bin");
    if (apg) save_params(res.adversary, out_dir + "/adversary_" + tag + ".bin");
  };
  checkpoint(0);

  Tape tape;
  Tape value_tape;
  RolloutOptions opt;
  opt.horizon = cfg.horizon;
  opt.rho_penalty = cfg.rho_penalty;
  opt.use_adversary = apg;
  opt.zero_noise = cfg.zero_adversary;

  double win_track = 0.0, win_safe = 0.0, win_pi = 0.0, win_v = 0.0;
  int win_n = 0;
  for (std::int64_t k = 1; k <= cfg.total_iterations; ++k) {
    for (int i = 0; i < cfg.env_steps_per_iter; ++i) env_step();

    policy_g.setZero();
    value_g.setZero();
    adversary_g.setZero();
    double j_track = 0.0, j_safe = 0.0, j_pi = 0.0, j_v = 0.0;
    int n_ok = 0;

    for (int idx : buffer.fetch(cfg.batch, fetch_rng)) {
      const DrivingState& s = buffer[idx];
      const CandidatePath& path = sim.paths()[s.path_id];
      tape.clear();
      const int pb = tape.add_bank(res.policy.data.data(), policy_g.data());
      const int ab =
          apg ? tape.add_bank(res.adversary.data.data(), adversary_g.data()) : pb;
      RolloutGraph g;
      try {
        g = build_rollout(tape, pb, policy_spec, ab, adversary_spec, s, path, sc.vehicle,
                          sc.ego_geometry, opt, policy_rng, adversary_rng);
      } catch (const RolloutSingular&) {
        ++res.aborted_rollouts;
        continue;
      }
      tape.backward(g.j_pi);
      j_track += tape.value(g.j_track);
      j_safe += tape.value(g.j_safe);
      j_pi += tape.value(g.j_pi);

      const double target = tape.value(g.j_track);
      value_tape.clear();
      const int vb = value_tape.add_bank(res.value.data.data(), value_g.data());
      const Tape::Index in =
          value_tape.constant(scaling.cwiseProduct(s.features).eval());
      const GaussianOut v = mlp_forward(value_tape, vb, value_spec, in);
      const Tape::Index err2 = value_tape.square(value_tape.axpb(v.mean, 1.0, -target));
      value_tape.backward(err2);
      j_v += value_tape.value(err2);
      ++n_ok;
    }
    if (n_ok == 0) continue;
    const double inv = 1.0 / n_ok;
    j_track *= inv;
    j_safe *= inv;
    j_pi *= inv;
    j_v *= inv;
    policy_g *= inv;
    value_g *= inv;
    adversary_g *= inv;
    if (!std::isfinite(j_pi) || !std::isfinite(j_v)) {
      throw std::runtime_error("training diverged: non-finite loss at iteration " +
                               std::to_string(k));
    }
    win_track += j_track;
    win_safe += j_safe;
    win_pi += j_pi;
    win_v += j_v;
    ++win_n;

    const double lr_p = cosine_lr(k, cfg.total_iterations, cfg.lr_policy0, cfg.lr_policy1);
    const double lr_v = cosine_lr(k, cfg.total_iterations, cfg.lr_value0, cfg.lr_value1);
    adam_step(res.policy.data, policy_g, policy_adam, lr_p);
    adam_step(res.value.data, value_g, value_adam, lr_v);
    if (apg && k % cfg.update_interval == 0) {
      adam_step(res.adversary.data, adversary_g, adversary_adam, -cfg.lr_adversary);
    }

    if ((k % cfg.record_every == 0 || k == cfg.total_iterations) && win_n > 0) {
      // Curve points are means over the window since the last record; a
      // single small batch is too noisy to stand for the loss at iteration k.
      LossReport r;
      r.iteration = k;
      r.j_track = win_track / win_n;
      r.j_safe = win_safe / win_n;
      r.j_pi = win_pi / win_n;
      r.j_v = win_v / win_n;
      win_track = win_safe = win_pi = win_v = 0.0;
      win_n = 0;
      r.tar = total_average_return(sc, policy_spec, res.policy, cfg.rho_penalty,
                                   cfg.tar_episodes, cfg.tar_steps, mix_seed(cfg.seed, 7));
      r.lr_policy = lr_p;
      r.lr_value = lr_v;
      r.wall_time_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
      res.reports.push_back(r);
      if (csv.is_open()) {
        csv << r.iteration << ',' << fmt(r.j_track) << ',' << fmt(r.j_safe) << ','
            << fmt(r.j_pi) << ',' << fmt(r.j_v) << ',' << fmt(r.tar) << '\n';
        csv.flush();
      }
    }
    if (k % cfg.checkpoint_every == 0 || k == cfg.total_iterations) checkpoint(k);
  }
  return res;
}

}  // namespace apg

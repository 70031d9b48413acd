#pragma once

#include "apg/optim.hpp"
#include "apg/rollout.hpp"
#include "apg/scenario.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace apg {

enum class TrainMode { APG, DPG };

const char* train_mode_name(TrainMode m);

struct TrainerConfig {
  int horizon = 25;
  double rho_penalty = 15.0;
  int update_interval = 5;  // adversary ascent every m-th iteration
  int batch = 256;
  std::int64_t total_iterations = 20000;
  double lr_policy0 = 1e-4, lr_policy1 = 2e-6;    // cosine
  double lr_value0 = 3e-4, lr_value1 = 1e-6;      // cosine
  double lr_adversary = 1e-4;                     // constant
  std::vector<int> hidden = {64, 64};
  int buffer_capacity = 4096;
  int env_steps_per_iter = 1;
  int episode_len = 120;
  std::int64_t record_every = 1000;
  std::int64_t checkpoint_every = 1000;
  int tar_episodes = 10;
  int tar_steps = 120;
  std::uint64_t seed = 1;
  // Test hook: run the full APG wiring but overwrite the adversary output
  // with zeros; must reproduce DPG losses bit for bit.
  bool zero_adversary = false;

  void validate() const;  // horizon >= 1, update_interval >= 1, rho > 0
};

// Smaller batch so the 20k-iteration runs stay in the minutes range on one
// core; everything else matches the defaults above.
TrainerConfig desk_trainer_config();

struct LossReport {
  std::int64_t iteration = 0;
  double j_track = 0.0;
  double j_safe = 0.0;
  double j_pi = 0.0;
  double j_v = 0.0;
  double tar = 0.0;
  double lr_policy = 0.0;
  double lr_value = 0.0;
  double wall_time_s = 0.0;
};

struct TrainResult {
  std::vector<LossReport> reports;
  ParameterVector policy;
  ParameterVector value;
  ParameterVector adversary;  // untrained in DPG mode
  long aborted_rollouts = 0;
  std::vector<std::int64_t> checkpoint_iterations;
};

// Buffered environment states; the path id and velocity mode ride inside the
// DrivingState. fetch() samples uniformly without replacement per call.
class RolloutBuffer {
 public:
  explicit RolloutBuffer(int capacity);
  void push(const DrivingState& s);
  std::vector<int> fetch(int batch, std::mt19937_64& rng) const;
  const DrivingState& operator[](int i) const { return items_[i]; }
  int size() const { return static_cast<int>(items_.size()); }

 private:
  std::vector<DrivingState> items_;
  int capacity_;
  int next_ = 0;
};

// Real-environment return of the deterministic policy: mean over episodes of
// the accumulated utility plus rho times the clearance penalties.
double total_average_return(const Scenario& sc, const MLPSpec& policy_spec,
                            const ParameterVector& policy, double rho_penalty,
                            int episodes, int steps, std::uint64_t seed);

// Alternating descent/ascent on J_pi with a regression critic. Writes
// losses.csv and numbered checkpoints into out_dir unless it is empty.
TrainResult train(const Scenario& sc, const TrainerConfig& cfg, TrainMode mode,
                  const std::string& out_dir = "");

}  // namespace apg

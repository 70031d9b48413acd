#include "apg/controller.hpp"
#include "apg/eval.hpp"
#include "apg/svg.hpp"
#include "apg/trainer.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace apg;

namespace {

Scenario scenario_or_default(const std::string& path) {
  return path.empty() ? make_desk_scenario() : load_scenario(path);
}

TrainerConfig config_from_file(const std::string& path) {
  TrainerConfig cfg = desk_trainer_config();
  if (path.empty()) return cfg;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  json j = json::parse(in);
  cfg.horizon = j.value("horizon", cfg.horizon);
  cfg.rho_penalty = j.value("rho_penalty", cfg.rho_penalty);
  cfg.update_interval = j.value("update_interval", cfg.update_interval);
  cfg.batch = j.value("batch", cfg.batch);
  cfg.total_iterations = j.value("total_iterations", cfg.total_iterations);
  cfg.lr_policy0 = j.value("lr_policy0", cfg.lr_policy0);
  cfg.lr_policy1 = j.value("lr_policy1", cfg.lr_policy1);
  cfg.lr_value0 = j.value("lr_value0", cfg.lr_value0);
  cfg.lr_value1 = j.value("lr_value1", cfg.lr_value1);
  cfg.lr_adversary = j.value("lr_adversary", cfg.lr_adversary);
  if (j.contains("hidden")) cfg.hidden = j.at("hidden").get<std::vector<int>>();
  cfg.buffer_capacity = j.value("buffer_capacity", cfg.buffer_capacity);
  cfg.env_steps_per_iter = j.value("env_steps_per_iter", cfg.env_steps_per_iter);
  cfg.episode_len = j.value("episode_len", cfg.episode_len);
  cfg.record_every = j.value("record_every", cfg.record_every);
  cfg.checkpoint_every = j.value("checkpoint_every", cfg.checkpoint_every);
  cfg.tar_episodes = j.value("tar_episodes", cfg.tar_episodes);
  cfg.tar_steps = j.value("tar_steps", cfg.tar_steps);
  return cfg;
}

std::vector<int> hidden_from_manifest(const std::vector<int>& manifest) {
  if (manifest.size() < 2) throw std::runtime_error("checkpoint manifest too short");
  return {manifest.begin() + 1, manifest.end() - 1};
}

MLPSpec policy_spec_for(const ParameterVector& p) {
  MLPSpec spec = make_policy_spec(hidden_from_manifest(p.manifest));
  if (spec.layer_dims() != p.manifest) {
    throw std::runtime_error("checkpoint manifest is not a policy network");
  }
  return spec;
}

MLPSpec value_spec_for(const ParameterVector& p) {
  MLPSpec spec = make_value_spec(hidden_from_manifest(p.manifest));
  if (spec.layer_dims() != p.manifest) {
    throw std::runtime_error("checkpoint manifest is not a value network");
  }
  return spec;
}

// Accepts a directory with numbered policy_/value_ checkpoints (latest pair
// wins) or a policy_*.bin file whose sibling value file sits next to it.
std::pair<std::string, std::string> resolve_checkpoint(const std::string& arg) {
  if (fs::is_directory(arg)) {
    std::string best;
    for (const auto& e : fs::directory_iterator(arg)) {
      const std::string name = e.path().filename().string();
      if (name.rfind("policy_", 0) == 0 && name.size() > 4 &&
          name.substr(name.size() - 4) == ".bin" && name > best) {
        best = name;
      }
    }
    if (best.empty()) throw std::runtime_error("no policy_*.bin under " + arg);
    const std::string value = "value_" + best.substr(7);
    return {(fs::path(arg) / best).string(), (fs::path(arg) / value).string()};
  }
  const fs::path p(arg);
  std::string name = p.filename().string();
  if (name.rfind("policy_", 0) != 0) {
    throw std::runtime_error("expected a policy_*.bin file or a checkpoint directory");
  }
  name = "value_" + name.substr(7);
  return {arg, (p.parent_path() / name).string()};
}

int cmd_plan(const std::string& scenario_path, const std::string& task,
             const std::string& out_dir) {
  Scenario sc = scenario_or_default(scenario_path);
  if (!task.empty()) sc.task = movement_from_string(task);
  auto paths = generate_path_set(sc.topology, sc.task, sc.rho_bisect, sc.sample_ds);
  fs::create_directories(out_dir);
  for (size_t i = 0; i < paths.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "path_%02zu.csv", i);
    write_text_file((fs::path(out_dir) / name).string(), path_to_csv(paths[i]));
  }
  std::cout << "wrote " << paths.size() << " " << movement_name(sc.task)
            << " candidate paths to " << out_dir << "\n";
  return 0;
}

int cmd_train(const std::string& mode_s, const std::string& scenario_path,
              const std::string& config_path, std::uint64_t seed,
              const std::string& out_dir) {
  const TrainMode mode = mode_s == "apg" ? TrainMode::APG : TrainMode::DPG;
  Scenario sc = scenario_or_default(scenario_path);
  TrainerConfig cfg = config_from_file(config_path);
  cfg.seed = seed;
  const TrainResult res = train(sc, cfg, mode, out_dir);
  const LossReport& last = res.reports.back();
  std::cout << train_mode_name(mode) << " done: iterations=" << cfg.total_iterations
            << " J_pi=" << last.j_pi << " TAR=" << last.tar
            << " aborted_rollouts=" << res.aborted_rollouts << "\n";
  if (!out_dir.empty()) {
    write_loss_plot(out_dir + "/losses.csv", out_dir + "/losses.svg");
  }
  return 0;
}

int cmd_drive(const std::string& checkpoint, const std::string& scenario_path,
              const std::string& task, int steps, const std::string& export_kind,
              const std::string& out_path, std::uint64_t seed) {
  const auto [policy_file, value_file] = resolve_checkpoint(checkpoint);
  const ParameterVector policy = load_params(policy_file);
  const ParameterVector value = load_params(value_file);
  Scenario sc = scenario_or_default(scenario_path);
  if (!task.empty()) sc.task = movement_from_string(task);

  Simulation sim(sc);
  sim.reset(seed, -1);
  Controller ctrl(policy_spec_for(policy), policy, value_spec_for(value), value);

  std::ostringstream csv;
  csv << "t,x,y,v_x,heading,delta,a,mode,path\n";
  std::vector<double> tx, ty;
  for (int t = 0; t < steps; ++t) {
    char row[200];
    std::snprintf(row, sizeof(row), "%.1f,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%s,%d\n",
                  sim.time(), sim.ego().p_x, sim.ego().p_y, sim.ego().v_x, sim.ego().phi,
                  sim.ego().delta, sim.ego().a,
                  ctrl.mode() == VelocityMode::Pass ? "pass" : "stop", ctrl.path_index());
    csv << row;
    tx.push_back(sim.ego().p_x);
    ty.push_back(sim.ego().p_y);
    try {
      ctrl.step(sim);
    } catch (const std::runtime_error& e) {
      std::cerr << "drive stopped early: " << e.what() << "\n";
      break;
    }
  }

  if (export_kind == "csv") {
    write_text_file(out_path, csv.str());
  } else {
    std::vector<Series> series;
    for (const CandidatePath& p : sim.paths()) {
      Series s;
      s.label = "path " + std::to_string(series.size());
      for (const Vec2& q : p.points) {
        s.x.push_back(q.x());
        s.y.push_back(q.y());
      }
      series.push_back(std::move(s));
    }
    series.push_back({"ego", tx, ty});
    write_text_file(out_path, line_chart_svg(series, "driven trajectory"));
  }
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int cmd_eval(const std::vector<std::string>& checkpoints, const std::string& scenario_path,
             const std::string& perturbation, std::vector<double> levels, int runs,
             std::uint64_t seed, const std::string& out_dir) {
  Scenario sc = scenario_or_default(scenario_path);
  if (levels.empty()) levels = {0.1, 0.2, 0.5};
  std::vector<EvalReport> reports;
  for (const std::string& ck : checkpoints) {
    const auto [policy_file, value_file] = resolve_checkpoint(ck);
    const ParameterVector policy = load_params(policy_file);
    const ParameterVector value = load_params(value_file);
    const std::string method = fs::is_directory(ck)
                                   ? fs::path(ck).filename().string()
                                   : fs::path(ck).parent_path().filename().string();
    for (double level : levels) {
      reports.push_back(eval_generalization(sc, policy_spec_for(policy), policy,
                                            value_spec_for(value), value, perturbation,
                                            level, runs, seed,
                                            method.empty() ? "policy" : method));
    }
  }
  write_report(reports, out_dir);
  std::cout << report_csv(reports);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"signalized-intersection driving: planning, training, evaluation"};
  app.require_subcommand(1);

  std::string scenario_path, task, out, mode = "apg", config_path, checkpoint;
  std::string perturbation = "overspeed", export_kind = "csv";
  std::vector<std::string> checkpoints;
  std::vector<double> levels;
  std::uint64_t seed = 1;
  int steps = 600, runs = 100;

  auto* plan = app.add_subcommand("plan", "export the static candidate paths");
  plan->add_option("--scenario", scenario_path, "scenario JSON (default: desk scenario)");
  plan->add_option("--task", task, "left|straight|right");
  plan->add_option("--out", out, "output directory")->required();

  auto* tr = app.add_subcommand("train", "train a driving policy");
  tr->add_option("--mode", mode, "apg|dpg")->check(CLI::IsMember({"apg", "dpg"}));
  tr->add_option("--scenario", scenario_path, "scenario JSON");
  tr->add_option("--config", config_path, "trainer config JSON");
  tr->add_option("--seed", seed, "rng seed");
  tr->add_option("--out", out, "checkpoint/losses directory")->required();

  auto* dr = app.add_subcommand("drive", "closed-loop run with a trained policy");
  dr->add_option("--checkpoint", checkpoint, "checkpoint dir or policy_*.bin")->required();
  dr->add_option("--scenario", scenario_path, "scenario JSON");
  dr->add_option("--task", task, "left|straight|right");
  dr->add_option("--steps", steps, "control steps");
  dr->add_option("--export", export_kind, "csv|svg")->check(CLI::IsMember({"csv", "svg"}));
  dr->add_option("--out", out, "output file")->required();
  dr->add_option("--seed", seed, "rng seed");

  auto* ev = app.add_subcommand("eval", "generalization evaluation");
  ev->add_option("--checkpoint", checkpoints, "one or more checkpoint dirs/files")
      ->required();
  ev->add_option("--scenario", scenario_path, "scenario JSON");
  ev->add_option("--perturbation", perturbation, "overspeed|rounding|none")
      ->check(CLI::IsMember({"overspeed", "rounding", "none"}));
  ev->add_option("--levels", levels, "perturbation levels (default 0.1 0.2 0.5)");
  ev->add_option("--runs", runs, "runs per level");
  ev->add_option("--seed", seed, "rng seed");
  ev->add_option("--out", out, "report directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*plan) return cmd_plan(scenario_path, task, out);
    if (*tr) return cmd_train(mode, scenario_path, config_path, seed, out);
    if (*dr) return cmd_drive(checkpoint, scenario_path, task, steps, export_kind, out, seed);
    if (*ev) return cmd_eval(checkpoints, scenario_path, perturbation, levels, runs, seed, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

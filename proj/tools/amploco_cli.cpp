// amploco command-line front end.
//
// Exit codes: 0 success, 1 unexpected failure, 2 configuration error,
// 3 numerical failure.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "amploco/config.hpp"
#include "amploco/mocap.hpp"
#include "amploco/sim.hpp"
#include "amploco/train.hpp"

namespace {

using namespace amploco;

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

Integrator parse_integrator(const std::string& s) {
  if (s == "euler") return Integrator::SemiImplicitEuler;
  if (s == "rk4") return Integrator::RungeKutta4;
  throw ConfigError("integrator must be 'euler' or 'rk4'");
}

int cmd_train(const std::string& config_path, std::optional<std::size_t> seed, const std::string& out,
              std::optional<int> iterations, bool quiet) {
  TrainConfig cfg = load_config(config_path);
  if (seed) cfg.seed = *seed;
  if (iterations) {
    cfg.ppo.iterations = *iterations;
    validate(cfg);
  }
  const auto summary = train(cfg, out, quiet ? nullptr : &std::cerr);
  std::cout << "iterations " << summary.iterations << "\nmetrics " << summary.metrics_path << "\ncheckpoints "
            << summary.checkpoints.size() << "\nfinal " << (std::filesystem::path(out) / "final.bin").string() << '\n';
  return 0;
}

void print_eval(const EvalReport& r) {
  std::cout << std::setprecision(10) << "episodes " << r.episodes << "\nfalls " << r.falls
            << "\nmean_episode_length " << r.mean_episode_length << "\nmean_command_return " << r.mean_command_return
            << "\nmean_command_reward " << r.mean_command_reward << "\nmean_total_return " << r.mean_total_return
            << '\n';
}

int cmd_eval(const std::string& ckpt_path, const EvalOptions& opt, const std::string& trajectory) {
  const Checkpoint ck = load_checkpoint(ckpt_path);
  std::ofstream traj;
  if (!trajectory.empty()) {
    traj.open(trajectory);
    if (!traj) throw ConfigError("cannot write '" + trajectory + "'");
  }
  print_eval(evaluate(ck, opt, trajectory.empty() ? nullptr : &traj));
  return 0;
}

int cmd_crossval(const std::string& ckpt_path, int steps, std::size_t seed, const std::string& out) {
  const Checkpoint ck = load_checkpoint(ckpt_path);
  const TrainConfig cfg = ck.config();
  const auto& policy = ck.agent.policy;
  const auto report = crossval(env_spec(cfg), [&](const VecX& obs) { return policy.mean_action(obs); }, seed, steps);
  if (out.empty()) {
    write_divergence_csv(std::cout, report);
  } else {
    std::ofstream os(out);
    if (!os) throw ConfigError("cannot write '" + out + "'");
    write_divergence_csv(os, report);
  }
  const auto pendulum = pendulum_crossval(cfg.robot, PendulumScenario{});
  std::cerr << std::setprecision(6) << "policy rollout: " << report.rows.size() << " steps, max root_x "
            << report.max.root_x << " m, max root_z " << report.max.root_z << " m, max pitch " << report.max.pitch
            << " rad, max joint " << report.max.joint << " rad\n"
            << "pendulum calibration (dt 1e-3, 1 s): max joint divergence " << pendulum.max.joint << " rad\n";
  return 0;
}

int cmd_plot(const std::string& metrics, const std::string& out, const std::string& divergence) {
  const CsvTable table = read_csv(metrics);
  if (divergence.empty()) {
    write_plot_tables(table, out);
  } else {
    const CsvTable div = read_csv(divergence);
    write_plot_tables(table, out, &div);
  }
  std::cout << "tables written to " << out << '\n';
  return 0;
}

int cmd_clips_validate(const std::vector<std::string>& files, const std::string& config_path) {
  TrainConfig cfg;
  if (!config_path.empty()) cfg = load_config(config_path);
  std::vector<MotionClip> clips;
  for (const auto& f : files) {
    MotionClip c = load_clip(f, cfg.motion.continuity_tolerance);
    check_schema(c, cfg.robot);
    clips.push_back(std::move(c));
  }
  if (files.empty()) {
    for (const auto& p : cfg.motion.clips) {
      MotionClip c = load_clip(resolve_path(cfg.base_dir, p), cfg.motion.continuity_tolerance);
      check_schema(c, cfg.robot);
      clips.push_back(std::move(c));
    }
    for (const auto& g : cfg.motion.synthetic) clips.push_back(synth_gait(g, cfg.robot));
  }
  std::cout << "name,frames,duration_s,transitions,loop,max_joint_speed,loop_gap,min_effector_z\n";
  for (const auto& c : clips) {
    const auto s = clip_stats(c);
    std::cout << s.name << ',' << s.frames << ',' << s.duration << ',' << s.transitions << ',' << (c.loop ? 1 : 0)
              << ',' << s.max_joint_speed << ',' << s.loop_gap << ',' << s.min_effector_height << '\n';
  }
  std::cout << "ok " << clips.size() << " clip(s)\n";
  return 0;
}

int cmd_clips_synth(const std::string& out, const std::string& config_path) {
  TrainConfig cfg;
  if (!config_path.empty()) cfg = load_config(config_path);
  std::filesystem::create_directories(out);
  for (const auto& g : cfg.motion.synthetic) {
    const auto path = (std::filesystem::path(out) / (g.name + ".clip")).string();
    save_clip(synth_gait(g, cfg.robot), path);
    std::cout << path << '\n';
  }
  return 0;
}

int cmd_init_config(const std::string& out) {
  const std::string text = to_json(TrainConfig{}).dump(2) + "\n";
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    std::ofstream os(out);
    if (!os) throw ConfigError("cannot write '" + out + "'");
    os << text;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"amploco: adversarial-motion-prior locomotion training for a planar biped"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "Train a policy from a config file");
  std::string config_path, out_dir = "run";
  std::optional<std::size_t> seed;
  std::optional<int> iterations;
  bool quiet = false;
  train->add_option("--config", config_path, "JSON config file")->required();
  train->add_option("--seed", seed, "Override the config seed");
  train->add_option("--out", out_dir, "Output directory");
  train->add_option("--iterations", iterations, "Override ppo.iterations");
  train->add_flag("--quiet", quiet, "No per-iteration progress on stderr");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string ckpt, integrator = "euler", trajectory;
  EvalOptions eopt;
  std::size_t eval_seed = eopt.seed;
  eval->add_option("--checkpoint", ckpt, "Checkpoint file")->required();
  eval->add_option("--steps", eopt.steps, "Control steps per environment")->required();
  eval->add_option("--integrator", integrator, "euler or rk4");
  eval->add_option("--envs", eopt.envs, "Number of evaluation environments");
  eval->add_option("--seed", eval_seed, "Evaluation seed");
  eval->add_flag("--stochastic", eopt.stochastic, "Sample actions instead of using the policy mean");
  eval->add_option("--trajectory", trajectory, "Write a per-step trajectory CSV");

  auto* cv = app.add_subcommand("crossval", "Compare Euler and RK4 rollouts of one checkpoint");
  std::string cv_ckpt, cv_out;
  int cv_steps = 500;
  std::size_t cv_seed = 7;
  cv->add_option("--checkpoint", cv_ckpt, "Checkpoint file")->required();
  cv->add_option("--steps", cv_steps, "Control steps");
  cv->add_option("--seed", cv_seed, "Episode seed");
  cv->add_option("--out", cv_out, "Divergence CSV (default stdout)");

  auto* plot = app.add_subcommand("plot", "Write plot-ready tables from a metrics log");
  std::string metrics, plot_out, divergence;
  plot->add_option("--metrics", metrics, "metrics.csv from a training run")->required();
  plot->add_option("--out", plot_out, "Output directory")->required();
  plot->add_option("--crossval", divergence, "Divergence CSV from crossval");

  auto* clips = app.add_subcommand("clips", "Reference clip utilities");
  clips->require_subcommand(1);
  auto* validate_cmd = clips->add_subcommand("validate", "Check clip invariants and print statistics");
  std::vector<std::string> clip_files;
  std::string clip_config;
  validate_cmd->add_option("files", clip_files, "Clip files (default: the config's motion sources)");
  validate_cmd->add_option("--config", clip_config, "Config providing the robot model and motion sources");
  auto* synth_cmd = clips->add_subcommand("synth", "Write the configured synthetic gaits as clip files");
  std::string synth_out = "clips";
  synth_cmd->add_option("--out", synth_out, "Output directory");
  synth_cmd->add_option("--config", clip_config, "Config providing the robot model and gait parameters");

  auto* init = app.add_subcommand("init-config", "Print or write the default config");
  std::string init_out;
  init->add_option("--out", init_out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train) return cmd_train(config_path, seed, out_dir, iterations, quiet);
    if (*eval) {
      eopt.integrator = parse_integrator(integrator);
      eopt.seed = eval_seed;
      return cmd_eval(ckpt, eopt, trajectory);
    }
    if (*cv) return cmd_crossval(cv_ckpt, cv_steps, cv_seed, cv_out);
    if (*plot) return cmd_plot(metrics, plot_out, divergence);
    if (*validate_cmd) return cmd_clips_validate(clip_files, clip_config);
    if (*synth_cmd) return cmd_clips_synth(synth_out, clip_config);
    if (*init) return cmd_init_config(init_out);
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DomainError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

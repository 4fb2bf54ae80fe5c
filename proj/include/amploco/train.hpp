#pragma once

#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "amploco/amp.hpp"
#include "amploco/config.hpp"
#include "amploco/mocap.hpp"
#include "amploco/netcore.hpp"
#include "amploco/ppo.hpp"
#include "amploco/sim.hpp"

namespace amploco {

// ---------------------------------------------------------------------------
// Checkpoints
//
// Binary layout (little-endian):
//   "ALCK" | u32 version (1) | u32 iteration | u64 config length | config JSON text
//   policy mean net | log-std vector | u8 normalize | obs normalizer (mean, var, f64 count)
//   value net | discriminator net | u8 normalize | disc normalizer (mean, var, f64 count)

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  int iteration = 0;
  std::string config_json;
  ActorCritic agent;
  Discriminator discriminator;

  TrainConfig config() const { return config_from_json(parse_json_text(config_json, "checkpoint config")); }
};

namespace io {
inline void write_normalizer(std::ostream& os, const RunningNormalizer& n) {
  put_vector(os, n.mean);
  put_vector(os, n.var);
  put_f64(os, n.count);
}
inline RunningNormalizer read_normalizer(std::istream& is) {
  RunningNormalizer n;
  n.mean = get_vector(is);
  n.var = get_vector(is);
  n.count = get_f64(is);
  if (n.mean.size() != n.var.size()) throw ConfigError("checkpoint normalizer is inconsistent");
  return n;
}
inline void put_u8(std::ostream& os, bool b) {
  const char c = b ? 1 : 0;
  os.write(&c, 1);
}
inline bool get_u8(std::istream& is) {
  char c = 0;
  if (!is.read(&c, 1)) throw ConfigError("truncated binary stream");
  return c != 0;
}
}  // namespace io

inline void write_checkpoint(std::ostream& os, const Checkpoint& c) {
  os.write("ALCK", 4);
  io::put_u32(os, kCheckpointVersion);
  io::put_u32(os, static_cast<std::uint32_t>(c.iteration));
  io::put_u64(os, c.config_json.size());
  os.write(c.config_json.data(), static_cast<std::streamsize>(c.config_json.size()));
  io::write_net(os, c.agent.policy.mean);
  io::put_vector(os, c.agent.policy.log_std);
  io::put_u8(os, c.agent.policy.normalize);
  io::write_normalizer(os, c.agent.policy.normalizer);
  io::write_net(os, c.agent.value);
  io::write_net(os, c.discriminator.net);
  io::put_u8(os, c.discriminator.normalize);
  io::write_normalizer(os, c.discriminator.normalizer);
}

inline void save_checkpoint(const std::string& path, const Checkpoint& c) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write checkpoint '" + path + "'");
  write_checkpoint(os, c);
}

inline Checkpoint read_checkpoint(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "ALCK") throw ConfigError("not a checkpoint file (bad magic)");
  const auto version = io::get_u32(is);
  if (version != kCheckpointVersion) throw ConfigError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint c;
  c.iteration = static_cast<int>(io::get_u32(is));
  const auto len = io::get_u64(is);
  if (len > (1u << 26)) throw ConfigError("checkpoint config block is implausibly large");
  c.config_json.resize(len);
  if (!is.read(c.config_json.data(), static_cast<std::streamsize>(len))) throw ConfigError("truncated binary stream");
  const TrainConfig cfg = c.config();
  c.agent.policy.mean = io::read_net(is);
  c.agent.policy.log_std = io::get_vector(is);
  c.agent.policy.normalize = io::get_u8(is);
  c.agent.policy.normalizer = io::read_normalizer(is);
  c.agent.policy.log_std_min = cfg.ppo.log_std_min;
  c.agent.policy.log_std_max = cfg.ppo.log_std_max;
  c.agent.value = io::read_net(is);
  c.discriminator.net = io::read_net(is);
  c.discriminator.normalize = io::get_u8(is);
  c.discriminator.normalizer = io::read_normalizer(is);
  const int obs = observation_dim(cfg.robot);
  if (c.agent.policy.observation_dim() != obs || c.agent.policy.action_dim() != cfg.robot.joint_count() ||
      c.agent.policy.log_std.size() != cfg.robot.joint_count() || c.agent.policy.normalizer.dim() != obs ||
      c.agent.value.input_dim() != obs || c.discriminator.net.input_dim() != 2 * discriminator_observation_dim(cfg.robot))
    throw ConfigError("checkpoint networks do not match the embedded robot model");
  return c;
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open checkpoint '" + path + "'");
  return read_checkpoint(is);
}

// ---------------------------------------------------------------------------
// Metrics

struct IterationMetrics {
  int iteration = 0;
  long long env_steps = 0;
  double mean_reward = 0.0;  // mean total reward per step
  RewardTerms term_means{};
  AmpLossReport amp;
  PpoReport ppo;
  double mean_action_std = 0.0;
  int episodes_finished = 0;
  double mean_episode_return = std::numeric_limits<double>::quiet_NaN();  // last 100 finished episodes
  double mean_episode_length = std::numeric_limits<double>::quiet_NaN();  // steps, same window
};

// Fixed column order of metrics.csv.
inline std::vector<std::string> metrics_header() {
  std::vector<std::string> h{"iteration", "env_steps", "mean_reward"};
  for (auto name : kTermNames) h.push_back("term_" + std::string(name));
  for (const char* s : {"amp_expert_loss", "amp_policy_loss", "amp_gradient_penalty", "amp_total_loss",
                        "ppo_surrogate", "ppo_value_loss", "ppo_entropy", "ppo_approx_kl", "ppo_clip_fraction",
                        "mean_action_std", "episodes_finished", "mean_episode_return", "mean_episode_length"})
    h.emplace_back(s);
  return h;
}

inline std::string format_metric(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream ss;
  ss << std::setprecision(10) << v;
  return ss.str();
}

inline void write_metrics_header(std::ostream& os) {
  const auto h = metrics_header();
  for (std::size_t i = 0; i < h.size(); ++i) os << (i ? "," : "") << h[i];
  os << '\n';
}

inline void write_metrics_row(std::ostream& os, const IterationMetrics& m) {
  os << m.iteration << ',' << m.env_steps << ',' << format_metric(m.mean_reward);
  for (double t : m.term_means) os << ',' << format_metric(t);
  for (double v : {m.amp.expert, m.amp.policy, m.amp.penalty, m.amp.total, m.ppo.surrogate, m.ppo.value_loss,
                   m.ppo.entropy, m.ppo.approx_kl, m.ppo.clip_fraction, m.mean_action_std})
    os << ',' << format_metric(v);
  os << ',' << m.episodes_finished << ',' << format_metric(m.mean_episode_return) << ','
     << format_metric(m.mean_episode_length) << '\n';
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw ConfigError("CSV has no column '" + name + "'");
  }
  std::vector<double> values(const std::string& name) const {
    const int c = column(name);
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(r[c]);
    return out;
  }
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open CSV '" + path + "'");
  CsvTable t;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string cell; std::getline(ss, cell, ',');) out.push_back(cell);
    return out;
  };
  if (!std::getline(is, line)) throw ConfigError("CSV '" + path + "' is empty");
  t.header = split(line);
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != t.header.size())
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) + " cells");
    std::vector<double> row;
    for (const auto& c : cells) {
      if (c == "nan") {
        row.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      try {
        std::size_t used = 0;
        row.push_back(std::stod(c, &used));
        if (used != c.size()) throw std::invalid_argument(c);
      } catch (const std::exception&) {
        throw ConfigError(path + ":" + std::to_string(lineno) + ": bad number '" + c + "'");
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

// Least-squares slope of y against its index, ignoring NaN entries.
inline double trend_slope(const std::vector<double>& y) {
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (std::isnan(y[i])) continue;
    const double x = static_cast<double>(i);
    n += 1;
    sx += x;
    sy += y[i];
    sxx += x * x;
    sxy += x * y[i];
  }
  const double den = n * sxx - sx * sx;
  if (n < 2 || den == 0.0) return 0.0;
  return (n * sxy - sx * sy) / den;
}

// ---------------------------------------------------------------------------
// Training

// All demonstration transitions of a library, with the column offset of each clip.
struct DemoSet {
  MatX transitions;
  std::vector<int> offsets;

  DemoSet(const ClipLibrary& lib, const RobotModel& m) {
    const int d = discriminator_observation_dim(m);
    transitions.resize(2 * d, static_cast<Eigen::Index>(lib.transition_count()));
    int col = 0;
    for (int c = 0; c < static_cast<int>(lib.clips().size()); ++c) {
      offsets.push_back(col);
      for (int f = 0; f < lib.clips()[c].transition_count(); ++f)
        transitions.col(col++) = clip_transition(lib, c, f, m).concat();
    }
  }

  // Clip by weight, then a uniform frame: the same law as sample_transitions.
  MatX sample(const ClipLibrary& lib, std::size_t count, std::mt19937_64& rng) const {
    MatX out(transitions.rows(), static_cast<Eigen::Index>(count));
    for (std::size_t i = 0; i < count; ++i) {
      const auto [c, f] = lib.sample_index(rng);
      out.col(static_cast<Eigen::Index>(i)) = transitions.col(offsets[c] + f);
    }
    return out;
  }
};

class Trainer {
 public:
  explicit Trainer(TrainConfig cfg)
      : cfg_(std::move(cfg)),
        spec_(std::make_shared<EnvSpec>(env_spec(cfg_))),
        library_(build_clip_library(cfg_)),
        demo_(library_, cfg_.robot),
        policy_buffer_(2 * discriminator_observation_dim(cfg_.robot), cfg_.amp.policy_capacity) {
    validate(cfg_);
    if (library_.transition_count() > cfg_.amp.demo_capacity)
      throw ConfigError("reference library holds more transitions than amp.demo_capacity");
    std::seed_seq seq{cfg_.seed, std::size_t{0x5eed}};
    std::array<std::uint64_t, 4> seeds{};
    seq.generate(seeds.begin(), seeds.end());
    std::mt19937_64 init_rng(seeds[0]);
    agent_ = make_actor_critic(observation_dim(cfg_.robot), cfg_.robot.joint_count(), cfg_.ppo, init_rng,
                               cfg_.training.normalize_observations);
    discriminator_ = make_discriminator(discriminator_observation_dim(cfg_.robot), cfg_.amp, init_rng);
    discriminator_.normalizer.update(demo_.transitions);
    amp_rng_.seed(seeds[1]);
    ppo_rng_.seed(seeds[2]);
    std::mt19937_64 env_seeder(seeds[3]);
    for (int e = 0; e < cfg_.training.num_envs; ++e) envs_.emplace_back(spec_, e, env_seeder());
    episode_return_.assign(cfg_.training.num_envs, 0.0);
    episode_length_.assign(cfg_.training.num_envs, 0);
  }

  const TrainConfig& config() const { return cfg_; }
  const ActorCritic& agent() const { return agent_; }
  const Discriminator& discriminator() const { return discriminator_; }
  const ClipLibrary& library() const { return library_; }
  int iteration() const { return iteration_; }

  Checkpoint checkpoint() const {
    return Checkpoint{iteration_, to_json(cfg_).dump(2), agent_, discriminator_};
  }

  IterationMetrics iterate() {
    const auto& c = cfg_;
    const auto& agent = agent_;
    auto policy = [&agent](const VecX& obs, std::mt19937_64& rng) { return sample_action(agent.policy, obs, rng); };
    Rollout ro = run_parallel(envs_, policy, c.training.horizon, c.training.workers);

    // Discriminator phase.
    policy_buffer_.push(ro.transitions);
    if (discriminator_.normalize) discriminator_.normalizer.update(ro.transitions);
    IterationMetrics m;
    for (int u = 0; u < c.amp.updates_per_iteration; ++u) {
      const MatX demo = demo_.sample(library_, c.amp.batch_size, amp_rng_);
      const MatX pol = policy_buffer_.sample(c.amp.batch_size, amp_rng_);
      const auto r = amp_update(discriminator_, demo, pol, c.amp, disc_adam_);
      m.amp.expert += r.expert / c.amp.updates_per_iteration;
      m.amp.policy += r.policy / c.amp.updates_per_iteration;
      m.amp.penalty += r.penalty / c.amp.updates_per_iteration;
      m.amp.total += r.total / c.amp.updates_per_iteration;
    }

    // Imitation relabeling, then the mixed total enters GAE unchanged.
    const VecX imitation = imitation_rewards(discriminator_, ro.transitions);
    RolloutBatch batch;
    batch.num_envs = ro.num_envs;
    batch.horizon = ro.horizon;
    batch.observations = ro.observations;
    batch.actions = ro.actions;
    batch.log_probs = ro.log_probs;
    batch.rewards.resize(ro.size());
    batch.dones = ro.dones;
    batch.terminals = ro.terminals;
    for (int i = 0; i < ro.size(); ++i) {
      auto terms = ro.reports[i].terms;
      terms[static_cast<int>(Term::Imitation)] = imitation[i];
      ro.reports[i] = total_reward(terms, c.rewards);
      batch.rewards[i] = ro.reports[i].total;
      for (int k = 0; k < kTermCount; ++k) m.term_means[k] += terms[k] / ro.size();
    }
    last_reports_ = ro.reports;
    batch.values = agent_.values_of(ro.observations);
    batch.next_values = agent_.values_of(ro.next_observations);
    const GaeResult gae = compute_gae(batch, c.ppo.gamma, c.ppo.lambda, c.ppo.normalize_advantages);
    m.ppo = ppo_update(agent_, batch, gae, c.ppo, ppo_opt_, ppo_rng_);
    if (agent_.policy.normalize) agent_.policy.normalizer.update(ro.observations);

    // Episode bookkeeping in time order.
    for (int t = 0; t < ro.horizon; ++t) {
      for (int e = 0; e < ro.num_envs; ++e) {
        const int i = ro.index(e, t);
        episode_return_[e] += batch.rewards[i];
        episode_length_[e] += 1;
        if (ro.dones[i]) {
          finished_.push_back({episode_return_[e], static_cast<double>(episode_length_[e])});
          if (finished_.size() > kEpisodeWindow) finished_.pop_front();
          episode_return_[e] = 0.0;
          episode_length_[e] = 0;
          ++m.episodes_finished;
        }
      }
    }
    ++iteration_;
    env_steps_ += ro.size();
    m.iteration = iteration_;
    m.env_steps = env_steps_;
    m.mean_reward = batch.rewards.mean();
    m.mean_action_std = agent_.policy.log_std.array().exp().mean();
    if (!finished_.empty()) {
      double r = 0.0, l = 0.0;
      for (const auto& [ret, len] : finished_) {
        r += ret;
        l += len;
      }
      m.mean_episode_return = r / finished_.size();
      m.mean_episode_length = l / finished_.size();
    }
    if (!std::isfinite(m.mean_reward)) throw NumericalError("non-finite reward in rollout");
    return m;
  }

  // Relabeled reports of the latest rollout, indexed like the rollout.
  const std::vector<RewardReport>& last_reports() const { return last_reports_; }

 private:
  static constexpr std::size_t kEpisodeWindow = 100;

  TrainConfig cfg_;
  std::shared_ptr<const EnvSpec> spec_;
  ClipLibrary library_;
  DemoSet demo_;
  TransitionBuffer policy_buffer_;
  ActorCritic agent_;
  Discriminator discriminator_;
  AdamState disc_adam_;
  PpoOptimizer ppo_opt_;
  std::mt19937_64 amp_rng_;
  std::mt19937_64 ppo_rng_;
  std::vector<Episode> envs_;
  std::vector<double> episode_return_;
  std::vector<int> episode_length_;
  std::deque<std::pair<double, double>> finished_;
  std::vector<RewardReport> last_reports_;
  int iteration_ = 0;
  long long env_steps_ = 0;
};

inline std::string checkpoint_name(int iteration) {
  std::ostringstream ss;
  ss << "ckpt_" << std::setw(6) << std::setfill('0') << iteration << ".bin";
  return ss.str();
}

struct TrainSummary {
  int iterations = 0;
  std::string metrics_path;
  std::vector<std::string> checkpoints;
};

// Writes <out>/config.json, <out>/metrics.csv and <out>/checkpoints/. The
// initial (iteration 0) and final checkpoints are always written.
inline TrainSummary train(const TrainConfig& cfg, const std::string& out_dir, std::ostream* log = nullptr) {
  namespace fs = std::filesystem;
  validate(cfg);
  fs::create_directories(fs::path(out_dir) / "checkpoints");
  {
    std::ofstream os(fs::path(out_dir) / "config.json");
    os << to_json(cfg).dump(2) << '\n';
  }
  Trainer trainer(cfg);
  TrainSummary s;
  s.metrics_path = (fs::path(out_dir) / "metrics.csv").string();
  std::ofstream metrics(s.metrics_path);
  if (!metrics) throw ConfigError("cannot write '" + s.metrics_path + "'");
  write_metrics_header(metrics);
  auto save = [&]() {
    const auto path = (fs::path(out_dir) / "checkpoints" / checkpoint_name(trainer.iteration())).string();
    save_checkpoint(path, trainer.checkpoint());
    s.checkpoints.push_back(path);
  };
  save();
  for (int it = 0; it < cfg.ppo.iterations; ++it) {
    const auto m = trainer.iterate();
    write_metrics_row(metrics, m);
    metrics.flush();
    if (log) {
      *log << "iter " << m.iteration << " reward " << format_metric(m.mean_reward) << " ep_return "
           << format_metric(m.mean_episode_return) << " ep_len " << format_metric(m.mean_episode_length)
           << " amp " << format_metric(m.amp.total) << " kl " << format_metric(m.ppo.approx_kl) << '\n';
    }
    const bool last = it + 1 == cfg.ppo.iterations;
    if (last || (cfg.training.checkpoint_interval > 0 && m.iteration % cfg.training.checkpoint_interval == 0)) save();
  }
  if (!s.checkpoints.empty()) fs::copy_file(s.checkpoints.back(), fs::path(out_dir) / "final.bin",
                                            fs::copy_options::overwrite_existing);
  s.iterations = trainer.iteration();
  return s;
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalReport {
  int episodes = 0;                 // started, including a final partial one
  int steps = 0;                    // per environment
  double mean_command_return = 0.0; // command reward summed over an episode, averaged over episodes
  double mean_command_reward = 0.0; // per step
  double mean_episode_length = 0.0; // steps
  double mean_total_return = 0.0;   // task terms only (imitation needs the discriminator)
  int falls = 0;
};

struct EvalOptions {
  int steps = 1000;
  int envs = 8;
  Integrator integrator = Integrator::SemiImplicitEuler;
  std::uint64_t seed = 12345;
  bool stochastic = false;  // sample actions instead of using the mean
};

// Rolls out the checkpoint's policy in `envs` environments for `steps` control
// steps each. When `trajectory` is given, writes one CSV row per step.
inline EvalReport evaluate(const Checkpoint& ck, const EvalOptions& opt, std::ostream* trajectory = nullptr) {
  if (opt.steps < 1 || opt.envs < 1) throw ConfigError("evaluation needs at least one step and one environment");
  TrainConfig cfg = ck.config();
  cfg.sim.integrator = opt.integrator;
  auto spec = std::make_shared<EnvSpec>(env_spec(cfg));
  const Discriminator& disc = ck.discriminator;
  if (trajectory) *trajectory << "env,step,x,z,pitch,vx,command,command_reward,imitation_reward,total_reward,done\n";
  EvalReport r;
  r.steps = opt.steps;
  std::mt19937_64 seeder(opt.seed);
  double command_sum = 0.0, total_sum = 0.0;
  long long length_sum = 0;
  for (int e = 0; e < opt.envs; ++e) {
    Episode env(spec, e, seeder());
    int length = 0;
    ++r.episodes;
    for (int t = 0; t < opt.steps; ++t) {
      const VecX obs = env.observation().values;
      const Action a = opt.stochastic ? sample_action(ck.agent.policy, obs, env.policy_rng()).first
                                      : ck.agent.policy.mean_action(obs);
      StepResult s = env.step(a);
      auto terms = s.report.terms;
      terms[static_cast<int>(Term::Imitation)] = imitation_reward(disc, s.transition);
      const RewardReport rep = total_reward(terms, cfg.rewards);
      command_sum += rep[Term::Command];
      total_sum += rep.total;
      ++length;
      if (trajectory) {
        const auto& st = env.state();
        *trajectory << e << ',' << t << ',' << format_metric(st.root_position.x()) << ','
                    << format_metric(st.root_position.y()) << ',' << format_metric(st.pitch) << ','
                    << format_metric(st.root_velocity.x()) << ',' << format_metric(env.command().forward) << ','
                    << format_metric(rep[Term::Command]) << ',' << format_metric(rep[Term::Imitation]) << ','
                    << format_metric(rep.total) << ',' << (s.done ? 1 : 0) << '\n';
      }
      if (s.done) {
        length_sum += length;
        length = 0;
        if (s.terminal) ++r.falls;
        env.reset();
        if (t + 1 < opt.steps) ++r.episodes;
      }
    }
    length_sum += length;
  }
  r.mean_command_return = command_sum / r.episodes;
  r.mean_total_return = total_sum / r.episodes;
  r.mean_command_reward = command_sum / (static_cast<double>(opt.steps) * opt.envs);
  r.mean_episode_length = static_cast<double>(length_sum) / r.episodes;
  return r;
}

// ---------------------------------------------------------------------------
// Plot tables

inline void write_divergence_csv(std::ostream& os, const DivergenceReport& r) {
  os << "step,root_x,root_z,pitch,joint\n";
  for (const auto& row : r.rows)
    os << row.step << ',' << format_metric(row.root_x) << ',' << format_metric(row.root_z) << ','
       << format_metric(row.pitch) << ',' << format_metric(row.joint) << '\n';
}

// Writes curve tables normalized by the run's own maximum magnitude.
inline void write_plot_tables(const CsvTable& metrics, const std::string& out_dir,
                              const CsvTable* divergence = nullptr) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const auto it = metrics.values("iteration");
  Json meta = Json::object();
  auto curve = [&](const std::string& column, const std::string& file) {
    const auto y = metrics.values(column);
    double peak = 0.0;
    for (double v : y)
      if (!std::isnan(v)) peak = std::max(peak, std::abs(v));
    std::ofstream os(fs::path(out_dir) / file);
    os << "iteration," << column << ",normalized\n";
    for (std::size_t i = 0; i < y.size(); ++i)
      os << format_metric(it[i]) << ',' << format_metric(y[i]) << ','
         << format_metric(peak > 0.0 ? y[i] / peak : y[i]) << '\n';
    meta[file] = {{"column", column},
                  {"normalization", "divided by the maximum absolute value observed in this run"},
                  {"normalizer", peak},
                  {"trend_slope", trend_slope(y)}};
  };
  curve("mean_episode_return", "return_curve.csv");
  curve("mean_episode_length", "episode_length_curve.csv");
  curve("mean_reward", "reward_curve.csv");
  if (divergence) {
    std::ofstream os(fs::path(out_dir) / "divergence.csv");
    for (std::size_t i = 0; i < divergence->header.size(); ++i) os << (i ? "," : "") << divergence->header[i];
    os << '\n';
    for (const auto& row : divergence->rows) {
      for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_metric(row[i]);
      os << '\n';
    }
    meta["divergence.csv"] = {{"normalization", "none; absolute divergence in m and rad"}};
  }
  std::ofstream os(fs::path(out_dir) / "plot_meta.json");
  os << meta.dump(2) << '\n';
}

}  // namespace amploco

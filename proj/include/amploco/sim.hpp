#pragma once

#include <Eigen/Cholesky>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <thread>
#include <vector>

#include "amploco/amp.hpp"
#include "amploco/gait.hpp"
#include "amploco/model.hpp"
#include "amploco/observation.hpp"
#include "amploco/rewards.hpp"

namespace amploco {

enum class Integrator { SemiImplicitEuler, RungeKutta4 };

struct SimConfig {
  double timestep = 1e-3;  // s
  int decimation = 10;     // physics steps per control step
  Integrator integrator = Integrator::SemiImplicitEuler;
  double contact_stiffness = 2e4;  // N/m per contact point
  double contact_damping = 2e2;    // N s/m per contact point
  double friction = 0.8;
  double friction_damping = 2e2;   // N s/m, tangential viscous law under the Coulomb cap
  double episode_length = 20.0;    // s
  double min_height_fraction = 0.6;
  double max_pitch = 1.0;          // rad
  bool fixed_base = false;
  double action_scale = 0.5;       // rad per unit action
  double action_clip = 2.0;        // |a| bound before scaling
  double command_forward_min = 0.0;
  double command_forward_max = 1.0;
  double push_interval = 5.0;      // s between impulse events
  double force_duration = 0.2;     // s
  double force_reference_mass = 60.0;  // kg; external forces scale by robot mass / this
  double linear_velocity_noise = 0.1;
  double initial_joint_noise = 0.05;
  bool randomize = true;

  double control_dt() const { return timestep * decimation; }
  int episode_steps() const { return static_cast<int>(std::lround(episode_length / control_dt())); }
};

inline void validate(const SimConfig& c) {
  if (!(c.timestep > 0.0)) throw ConfigError("sim.timestep must be positive");
  if (c.decimation < 1) throw ConfigError("sim.decimation must be >= 1");
  if (!(c.contact_stiffness > 0.0) || c.contact_damping < 0.0 || c.friction < 0.0 || c.friction_damping < 0.0)
    throw ConfigError("sim contact parameters must be non-negative (stiffness positive)");
  if (!(c.episode_length > 0.0)) throw ConfigError("sim.episode_length must be positive");
  if (!(c.action_scale > 0.0) || !(c.action_clip > 0.0)) throw ConfigError("sim action scale and clip must be positive");
  if (c.command_forward_min > c.command_forward_max) throw ConfigError("sim command range is inverted");
  if (!(c.push_interval > 0.0) || c.force_duration < 0.0 || !(c.force_reference_mass > 0.0))
    throw ConfigError("sim disturbance timing must be positive");
}

struct Range {
  double low = 0.0;
  double high = 0.0;
  double sample(std::mt19937_64& rng) const {
    if (low == high) return low;
    return std::uniform_real_distribution<double>(low, high)(rng);
  }
};

// Defaults reproduce the published randomization table.
struct RandomizationRanges {
  Range mass{-0.05, 0.05};           // kg added to the torso
  Range com_x{-0.05, 0.05};          // m
  Range com_z{-0.05, 0.05};          // m
  Range motor_strength{0.7, 1.4};    // multiplier
  Range impulse{0.0, 0.8};           // m/s added to the base velocity
  Range external_force{-500.0, 500.0};  // N before mass scaling
  Range linear_velocity{0.8, 1.2};   // observation multiplier
};

inline void validate(const RandomizationRanges& r) {
  for (const Range* x : {&r.mass, &r.com_x, &r.com_z, &r.motor_strength, &r.impulse, &r.external_force, &r.linear_velocity})
    if (!(x->low <= x->high)) throw ConfigError("randomization range has low > high");
}

struct Impulse {
  double time = 0.0;       // s
  double magnitude = 0.0;  // m/s
  double sign = 1.0;
};

struct ForceWindow {
  double start = 0.0;     // s
  double duration = 0.0;  // s
  double sampled = 0.0;   // N, as drawn from the range
  double applied = 0.0;   // N, after mass scaling
  bool active(double t) const { return duration > 0.0 && t >= start && t < start + duration; }
};

struct RandomizationSample {
  double mass_offset = 0.0;
  double com_x = 0.0;
  double com_z = 0.0;
  double motor_strength = 1.0;
  double linear_velocity_gain = 1.0;
  std::vector<Impulse> impulses;
  ForceWindow force;
};

struct RandomizedModel {
  RobotModel model;
  RandomizationSample sample;
};

// Mass and center-of-mass offsets act on the base link. One impulse per
// push interval at a uniform time inside it; one external force window per
// episode at a uniform start.
inline RandomizedModel randomize(const RobotModel& base, const RandomizationRanges& ranges, const SimConfig& cfg,
                                 std::uint64_t seed) {
  validate(ranges);
  std::mt19937_64 rng(seed);
  RandomizedModel out{base, {}};
  auto& s = out.sample;
  s.mass_offset = ranges.mass.sample(rng);
  s.com_x = ranges.com_x.sample(rng);
  s.com_z = ranges.com_z.sample(rng);
  s.motor_strength = ranges.motor_strength.sample(rng);
  s.linear_velocity_gain = ranges.linear_velocity.sample(rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (double t0 = 0.0; t0 + cfg.push_interval <= cfg.episode_length + 1e-9; t0 += cfg.push_interval) {
    Impulse imp;
    imp.time = t0 + unit(rng) * cfg.push_interval;
    imp.magnitude = ranges.impulse.sample(rng);
    imp.sign = unit(rng) < 0.5 ? -1.0 : 1.0;
    s.impulses.push_back(imp);
  }
  s.force.duration = cfg.force_duration;
  s.force.start = unit(rng) * std::max(0.0, cfg.episode_length - cfg.force_duration);
  s.force.sampled = ranges.external_force.sample(rng);

  auto& torso = out.model.links[0];
  torso.mass = std::max(1e-6, torso.mass + s.mass_offset);
  torso.com_offset += Vec2(s.com_x, s.com_z);
  s.force.applied = s.force.sampled * out.model.total_mass() / cfg.force_reference_mass;
  out.model.finalize();
  return out;
}

// ---------------------------------------------------------------------------
// Dynamics

struct Actuation {
  VecX target;            // joint position targets; empty means zero actuator torque
  double strength = 1.0;  // motor strength multiplier
};

inline VecX pd_torques(const RobotModel& m, const VecX& q, const VecX& qd, const Actuation& act) {
  VecX tau = VecX::Zero(m.joint_count());
  if (act.target.size() == 0) return tau;
  for (int j = 0; j < m.joint_count(); ++j) {
    const auto& jt = m.joints[j];
    const double raw = act.strength * (jt.stiffness * (act.target[j] - q[j]) - jt.damping * qd[j]);
    tau[j] = std::clamp(raw, -jt.torque_limit, jt.torque_limit);
  }
  return tau;
}

struct ContactPoint {
  int foot = 0;
  Vec2 position = Vec2::Zero();
  Vec2 velocity = Vec2::Zero();
  double penetration = 0.0;
  Vec2 force = Vec2::Zero();  // (tangential, normal)
};

// Spring-damper normal force clamped at zero, viscous tangential force capped
// by the Coulomb cone.
inline Vec2 penalty_contact(double penetration, const Vec2& velocity, const SimConfig& cfg) {
  if (penetration <= 0.0) return Vec2::Zero();
  const double normal = std::max(0.0, cfg.contact_stiffness * penetration - cfg.contact_damping * velocity.y());
  const double cap = cfg.friction * normal;
  const double tangential = std::clamp(-cfg.friction_damping * velocity.x(), -cap, cap);
  return Vec2(tangential, normal);
}

class PlanarDynamics {
 public:
  PlanarDynamics(const RobotModel& m, const SimConfig& cfg) : m_(m), cfg_(cfg) {}

  struct Result {
    VecX acceleration;
    std::array<Vec2, 2> foot_forces{Vec2::Zero(), Vec2::Zero()};
  };

  // 2 x dof translational Jacobian of a point fixed on `link`.
  MatX point_jacobian(const LinkPoses& p, int link, const Vec2& point) const {
    MatX J = MatX::Zero(2, m_.dof());
    J(0, 0) = 1.0;
    J(1, 1) = 1.0;
    J.col(2) = perp(point - p.origin[0]);
    for (int j : m_.chain(link)) J.col(3 + j) = perp(point - p.origin[m_.joints[j].child]);
    return J;
  }

  MatX mass_matrix(const VecX& q) const {
    const auto p = poses(q);
    MatX M = MatX::Zero(m_.dof(), m_.dof());
    for (int l = 0; l < static_cast<int>(m_.links.size()); ++l) {
      const auto& link = m_.links[l];
      const MatX J = point_jacobian(p, l, p.point(l, link.com_offset));
      M.noalias() += link.mass * J.transpose() * J;
      const auto w = angular_jacobian(l);
      M.noalias() += link.inertia * w * w.transpose();
    }
    for (int j = 0; j < m_.joint_count(); ++j) M(3 + j, 3 + j) += m_.joints[j].armature;
    return M;
  }

  std::vector<ContactPoint> contacts(const VecX& q, const VecX& v) const {
    const auto p = poses(q);
    std::vector<ContactPoint> out;
    for (int f = 0; f < 2; ++f) {
      const auto& foot = m_.feet[f];
      for (const auto& c : foot.contact_points) {
        ContactPoint cp;
        cp.foot = f;
        cp.position = p.point(foot.link, c);
        cp.penetration = -cp.position.y();
        if (cp.penetration > 0.0) {
          cp.velocity = point_jacobian(p, foot.link, cp.position) * v;
          cp.force = penalty_contact(cp.penetration, cp.velocity, cfg_);
        }
        out.push_back(cp);
      }
    }
    return out;
  }

  // Generalized accelerations for joint torques `tau` and a horizontal force on
  // the base link's center of mass.
  Result accelerations(const VecX& q, const VecX& v, const VecX& tau, double base_force) const {
    const auto p = poses(q);
    const int n = m_.joint_count();
    const int dof = m_.dof();
    MatX M = MatX::Zero(dof, dof);
    VecX rhs = VecX::Zero(dof);

    // Velocity-product accelerations of link origins: a = sum over chain of -w^2 r.
    const int nl = static_cast<int>(m_.links.size());
    std::vector<double> omega(nl, v[2]);
    std::vector<Vec2> bias(nl, Vec2::Zero());
    for (int j : m_.topological_order()) {
      const auto& jt = m_.joints[j];
      omega[jt.child] = omega[jt.parent] + v[3 + j];
      bias[jt.child] = bias[jt.parent] - omega[jt.parent] * omega[jt.parent] * (p.origin[jt.child] - p.origin[jt.parent]);
    }
    const Vec2 g(0.0, -m_.gravity);
    for (int l = 0; l < nl; ++l) {
      const auto& link = m_.links[l];
      const Vec2 com = p.point(l, link.com_offset);
      const MatX J = point_jacobian(p, l, com);
      const auto w = angular_jacobian(l);
      M.noalias() += link.mass * J.transpose() * J;
      M.noalias() += link.inertia * w * w.transpose();
      const Vec2 a_bias = bias[l] - omega[l] * omega[l] * (com - p.origin[l]);
      rhs.noalias() += J.transpose() * (link.mass * (g - a_bias));
      if (l == 0 && base_force != 0.0) rhs.noalias() += J.transpose() * Vec2(base_force, 0.0);
    }
    for (int j = 0; j < n; ++j) {
      M(3 + j, 3 + j) += m_.joints[j].armature;
      rhs[3 + j] += tau[j] - m_.joints[j].friction * v[3 + j];
    }

    Result r;
    for (int f = 0; f < 2; ++f) {
      const auto& foot = m_.feet[f];
      for (const auto& c : foot.contact_points) {
        const Vec2 pos = p.point(foot.link, c);
        if (pos.y() >= 0.0) continue;
        const MatX J = point_jacobian(p, foot.link, pos);
        const Vec2 force = penalty_contact(-pos.y(), J * v, cfg_);
        rhs.noalias() += J.transpose() * force;
        r.foot_forces[f] += force;
      }
    }

    r.acceleration = VecX::Zero(dof);
    if (cfg_.fixed_base) {
      r.acceleration.tail(n) = M.bottomRightCorner(n, n).llt().solve(rhs.tail(n));
    } else {
      r.acceleration = M.llt().solve(rhs);
    }
    return r;
  }

  // Kinetic + gravitational + contact-spring energy.
  double energy(const VecX& q, const VecX& v) const {
    const auto p = poses(q);
    double e = 0.5 * v.dot(mass_matrix(q) * v);
    for (int l = 0; l < static_cast<int>(m_.links.size()); ++l)
      e += m_.links[l].mass * m_.gravity * p.point(l, m_.links[l].com_offset).y();
    for (const auto& c : contacts(q, v))
      if (c.penetration > 0.0) e += 0.5 * cfg_.contact_stiffness * c.penetration * c.penetration;
    return e;
  }

  LinkPoses poses(const VecX& q) const { return forward_kinematics(m_, q.head<2>(), q[2], q.tail(m_.joint_count())); }

 private:
  VecX angular_jacobian(int link) const {
    VecX w = VecX::Zero(m_.dof());
    w[2] = 1.0;
    for (int j : m_.chain(link)) w[3 + j] = 1.0;
    return w;
  }

  const RobotModel& m_;
  const SimConfig& cfg_;
};

// Per-foot (tangential, normal) ground force at the current state.
inline std::array<Vec2, 2> contact_forces(const SimState& s, const RobotModel& m, const SimConfig& cfg) {
  PlanarDynamics dyn(m, cfg);
  std::array<Vec2, 2> out{Vec2::Zero(), Vec2::Zero()};
  for (const auto& c : dyn.contacts(s.generalized_positions(), s.generalized_velocities())) out[c.foot] += c.force;
  return out;
}

inline double mechanical_energy(const SimState& s, const RobotModel& m, const SimConfig& cfg) {
  return PlanarDynamics(m, cfg).energy(s.generalized_positions(), s.generalized_velocities());
}

// Advances the state by one physics step. Returns the joint torques applied at
// the start of the step.
inline VecX physics_step(SimState& s, const RobotModel& m, const SimConfig& cfg, const Actuation& act,
                         double base_force = 0.0) {
  PlanarDynamics dyn(m, cfg);
  const int n = m.joint_count();
  const double h = cfg.timestep;
  VecX q = s.generalized_positions();
  VecX v = s.generalized_velocities();
  if (cfg.fixed_base) v.head<3>().setZero();

  auto accel = [&](const VecX& qq, const VecX& vv, VecX* tau_out) {
    VecX tau = pd_torques(m, qq.tail(n), vv.tail(n), act);
    if (tau_out) *tau_out = tau;
    return dyn.accelerations(qq, vv, tau, base_force).acceleration;
  };

  VecX tau;
  if (cfg.integrator == Integrator::SemiImplicitEuler) {
    const VecX a = accel(q, v, &tau);
    v += h * a;
    q += h * v;
  } else {
    const VecX a1 = accel(q, v, &tau);
    const VecX v1 = v;
    const VecX a2 = accel(q + 0.5 * h * v1, v + 0.5 * h * a1, nullptr);
    const VecX v2 = v + 0.5 * h * a1;
    const VecX a3 = accel(q + 0.5 * h * v2, v + 0.5 * h * a2, nullptr);
    const VecX v3 = v + 0.5 * h * a2;
    const VecX a4 = accel(q + h * v3, v + h * a3, nullptr);
    const VecX v4 = v + h * a3;
    q += (h / 6.0) * (v1 + 2.0 * v2 + 2.0 * v3 + v4);
    v += (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
  }
  s.set_generalized(q, v);
  s.time += h;
  s.foot_forces = contact_forces(s, m, cfg);
  return tau;
}

// Base height that puts the lowest contact point of the given pose on the ground.
inline double standing_height(const RobotModel& m, const VecX& joints, double pitch = 0.0) {
  const auto p = forward_kinematics(m, Vec2::Zero(), pitch, joints);
  double lowest = std::numeric_limits<double>::infinity();
  for (const auto& f : m.feet)
    for (const auto& c : f.contact_points) lowest = std::min(lowest, p.point(f.link, c).y());
  return -lowest;
}

// ---------------------------------------------------------------------------
// Episodes

struct EnvSpec {
  RobotModel model;
  SimConfig sim;
  RandomizationRanges ranges;
  GaitClock gait;  // phase is re-drawn at every reset
  RewardWeights rewards;
};

struct StepResult {
  PolicyObservation observation;  // after the step, before any reset
  RewardReport report;            // imitation term is 0 until relabeled
  bool done = false;
  bool terminal = false;          // fell
  bool timeout = false;
  VecX torques;
  TransitionPair transition;      // discriminator observations before/after
};

class Episode {
 public:
  Episode(std::shared_ptr<const EnvSpec> spec, int id, std::uint64_t seed)
      : spec_(std::move(spec)), id_(id), seeder_(seed) {
    nominal_height_ = standing_height(spec_->model, spec_->model.default_positions());
    reset();
  }

  // Starts a new episode with the next seed of this environment's seed stream.
  void reset() { reset_with(seeder_()); }

  void reset_with(std::uint64_t seed) {
    const auto& spec = *spec_;
    seed_ = seed;
    rng_.seed(seed);
    policy_rng_.seed(seed ^ 0x9e3779b97f4a7c15ULL);
    if (spec.sim.randomize) {
      randomized_ = randomize(spec.model, spec.ranges, spec.sim, rng_());
    } else {
      randomized_ = RandomizedModel{spec.model, {}};
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    command_ = Command{spec.sim.command_forward_min +
                           unit(rng_) * (spec.sim.command_forward_max - spec.sim.command_forward_min),
                       0.0, 0.0};
    clock_ = spec.gait;
    clock_.phase = wrap_unit(unit(rng_));
    validate_clock(clock_);
    const auto& m = randomized_.model;
    state_ = rest_state(m);
    state_.joint_positions = m.default_positions();
    for (int j = 0; j < m.joint_count(); ++j)
      state_.joint_positions[j] += spec.sim.initial_joint_noise * (2.0 * unit(rng_) - 1.0);
    if (!spec.sim.fixed_base) state_.root_position = Vec2(0.0, standing_height(m, state_.joint_positions));
    state_.foot_forces = contact_forces(state_, m, spec.sim);
    memory_ = {};
    prev_action_ = VecX::Zero(m.joint_count());
    prev_joint_velocities_ = VecX::Zero(m.joint_count());
    steps_ = 0;
    done_ = false;
    next_impulse_ = 0;
    observe();
  }

  StepResult step(const Action& action) {
    if (done_) throw std::logic_error("stepping a finished episode; call reset() first");
    const auto& spec = *spec_;
    const auto& m = randomized_.model;
    const auto& sample = randomized_.sample;
    if (action.size() != m.joint_count()) throw DimensionError("action length does not match the joint count");
    if (!action.allFinite()) throw NumericalError("non-finite action");

    const Action clipped = action.cwiseMax(-spec.sim.action_clip).cwiseMin(spec.sim.action_clip);
    Actuation act{m.default_positions() + spec.sim.action_scale * clipped, sample.motor_strength};
    StepResult r;
    r.transition.current = assemble_discriminator_observation(state_, m).values;

    for (int k = 0; k < spec.sim.decimation; ++k) {
      const double t = state_.time;
      while (next_impulse_ < sample.impulses.size() && sample.impulses[next_impulse_].time < t + spec.sim.timestep) {
        const auto& imp = sample.impulses[next_impulse_];
        if (imp.time >= t) state_.root_velocity.x() += imp.sign * imp.magnitude;
        ++next_impulse_;
      }
      const double force = sample.force.active(t) ? sample.force.applied : 0.0;
      r.torques = physics_step(state_, m, spec.sim, act, force);
    }
    if (!state_.generalized_positions().allFinite() || !state_.generalized_velocities().allFinite())
      throw NumericalError("simulation state became non-finite");
    ++steps_;
    const double dt = spec.sim.control_dt();
    clock_ = advance(clock_, dt);

    const auto poses = forward_kinematics(m, state_);
    const auto feet = foot_positions(m, poses);
    const auto vel = foot_velocities(m, state_);
    const std::array<double, 2> speeds{vel[0].norm(), vel[1].norm()};
    const auto& w = spec.rewards;
    RewardTerms terms{};
    auto at = [&](Term t) -> double& { return terms[static_cast<int>(t)]; };
    at(Term::Command) = command_reward(command_velocity(state_), command_, w);
    at(Term::Periodic) = periodic_reward({state_.foot_forces[0].norm(), state_.foot_forces[1].norm()}, speeds,
                                         leg_stance_expectations(clock_), w);
    at(Term::FootSpeed) = foot_speed_reward(clock_, speeds, w);
    at(Term::HeightDifference) = height_difference_reward(clock_, {feet[0].y(), feet[1].y()}, w);
    auto [sym, mem] = symmetry_reward(feet, clock_, memory_, w);
    at(Term::Symmetry) = sym;
    memory_ = mem;
    const VecX accel = (state_.joint_velocities - prev_joint_velocities_) / dt;
    set_regularization(terms, regularization_rewards(state_, clipped, prev_action_, r.torques, accel, m, w));
    r.report = total_reward(terms, w);

    r.terminal = spec.sim.fixed_base ? false
                                     : (state_.root_position.y() < spec.sim.min_height_fraction * nominal_height_ ||
                                        std::abs(state_.pitch) > spec.sim.max_pitch);
    r.timeout = steps_ >= spec.sim.episode_steps();
    r.done = r.terminal || r.timeout;
    done_ = r.done;
    r.transition.next = assemble_discriminator_observation(state_, m).values;

    prev_action_ = clipped;
    prev_joint_velocities_ = state_.joint_velocities;
    observe();
    r.observation = observation_;
    return r;
  }

  bool done() const { return done_; }
  int id() const { return id_; }
  int steps() const { return steps_; }
  std::uint64_t seed() const { return seed_; }
  const SimState& state() const { return state_; }
  SimState& mutable_state() { return state_; }
  const GaitClock& clock() const { return clock_; }
  const Command& command() const { return command_; }
  void set_command(const Command& c) {
    command_ = c;
    observe_without_noise_draw();
  }
  const SymmetryMemory& memory() const { return memory_; }
  const RandomizedModel& randomized() const { return randomized_; }
  const EnvSpec& spec() const { return *spec_; }
  const PolicyObservation& observation() const { return observation_; }
  std::mt19937_64& policy_rng() { return policy_rng_; }
  double nominal_height() const { return nominal_height_; }

 private:
  void observe() {
    const auto& m = randomized_.model;
    observation_ = assemble_observation(m, state_, command_, clock_, prev_action_,
                                        default_noise_scale(m, spec_->sim.linear_velocity_noise), rng_,
                                        randomized_.sample.linear_velocity_gain);
  }
  void observe_without_noise_draw() {
    const ObservationLayout layout{randomized_.model.joint_count()};
    observation_.values.segment<3>(layout.command()) << command_.forward, command_.lateral, command_.yaw_rate;
  }

  std::shared_ptr<const EnvSpec> spec_;
  int id_ = 0;
  std::mt19937_64 seeder_;
  std::mt19937_64 rng_;
  std::mt19937_64 policy_rng_;
  std::uint64_t seed_ = 0;
  RandomizedModel randomized_;
  SimState state_;
  GaitClock clock_;
  Command command_;
  SymmetryMemory memory_;
  Action prev_action_;
  VecX prev_joint_velocities_;
  PolicyObservation observation_;
  double nominal_height_ = 0.0;
  int steps_ = 0;
  bool done_ = false;
  std::size_t next_impulse_ = 0;
};

// ---------------------------------------------------------------------------
// Parallel rollouts

// Column index of (env e, step t) is e * horizon + t.
struct Rollout {
  int num_envs = 0;
  int horizon = 0;
  MatX observations;       // obs_dim x N*T, observation the action was taken from
  MatX actions;            // action_dim x N*T
  VecX log_probs;          // N*T
  MatX next_observations;  // obs_dim x N*T, observation after the step (pre-reset)
  std::vector<RewardReport> reports;
  std::vector<std::uint8_t> dones;
  std::vector<std::uint8_t> terminals;
  MatX transitions;        // 2*disc_dim x N*T

  int size() const { return num_envs * horizon; }
  int index(int env, int t) const { return env * horizon + t; }
};

// `policy(obs, rng)` returns {action, log_probability}. It must be safe to call
// concurrently (read-only snapshot). Each environment uses its own policy RNG,
// so results do not depend on the worker count.
template <class Policy>
Rollout run_parallel(std::vector<Episode>& envs, const Policy& policy, int steps, int workers = 0) {
  if (envs.empty()) throw DomainError("run_parallel needs at least one environment");
  const int n = static_cast<int>(envs.size());
  const auto& m = envs.front().spec().model;
  const int obs_dim = observation_dim(m);
  const int disc_dim = discriminator_observation_dim(m);
  Rollout r;
  r.num_envs = n;
  r.horizon = steps;
  r.observations.resize(obs_dim, n * steps);
  r.next_observations.resize(obs_dim, n * steps);
  r.actions.resize(m.joint_count(), n * steps);
  r.log_probs.resize(n * steps);
  r.reports.resize(static_cast<std::size_t>(n) * steps);
  r.dones.assign(static_cast<std::size_t>(n) * steps, 0);
  r.terminals.assign(static_cast<std::size_t>(n) * steps, 0);
  r.transitions.resize(2 * disc_dim, n * steps);

  auto run_env = [&](int e) {
    auto& env = envs[e];
    for (int t = 0; t < steps; ++t) {
      const int c = r.index(e, t);
      const VecX obs = env.observation().values;
      auto [action, logp] = policy(obs, env.policy_rng());
      r.observations.col(c) = obs;
      r.actions.col(c) = action;
      r.log_probs[c] = logp;
      StepResult s = env.step(action);
      r.next_observations.col(c) = s.observation.values;
      r.reports[c] = s.report;
      r.dones[c] = s.done;
      r.terminals[c] = s.terminal;
      r.transitions.col(c) << s.transition.current, s.transition.next;
      if (s.done) env.reset();
    }
  };

  int threads = workers > 0 ? workers : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (int e = 0; e < n; ++e) run_env(e);
    return r;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    for (int w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (int e = w; e < n; e += threads) run_env(e);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return r;
}

// ---------------------------------------------------------------------------
// Cross-integrator validation

struct DivergenceRow {
  int step = 0;
  double root_x = 0.0;
  double root_z = 0.0;
  double pitch = 0.0;
  double joint = 0.0;  // max over joints
};

struct DivergenceReport {
  std::vector<DivergenceRow> rows;
  DivergenceRow max;
};

inline DivergenceRow divergence(int step, const SimState& a, const SimState& b) {
  DivergenceRow d;
  d.step = step;
  d.root_x = std::abs(a.root_position.x() - b.root_position.x());
  d.root_z = std::abs(a.root_position.y() - b.root_position.y());
  d.pitch = std::abs(a.pitch - b.pitch);
  d.joint = (a.joint_positions - b.joint_positions).cwiseAbs().maxCoeff();
  return d;
}

inline void accumulate_max(DivergenceReport& r) {
  r.max = {};
  r.max.step = r.rows.empty() ? 0 : r.rows.back().step;
  for (const auto& row : r.rows) {
    r.max.root_x = std::max(r.max.root_x, row.root_x);
    r.max.root_z = std::max(r.max.root_z, row.root_z);
    r.max.pitch = std::max(r.max.pitch, row.pitch);
    r.max.joint = std::max(r.max.joint, row.joint);
  }
}

// Runs `policy(obs) -> action` closed-loop in two copies of the same episode
// (same seed) that differ only in integrator. Stops at `steps` or when either
// copy finishes.
template <class Policy>
DivergenceReport crossval(const EnvSpec& spec, const Policy& policy, std::uint64_t seed, int steps,
                          Integrator first = Integrator::SemiImplicitEuler,
                          Integrator second = Integrator::RungeKutta4) {
  auto make = [&](Integrator kind) {
    auto s = std::make_shared<EnvSpec>(spec);
    s->sim.integrator = kind;
    Episode e(s, 0, 0);
    e.reset_with(seed);
    return e;
  };
  Episode a = make(first);
  Episode b = make(second);
  DivergenceReport report;
  for (int t = 0; t < steps; ++t) {
    const auto ra = a.step(policy(a.observation().values));
    const auto rb = b.step(policy(b.observation().values));
    report.rows.push_back(divergence(t + 1, a.state(), b.state()));
    if (ra.done || rb.done) break;
  }
  accumulate_max(report);
  return report;
}

struct PendulumScenario {
  double timestep = 1e-3;
  double horizon = 1.0;
  double initial_hip = 0.5;  // rad, left hip
};

inline SimState pendulum_initial_state(const RobotModel& m, const PendulumScenario& sc) {
  SimState s = rest_state(m);
  s.root_position = Vec2(0.0, 1.0);
  s.joint_positions[0] = sc.initial_hip;
  return s;
}

// Passive swing of the pinned robot released from a raised left hip.
inline std::vector<SimState> pendulum_trajectory(const RobotModel& m, const PendulumScenario& sc, Integrator kind,
                                                 double timestep) {
  SimConfig cfg;
  cfg.fixed_base = true;
  cfg.integrator = kind;
  cfg.timestep = timestep;
  SimState s = pendulum_initial_state(m, sc);
  const Actuation passive{};
  const auto steps = static_cast<long>(std::llround(sc.horizon / timestep));
  const long stride = std::max(1L, std::lround(sc.timestep / timestep));
  std::vector<SimState> out{s};
  for (long k = 1; k <= steps; ++k) {
    physics_step(s, m, cfg, passive);
    if (k % stride == 0) out.push_back(s);
  }
  return out;
}

inline DivergenceReport pendulum_crossval(const RobotModel& m, const PendulumScenario& sc,
                                          Integrator first = Integrator::SemiImplicitEuler,
                                          Integrator second = Integrator::RungeKutta4) {
  const auto a = pendulum_trajectory(m, sc, first, sc.timestep);
  const auto b = pendulum_trajectory(m, sc, second, sc.timestep);
  DivergenceReport r;
  for (std::size_t k = 1; k < a.size(); ++k) r.rows.push_back(divergence(static_cast<int>(k), a[k], b[k]));
  accumulate_max(r);
  return r;
}

}  // namespace amploco

#pragma once

#include <array>
#include <cmath>
#include <string_view>
#include <utility>

#include "amploco/gait.hpp"
#include "amploco/model.hpp"
#include "amploco/observation.hpp"

namespace amploco {

// Swing-reward gates. These are fixed by the reward definitions, not tunables.
inline constexpr double kFootSpeedGate = 0.6;
inline constexpr double kHeightGate = 0.3;

struct RegularizationCoefficients {
  double action_differential = 0.05;
  double dof_limits = 2.0;
  double dof_velocity = 1e-4;
  double dof_acceleration = 1e-7;
  double arm = 1.0;
  double orientation = 300.0;
  double torques = 5e-4;
};

enum class Term : int {
  Imitation,
  Command,
  Periodic,
  FootSpeed,
  HeightDifference,
  Symmetry,
  ActionDifferential,
  DofLimits,
  DofVelocity,
  DofAcceleration,
  ArmDof,
  Orientation,
  TorsoYaw,
  Torques,
};
inline constexpr int kTermCount = 14;
inline constexpr int kFirstRegularizationTerm = static_cast<int>(Term::ActionDifferential);

inline constexpr std::array<std::string_view, kTermCount> kTermNames = {
    "imitation",   "command",     "periodic",         "foot_speed",       "height_difference",
    "symmetry",    "action_differential", "dof_limits", "dof_velocity", "dof_acceleration",
    "arm_dof",     "orientation", "torso_yaw",        "torques"};

struct RewardWeights {
  std::array<double, 3> command_weight{1.0, 0.5, 0.5};     // lambda (x, y, yaw)
  std::array<double, 3> command_sharpness{4.0, 4.0, 4.0};  // omega (x, y, yaw)
  double stance_coefficient = 0.5;                         // alpha_stance
  double swing_coefficient = 0.5;                          // alpha_swing
  double stance_force_sharpness = 10.0;
  double swing_speed_sharpness = 200.0;
  double foot_speed_scale = 16.0;
  double height_scale = 2.0;
  double height_sharpness = 25.0;
  double height_clearance = 0.02;  // m
  double symmetry_scale = 3.3;
  double symmetry_sharpness = 10.0;
  RegularizationCoefficients regularization;

  // Mixing weights of the total reward.
  double imitation = 0.5;
  double command = 0.5;
  double periodic = 0.1;  // applies to the periodic reward and all swing terms
  std::array<double, 8> regularization_scale{0.02, 0.02, 0.02, 0.02, 0.02, 0.05, -0.05, 0.02};

  // Evaluate the arm and DoF-limit rows exactly as printed in the source table
  // (exp(+|b_arm|_1) and the raw min/max composition) instead of as penalties.
  bool literal_table2 = false;
};

struct SymmetryMemory {
  Vec2 stored = Vec2::Zero();  // delta f
  Vec2 lagged = Vec2::Zero();  // delta l
};

using RewardTerms = std::array<double, kTermCount>;

struct RewardReport {
  RewardTerms terms{};     // unweighted
  RewardTerms weighted{};  // terms[k] * mixing weight k
  double total = 0.0;

  double operator[](Term t) const { return terms[static_cast<int>(t)]; }
};

// sum_i lambda_i exp(-omega_i |v_des_i - v_i|) over (x, y, yaw).
inline double command_reward(const std::array<double, 3>& actual, const Command& desired, const RewardWeights& w) {
  const std::array<double, 3> target{desired.forward, desired.lateral, desired.yaw_rate};
  double r = 0.0;
  for (int i = 0; i < 3; ++i) r += w.command_weight[i] * std::exp(-w.command_sharpness[i] * std::abs(target[i] - actual[i]));
  return r;
}

// Planar velocity triple used by the command reward: world forward speed, no
// lateral or yaw motion.
inline std::array<double, 3> command_velocity(const SimState& s) { return {s.root_velocity.x(), 0.0, 0.0}; }

inline double periodic_reward(const std::array<double, 2>& force_norms, const std::array<double, 2>& foot_speeds,
                              const std::pair<double, double>& stance, const RewardWeights& w) {
  const std::array<double, 2> q{stance.first, stance.second};
  double r = 0.0;
  for (int f = 0; f < 2; ++f) {
    r += w.stance_coefficient * q[f] * std::exp(-w.stance_force_sharpness * force_norms[f] * force_norms[f]);
    r += w.swing_coefficient * (1.0 - q[f]) * std::exp(-w.swing_speed_sharpness * foot_speeds[f] * foot_speeds[f]);
  }
  return r;
}

inline double periodic_reward(const RobotModel& m, const SimState& s, const GaitClock& clock, const RewardWeights& w) {
  const auto vel = foot_velocities(m, s);
  return periodic_reward({s.foot_forces[0].norm(), s.foot_forces[1].norm()}, {vel[0].norm(), vel[1].norm()},
                         leg_stance_expectations(clock), w);
}

inline double foot_speed_reward(const GaitClock& clock, const std::array<double, 2>& foot_speeds,
                                const RewardWeights& w) {
  const auto [pl, pr] = leg_swing_progress(clock);
  const std::array<double, 2> progress{pl, pr};
  double r = 0.0;
  for (int f = 0; f < 2; ++f) {
    const double q = std::clamp(progress[f] - 0.5, 0.0, 1.0);
    if (q <= kFootSpeedGate) {
      const double a = q * foot_speeds[f];
      r += w.foot_speed_scale * a * a;
    }
  }
  return r;
}

inline double height_difference_reward(const GaitClock& clock, const std::array<double, 2>& foot_heights,
                                       const RewardWeights& w) {
  const auto [pl, pr] = leg_swing_progress(clock);
  const std::array<double, 2> progress{pl, pr};
  double r = 0.0;
  for (int f = 0; f < 2; ++f) {
    const double q = progress[f];
    if (q >= 0.0 && q <= kHeightGate) {
      const double dh = foot_heights[f] - foot_heights[1 - f] - w.height_clearance;
      r += w.height_scale * std::exp(-w.height_sharpness * std::abs(dh));
    }
  }
  return r;
}

// Foot-separation symmetry reward. The memory update follows the published
// order: stored first, then lagged from the freshly stored value, so during
// double support lagged == d and the reward sees 2|d|_1.
inline std::pair<double, SymmetryMemory> symmetry_reward(const std::array<Vec2, 2>& foot_world,
                                                         const GaitClock& clock, const SymmetryMemory& mem,
                                                         const RewardWeights& w) {
  const Vec2 d = foot_world[0] - foot_world[1];
  const auto [q1, q2] = leg_stance_expectations(clock);
  const double tf = (q1 > 0.5 && q2 > 0.5) ? 1.0 : 0.0;
  SymmetryMemory next;
  next.stored = tf * d + (1.0 - tf) * mem.stored;
  next.lagged = (1.0 - tf) * next.stored + tf * d;
  const double r = w.symmetry_scale * tf * std::exp(-w.symmetry_sharpness * (d + next.lagged).lpNorm<1>());
  return {r, next};
}

struct RegularizationTerms {
  double action_differential = 1.0;
  double dof_limits = 1.0;
  double dof_velocity = 1.0;
  double dof_acceleration = 1.0;
  double arm_dof = 1.0;
  double orientation = 1.0;
  double torso_yaw = 0.0;
  double torques = 1.0;
};

// Sum over joints of the distance outside [lower, upper].
inline double limit_overshoot(const RobotModel& m, const VecX& q) {
  double o = 0.0;
  for (int j = 0; j < m.joint_count(); ++j)
    o += std::max(0.0, q[j] - m.joints[j].upper) + std::max(0.0, m.joints[j].lower - q[j]);
  return o;
}

// `joint_accelerations` are finite differences of consecutive joint velocities
// over the control step.
inline RegularizationTerms regularization_rewards(const SimState& s, const Action& action, const Action& prev_action,
                                                  const VecX& torques, const VecX& joint_accelerations,
                                                  const RobotModel& m, const RewardWeights& w) {
  const auto& c = w.regularization;
  RegularizationTerms t;
  t.action_differential = std::exp(-c.action_differential * (action - prev_action).norm());
  if (w.literal_table2) {
    double arg = 0.0;
    for (int j = 0; j < m.joint_count(); ++j) {
      const double b = s.joint_positions[j];
      arg += std::min(0.0, b - m.joints[j].upper) - std::max(0.0, b - m.joints[j].lower);
    }
    t.dof_limits = std::exp(-c.dof_limits * arg);
  } else {
    t.dof_limits = std::exp(-c.dof_limits * limit_overshoot(m, s.joint_positions));
  }
  t.dof_velocity = std::exp(-c.dof_velocity * s.joint_velocities.squaredNorm());
  t.dof_acceleration = std::exp(-c.dof_acceleration * joint_accelerations.squaredNorm());
  double arm = 0.0;
  for (int j : m.joints_in(JointGroup::Arm)) arm += std::abs(s.joint_positions[j]);
  t.arm_dof = std::exp((w.literal_table2 ? 1.0 : -1.0) * c.arm * arm);
  const double roll = 0.0;
  t.orientation = std::exp(-c.orientation * (roll * roll + s.pitch * s.pitch));
  double yaw = 0.0;
  for (int j : m.joints_in(JointGroup::TorsoYaw)) yaw += std::abs(s.joint_positions[j]);
  t.torso_yaw = yaw;
  t.torques = std::exp(-c.torques * torques.norm());
  return t;
}

inline void set_regularization(RewardTerms& terms, const RegularizationTerms& r) {
  auto at = [&](Term t) -> double& { return terms[static_cast<int>(t)]; };
  at(Term::ActionDifferential) = r.action_differential;
  at(Term::DofLimits) = r.dof_limits;
  at(Term::DofVelocity) = r.dof_velocity;
  at(Term::DofAcceleration) = r.dof_acceleration;
  at(Term::ArmDof) = r.arm_dof;
  at(Term::Orientation) = r.orientation;
  at(Term::TorsoYaw) = r.torso_yaw;
  at(Term::Torques) = r.torques;
}

inline RewardTerms mixing_weights(const RewardWeights& w) {
  RewardTerms k{};
  k[static_cast<int>(Term::Imitation)] = w.imitation;
  k[static_cast<int>(Term::Command)] = w.command;
  for (Term t : {Term::Periodic, Term::FootSpeed, Term::HeightDifference, Term::Symmetry})
    k[static_cast<int>(t)] = w.periodic;
  for (int i = 0; i < 8; ++i) k[kFirstRegularizationTerm + i] = w.regularization_scale[i];
  return k;
}

inline RewardReport total_reward(const RewardTerms& terms, const RewardWeights& w) {
  const auto k = mixing_weights(w);
  RewardReport r;
  r.terms = terms;
  for (int i = 0; i < kTermCount; ++i) {
    r.weighted[i] = terms[i] * k[i];
    r.total += r.weighted[i];
  }
  return r;
}

}  // namespace amploco

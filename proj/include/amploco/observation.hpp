#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "amploco/gait.hpp"
#include "amploco/model.hpp"

namespace amploco {

// Desired base velocities. Lateral and yaw components stay 0 for planar models.
struct Command {
  double forward = 0.0;  // m/s
  double lateral = 0.0;  // m/s
  double yaw_rate = 0.0; // rad/s
};

// Target joint-position offsets (rad), one per actuated joint.
using Action = VecX;

// Policy observation layout, version 1 (n = actuated joint count):
//   [0, 2)          base linear velocity (x, z) in the base frame
//   [2]             base angular velocity
//   [3, 5)          gravity direction in the base frame
//   [5, 8)          command (forward, lateral, yaw rate)
//   [8, 8+n)        joint positions
//   [8+n, 8+2n)     joint velocities
//   [8+2n, 11+2n)   sin(2 pi phase), cos(2 pi phase), swing ratio
//   [11+2n]         base height
//   [12+2n, 12+3n)  previous action
struct ObservationLayout {
  static constexpr int kVersion = 1;
  int joints = 0;

  int linear_velocity() const { return 0; }
  int angular_velocity() const { return 2; }
  int gravity() const { return 3; }
  int command() const { return 5; }
  int joint_positions() const { return 8; }
  int joint_velocities() const { return 8 + joints; }
  int clock() const { return 8 + 2 * joints; }
  int height() const { return 11 + 2 * joints; }
  int previous_action() const { return 12 + 2 * joints; }
  int dim() const { return 12 + 3 * joints; }
};

struct PolicyObservation {
  VecX values;
};

inline int observation_dim(const RobotModel& m) { return ObservationLayout{m.joint_count()}.dim(); }

// Per-channel noise amplitudes: zero everywhere except base linear velocity.
inline VecX default_noise_scale(const RobotModel& m, double linear_velocity_noise = 0.1) {
  ObservationLayout layout{m.joint_count()};
  VecX s = VecX::Zero(layout.dim());
  s.segment<2>(layout.linear_velocity()).setConstant(linear_velocity_noise);
  return s;
}

inline Vec2 projected_gravity(double pitch) { return rotation(-pitch) * Vec2(0.0, -1.0); }

// Additive uniform noise in [-scale, scale] per channel. The noise draws always
// consume dim() samples from `rng`, whatever the scales, so streams stay aligned.
// `linear_velocity_gain` is the per-episode sensor multiplier from randomization.
inline PolicyObservation assemble_observation(const RobotModel& m, const SimState& s, const Command& cmd,
                                              const GaitClock& clock, const Action& prev_action,
                                              const VecX& noise_scale, std::mt19937_64& rng,
                                              double linear_velocity_gain = 1.0) {
  check_state(m, s);
  const ObservationLayout layout{m.joint_count()};
  if (prev_action.size() != m.joint_count()) throw DimensionError("previous action length does not match joints");
  if (noise_scale.size() != layout.dim()) throw DimensionError("noise scale length does not match observation");
  const int n = m.joint_count();
  VecX o(layout.dim());
  o.segment<2>(layout.linear_velocity()) = linear_velocity_gain * (rotation(-s.pitch) * s.root_velocity);
  o[layout.angular_velocity()] = s.pitch_rate;
  o.segment<2>(layout.gravity()) = projected_gravity(s.pitch);
  o.segment<3>(layout.command()) << cmd.forward, cmd.lateral, cmd.yaw_rate;
  o.segment(layout.joint_positions(), n) = s.joint_positions;
  o.segment(layout.joint_velocities(), n) = s.joint_velocities;
  const double angle = 2.0 * std::numbers::pi * clock.phase;
  o.segment<3>(layout.clock()) << std::sin(angle), std::cos(angle), clock.swing_ratio;
  o[layout.height()] = s.root_position.y();
  o.segment(layout.previous_action(), n) = prev_action;

  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int i = 0; i < layout.dim(); ++i) o[i] += noise_scale[i] * unit(rng);
  return {o};
}

// Layout: joint positions, joint velocities, foot positions (x, z) in the base
// frame (left, right), then hand positions in the base frame.
struct DiscriminatorObservation {
  VecX values;
};

inline int discriminator_observation_dim(const RobotModel& m) {
  return 2 * m.joint_count() + 4 + 2 * static_cast<int>(m.hands.size());
}

inline DiscriminatorObservation assemble_discriminator_observation(const SimState& s, const RobotModel& m) {
  check_state(m, s);
  const int n = m.joint_count();
  VecX o(discriminator_observation_dim(m));
  o.head(n) = s.joint_positions;
  o.segment(n, n) = s.joint_velocities;
  const auto poses = forward_kinematics(m, s);
  int k = 2 * n;
  for (const auto& f : m.feet) {
    o.segment<2>(k) = to_base_frame(s, poses.point(f.link, f.offset));
    k += 2;
  }
  for (const auto& h : m.hands) {
    o.segment<2>(k) = to_base_frame(s, poses.point(h.link, h.offset));
    k += 2;
  }
  return {o};
}

}  // namespace amploco

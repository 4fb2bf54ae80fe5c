#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "amploco/errors.hpp"

namespace amploco {

using Vec2 = Eigen::Vector2d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

// Planar rotation acting on (x, z) coordinates. Positive angles turn +x toward +z.
inline Eigen::Matrix2d rotation(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  return r;
}

// d/dangle (R v) = perp(R v)
inline Vec2 perp(const Vec2& v) { return Vec2(-v.y(), v.x()); }

struct Link {
  std::string name;
  double mass = 0.0;          // kg
  double length = 0.0;        // m
  Vec2 com_offset = Vec2::Zero();  // m, link frame
  double inertia = 0.0;       // kg m^2 about the center of mass
};

enum class JointGroup { Leg, Arm, TorsoYaw };

struct Joint {
  std::string name;
  int parent = -1;  // link index
  int child = -1;   // link index
  Vec2 anchor = Vec2::Zero();  // joint location in the parent link frame
  double lower = 0.0;          // rad
  double upper = 0.0;          // rad
  double velocity_limit = 0.0; // rad/s
  double torque_limit = 0.0;   // N m
  double stiffness = 0.0;      // PD gain, N m/rad
  double damping = 0.0;        // PD gain, N m s/rad
  double armature = 0.0;       // reflected rotor inertia, kg m^2
  double friction = 0.0;       // passive viscous damping, N m s/rad
  double default_position = 0.0;
  JointGroup group = JointGroup::Leg;
};

// A point rigidly attached to a link (foot sole, hand).
struct Frame {
  std::string name;
  int link = -1;
  Vec2 offset = Vec2::Zero();
  std::vector<Vec2> contact_points;  // link-frame points touching the ground
};

// Planar floating-base articulated robot. Link 0 is the floating base; the
// base pose (x, z, pitch) is the pose of link 0's frame.
class RobotModel {
 public:
  std::vector<Link> links;
  std::vector<Joint> joints;
  std::array<Frame, 2> feet;  // left, right
  std::vector<Frame> hands;
  double gravity = 9.81;

  int joint_count() const { return static_cast<int>(joints.size()); }
  int dof() const { return joint_count() + 3; }

  double total_mass() const {
    double m = 0.0;
    for (const auto& l : links) m += l.mass;
    return m;
  }

  // Joint whose child is `link`, -1 for the base.
  int parent_joint(int link) const { return parent_joint_[link]; }
  // Joints from the base down to `link`, base side first.
  const std::vector<int>& chain(int link) const { return chains_[link]; }
  // Joints ordered so every parent link is placed before its children.
  const std::vector<int>& topological_order() const { return order_; }

  std::vector<int> joints_in(JointGroup g) const {
    std::vector<int> out;
    for (int j = 0; j < joint_count(); ++j)
      if (joints[j].group == g) out.push_back(j);
    return out;
  }

  VecX default_positions() const {
    VecX q(joint_count());
    for (int j = 0; j < joint_count(); ++j) q[j] = joints[j].default_position;
    return q;
  }

  int find_link(const std::string& name) const {
    for (int i = 0; i < static_cast<int>(links.size()); ++i)
      if (links[i].name == name) return i;
    return -1;
  }

  // Checks every structural invariant and builds the tree caches.
  // Throws ConfigError on the first violation.
  void finalize();

 private:
  std::vector<int> parent_joint_;
  std::vector<std::vector<int>> chains_;
  std::vector<int> order_;
};

inline void RobotModel::finalize() {
  const int nl = static_cast<int>(links.size());
  if (nl < 1) throw ConfigError("robot model has no links");
  if (!(gravity >= 0.0) || !std::isfinite(gravity)) throw ConfigError("gravity must be finite and >= 0");
  for (const auto& l : links) {
    if (!(l.mass > 0.0) || !(l.length > 0.0) || !(l.inertia > 0.0))
      throw ConfigError("link '" + l.name + "': mass, length and inertia must be positive");
  }
  parent_joint_.assign(nl, -1);
  for (int j = 0; j < joint_count(); ++j) {
    const auto& jt = joints[j];
    if (jt.parent < 0 || jt.parent >= nl || jt.child < 0 || jt.child >= nl)
      throw ConfigError("joint '" + jt.name + "' references a missing link");
    if (jt.child == 0) throw ConfigError("joint '" + jt.name + "' has the floating base as child");
    if (!(jt.lower < jt.upper)) throw ConfigError("joint '" + jt.name + "': lower limit must be < upper limit");
    if (!(jt.velocity_limit > 0.0) || !(jt.torque_limit > 0.0) || !(jt.stiffness > 0.0) || !(jt.damping > 0.0))
      throw ConfigError("joint '" + jt.name + "': limits and gains must be positive");
    if (jt.armature < 0.0 || jt.friction < 0.0)
      throw ConfigError("joint '" + jt.name + "': armature and friction must be >= 0");
    if (parent_joint_[jt.child] != -1) throw ConfigError("link '" + links[jt.child].name + "' has two parent joints");
    parent_joint_[jt.child] = j;
  }
  for (int l = 1; l < nl; ++l)
    if (parent_joint_[l] == -1) throw ConfigError("link '" + links[l].name + "' is not connected to the base");

  chains_.assign(nl, {});
  for (int l = 0; l < nl; ++l) {
    std::vector<int> rev;
    int cur = l;
    while (cur != 0) {
      const int j = parent_joint_[cur];
      rev.push_back(j);
      cur = joints[j].parent;
      if (static_cast<int>(rev.size()) > joint_count()) throw ConfigError("joint graph contains a cycle");
    }
    chains_[l].assign(rev.rbegin(), rev.rend());
  }
  // Depth-sorted order is a valid topological order for a tree.
  order_.resize(joint_count());
  for (int j = 0; j < joint_count(); ++j) order_[j] = j;
  std::stable_sort(order_.begin(), order_.end(), [&](int a, int b) {
    return chains_[joints[a].child].size() < chains_[joints[b].child].size();
  });

  auto check_frame = [&](const Frame& f) {
    if (f.link < 0 || f.link >= nl) throw ConfigError("frame '" + f.name + "' is attached to a missing link");
  };
  for (const auto& f : feet) check_frame(f);
  for (const auto& f : hands) check_frame(f);
}

// Desk-scale planar biped: torso plus thigh, shank and foot per leg.
// Joints: left hip/knee/ankle, then right hip/knee/ankle.
inline RobotModel build_default_model() {
  RobotModel m;
  auto box_inertia = [](double mass, double length) { return mass * length * length / 12.0; };
  m.links.push_back({"torso", 4.0, 0.30, Vec2(0.0, 0.15), box_inertia(4.0, 0.30)});
  for (const char* side : {"left", "right"}) {
    const std::string s(side);
    m.links.push_back({s + "_thigh", 0.8, 0.22, Vec2(0.0, -0.11), box_inertia(0.8, 0.22)});
    m.links.push_back({s + "_shank", 0.6, 0.22, Vec2(0.0, -0.11), box_inertia(0.6, 0.22)});
    m.links.push_back({s + "_foot", 0.2, 0.14, Vec2(0.03, -0.04), box_inertia(0.2, 0.14)});
  }
  for (int leg = 0; leg < 2; ++leg) {
    const std::string s = leg == 0 ? "left" : "right";
    const int thigh = 1 + 3 * leg;
    Joint hip{s + "_hip", 0, thigh, Vec2::Zero(), -1.5, 1.5, 20.0, 30.0, 40.0, 1.0, 0.01, 0.05, 0.3};
    Joint knee{s + "_knee", thigh, thigh + 1, Vec2(0.0, -0.22), -2.2, 0.1, 20.0, 30.0, 40.0, 1.0, 0.01, 0.05, -0.6};
    Joint ankle{s + "_ankle", thigh + 1, thigh + 2, Vec2(0.0, -0.22), -1.0, 1.0, 20.0, 15.0, 20.0, 0.5, 0.01, 0.05, 0.3};
    m.joints.push_back(hip);
    m.joints.push_back(knee);
    m.joints.push_back(ankle);
  }
  for (int leg = 0; leg < 2; ++leg) {
    Frame f;
    f.name = leg == 0 ? "left_foot" : "right_foot";
    f.link = 3 + 3 * leg;
    f.offset = Vec2(0.03, -0.05);
    f.contact_points = {Vec2(-0.04, -0.05), Vec2(0.10, -0.05)};
    m.feet[leg] = f;
  }
  m.gravity = 9.81;
  m.finalize();
  return m;
}

// Joint indices of the leg the foot belongs to, in chain order.
inline const std::vector<int>& leg_chain(const RobotModel& m, int foot) { return m.chain(m.feet[foot].link); }

// Floating-base coordinates: q = [x, z, pitch, joints...].
struct SimState {
  Vec2 root_position = Vec2::Zero();  // m
  double pitch = 0.0;                 // rad
  Vec2 root_velocity = Vec2::Zero();  // m/s, world frame
  double pitch_rate = 0.0;            // rad/s
  VecX joint_positions;               // rad
  VecX joint_velocities;              // rad/s
  std::array<Vec2, 2> foot_forces{Vec2::Zero(), Vec2::Zero()};  // (tangential, normal) N per foot
  double time = 0.0;                  // s

  VecX generalized_positions() const {
    VecX q(joint_positions.size() + 3);
    q << root_position, pitch, joint_positions;
    return q;
  }
  VecX generalized_velocities() const {
    VecX v(joint_velocities.size() + 3);
    v << root_velocity, pitch_rate, joint_velocities;
    return v;
  }
  void set_generalized(const VecX& q, const VecX& v) {
    const auto n = q.size() - 3;
    root_position = q.head<2>();
    pitch = q[2];
    joint_positions = q.tail(n);
    root_velocity = v.head<2>();
    pitch_rate = v[2];
    joint_velocities = v.tail(n);
  }
};

inline void check_state(const RobotModel& m, const SimState& s) {
  if (s.joint_positions.size() != m.joint_count() || s.joint_velocities.size() != m.joint_count())
    throw DimensionError("state joint vectors do not match the model joint count");
}

inline SimState rest_state(const RobotModel& m) {
  SimState s;
  s.joint_positions = VecX::Zero(m.joint_count());
  s.joint_velocities = VecX::Zero(m.joint_count());
  return s;
}

// World placement of every link frame.
struct LinkPoses {
  std::vector<Vec2> origin;
  std::vector<double> angle;

  Vec2 point(int link, const Vec2& offset) const { return origin[link] + rotation(angle[link]) * offset; }
};

inline LinkPoses forward_kinematics(const RobotModel& m, const Vec2& root, double pitch, const VecX& q) {
  LinkPoses p;
  p.origin.assign(m.links.size(), Vec2::Zero());
  p.angle.assign(m.links.size(), 0.0);
  p.origin[0] = root;
  p.angle[0] = pitch;
  for (int j : m.topological_order()) {
    const auto& jt = m.joints[j];
    p.origin[jt.child] = p.point(jt.parent, jt.anchor);
    p.angle[jt.child] = p.angle[jt.parent] + q[j];
  }
  return p;
}

inline LinkPoses forward_kinematics(const RobotModel& m, const SimState& s) {
  return forward_kinematics(m, s.root_position, s.pitch, s.joint_positions);
}

// Position of `world` expressed in the base frame.
inline Vec2 to_base_frame(const SimState& s, const Vec2& world) {
  return rotation(-s.pitch) * (world - s.root_position);
}

inline std::array<Vec2, 2> foot_positions(const RobotModel& m, const LinkPoses& p) {
  return {p.point(m.feet[0].link, m.feet[0].offset), p.point(m.feet[1].link, m.feet[1].offset)};
}

// Velocity of a point fixed on `link` at world position `point`.
inline Vec2 point_velocity(const RobotModel& m, const LinkPoses& p, const SimState& s, int link, const Vec2& point) {
  Vec2 v = s.root_velocity + s.pitch_rate * perp(point - s.root_position);
  for (int j : m.chain(link)) v += s.joint_velocities[j] * perp(point - p.origin[m.joints[j].child]);
  return v;
}

inline std::array<Vec2, 2> foot_velocities(const RobotModel& m, const SimState& s) {
  const auto p = forward_kinematics(m, s);
  std::array<Vec2, 2> out;
  for (int f = 0; f < 2; ++f) {
    const auto& ft = m.feet[f];
    out[f] = point_velocity(m, p, s, ft.link, p.point(ft.link, ft.offset));
  }
  return out;
}

}  // namespace amploco

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "amploco/amp.hpp"
#include "amploco/model.hpp"
#include "amploco/observation.hpp"

namespace amploco {

enum class ClipErrorKind { Malformed, SchemaMismatch, NonUniformTimestamps, TooFewFrames, LoopDiscontinuity };

struct ClipError : ConfigError {
  ClipErrorKind kind;
  ClipError(ClipErrorKind k, const std::string& what) : ConfigError(what), kind(k) {}
};

struct ClipFrame {
  VecX positions;   // rad, one per joint
  VecX velocities;  // rad/s
  VecX effectors;   // base-frame (x, z) of each foot then each hand, m
};

struct MotionClip {
  static constexpr int kSchemaVersion = 1;
  std::string name;
  std::vector<std::string> joints;  // joint schema
  int effector_count = 2;
  double frame_rate = 100.0;
  bool loop = false;
  std::vector<ClipFrame> frames;

  int joint_count() const { return static_cast<int>(joints.size()); }
  int frame_count() const { return static_cast<int>(frames.size()); }
  double duration() const { return (loop ? frames.size() : frames.size() - 1) / frame_rate; }
  int transition_count() const { return loop ? frame_count() : frame_count() - 1; }
};

inline constexpr double kDefaultContinuityTolerance = 0.15;

// Central differences; one-sided at the ends of a non-looping clip, wrapped
// for a looping one.
inline void fill_velocities(MotionClip& c) {
  const int n = c.frame_count();
  if (n < 2) throw ClipError(ClipErrorKind::TooFewFrames, "too few frames: a clip needs at least 2");
  const double rate = c.frame_rate;
  for (int k = 0; k < n; ++k) {
    const VecX* prev;
    const VecX* next;
    double span = 2.0;
    if (c.loop) {
      prev = &c.frames[(k + n - 1) % n].positions;
      next = &c.frames[(k + 1) % n].positions;
    } else if (k == 0) {
      prev = &c.frames[0].positions;
      next = &c.frames[1].positions;
      span = 1.0;
    } else if (k == n - 1) {
      prev = &c.frames[n - 2].positions;
      next = &c.frames[n - 1].positions;
      span = 1.0;
    } else {
      prev = &c.frames[k - 1].positions;
      next = &c.frames[k + 1].positions;
    }
    c.frames[k].velocities = (*next - *prev) * (rate / span);
  }
}

inline void validate(const MotionClip& c, double continuity_tolerance = kDefaultContinuityTolerance) {
  if (c.frame_count() < 2) throw ClipError(ClipErrorKind::TooFewFrames, "too few frames: a clip needs at least 2");
  if (!(c.frame_rate > 0.0) || !std::isfinite(c.frame_rate))
    throw ClipError(ClipErrorKind::Malformed, "frame rate must be positive");
  const int n = c.joint_count();
  for (const auto& f : c.frames) {
    if (f.positions.size() != n || f.velocities.size() != n || f.effectors.size() != 2 * c.effector_count)
      throw ClipError(ClipErrorKind::SchemaMismatch, "frame length does not match the joint schema");
    if (!f.positions.allFinite() || !f.velocities.allFinite() || !f.effectors.allFinite())
      throw ClipError(ClipErrorKind::Malformed, "non-finite value in clip '" + c.name + "'");
  }
  if (c.loop) {
    const auto& a = c.frames.front();
    const auto& b = c.frames.back();
    const double gap = std::max((a.positions - b.positions).cwiseAbs().maxCoeff(),
                                c.effector_count ? (a.effectors - b.effectors).cwiseAbs().maxCoeff() : 0.0);
    if (!(gap < continuity_tolerance))
      throw ClipError(ClipErrorKind::LoopDiscontinuity,
                      "looping clip '" + c.name + "' has first/last frame gap " + std::to_string(gap));
  }
}

// Joint names must match the model in order.
inline void check_schema(const MotionClip& c, const RobotModel& m) {
  const int expected_effectors = 2 + static_cast<int>(m.hands.size());
  bool ok = c.joint_count() == m.joint_count() && c.effector_count == expected_effectors;
  for (int j = 0; ok && j < m.joint_count(); ++j) ok = c.joints[j] == m.joints[j].name;
  if (!ok) throw ClipError(ClipErrorKind::SchemaMismatch, "clip '" + c.name + "' joint schema does not match the model");
}

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& tok, int line) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = first + tok.size();
  if (!tok.empty() && *first == '+') ++first;
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last)
    throw ClipError(ClipErrorKind::Malformed, "line " + std::to_string(line) + ": bad number '" + tok + "'");
  return v;
}

}  // namespace detail

// Text format:
//   amploco-clip
//   schema_version 1
//   name <word>
//   joint_schema <joint names...>
//   effectors <count>
//   frame_rate <hz>
//   loop 0|1
//   velocities 0|1
//   frames <count>
//   <time> <positions...> [<velocities...>] <effector x z ...>
inline void save_clip(const MotionClip& c, std::ostream& os) {
  os << "amploco-clip\n";
  os << "schema_version " << MotionClip::kSchemaVersion << '\n';
  os << "name " << c.name << '\n';
  os << "joint_schema";
  for (const auto& j : c.joints) os << ' ' << j;
  os << '\n';
  os << "effectors " << c.effector_count << '\n';
  os << "frame_rate " << detail::format_double(c.frame_rate) << '\n';
  os << "loop " << (c.loop ? 1 : 0) << '\n';
  os << "velocities 1\n";
  os << "frames " << c.frame_count() << '\n';
  for (int k = 0; k < c.frame_count(); ++k) {
    const auto& f = c.frames[k];
    os << detail::format_double(k / c.frame_rate);
    for (double v : f.positions) os << ' ' << detail::format_double(v);
    for (double v : f.velocities) os << ' ' << detail::format_double(v);
    for (double v : f.effectors) os << ' ' << detail::format_double(v);
    os << '\n';
  }
}

inline void save_clip(const MotionClip& c, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write clip file '" + path + "'");
  save_clip(c, os);
}

inline MotionClip parse_clip(std::istream& is, double continuity_tolerance = kDefaultContinuityTolerance) {
  using K = ClipErrorKind;
  MotionClip c;
  std::string line;
  int lineno = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(is, line)) {
      ++lineno;
      const auto p = line.find_first_not_of(" \t\r");
      if (p == std::string::npos || line[p] == '#') continue;
      return true;
    }
    return false;
  };
  auto header = [&](const std::string& key) -> std::vector<std::string> {
    if (!next_line()) throw ClipError(K::Malformed, "unexpected end of file, expected '" + key + "'");
    std::istringstream ss(line);
    std::string k;
    ss >> k;
    if (k != key) throw ClipError(K::Malformed, "line " + std::to_string(lineno) + ": expected '" + key + "'");
    std::vector<std::string> vals;
    for (std::string v; ss >> v;) vals.push_back(v);
    return vals;
  };
  auto single_int = [&](const std::string& key) -> long {
    const auto v = header(key);
    if (v.size() != 1) throw ClipError(K::Malformed, "line " + std::to_string(lineno) + ": '" + key + "' takes one value");
    long out = 0;
    auto res = std::from_chars(v[0].data(), v[0].data() + v[0].size(), out);
    if (res.ec != std::errc() || res.ptr != v[0].data() + v[0].size())
      throw ClipError(K::Malformed, "line " + std::to_string(lineno) + ": bad integer '" + v[0] + "'");
    return out;
  };

  if (!next_line() || line.substr(0, 12) != "amploco-clip") throw ClipError(K::Malformed, "missing clip magic line");
  const long version = single_int("schema_version");
  if (version != MotionClip::kSchemaVersion)
    throw ClipError(K::SchemaMismatch, "unsupported clip schema_version " + std::to_string(version));
  const auto name = header("name");
  if (name.size() != 1) throw ClipError(K::Malformed, "clip name must be a single word");
  c.name = name[0];
  c.joints = header("joint_schema");
  if (c.joints.empty()) throw ClipError(K::SchemaMismatch, "joint schema is empty");
  c.effector_count = static_cast<int>(single_int("effectors"));
  if (c.effector_count < 0) throw ClipError(K::SchemaMismatch, "negative effector count");
  {
    const auto v = header("frame_rate");
    if (v.size() != 1) throw ClipError(K::Malformed, "frame_rate takes one value");
    c.frame_rate = detail::parse_double(v[0], lineno);
    if (!(c.frame_rate > 0.0)) throw ClipError(K::Malformed, "frame rate must be positive");
  }
  c.loop = single_int("loop") != 0;
  const bool has_vel = single_int("velocities") != 0;
  const long count = single_int("frames");
  if (count < 2) throw ClipError(K::TooFewFrames, "too few frames: a clip needs at least 2");

  const int n = c.joint_count();
  const std::size_t width = 1 + n + (has_vel ? n : 0) + 2 * c.effector_count;
  std::vector<double> times;
  for (long k = 0; k < count; ++k) {
    if (!next_line()) {
      if (k < 2) throw ClipError(K::TooFewFrames, "too few frames: a clip needs at least 2");
      throw ClipError(K::Malformed, "file ends after " + std::to_string(k) + " of " + std::to_string(count) + " frames");
    }
    std::istringstream ss(line);
    std::vector<double> vals;
    for (std::string tok; ss >> tok;) vals.push_back(detail::parse_double(tok, lineno));
    if (vals.size() != width)
      throw ClipError(K::SchemaMismatch, "line " + std::to_string(lineno) + ": expected " + std::to_string(width) +
                                             " values, found " + std::to_string(vals.size()));
    ClipFrame f;
    times.push_back(vals[0]);
    f.positions = Eigen::Map<VecX>(vals.data() + 1, n);
    std::size_t off = 1 + n;
    if (has_vel) {
      f.velocities = Eigen::Map<VecX>(vals.data() + off, n);
      off += n;
    }
    f.effectors = Eigen::Map<VecX>(vals.data() + off, 2 * c.effector_count);
    c.frames.push_back(std::move(f));
  }
  if (next_line()) throw ClipError(K::Malformed, "line " + std::to_string(lineno) + ": data after the last frame");

  const double step = 1.0 / c.frame_rate;
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (std::abs((times[k] - times[k - 1]) - step) > 1e-6 * step + 1e-9)
      throw ClipError(K::NonUniformTimestamps,
                      "non-uniform timestamps at frame " + std::to_string(k) + " (expected spacing " +
                          detail::format_double(step) + " s)");
  }
  if (!has_vel) fill_velocities(c);
  validate(c, continuity_tolerance);
  return c;
}

inline MotionClip load_clip(const std::string& path, double continuity_tolerance = kDefaultContinuityTolerance) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open clip file '" + path + "'");
  try {
    return parse_clip(is, continuity_tolerance);
  } catch (const ClipError& e) {
    throw ClipError(e.kind, path + ": " + e.what());
  }
}

// Linear interpolation of positions and effectors, velocities recomputed.
inline MotionClip resample(const MotionClip& c, double target_rate) {
  if (!(target_rate > 0.0)) throw DomainError("resample target rate must be positive");
  if (target_rate == c.frame_rate) return c;
  MotionClip out = c;
  out.frame_rate = target_rate;
  out.frames.clear();
  const int n = c.frame_count();
  const double ratio = c.frame_rate / target_rate;  // source frames per target frame
  const long count = c.loop ? std::max(2L, std::lround(n / ratio))
                            : static_cast<long>(std::floor((n - 1) / ratio + 1e-9)) + 1;
  if (count < 2) throw ClipError(ClipErrorKind::TooFewFrames, "resampled clip would have fewer than 2 frames");
  for (long k = 0; k < count; ++k) {
    const double u = k * ratio;
    int i = static_cast<int>(std::floor(u));
    double a = u - i;
    int j = i + 1;
    if (c.loop) {
      i %= n;
      j %= n;
    } else if (i >= n - 1) {
      i = n - 1;
      j = n - 1;
      a = 0.0;
    }
    ClipFrame f;
    f.positions = (1.0 - a) * c.frames[i].positions + a * c.frames[j].positions;
    f.effectors = (1.0 - a) * c.frames[i].effectors + a * c.frames[j].effectors;
    out.frames.push_back(std::move(f));
  }
  fill_velocities(out);
  return out;
}

// Kinematic state of a clip frame: pinned base, zero pitch.
inline SimState frame_state(const RobotModel& m, const ClipFrame& f) {
  SimState s = rest_state(m);
  s.joint_positions = f.positions;
  s.joint_velocities = f.velocities;
  return s;
}

class ClipLibrary {
 public:
  ClipLibrary() = default;
  ClipLibrary(std::vector<MotionClip> clips, std::vector<double> weights)
      : clips_(std::move(clips)), weights_(std::move(weights)) {
    if (clips_.empty()) throw ConfigError("clip library is empty");
    if (weights_.empty()) weights_.assign(clips_.size(), 1.0);
    if (weights_.size() != clips_.size()) throw ConfigError("one sampling weight per clip is required");
    bool positive = false;
    for (double w : weights_) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("clip weights must be finite and >= 0");
      positive = positive || w > 0.0;
    }
    if (!positive) throw ConfigError("at least one clip weight must be positive");
  }

  const std::vector<MotionClip>& clips() const { return clips_; }
  const std::vector<double>& weights() const { return weights_; }
  bool empty() const { return clips_.empty(); }

  std::size_t transition_count() const {
    std::size_t n = 0;
    for (const auto& c : clips_) n += static_cast<std::size_t>(c.transition_count());
    return n;
  }

  // (clip, frame) index pairs; the second frame is frame + 1, wrapped for loops.
  std::pair<int, int> sample_index(std::mt19937_64& rng) const {
    std::discrete_distribution<int> pick(weights_.begin(), weights_.end());
    const int c = pick(rng);
    std::uniform_int_distribution<int> frame(0, clips_[c].transition_count() - 1);
    return {c, frame(rng)};
  }

 private:
  std::vector<MotionClip> clips_;
  std::vector<double> weights_;
};

inline TransitionPair clip_transition(const ClipLibrary& lib, int clip, int frame, const RobotModel& m) {
  const auto& c = lib.clips()[clip];
  const int next = (frame + 1) % c.frame_count();
  return {assemble_discriminator_observation(frame_state(m, c.frames[frame]), m).values,
          assemble_discriminator_observation(frame_state(m, c.frames[next]), m).values};
}

// Columns are concatenated (o_t, o_{t+1}) pairs.
inline MatX sample_transitions(const ClipLibrary& lib, std::size_t count, std::mt19937_64& rng, const RobotModel& m) {
  if (lib.empty()) throw DomainError("cannot sample from an empty clip library");
  const int d = discriminator_observation_dim(m);
  MatX out(2 * d, static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < count; ++i) {
    const auto [c, f] = lib.sample_index(rng);
    out.col(static_cast<Eigen::Index>(i)) = clip_transition(lib, c, f, m).concat();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic gaits

struct GaitParams {
  std::string name = "walk";
  double period = 0.8;        // s, full stride
  double step_length = 0.2;   // m, foot travel relative to the hip during stance
  double clearance = 0.05;    // m, swing apex above ground
  double duty_factor = 0.6;   // stance fraction
  double hip_height = 0.42;   // m, ankle depth below the hip during stance
  int cycles = 12;
  double frame_rate = 100.0;
};

inline void validate(const GaitParams& p) {
  if (!(p.period > 0.0) || !(p.step_length > 0.0) || p.clearance < 0.0 || !(p.hip_height > 0.0) ||
      !(p.frame_rate > 0.0) || p.cycles < 1)
    throw ConfigError("gait '" + p.name + "': parameters must be positive");
  if (!(p.duty_factor > 0.0 && p.duty_factor < 1.0)) throw ConfigError("gait '" + p.name + "': duty factor must lie in (0, 1)");
}

// Sole position of one foot at leg phase `psi` in [0, 1): swing first (cycloid
// from -L/2 to +L/2 with apex `clearance`), then stance (linear back to -L/2).
inline Vec2 synth_foot_target(const GaitParams& p, double psi) {
  const double swing = 1.0 - p.duty_factor;
  const double half = 0.5 * p.step_length;
  if (psi < swing) {
    const double s = psi / swing;
    const double a = 2.0 * std::numbers::pi * s;
    return Vec2(-half + p.step_length * (s - std::sin(a) / (2.0 * std::numbers::pi)),
                p.clearance * 0.5 * (1.0 - std::cos(a)));
  }
  const double u = (psi - swing) / p.duty_factor;
  return Vec2(half - p.step_length * u, 0.0);
}

// Two-segment leg IK in the base frame for a leg whose hip sits at the base
// origin. Returns (hip, knee) with the knee bent backwards (negative).
inline std::pair<double, double> two_link_ik(const Vec2& target, double thigh, double shank) {
  const double d = target.norm();
  if (d > thigh + shank + 1e-12 || d < std::abs(thigh - shank) - 1e-12)
    throw DomainError("foot target out of reach for the leg lengths");
  const double c = std::clamp((d * d - thigh * thigh - shank * shank) / (2.0 * thigh * shank), -1.0, 1.0);
  const double knee = -std::acos(c);
  const double direction = std::atan2(target.x(), -target.y());
  const double hip = direction - std::atan2(shank * std::sin(knee), thigh + shank * std::cos(knee));
  return {hip, knee};
}

// Planar walking clip for a three-joint leg (hip, knee, ankle) model. The ankle
// keeps the foot level; the right leg runs half a stride behind the left.
inline MotionClip synth_gait(const GaitParams& p, const RobotModel& m) {
  validate(p);
  MotionClip c;
  c.name = p.name;
  for (const auto& j : m.joints) c.joints.push_back(j.name);
  c.effector_count = 2 + static_cast<int>(m.hands.size());
  c.frame_rate = p.frame_rate;
  c.loop = true;

  std::array<std::vector<int>, 2> legs{leg_chain(m, 0), leg_chain(m, 1)};
  for (const auto& l : legs)
    if (l.size() != 3) throw ConfigError("synthetic gaits need hip, knee and ankle joints per leg");
  const double thigh = m.joints[legs[0][1]].anchor.norm();
  const double shank = m.joints[legs[0][2]].anchor.norm();

  const long count = std::lround(p.period * p.cycles * p.frame_rate);
  if (count < 2) throw ConfigError("gait '" + p.name + "' is shorter than two frames");
  for (long k = 0; k < count; ++k) {
    const double t = k / p.frame_rate;
    ClipFrame f;
    f.positions = m.default_positions();
    for (int leg = 0; leg < 2; ++leg) {
      const double psi = wrap_unit(t / p.period + 0.5 * leg);
      const Vec2 sole_pos = synth_foot_target(p, psi);
      const Vec2 ankle(sole_pos.x(), sole_pos.y() - p.hip_height);
      const auto [hip, knee] = two_link_ik(ankle, thigh, shank);
      f.positions[legs[leg][0]] = hip;
      f.positions[legs[leg][1]] = knee;
      f.positions[legs[leg][2]] = -(hip + knee);
    }
    c.frames.push_back(std::move(f));
  }
  fill_velocities(c);
  for (auto& f : c.frames) {
    const auto poses = forward_kinematics(m, Vec2::Zero(), 0.0, f.positions);
    f.effectors.resize(2 * c.effector_count);
    int k = 0;
    for (const auto& ft : m.feet) f.effectors.segment<2>(2 * k++) = poses.point(ft.link, ft.offset);
    for (const auto& h : m.hands) f.effectors.segment<2>(2 * k++) = poses.point(h.link, h.offset);
  }
  validate(c);
  return c;
}

// Three gaits of roughly ten seconds each.
inline std::vector<GaitParams> default_gaits() {
  GaitParams slow;
  slow.name = "walk_slow";
  slow.period = 0.8;
  slow.step_length = 0.16;
  slow.cycles = 12;
  GaitParams medium;
  medium.name = "walk_medium";
  medium.period = 0.7;
  medium.step_length = 0.2;
  medium.cycles = 14;
  GaitParams fast;
  fast.name = "walk_fast";
  fast.period = 0.6;
  fast.step_length = 0.24;
  fast.clearance = 0.06;
  fast.cycles = 16;
  return {slow, medium, fast};
}

struct ClipStats {
  std::string name;
  int frames = 0;
  double duration = 0.0;
  int transitions = 0;
  double max_joint_speed = 0.0;
  double loop_gap = 0.0;
  double min_effector_height = 0.0;  // base frame
};

inline ClipStats clip_stats(const MotionClip& c) {
  ClipStats s;
  s.name = c.name;
  s.frames = c.frame_count();
  s.duration = c.duration();
  s.transitions = c.transition_count();
  s.min_effector_height = std::numeric_limits<double>::infinity();
  for (const auto& f : c.frames) {
    if (f.velocities.size()) s.max_joint_speed = std::max(s.max_joint_speed, f.velocities.cwiseAbs().maxCoeff());
    for (int e = 0; e < c.effector_count; ++e) s.min_effector_height = std::min(s.min_effector_height, f.effectors[2 * e + 1]);
  }
  s.loop_gap = (c.frames.front().positions - c.frames.back().positions).cwiseAbs().maxCoeff();
  return s;
}

}  // namespace amploco

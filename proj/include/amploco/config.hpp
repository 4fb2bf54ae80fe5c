#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "amploco/amp.hpp"
#include "amploco/gait.hpp"
#include "amploco/mocap.hpp"
#include "amploco/model.hpp"
#include "amploco/ppo.hpp"
#include "amploco/rewards.hpp"
#include "amploco/sim.hpp"

namespace amploco {

using Json = nlohmann::ordered_json;

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr int kModelSchemaVersion = 1;

struct MotionConfig {
  std::vector<std::string> clips;   // clip file paths, relative to the config file
  std::vector<double> weights;      // one per clip then one per synthetic gait; empty = uniform
  std::vector<GaitParams> synthetic = default_gaits();
  double continuity_tolerance = kDefaultContinuityTolerance;
};

struct TrainingConfig {
  int num_envs = 64;
  int horizon = 24;              // control steps per environment per iteration
  int workers = 0;               // rollout threads; 0 = hardware concurrency
  int checkpoint_interval = 50;  // iterations; 0 = final checkpoint only
  int eval_steps = 2000;
  bool normalize_observations = true;
};

struct TrainConfig {
  int schema_version = kConfigSchemaVersion;
  std::size_t seed = 1;
  RobotModel robot = build_default_model();
  SimConfig sim;
  RandomizationRanges randomization;
  GaitClock gait;
  RewardWeights rewards;
  AmpConfig amp;
  PpoConfig ppo;
  MotionConfig motion;
  TrainingConfig training;
  std::string base_dir = ".";  // directory relative clip paths resolve against; not serialized
};

namespace cfg_detail {

// Reads fields from a JSON object, rejecting unknown keys and wrong types.
class Reader {
 public:
  static constexpr bool kReading = true;
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  template <class T>
  void operator()(const char* key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    read(j_.at(key), out, path_ + "." + key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(where() + ": unknown key '" + it.key() + "'");
  }

  static void read(const Json& v, double& out, const std::string& p) {
    if (!v.is_number()) throw ConfigError(p + " must be a number");
    out = v.get<double>();
  }
  static void read(const Json& v, int& out, const std::string& p) {
    if (!v.is_number_integer()) throw ConfigError(p + " must be an integer");
    out = v.get<int>();
  }
  static void read(const Json& v, std::size_t& out, const std::string& p) {
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
      throw ConfigError(p + " must be a non-negative integer");
    out = v.get<std::size_t>();
  }
  static void read(const Json& v, bool& out, const std::string& p) {
    if (!v.is_boolean()) throw ConfigError(p + " must be true or false");
    out = v.get<bool>();
  }
  static void read(const Json& v, std::string& out, const std::string& p) {
    if (!v.is_string()) throw ConfigError(p + " must be a string");
    out = v.get<std::string>();
  }
  static void read(const Json& v, Range& out, const std::string& p) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
      throw ConfigError(p + " must be [low, high]");
    out = {v[0].get<double>(), v[1].get<double>()};
    if (!(out.low <= out.high)) throw ConfigError(p + " has low > high");
  }
  static void read(const Json& v, Vec2& out, const std::string& p) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
      throw ConfigError(p + " must be [x, z]");
    out = Vec2(v[0].get<double>(), v[1].get<double>());
  }
  static void read(const Json& v, Integrator& out, const std::string& p) {
    std::string s;
    read(v, s, p);
    if (s == "euler") out = Integrator::SemiImplicitEuler;
    else if (s == "rk4") out = Integrator::RungeKutta4;
    else throw ConfigError(p + " must be \"euler\" or \"rk4\"");
  }
  static void read(const Json& v, JointGroup& out, const std::string& p) {
    std::string s;
    read(v, s, p);
    if (s == "leg") out = JointGroup::Leg;
    else if (s == "arm") out = JointGroup::Arm;
    else if (s == "torso_yaw") out = JointGroup::TorsoYaw;
    else throw ConfigError(p + " must be \"leg\", \"arm\" or \"torso_yaw\"");
  }
  template <class T, std::size_t N>
  static void read(const Json& v, std::array<T, N>& out, const std::string& p) {
    if (!v.is_array() || v.size() != N) throw ConfigError(p + " must be an array of " + std::to_string(N));
    for (std::size_t i = 0; i < N; ++i) read(v[i], out[i], p + "[" + std::to_string(i) + "]");
  }
  template <class T>
  static void read(const Json& v, std::vector<T>& out, const std::string& p) {
    if (!v.is_array()) throw ConfigError(p + " must be an array");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      T item{};
      read(v[i], item, p + "[" + std::to_string(i) + "]");
      out.push_back(std::move(item));
    }
  }
  template <class T>
    requires requires(Reader& r, T& t) { describe(r, t); }
  static void read(const Json& v, T& out, const std::string& p) {
    Reader r(v, p);
    describe(r, out);
    r.finish();
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

class Writer {
 public:
  static constexpr bool kReading = false;
  Json out = Json::object();

  template <class T>
  void operator()(const char* key, const T& v) {
    out[key] = write(v);
  }

  static Json write(double v) { return v; }
  static Json write(int v) { return v; }
  static Json write(std::size_t v) { return v; }
  static Json write(bool v) { return v; }
  static Json write(const std::string& v) { return v; }
  static Json write(const Range& r) { return Json::array({r.low, r.high}); }
  static Json write(const Vec2& v) { return Json::array({v.x(), v.y()}); }
  static Json write(Integrator i) { return i == Integrator::SemiImplicitEuler ? "euler" : "rk4"; }
  static Json write(JointGroup g) {
    return g == JointGroup::Leg ? "leg" : (g == JointGroup::Arm ? "arm" : "torso_yaw");
  }
  template <class T, std::size_t N>
  static Json write(const std::array<T, N>& a) {
    Json j = Json::array();
    for (const auto& x : a) j.push_back(write(x));
    return j;
  }
  template <class T>
  static Json write(const std::vector<T>& a) {
    Json j = Json::array();
    for (const auto& x : a) j.push_back(write(x));
    return j;
  }
  template <class T>
    requires requires(Writer& w, T& t) { describe(w, t); }
  static Json write(const T& v) {
    Writer w;
    describe(w, const_cast<T&>(v));
    return w.out;
  }
};

}  // namespace cfg_detail

// Field lists shared by reading and writing.

template <class A>
void describe(A& a, SimConfig& c) {
  a("timestep", c.timestep);
  a("decimation", c.decimation);
  a("integrator", c.integrator);
  a("contact_stiffness", c.contact_stiffness);
  a("contact_damping", c.contact_damping);
  a("friction", c.friction);
  a("friction_damping", c.friction_damping);
  a("episode_length", c.episode_length);
  a("min_height_fraction", c.min_height_fraction);
  a("max_pitch", c.max_pitch);
  a("fixed_base", c.fixed_base);
  a("action_scale", c.action_scale);
  a("action_clip", c.action_clip);
  a("command_forward_min", c.command_forward_min);
  a("command_forward_max", c.command_forward_max);
  a("push_interval", c.push_interval);
  a("force_duration", c.force_duration);
  a("force_reference_mass", c.force_reference_mass);
  a("linear_velocity_noise", c.linear_velocity_noise);
  a("initial_joint_noise", c.initial_joint_noise);
  a("randomize", c.randomize);
}

template <class A>
void describe(A& a, RandomizationRanges& r) {
  a("mass", r.mass);
  a("com_x", r.com_x);
  a("com_z", r.com_z);
  a("motor_strength", r.motor_strength);
  a("impulse", r.impulse);
  a("external_force", r.external_force);
  a("linear_velocity", r.linear_velocity);
}

template <class A>
void describe(A& a, GaitClock& g) {
  a("period", g.period);
  a("swing_ratio", g.swing_ratio);
  a("offset_left", g.offset_left);
  a("offset_right", g.offset_right);
  a("kappa", g.kappa);
}

template <class A>
void describe(A& a, RegularizationCoefficients& c) {
  a("action_differential", c.action_differential);
  a("dof_limits", c.dof_limits);
  a("dof_velocity", c.dof_velocity);
  a("dof_acceleration", c.dof_acceleration);
  a("arm", c.arm);
  a("orientation", c.orientation);
  a("torques", c.torques);
}

template <class A>
void describe(A& a, RewardWeights& w) {
  a("command_weight", w.command_weight);
  a("command_sharpness", w.command_sharpness);
  a("stance_coefficient", w.stance_coefficient);
  a("swing_coefficient", w.swing_coefficient);
  a("stance_force_sharpness", w.stance_force_sharpness);
  a("swing_speed_sharpness", w.swing_speed_sharpness);
  a("foot_speed_scale", w.foot_speed_scale);
  a("height_scale", w.height_scale);
  a("height_sharpness", w.height_sharpness);
  a("height_clearance", w.height_clearance);
  a("symmetry_scale", w.symmetry_scale);
  a("symmetry_sharpness", w.symmetry_sharpness);
  a("regularization", w.regularization);
  a("imitation", w.imitation);
  a("command", w.command);
  a("periodic", w.periodic);
  a("regularization_scale", w.regularization_scale);
  a("literal_table2", w.literal_table2);
}

template <class A>
void describe(A& a, AmpConfig& c) {
  a("gradient_penalty_weight", c.gradient_penalty_weight);
  a("learning_rate", c.learning_rate);
  a("batch_size", c.batch_size);
  a("policy_capacity", c.policy_capacity);
  a("demo_capacity", c.demo_capacity);
  a("updates_per_iteration", c.updates_per_iteration);
  a("normalize", c.normalize);
  a("hidden", c.hidden);
}

template <class A>
void describe(A& a, PpoConfig& c) {
  a("gamma", c.gamma);
  a("lambda", c.lambda);
  a("clip_ratio", c.clip_ratio);
  a("epochs", c.epochs);
  a("minibatch_size", c.minibatch_size);
  a("learning_rate", c.learning_rate);
  a("value_learning_rate", c.value_learning_rate);
  a("entropy_coefficient", c.entropy_coefficient);
  a("value_loss_coefficient", c.value_loss_coefficient);
  a("value_clip", c.value_clip);
  a("max_grad_norm", c.max_grad_norm);
  a("log_std_min", c.log_std_min);
  a("log_std_max", c.log_std_max);
  a("initial_log_std", c.initial_log_std);
  a("normalize_advantages", c.normalize_advantages);
  a("iterations", c.iterations);
  a("hidden", c.hidden);
}

template <class A>
void describe(A& a, GaitParams& g) {
  a("name", g.name);
  a("period", g.period);
  a("step_length", g.step_length);
  a("clearance", g.clearance);
  a("duty_factor", g.duty_factor);
  a("hip_height", g.hip_height);
  a("cycles", g.cycles);
  a("frame_rate", g.frame_rate);
}

template <class A>
void describe(A& a, MotionConfig& m) {
  a("clips", m.clips);
  a("weights", m.weights);
  a("synthetic", m.synthetic);
  a("continuity_tolerance", m.continuity_tolerance);
}

template <class A>
void describe(A& a, TrainingConfig& t) {
  a("num_envs", t.num_envs);
  a("horizon", t.horizon);
  a("workers", t.workers);
  a("checkpoint_interval", t.checkpoint_interval);
  a("eval_steps", t.eval_steps);
  a("normalize_observations", t.normalize_observations);
}

// ---------------------------------------------------------------------------
// Robot model files. Link and joint parents refer to links by name.

inline Json model_to_json(const RobotModel& m) {
  using W = cfg_detail::Writer;
  Json j = Json::object();
  j["schema_version"] = kModelSchemaVersion;
  j["gravity"] = m.gravity;
  Json links = Json::array();
  for (const auto& l : m.links)
    links.push_back({{"name", l.name},
                     {"mass", l.mass},
                     {"length", l.length},
                     {"com_offset", W::write(l.com_offset)},
                     {"inertia", l.inertia}});
  j["links"] = links;
  Json joints = Json::array();
  for (const auto& jt : m.joints)
    joints.push_back({{"name", jt.name},
                      {"parent", m.links[jt.parent].name},
                      {"child", m.links[jt.child].name},
                      {"anchor", W::write(jt.anchor)},
                      {"lower", jt.lower},
                      {"upper", jt.upper},
                      {"velocity_limit", jt.velocity_limit},
                      {"torque_limit", jt.torque_limit},
                      {"stiffness", jt.stiffness},
                      {"damping", jt.damping},
                      {"armature", jt.armature},
                      {"friction", jt.friction},
                      {"default_position", jt.default_position},
                      {"group", W::write(jt.group)}});
  j["joints"] = joints;
  auto frame = [&](const Frame& f) {
    Json points = Json::array();
    for (const auto& p : f.contact_points) points.push_back(W::write(p));
    return Json{{"name", f.name}, {"link", m.links[f.link].name}, {"offset", W::write(f.offset)}, {"contact_points", points}};
  };
  j["feet"] = Json::array({frame(m.feet[0]), frame(m.feet[1])});
  Json hands = Json::array();
  for (const auto& h : m.hands) hands.push_back(frame(h));
  j["hands"] = hands;
  return j;
}

inline RobotModel model_from_json(const Json& j, const std::string& path = "robot") {
  using R = cfg_detail::Reader;
  if (!j.is_object()) throw ConfigError(path + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    static const std::set<std::string> keys{"schema_version", "gravity", "links", "joints", "feet", "hands"};
    if (!keys.count(it.key())) throw ConfigError(path + ": unknown key '" + it.key() + "'");
  }
  int version = -1;
  if (!j.contains("schema_version")) throw ConfigError(path + ".schema_version is required");
  R::read(j.at("schema_version"), version, path + ".schema_version");
  if (version != kModelSchemaVersion) throw ConfigError(path + ": unsupported model schema_version " + std::to_string(version));
  RobotModel m;
  if (j.contains("gravity")) R::read(j.at("gravity"), m.gravity, path + ".gravity");
  auto require_array = [&](const char* key) -> const Json& {
    if (!j.contains(key) || !j.at(key).is_array()) throw ConfigError(path + "." + key + " must be an array");
    return j.at(key);
  };
  auto fields = [&](const Json& o, const std::string& p, std::initializer_list<const char*> allowed) {
    if (!o.is_object()) throw ConfigError(p + " must be an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = o.begin(); it != o.end(); ++it)
      if (!ok.count(it.key())) throw ConfigError(p + ": unknown key '" + it.key() + "'");
  };
  auto need = [&](const Json& o, const char* key, const std::string& p) -> const Json& {
    if (!o.contains(key)) throw ConfigError(p + "." + key + " is required");
    return o.at(key);
  };
  const Json& links = require_array("links");
  for (std::size_t i = 0; i < links.size(); ++i) {
    const std::string p = path + ".links[" + std::to_string(i) + "]";
    fields(links[i], p, {"name", "mass", "length", "com_offset", "inertia"});
    Link l;
    R::read(need(links[i], "name", p), l.name, p + ".name");
    R::read(need(links[i], "mass", p), l.mass, p + ".mass");
    R::read(need(links[i], "length", p), l.length, p + ".length");
    R::read(need(links[i], "com_offset", p), l.com_offset, p + ".com_offset");
    R::read(need(links[i], "inertia", p), l.inertia, p + ".inertia");
    m.links.push_back(l);
  }
  auto link_index = [&](const Json& v, const std::string& p) {
    std::string name;
    R::read(v, name, p);
    const int idx = m.find_link(name);
    if (idx < 0) throw ConfigError(p + ": unknown link '" + name + "'");
    return idx;
  };
  const Json& joints = require_array("joints");
  for (std::size_t i = 0; i < joints.size(); ++i) {
    const std::string p = path + ".joints[" + std::to_string(i) + "]";
    const Json& o = joints[i];
    fields(o, p, {"name", "parent", "child", "anchor", "lower", "upper", "velocity_limit", "torque_limit", "stiffness",
                  "damping", "armature", "friction", "default_position", "group"});
    Joint jt;
    R::read(need(o, "name", p), jt.name, p + ".name");
    jt.parent = link_index(need(o, "parent", p), p + ".parent");
    jt.child = link_index(need(o, "child", p), p + ".child");
    R::read(need(o, "anchor", p), jt.anchor, p + ".anchor");
    R::read(need(o, "lower", p), jt.lower, p + ".lower");
    R::read(need(o, "upper", p), jt.upper, p + ".upper");
    R::read(need(o, "velocity_limit", p), jt.velocity_limit, p + ".velocity_limit");
    R::read(need(o, "torque_limit", p), jt.torque_limit, p + ".torque_limit");
    R::read(need(o, "stiffness", p), jt.stiffness, p + ".stiffness");
    R::read(need(o, "damping", p), jt.damping, p + ".damping");
    if (o.contains("armature")) R::read(o.at("armature"), jt.armature, p + ".armature");
    if (o.contains("friction")) R::read(o.at("friction"), jt.friction, p + ".friction");
    if (o.contains("default_position")) R::read(o.at("default_position"), jt.default_position, p + ".default_position");
    if (o.contains("group")) R::read(o.at("group"), jt.group, p + ".group");
    m.joints.push_back(jt);
  }
  auto frame = [&](const Json& o, const std::string& p) {
    fields(o, p, {"name", "link", "offset", "contact_points"});
    Frame f;
    R::read(need(o, "name", p), f.name, p + ".name");
    f.link = link_index(need(o, "link", p), p + ".link");
    R::read(need(o, "offset", p), f.offset, p + ".offset");
    if (o.contains("contact_points")) R::read(o.at("contact_points"), f.contact_points, p + ".contact_points");
    return f;
  };
  const Json& feet = require_array("feet");
  if (feet.size() != 2) throw ConfigError(path + ".feet must list exactly two frames (left, right)");
  for (int f = 0; f < 2; ++f) m.feet[f] = frame(feet[f], path + ".feet[" + std::to_string(f) + "]");
  if (j.contains("hands")) {
    const Json& hands = require_array("hands");
    for (std::size_t i = 0; i < hands.size(); ++i) m.hands.push_back(frame(hands[i], path + ".hands[" + std::to_string(i) + "]"));
  }
  m.finalize();
  return m;
}

// ---------------------------------------------------------------------------

inline void validate(const TrainConfig& c) {
  if (c.schema_version != kConfigSchemaVersion)
    throw ConfigError("unsupported config schema_version " + std::to_string(c.schema_version));
  validate(c.sim);
  validate(c.randomization);
  try {
    validate_clock(c.gait);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("gait: ") + e.what());
  }
  validate(c.amp);
  validate(c.ppo);
  if (c.training.num_envs < 1) throw ConfigError("training.num_envs must be >= 1");
  if (c.training.horizon < 1) throw ConfigError("training.horizon must be >= 1");
  if (c.training.workers < 0 || c.training.checkpoint_interval < 0 || c.training.eval_steps < 1)
    throw ConfigError("training workers/checkpoint_interval must be >= 0 and eval_steps >= 1");
  if (c.motion.clips.empty() && c.motion.synthetic.empty()) throw ConfigError("motion: no clips and no synthetic gaits");
  const std::size_t sources = c.motion.clips.size() + c.motion.synthetic.size();
  if (!c.motion.weights.empty() && c.motion.weights.size() != sources)
    throw ConfigError("motion.weights needs one entry per clip and synthetic gait");
  for (const auto& g : c.motion.synthetic) validate(g);
  if (c.rewards.command_weight[0] < 0.0) throw ConfigError("rewards.command_weight must be >= 0");
  if (c.robot.joint_count() < 1) throw ConfigError("robot has no joints");
}

inline Json to_json(const TrainConfig& c) {
  using W = cfg_detail::Writer;
  Json j = Json::object();
  j["schema_version"] = c.schema_version;
  j["seed"] = c.seed;
  j["robot"] = model_to_json(c.robot);
  j["sim"] = W::write(c.sim);
  j["randomization"] = W::write(c.randomization);
  j["gait"] = W::write(c.gait);
  j["rewards"] = W::write(c.rewards);
  j["amp"] = W::write(c.amp);
  j["ppo"] = W::write(c.ppo);
  j["motion"] = W::write(c.motion);
  j["training"] = W::write(c.training);
  return j;
}

// Missing sections and keys keep their defaults; unknown keys are errors.
inline TrainConfig config_from_json(const Json& j) {
  using R = cfg_detail::Reader;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> keys{"schema_version", "seed",  "robot", "sim",    "randomization", "gait",
                                          "rewards",        "amp",   "ppo",   "motion", "training"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!keys.count(it.key())) throw ConfigError("config: unknown key '" + it.key() + "'");
  if (!j.contains("schema_version")) throw ConfigError("config.schema_version is required");
  TrainConfig c;
  R::read(j.at("schema_version"), c.schema_version, "schema_version");
  if (c.schema_version != kConfigSchemaVersion)
    throw ConfigError("unsupported config schema_version " + std::to_string(c.schema_version));
  if (j.contains("seed")) R::read(j.at("seed"), c.seed, "seed");
  if (j.contains("robot")) c.robot = model_from_json(j.at("robot"));
  if (j.contains("sim")) R::read(j.at("sim"), c.sim, "sim");
  if (j.contains("randomization")) R::read(j.at("randomization"), c.randomization, "randomization");
  if (j.contains("gait")) R::read(j.at("gait"), c.gait, "gait");
  if (j.contains("rewards")) R::read(j.at("rewards"), c.rewards, "rewards");
  if (j.contains("amp")) R::read(j.at("amp"), c.amp, "amp");
  if (j.contains("ppo")) R::read(j.at("ppo"), c.ppo, "ppo");
  if (j.contains("motion")) R::read(j.at("motion"), c.motion, "motion");
  if (j.contains("training")) R::read(j.at("training"), c.training, "training");
  validate(c);
  return c;
}

inline Json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline TrainConfig load_config(const std::string& path) {
  TrainConfig c = config_from_json(parse_json_text(read_text_file(path), path));
  const auto slash = path.find_last_of('/');
  c.base_dir = slash == std::string::npos ? "." : path.substr(0, slash);
  return c;
}

inline RobotModel load_model(const std::string& path) {
  return model_from_json(parse_json_text(read_text_file(path), path));
}

inline EnvSpec env_spec(const TrainConfig& c) {
  return EnvSpec{c.robot, c.sim, c.randomization, c.gait, c.rewards};
}

inline std::string resolve_path(const std::string& base, const std::string& p) {
  if (p.empty() || p.front() == '/') return p;
  return base + "/" + p;
}

// Loads clip files and generates synthetic gaits, all resampled to the control rate.
inline ClipLibrary build_clip_library(const TrainConfig& c) {
  std::vector<MotionClip> clips;
  const double rate = 1.0 / c.sim.control_dt();
  for (const auto& path : c.motion.clips) {
    MotionClip clip = load_clip(resolve_path(c.base_dir, path), c.motion.continuity_tolerance);
    check_schema(clip, c.robot);
    clips.push_back(resample(clip, rate));
  }
  for (const auto& g : c.motion.synthetic) clips.push_back(resample(synth_gait(g, c.robot), rate));
  return ClipLibrary(std::move(clips), c.motion.weights);
}

}  // namespace amploco

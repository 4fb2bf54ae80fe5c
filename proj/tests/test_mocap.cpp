#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "amploco/mocap.hpp"

using namespace amploco;

namespace {

MotionClip ramp_clip(int frames, double rate, bool loop = false) {
  MotionClip c;
  c.name = "ramp";
  c.joints = {"a", "b"};
  c.effector_count = 1;
  c.frame_rate = rate;
  c.loop = loop;
  for (int k = 0; k < frames; ++k) {
    ClipFrame f;
    const double t = k / rate;
    f.positions = (VecX(2) << t, 2.0 * t).finished();
    f.effectors = (VecX(2) << 0.1 * t, -0.4).finished();
    c.frames.push_back(f);
  }
  fill_velocities(c);
  return c;
}

MotionClip sine_clip(double freq, double rate, double seconds) {
  MotionClip c;
  c.name = "sine";
  c.joints = {"a"};
  c.effector_count = 0;
  c.frame_rate = rate;
  const int n = static_cast<int>(std::lround(seconds * rate)) + 1;
  for (int k = 0; k < n; ++k) {
    ClipFrame f;
    f.positions = VecX::Constant(1, std::sin(2.0 * std::numbers::pi * freq * k / rate));
    f.effectors = VecX(0);
    c.frames.push_back(f);
  }
  fill_velocities(c);
  return c;
}

std::string clip_text(const std::string& body_frames, const std::string& frames_line = "frames 3",
                      const std::string& schema = "joint_schema a b") {
  return "amploco-clip\nschema_version 1\nname t\n" + schema +
         "\neffectors 0\nframe_rate 100\nloop 0\nvelocities 0\n" + frames_line + "\n" + body_frames;
}

ClipErrorKind parse_error_kind(const std::string& text) {
  std::istringstream is(text);
  try {
    parse_clip(is);
  } catch (const ClipError& e) {
    return e.kind;
  }
  ADD_FAILURE() << "clip parsed unexpectedly";
  return ClipErrorKind::Malformed;
}

}  // namespace

TEST(Velocities, ConstantClipHasZeroVelocity) {
  MotionClip c = ramp_clip(2, 100.0);
  for (auto& f : c.frames) f.positions = VecX::Constant(2, 0.3);
  fill_velocities(c);
  for (const auto& f : c.frames) EXPECT_EQ(f.velocities, VecX::Zero(2));
}

TEST(Velocities, LinearRampGivesExactSlope) {
  const MotionClip c = ramp_clip(20, 100.0);
  for (int k = 1; k < 19; ++k) {
    EXPECT_NEAR(c.frames[k].velocities[0], 1.0, 1e-9);
    EXPECT_NEAR(c.frames[k].velocities[1], 2.0, 1e-9);
  }
  EXPECT_NEAR(c.frames[0].velocities[0], 1.0, 1e-9);
  EXPECT_NEAR(c.frames[19].velocities[0], 1.0, 1e-9);
}

TEST(Parse, MissingVelocitiesAreFilled) {
  std::istringstream is(clip_text("0 0 0\n0.01 0.01 0.02\n0.02 0.02 0.04\n"));
  const auto c = parse_clip(is);
  ASSERT_EQ(c.frame_count(), 3);
  EXPECT_NEAR(c.frames[1].velocities[0], 1.0, 1e-9);
  EXPECT_NEAR(c.frames[1].velocities[1], 2.0, 1e-9);
}

TEST(Parse, DistinctDiagnostics) {
  EXPECT_EQ(parse_error_kind(clip_text("0 0 0\n", "frames 1")), ClipErrorKind::TooFewFrames);
  EXPECT_EQ(parse_error_kind(clip_text("0 0 0\n0.01 0.01\n0.02 0 0\n")), ClipErrorKind::SchemaMismatch);
  EXPECT_EQ(parse_error_kind(clip_text("0 0 0\n0.01 0 0\n0.05 0 0\n")), ClipErrorKind::NonUniformTimestamps);
  EXPECT_EQ(parse_error_kind(clip_text("0 0 0\n0.01 zz 0\n0.02 0 0\n")), ClipErrorKind::Malformed);
  EXPECT_EQ(parse_error_kind("not a clip\n"), ClipErrorKind::Malformed);
  EXPECT_EQ(parse_error_kind(clip_text("0 0 0\n0.01 0 0\n")), ClipErrorKind::Malformed);  // truncated
  EXPECT_EQ(parse_error_kind(clip_text("0 0 0\n0.01 0 0\n0.02 0 0\n0.03 0 0\n")), ClipErrorKind::Malformed);
  std::string v2 = clip_text("0 0 0\n0.01 0 0\n0.02 0 0\n");
  v2.replace(v2.find("schema_version 1"), 16, "schema_version 2");
  EXPECT_EQ(parse_error_kind(v2), ClipErrorKind::SchemaMismatch);
}

TEST(Parse, OneFrameFileSaysTooFewFrames) {
  std::istringstream is(clip_text("0 0 0\n", "frames 1"));
  try {
    parse_clip(is);
    FAIL();
  } catch (const ClipError& e) {
    EXPECT_NE(std::string(e.what()).find("too few frames"), std::string::npos);
  }
}

TEST(Validate, LoopContinuity) {
  MotionClip c = ramp_clip(10, 100.0, true);
  EXPECT_THROW(validate(c, 0.05), ClipError);  // gap 0.18 on joint b
  EXPECT_NO_THROW(validate(c, 0.2));
}

TEST(Validate, SchemaAgainstModel) {
  const auto m = build_default_model();
  const auto good = synth_gait(GaitParams{}, m);
  EXPECT_NO_THROW(check_schema(good, m));
  auto renamed = good;
  renamed.joints[3] = "elbow";
  EXPECT_THROW(check_schema(renamed, m), ClipError);
  EXPECT_THROW(check_schema(ramp_clip(3, 100.0), m), ClipError);
}

TEST(RoundTrip, SaveThenLoadIsBitExact) {
  const auto m = build_default_model();
  for (const auto& c : {synth_gait(GaitParams{}, m), ramp_clip(7, 30.0)}) {
    std::stringstream ss;
    save_clip(c, ss);
    const auto back = parse_clip(ss);
    EXPECT_EQ(back.name, c.name);
    EXPECT_EQ(back.joints, c.joints);
    EXPECT_EQ(back.loop, c.loop);
    EXPECT_EQ(back.frame_rate, c.frame_rate);
    ASSERT_EQ(back.frame_count(), c.frame_count());
    for (int k = 0; k < c.frame_count(); ++k) {
      EXPECT_EQ(back.frames[k].positions, c.frames[k].positions);
      EXPECT_EQ(back.frames[k].velocities, c.frames[k].velocities);
      EXPECT_EQ(back.frames[k].effectors, c.frames[k].effectors);
    }
  }
}

TEST(RoundTrip, FileErrorsNameThePath) {
  const auto dir = std::filesystem::temp_directory_path() / "amploco_mocap_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "bad.clip").string();
  {
    std::ofstream os(path);
    os << clip_text("0 0 0\n", "frames 1");
  }
  try {
    load_clip(path);
    FAIL();
  } catch (const ClipError& e) {
    EXPECT_NE(std::string(e.what()).find(path), std::string::npos);
  }
  EXPECT_THROW(load_clip((dir / "missing.clip").string()), ConfigError);
}

TEST(Resample, IdentityAndConstant) {
  const auto c = ramp_clip(9, 100.0);
  const auto same = resample(c, 100.0);
  for (int k = 0; k < c.frame_count(); ++k) EXPECT_NEAR((same.frames[k].positions - c.frames[k].positions).norm(), 0.0, 1e-12);
  auto flat = c;
  for (auto& f : flat.frames) f.positions = VecX::Constant(2, -0.7);
  for (double rate : {30.0, 50.0, 240.0}) {
    const auto r = resample(flat, rate);
    for (const auto& f : r.frames) {
      EXPECT_NEAR((f.positions - VecX::Constant(2, -0.7)).norm(), 0.0, 1e-12);
      EXPECT_NEAR(f.velocities.norm(), 0.0, 1e-9);
    }
  }
}

TEST(Resample, SinusoidWithinBound) {
  const auto c = sine_clip(1.0, 100.0, 2.0);
  const auto r = resample(c, 50.0);
  EXPECT_EQ(r.frame_rate, 50.0);
  EXPECT_NEAR(r.duration(), c.duration(), 1.0 / 50.0);
  double worst = 0.0;
  for (int k = 0; k < r.frame_count(); ++k)
    worst = std::max(worst, std::abs(r.frames[k].positions[0] - std::sin(2.0 * std::numbers::pi * k / 50.0)));
  EXPECT_LT(worst, 1e-3);
  const auto up = resample(c, 300.0);
  worst = 0.0;
  for (int k = 0; k < up.frame_count(); ++k)
    worst = std::max(worst, std::abs(up.frames[k].positions[0] - std::sin(2.0 * std::numbers::pi * k / 300.0)));
  const double dt = 0.01;
  EXPECT_LT(worst, std::pow(std::numbers::pi * dt, 2) * 2.0);
}

TEST(Resample, LoopFlagAndDurationPreserved) {
  const auto m = build_default_model();
  const auto c = synth_gait(GaitParams{}, m);
  const auto r = resample(c, 60.0);
  EXPECT_TRUE(r.loop);
  EXPECT_NEAR(r.duration(), c.duration(), 1.0 / 60.0);
}

TEST(Library, NonLoopPairsOnlyConsecutive) {
  const auto m = build_default_model();
  auto c = synth_gait(GaitParams{}, m);
  c.frames.resize(3);
  c.loop = false;
  ClipLibrary lib({c}, {});
  std::mt19937_64 rng(1);
  std::set<int> seen;
  for (int k = 0; k < 1000; ++k) seen.insert(lib.sample_index(rng).second);
  EXPECT_EQ(seen, (std::set<int>{0, 1}));
  EXPECT_EQ(c.transition_count(), 2);
}

TEST(Library, WrapPairFrequencyWithinBinomialBand) {
  const auto m = build_default_model();
  auto c = synth_gait(GaitParams{}, m);
  c.frames.resize(40);  // loop clip of N = 40 frames
  ClipLibrary lib({c}, {});
  EXPECT_EQ(c.transition_count(), 40);
  std::mt19937_64 rng(2);
  const int draws = 100000;
  int wrap = 0;
  for (int k = 0; k < draws; ++k)
    if (lib.sample_index(rng).second == 39) ++wrap;
  const double p = 1.0 / 40.0;
  const double sigma = std::sqrt(draws * p * (1.0 - p));
  EXPECT_NEAR(wrap, draws * p, 3.0 * sigma);
  const auto pair = clip_transition(lib, 0, 39, m);
  EXPECT_EQ(pair.next, assemble_discriminator_observation(frame_state(m, c.frames[0]), m).values);
}

TEST(Library, ZeroWeightNeverSampledAndWeightsRespected) {
  const auto m = build_default_model();
  const auto gaits = default_gaits();
  ClipLibrary lib({synth_gait(gaits[0], m), synth_gait(gaits[1], m), synth_gait(gaits[2], m)}, {1.0, 0.0, 3.0});
  std::mt19937_64 rng(3);
  std::array<int, 3> count{};
  const int draws = 100000;
  for (int k = 0; k < draws; ++k) ++count[lib.sample_index(rng).first];
  EXPECT_EQ(count[1], 0);
  const double sigma = std::sqrt(draws * 0.25 * 0.75);
  EXPECT_NEAR(count[0], draws * 0.25, 3.0 * sigma);
  EXPECT_THROW(ClipLibrary({}, {}), ConfigError);
  EXPECT_THROW(ClipLibrary({synth_gait(gaits[0], m)}, {0.0}), ConfigError);
  EXPECT_THROW(ClipLibrary({synth_gait(gaits[0], m)}, {1.0, 2.0}), ConfigError);
}

TEST(Library, TransitionsUseLiveObservationAssembly) {
  const auto m = build_default_model();
  const auto clip = synth_gait(GaitParams{}, m);
  ClipLibrary lib({clip}, {});
  std::mt19937_64 a(4), b(4);
  const MatX batch = sample_transitions(lib, 50, a, m);
  for (int k = 0; k < 50; ++k) {
    const auto [ci, f] = lib.sample_index(b);
    const int next = (f + 1) % clip.frame_count();
    VecX expected(batch.rows());
    expected << assemble_discriminator_observation(frame_state(m, clip.frames[f]), m).values,
        assemble_discriminator_observation(frame_state(m, clip.frames[next]), m).values;
    EXPECT_EQ(VecX(batch.col(k)), expected);
  }
}

TEST(Synthetic, ClearanceZeroKeepsFeetOnGround) {
  const auto m = build_default_model();
  GaitParams p;
  p.clearance = 0.0;
  const auto c = synth_gait(p, m);
  for (const auto& f : c.frames)
    for (int e = 0; e < 2; ++e) EXPECT_NEAR(f.effectors[2 * e + 1] + p.hip_height + 0.05, 0.0, 1e-9);
}

TEST(Synthetic, ApexEqualsClearance) {
  GaitParams p;
  double apex = 0.0;
  for (int k = 0; k < 100000; ++k) apex = std::max(apex, synth_foot_target(p, k / 100000.0).y());
  EXPECT_NEAR(apex, p.clearance, 1e-6);
  const auto m = build_default_model();
  const auto c = synth_gait(p, m);
  double clip_apex = 0.0;
  for (const auto& f : c.frames) clip_apex = std::max(clip_apex, f.effectors[1] + p.hip_height + 0.05);
  EXPECT_NEAR(clip_apex, p.clearance, 1e-6);
}

TEST(Synthetic, DefaultGaitsPassInvariantsAndReachTargets) {
  const auto m = build_default_model();
  double seconds = 0.0;
  for (const auto& g : default_gaits()) {
    const auto c = synth_gait(g, m);
    EXPECT_NO_THROW(validate(c));
    EXPECT_NO_THROW(check_schema(c, m));
    EXPECT_TRUE(c.loop);
    seconds += c.duration();
    for (const auto& f : c.frames) {
      for (int e = 0; e < 2; ++e) EXPECT_GE(f.effectors[2 * e + 1] + g.hip_height + 0.05, -1e-9);
      for (int j = 0; j < m.joint_count(); ++j) {
        EXPECT_GE(f.positions[j], m.joints[j].lower);
        EXPECT_LE(f.positions[j], m.joints[j].upper);
      }
    }
    // Forward kinematics of the IK solution lands the ankle on the target.
    for (int k = 0; k < c.frame_count(); k += 7) {
      const auto poses = forward_kinematics(m, Vec2::Zero(), 0.0, c.frames[k].positions);
      const Vec2 sole = synth_foot_target(g, wrap_unit(k / g.frame_rate / g.period));
      const Vec2 ankle = poses.origin[m.joints[leg_chain(m, 0)[2]].child];
      EXPECT_NEAR((ankle - Vec2(sole.x(), sole.y() - g.hip_height)).norm(), 0.0, 1e-9);
    }
  }
  EXPECT_NEAR(seconds, 30.0, 2.0);
}

TEST(Synthetic, UnreachableTargetThrows) {
  const auto m = build_default_model();
  GaitParams p;
  p.hip_height = 0.5;  // legs are 0.44 long
  EXPECT_THROW(synth_gait(p, m), DomainError);
  EXPECT_THROW(two_link_ik(Vec2(0.0, -1.0), 0.22, 0.22), DomainError);
}

TEST(Stats, TransitionCounts) {
  EXPECT_EQ(ramp_clip(5, 10.0).transition_count(), 4);
  EXPECT_EQ(ramp_clip(5, 10.0, true).transition_count(), 5);
  const auto s = clip_stats(ramp_clip(5, 10.0));
  EXPECT_EQ(s.frames, 5);
  EXPECT_NEAR(s.duration, 0.4, 1e-12);
}

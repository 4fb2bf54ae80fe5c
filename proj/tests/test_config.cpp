#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "amploco/config.hpp"

using namespace amploco;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "amploco_config_test" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p);
  os << text;
}

}  // namespace

TEST(ConfigJson, DefaultRoundTripIsExact) {
  const TrainConfig c;
  const Json j = to_json(c);
  EXPECT_EQ(j.at("schema_version"), kConfigSchemaVersion);
  const TrainConfig back = config_from_json(j);
  EXPECT_EQ(to_json(back), j);
  // Through text as well.
  EXPECT_EQ(to_json(config_from_json(Json::parse(j.dump(2)))), j);
}

TEST(ConfigJson, ChangedValuesSurvive) {
  Json j = to_json(TrainConfig{});
  j["seed"] = 77;
  j["ppo"]["gamma"] = 0.9;
  j["training"]["num_envs"] = 8;
  j["sim"]["integrator"] = "rk4";
  const auto c = config_from_json(j);
  EXPECT_EQ(c.seed, 77u);
  EXPECT_EQ(c.ppo.gamma, 0.9);
  EXPECT_EQ(c.training.num_envs, 8);
  EXPECT_EQ(c.sim.integrator, Integrator::RungeKutta4);
  EXPECT_EQ(to_json(c), j);
}

TEST(ConfigJson, MissingSectionsKeepDefaults) {
  const auto c = config_from_json(Json{{"schema_version", kConfigSchemaVersion}, {"seed", 3}});
  EXPECT_EQ(c.seed, 3u);
  Json expect = to_json(TrainConfig{});
  expect["seed"] = 3;
  EXPECT_EQ(to_json(c), expect);
}

TEST(ConfigJson, SchemaVersionRequiredAndChecked) {
  EXPECT_THROW(config_from_json(Json{{"seed", 1}}), ConfigError);
  EXPECT_THROW(config_from_json(Json{{"schema_version", kConfigSchemaVersion + 1}}), ConfigError);
  EXPECT_THROW(config_from_json(Json{{"schema_version", "1"}}), ConfigError);
  Json m = to_json(TrainConfig{});
  m["robot"]["schema_version"] = kModelSchemaVersion + 1;
  EXPECT_THROW(config_from_json(m), ConfigError);
}

TEST(ConfigJson, UnknownKeysRejectedAtEveryLevel) {
  Json j = to_json(TrainConfig{});
  j["extra"] = 1;
  EXPECT_THROW(config_from_json(j), ConfigError);
  j = to_json(TrainConfig{});
  j["ppo"]["gama"] = 0.99;
  try {
    config_from_json(j);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("gama"), std::string::npos);
  }
  j = to_json(TrainConfig{});
  j["robot"]["joints"][0]["stifness"] = 1.0;
  EXPECT_THROW(config_from_json(j), ConfigError);
}

TEST(ConfigJson, WrongTypesRejected) {
  Json j = to_json(TrainConfig{});
  j["training"]["num_envs"] = 2.5;
  EXPECT_THROW(config_from_json(j), ConfigError);
  j = to_json(TrainConfig{});
  j["ppo"]["normalize_advantages"] = 1;
  EXPECT_THROW(config_from_json(j), ConfigError);
  j = to_json(TrainConfig{});
  j["sim"]["integrator"] = "midpoint";
  EXPECT_THROW(config_from_json(j), ConfigError);
  j = to_json(TrainConfig{});
  j["seed"] = -1;
  EXPECT_THROW(config_from_json(j), ConfigError);
  j["seed"] = 1.5;
  EXPECT_THROW(config_from_json(j), ConfigError);
  EXPECT_THROW(config_from_json(Json::array()), ConfigError);
}

TEST(ConfigValidate, RejectsBadValues) {
  auto expect_bad = [](auto edit) {
    TrainConfig c;
    edit(c);
    EXPECT_THROW(validate(c), ConfigError);
  };
  expect_bad([](TrainConfig& c) { c.training.num_envs = 0; });
  expect_bad([](TrainConfig& c) { c.training.horizon = 0; });
  expect_bad([](TrainConfig& c) { c.ppo.lambda = -0.1; });
  expect_bad([](TrainConfig& c) { c.amp.learning_rate = -1.0; });
  expect_bad([](TrainConfig& c) { c.motion.weights = {1.0}; });
  expect_bad([](TrainConfig& c) {
    c.motion.synthetic.clear();
    c.motion.clips.clear();
  });
  expect_bad([](TrainConfig& c) { c.motion.synthetic[0].duty_factor = 1.0; });
  expect_bad([](TrainConfig& c) { c.schema_version = 0; });
  EXPECT_NO_THROW(validate(TrainConfig{}));
}

TEST(ModelJson, RoundTripPreservesEveryField) {
  const auto m = build_default_model();
  const Json j = model_to_json(m);
  const auto back = model_from_json(j);
  EXPECT_EQ(model_to_json(back), j);
  ASSERT_EQ(back.joint_count(), m.joint_count());
  for (int k = 0; k < m.joint_count(); ++k) {
    EXPECT_EQ(back.joints[k].name, m.joints[k].name);
    EXPECT_EQ(back.joints[k].stiffness, m.joints[k].stiffness);
    EXPECT_EQ(back.joints[k].anchor, m.joints[k].anchor);
  }
  EXPECT_EQ(back.total_mass(), m.total_mass());
}

TEST(ModelJson, BadLinkReferenceNamed) {
  Json j = model_to_json(build_default_model());
  j["joints"][1]["parent"] = "nowhere";
  try {
    model_from_json(j);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("nowhere"), std::string::npos);
  }
}

TEST(ConfigFile, LoadResolvesClipPathsAgainstConfigDirectory) {
  const auto dir = scratch("paths");
  const auto m = build_default_model();
  GaitParams p;
  p.name = "file_gait";
  save_clip(synth_gait(p, m), (dir / "walk.clip").string());
  Json j{{"schema_version", kConfigSchemaVersion}, {"motion", {{"clips", {"walk.clip"}}, {"synthetic", Json::array()}}}};
  write_file(dir / "cfg.json", j.dump());
  const auto c = load_config((dir / "cfg.json").string());
  EXPECT_EQ(c.base_dir, dir.string());
  const auto lib = build_clip_library(c);
  ASSERT_EQ(lib.clips().size(), 1u);
  EXPECT_EQ(lib.clips()[0].name, "file_gait");
  EXPECT_NEAR(lib.clips()[0].frame_rate, 1.0 / c.sim.control_dt(), 1e-9);
}

TEST(ConfigFile, ErrorsAreConfigErrors) {
  const auto dir = scratch("errors");
  EXPECT_THROW(load_config((dir / "absent.json").string()), ConfigError);
  write_file(dir / "broken.json", "{\"schema_version\": 1,");
  EXPECT_THROW(load_config((dir / "broken.json").string()), ConfigError);
  Json j{{"schema_version", kConfigSchemaVersion}, {"motion", {{"clips", {"missing.clip"}}}}};
  write_file(dir / "cfg.json", j.dump());
  const auto c = load_config((dir / "cfg.json").string());
  EXPECT_THROW(build_clip_library(c), ConfigError);
}

TEST(ConfigFile, DefaultLibraryHoldsSyntheticGaits) {
  const TrainConfig c;
  const auto lib = build_clip_library(c);
  EXPECT_EQ(lib.clips().size(), default_gaits().size());
  for (const auto& clip : lib.clips()) EXPECT_NO_THROW(check_schema(clip, c.robot));
}

TEST(ConfigFile, ShippedSampleConfigsLoad) {
  const std::filesystem::path root(AMPLOCO_SOURCE_DIR);
  int n = 0;
  for (const auto& entry : std::filesystem::directory_iterator(root / "configs")) {
    if (entry.path().extension() != ".json") continue;
    EXPECT_NO_THROW(load_config(entry.path().string())) << entry.path();
    ++n;
  }
  EXPECT_GT(n, 0);
}

#include "parsac/io.hpp"
#include "parsac/weights.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace parsac;
using namespace testing_support;
namespace fs = std::filesystem;

namespace {

Scene clean_scene(Task task, std::uint64_t index) {
  GenConfig cfg = default_gen_config(task);
  cfg.noise_px = 0;
  cfg.outlier_rate = 0;
  return generate_scene(cfg, index);
}

std::vector<NamedScene> named(const std::vector<Scene>& scenes) {
  std::vector<NamedScene> out;
  for (std::size_t i = 0; i < scenes.size(); ++i) out.push_back({"s" + std::to_string(i), scenes[i]});
  return out;
}

void expect_same_scene(const Scene& a, const Scene& b) {
  EXPECT_EQ(a.task, b.task);
  EXPECT_EQ(a.width, b.width);
  EXPECT_EQ(a.height, b.height);
  EXPECT_EQ(a.seed, b.seed);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.observations[i].features, b.observations[i].features);
    EXPECT_EQ(a.observations[i].points, b.observations[i].points);
  }
  EXPECT_EQ(a.gt_labels, b.gt_labels);
  ASSERT_EQ(a.gt_models.size(), b.gt_models.size());
  for (std::size_t k = 0; k < a.gt_models.size(); ++k)
    EXPECT_EQ(model_parameters(a.gt_models[k]), model_parameters(b.gt_models[k]));
  ASSERT_EQ(a.intrinsics.has_value(), b.intrinsics.has_value());
  if (a.intrinsics) EXPECT_EQ(*a.intrinsics, *b.intrinsics);
}

}  // namespace

TEST(SceneJson, RoundTripIsExactForEveryTask) {
  for (Task task : {Task::VanishingPoint, Task::Fundamental, Task::Homography}) {
    GenConfig cfg = default_gen_config(task);
    cfg.noise_px = 1.0;
    cfg.outlier_rate = 0.3;
    const Scene s = generate_scene(cfg, 11);
    expect_same_scene(s, scene_from_json(Json::parse(scene_to_json(s).dump())));
  }
}

TEST(SceneJson, UnlabeledSceneStaysUnlabeled) {
  Scene s = clean_scene(Task::Homography, 2);
  s.gt_labels.reset();
  s.gt_models.clear();
  const Scene back = scene_from_json(scene_to_json(s));
  EXPECT_FALSE(back.has_labels());
  EXPECT_TRUE(back.gt_models.empty());
}

TEST(SceneJson, RejectsMalformedDocuments) {
  const Json good = scene_to_json(clean_scene(Task::VanishingPoint, 1));
  Json j = good;
  j["format_version"] = 99;
  EXPECT_THROW(scene_from_json(j), std::runtime_error);
  j = good;
  j["gt_labels"].push_back(0);
  EXPECT_THROW(scene_from_json(j), std::runtime_error);
  j = good;
  j["gt_labels"][0] = 17;
  EXPECT_THROW(scene_from_json(j), std::runtime_error);
  j = good;
  j.erase("endpoints");
  EXPECT_THROW(scene_from_json(j), std::runtime_error);
}

TEST(ModelJson, RoundTripForEveryKind) {
  for (Task task : {Task::VanishingPoint, Task::Fundamental, Task::Homography}) {
    const Scene s = clean_scene(task, 5);
    for (const auto& m : s.gt_models) {
      const ModelInstance back = model_from_json(model_to_json(m));
      EXPECT_EQ(task_of(back), task);
      EXPECT_EQ(model_parameters(back), model_parameters(m));
    }
  }
}

TEST(LoadScenes, ManifestDirectoryAndSingleFile) {
  const fs::path dir = scratch_dir("io_load");
  std::vector<Scene> scenes;
  Json manifest = {{"count", 3}, {"scenes", Json::array()}};
  for (int i = 0; i < 3; ++i) {
    scenes.push_back(clean_scene(Task::Fundamental, i));
    const std::string name = "scene_" + std::to_string(i) + ".json";
    save_scene(scenes.back(), dir / name);
    manifest["scenes"].push_back(name);
  }
  const auto from_dir = load_scenes(dir);
  ASSERT_EQ(from_dir.size(), 3u);
  for (int i = 0; i < 3; ++i) expect_same_scene(from_dir[i].scene, scenes[i]);

  // A manifest restricts and orders the set.
  manifest["scenes"] = {"scene_2.json", "scene_0.json"};
  manifest["count"] = 2;
  write_text_file(dir / "manifest.json", manifest.dump());
  const auto from_manifest = load_scenes(dir / "manifest.json");
  ASSERT_EQ(from_manifest.size(), 2u);
  EXPECT_EQ(from_manifest[0].name, "scene_2.json");
  expect_same_scene(from_manifest[1].scene, scenes[0]);
  EXPECT_EQ(load_scenes(dir).size(), 2u);

  const auto single = load_scenes(dir / "scene_1.json");
  ASSERT_EQ(single.size(), 1u);
  expect_same_scene(single[0].scene, scenes[1]);
}

TEST(LoadScenes, MissingFileNamesThePath) {
  try {
    load_scene("/nonexistent/x.json");
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/x.json"), std::string::npos);
  }
}

TEST(GenConfigJson, RoundTripAndValidation) {
  GenConfig c = default_gen_config(Task::Homography);
  c.count = 7;
  c.noise_px = 1.5;
  c.outlier_rate = 0.4;
  c.seed = 99;
  const GenConfig back = gen_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));

  Json j = to_json(c);
  j["bogus"] = 1;
  try {
    gen_config_from_json(j);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("bogus"), std::string::npos);
  }
  j = to_json(c);
  j["outlier_rate"] = 1.0;
  try {
    gen_config_from_json(j);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("outlier_rate"), std::string::npos);
  }
  EXPECT_THROW(gen_config_from_json(Json{{"count", 3}}), std::invalid_argument);
  EXPECT_THROW(gen_config_from_json(Json{{"task", "homography"}, {"count", "three"}}), std::invalid_argument);
}

TEST(PipelineParamsJson, OverridesApplyOnTopOfDefaults) {
  const PipelineParams d = default_pipeline_params(Task::Fundamental, Phase::Test);
  const PipelineParams p = pipeline_params_from_json(Task::Fundamental, Json{{"m_star", 3}, {"tau", 0.015}}, Phase::Test);
  EXPECT_EQ(p.m_star, 3);
  EXPECT_DOUBLE_EQ(p.consensus.tau, 0.015);
  EXPECT_EQ(p.consensus.hypotheses, d.consensus.hypotheses);
  EXPECT_EQ(p.tau_a, d.tau_a);
  const PipelineParams q = pipeline_params_from_json(Task::Fundamental, Json{{"tau_a", nullptr}}, Phase::Test);
  EXPECT_FALSE(q.tau_a);
  EXPECT_THROW(pipeline_params_from_json(Task::Fundamental, Json{{"tau", -1.0}}, Phase::Test), std::invalid_argument);
  EXPECT_EQ(to_json(pipeline_params_from_json(Task::Homography, Json(nullptr), Phase::Test)),
            to_json(default_pipeline_params(Task::Homography, Phase::Test)));
}

TEST(TrainParamsJson, FieldsAndPipelineOverrides) {
  const TrainParams p =
      train_params_from_json(Task::VanishingPoint, Json{{"epochs", 3}, {"batch_size", 2}, {"hypotheses", 64}});
  EXPECT_EQ(p.loss, LossKind::HungarianVp);
  EXPECT_EQ(p.epochs, 3);
  EXPECT_EQ(p.batch_size, 2);
  EXPECT_EQ(p.pipeline.consensus.hypotheses, 64);
  const TrainParams m = train_params_from_json(Task::Fundamental, Json::object());
  EXPECT_EQ(m.loss, LossKind::Me);
  EXPECT_THROW(train_params_from_json(Task::Fundamental, Json{{"batch_size", 0}}), std::invalid_argument);
}

TEST(RunFit, OracleRecoversNoiseFreeScenes) {
  for (Task task : {Task::Fundamental, Task::Homography}) {
    std::vector<Scene> scenes;
    for (int i = 0; i < 4; ++i) scenes.push_back(clean_scene(task, 20 + i));
    const Json r = run_fit(named(scenes), OracleProvider(), default_pipeline_params(task, Phase::Test), 3, 1);
    EXPECT_EQ(r.at("aggregate").at("me").at("count").get<int>(), 4);
    EXPECT_DOUBLE_EQ(r.at("aggregate").at("me").at("mean").get<double>(), 0.0) << to_string(task);
    const char* err = task == Task::Fundamental ? "se_px" : "te_px";
    EXPECT_LT(r.at("aggregate").at(err).at("mean").get<double>(), 1e-6);
  }
}

TEST(RunFit, DocumentShapeAndConsistency) {
  std::vector<Scene> scenes;
  for (int i = 0; i < 3; ++i) scenes.push_back(generate_scene(default_gen_config(Task::VanishingPoint), i));
  const Json r = run_fit(named(scenes), UniformProvider(), default_pipeline_params(Task::VanishingPoint, Phase::Test),
                         5, 2, {2.0, 4.0});
  EXPECT_EQ(r.at("kind"), "results");
  EXPECT_EQ(r.at("task"), "vp");
  EXPECT_EQ(r.at("seed"), 5);
  ASSERT_EQ(r.at("scenes").size(), 3u);
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const Json& e = r.at("scenes")[i];
    EXPECT_EQ(e.at("labels").size(), scenes[i].size());
    EXPECT_EQ(e.at("models").size(), e.at("per_model_inliers").size());
    EXPECT_TRUE(e.contains("vp_errors"));
    EXPECT_TRUE(e.at("timing").contains("elapsed_seconds"));
  }
  EXPECT_TRUE(r.at("aggregate").at("auc").contains("2"));
  EXPECT_TRUE(r.at("aggregate").at("auc").contains("4"));
  EXPECT_NO_THROW(check_results_consistency(r));
  EXPECT_NO_THROW(check_results_consistency(Json::parse(r.dump())));

  Json tampered = r;
  tampered["scenes"][0]["me"] = 0.75;
  EXPECT_THROW(check_results_consistency(tampered), std::runtime_error);
}

TEST(RunFit, ThreadCountDoesNotChangeResults) {
  std::vector<Scene> scenes;
  for (int i = 0; i < 5; ++i) scenes.push_back(generate_scene(default_gen_config(Task::Homography), i));
  const auto params = default_pipeline_params(Task::Homography, Phase::Test);
  const Json a = run_fit(named(scenes), UniformProvider(), params, 8, 1);
  const Json b = run_fit(named(scenes), UniformProvider(), params, 8, 4);
  EXPECT_EQ(strip_timing(a), strip_timing(b));
  EXPECT_FALSE(strip_timing(a).contains("timing"));
  EXPECT_FALSE(strip_timing(a)["scenes"][0].contains("timing"));
}

TEST(RunFit, RejectsMixedTasksAndEmptyInput) {
  std::vector<Scene> scenes = {clean_scene(Task::Homography, 1), clean_scene(Task::Fundamental, 1)};
  EXPECT_THROW(run_fit(named(scenes), UniformProvider(), default_pipeline_params(Task::Homography, Phase::Test), 1, 1),
               std::invalid_argument);
  EXPECT_THROW(run_fit({}, UniformProvider(), default_pipeline_params(Task::Homography, Phase::Test), 1, 1),
               std::invalid_argument);
}

TEST(ComputeAggregates, MatchesHandComputedValues) {
  const Json entries = Json::array({Json{{"me", 0.1}, {"vp_errors", {1.0, 20.0}}},
                                    Json{{"me", 0.3}, {"vp_errors", {0.0}}}, Json{{"me", nullptr}}});
  const Json a = compute_aggregates(entries, {10.0});
  EXPECT_EQ(a.at("scenes"), 3);
  EXPECT_NEAR(a.at("me").at("mean").get<double>(), 0.2, 1e-15);
  EXPECT_NEAR(a.at("me").at("median").get<double>(), 0.2, 1e-15);
  EXPECT_EQ(a.at("vp_errors").at("count"), 3);
  EXPECT_NEAR(a.at("vp_errors").at("median").get<double>(), 1.0, 1e-15);
  // Errors {0, 1, 20} at cutoff 10 contribute 1, 0.9 and 0 of a full share.
  const double expected = (1.0 + 0.9 + 0.0) / 3;
  EXPECT_NEAR(a.at("auc").at("10").get<double>(), expected, 1e-12);
}

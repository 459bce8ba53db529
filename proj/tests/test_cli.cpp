// End-to-end checks of the command-line tool. Each test shells out to the
// built binary and inspects exit codes, stdout and written files.

#include "parsac/io.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace parsac;
using namespace testing_support;
namespace fs = std::filesystem;

namespace {

const std::string kCli = PARSAC_CLI;

CommandResult cli(const std::string& args) { return run_command(kCli + " " + args); }

fs::path write_config(const fs::path& dir, const std::string& name, const Json& j) {
  const fs::path p = dir / name;
  write_text_file(p, j.dump(2));
  return p;
}

/// Generates `count` scenes of `task` into dir/scenes and returns that path.
fs::path generate(const fs::path& dir, const std::string& task, int count, double rate = 0.2, double noise = 0.5) {
  const fs::path cfg = write_config(
      dir, "gen.json", {{"task", task}, {"count", count}, {"outlier_rate", rate}, {"noise_px", noise}, {"seed", 4}});
  const fs::path out = dir / "scenes";
  const auto r = cli("generate --config " + cfg.string() + " --out " + out.string());
  EXPECT_EQ(r.exit_code, 0) << r.output;
  return out;
}

}  // namespace

TEST(CliGenerate, WritesScenesAndManifestReproducibly) {
  const fs::path dir = scratch_dir("cli_gen");
  const fs::path out = generate(dir, "fundamental", 10);
  int files = 0;
  for (const auto& e : fs::directory_iterator(out)) files += e.path().filename().string().rfind("scene_", 0) == 0;
  EXPECT_EQ(files, 10);
  const Json manifest = read_json_file(out / "manifest.json");
  EXPECT_EQ(manifest.at("count"), 10);
  EXPECT_EQ(manifest.at("scenes").size(), 10u);
  EXPECT_EQ(load_scenes(out).size(), 10u);

  const std::string first = read_file(out / "scene_00003.json");
  const auto again = cli("generate --config " + (dir / "gen.json").string() + " --out " + (dir / "again").string() +
                         " --threads 3");
  ASSERT_EQ(again.exit_code, 0) << again.output;
  EXPECT_EQ(read_file(dir / "again" / "scene_00003.json"), first);
  EXPECT_EQ(read_file(dir / "again" / "manifest.json"), read_file(out / "manifest.json"));

  const auto reseeded = cli("generate --config " + (dir / "gen.json").string() + " --out " +
                            (dir / "reseeded").string() + " --seed 5");
  ASSERT_EQ(reseeded.exit_code, 0);
  EXPECT_NE(read_file(dir / "reseeded" / "scene_00003.json"), first);
}

TEST(CliGenerate, InvalidFieldIsNamed) {
  const fs::path dir = scratch_dir("cli_gen_bad");
  const fs::path cfg = write_config(dir, "bad.json", {{"task", "homography"}, {"outlier_rate", 1.0}});
  const auto r = cli("generate --config " + cfg.string() + " --out " + (dir / "x").string());
  EXPECT_NE(r.exit_code, 0);
  EXPECT_NE(r.output.find("outlier_rate"), std::string::npos) << r.output;
}

TEST(CliFit, ThreadCountDoesNotChangeOutput) {
  const fs::path dir = scratch_dir("cli_fit");
  const fs::path scenes = generate(dir, "homography", 4);
  Json runs[2];
  int k = 0;
  for (int threads : {1, 8}) {
    const fs::path out = dir / ("r" + std::to_string(threads) + ".json");
    const auto r = cli("fit " + scenes.string() + " --seed 2 --threads " + std::to_string(threads) + " --out " +
                       out.string());
    ASSERT_EQ(r.exit_code, 0) << r.output;
    runs[k++] = read_json_file(out);
  }
  EXPECT_EQ(strip_timing(runs[0]), strip_timing(runs[1]));
  EXPECT_NO_THROW(check_results_consistency(runs[0]));
}

TEST(CliFit, ThreadsFallBackToEnvironment) {
  const fs::path dir = scratch_dir("cli_env");
  const fs::path scenes = generate(dir, "vp", 2);
  const auto a = run_command("PARSAC_THREADS=3 " + kCli + " fit " + scenes.string() + " --seed 1 --out " +
                             (dir / "a.json").string());
  const auto b = cli("fit " + scenes.string() + " --seed 1 --out " + (dir / "b.json").string());
  ASSERT_EQ(a.exit_code, 0) << a.output;
  ASSERT_EQ(b.exit_code, 0) << b.output;
  EXPECT_EQ(strip_timing(read_json_file(dir / "a.json")), strip_timing(read_json_file(dir / "b.json")));
  const auto bad = run_command("PARSAC_THREADS=zero " + kCli + " fit " + scenes.string());
  EXPECT_EQ(bad.exit_code, 2);
  EXPECT_NE(bad.output.find("PARSAC_THREADS"), std::string::npos) << bad.output;
}

TEST(CliFit, OracleNeedsLabels) {
  const fs::path dir = scratch_dir("cli_oracle");
  Scene s = generate_scene(default_gen_config(Task::Fundamental), 1);
  s.gt_labels.reset();
  s.gt_models.clear();
  save_scene(s, dir / "unlabeled.json");
  const auto r = cli("fit " + (dir / "unlabeled.json").string() + " --provider oracle");
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.output.find("error:"), std::string::npos) << r.output;
}

TEST(CliFit, MissingInputsAndUnknownProviderFail) {
  EXPECT_EQ(cli("fit").exit_code, 2);
  EXPECT_NE(cli("fit x.json --provider magic").exit_code, 0);
  EXPECT_NE(cli("fit /nonexistent.json").exit_code, 0);
}

TEST(CliTrain, OneEpochOneStepAndReproducibleWeights) {
  const fs::path dir = scratch_dir("cli_train");
  const fs::path scenes = generate(dir, "vp", 4);
  const fs::path cfg = write_config(dir, "train.json",
                                    {{"train", scenes.string()},
                                     {"epochs", 1},
                                     {"batch_size", 4},
                                     {"K", 4},
                                     {"K_tilde", 2},
                                     {"hypotheses", 16},
                                     {"max_observations", 64},
                                     {"width", 16},
                                     {"blocks", 1}});
  std::string weights[2];
  for (int run = 0; run < 2; ++run) {
    const fs::path out = dir / ("run" + std::to_string(run));
    const auto r = cli("train --config " + cfg.string() + " --seed 7 --threads " + std::to_string(1 + 2 * run) +
                       " --out " + out.string());
    ASSERT_EQ(r.exit_code, 0) << r.output;
    const std::string log = read_file(out / "train_log.jsonl");
    // Line 0 is the untrained baseline; line 1 is the only epoch.
    const std::size_t second = log.find('\n') + 1;
    const Json line = Json::parse(log.substr(second, log.find('\n', second) - second));
    EXPECT_EQ(line.at("epoch"), 1);
    EXPECT_EQ(line.at("steps"), 1);
    EXPECT_TRUE(fs::exists(out / "best.weights"));
    EXPECT_TRUE(fs::exists(out / "summary.json"));
    weights[run] = read_file(out / "final.weights");
  }
  EXPECT_FALSE(weights[0].empty());
  EXPECT_EQ(weights[0], weights[1]);

  // Weights remember their task; fitting another task with them is refused.
  const fs::path hscenes = generate(scratch_dir("cli_train_h"), "homography", 1);
  const auto mismatch = cli("fit " + hscenes.string() + " --provider neural --weights " +
                            (dir / "run0" / "final.weights").string());
  EXPECT_EQ(mismatch.exit_code, 2);
  EXPECT_NE(mismatch.output.find("task"), std::string::npos) << mismatch.output;

  const auto neural = cli("fit " + scenes.string() + " --weights " + (dir / "run0" / "final.weights").string());
  EXPECT_EQ(neural.exit_code, 0) << neural.output;
  EXPECT_EQ(Json::parse(neural.output).at("provider"), "neural");
}

TEST(CliEval, ReproducesStoredAggregatesAndRejectsWrongMetric) {
  const fs::path dir = scratch_dir("cli_eval");
  const fs::path scenes = generate(dir, "homography", 3);
  const fs::path results = dir / "results.json";
  ASSERT_EQ(cli("fit " + scenes.string() + " --provider oracle --seed 1 --out " + results.string()).exit_code, 0);
  const auto r = cli("eval " + results.string() + " --out " + (dir / "report.json").string());
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_NE(r.output.find("TE [px]"), std::string::npos);
  const Json report = read_json_file(dir / "report.json");
  const Json stored = read_json_file(results).at("aggregate");
  EXPECT_EQ(report.at("me"), stored.at("me"));
  EXPECT_EQ(report.at("te_px"), stored.at("te_px"));

  const auto se = cli("eval " + results.string() + " --metrics se");
  EXPECT_EQ(se.exit_code, 2);
  EXPECT_NE(se.output.find("SE"), std::string::npos) << se.output;

  // Editing a per-scene value without the aggregate is detected.
  Json tampered = read_json_file(results);
  tampered["scenes"][0]["me"] = 0.9;
  write_text_file(dir / "tampered.json", tampered.dump());
  EXPECT_EQ(cli("eval " + (dir / "tampered.json").string()).exit_code, 2);
}

TEST(CliEval, VpScenesWithCustomCutoffs) {
  const fs::path dir = scratch_dir("cli_eval_vp");
  const fs::path scenes = generate(dir, "vp", 2);
  const auto r = cli("eval " + scenes.string() + " --auc-cutoffs 2,7 --out " + (dir / "report.json").string());
  ASSERT_EQ(r.exit_code, 0) << r.output;
  const Json report = read_json_file(dir / "report.json");
  EXPECT_TRUE(report.at("auc").contains("2"));
  EXPECT_TRUE(report.at("auc").contains("7"));
  EXPECT_EQ(report.at("auc").size(), 2u);
}

TEST(CliGradcheck, PassesAndCorruptionFails) {
  const auto ok = cli("gradcheck --seed 3");
  EXPECT_EQ(ok.exit_code, 0) << ok.output;
  EXPECT_NE(ok.output.find("PASS network_backward"), std::string::npos) << ok.output;
  EXPECT_NE(ok.output.find("PASS score-function"), std::string::npos) << ok.output;
  const auto bad = cli("gradcheck --seed 3 --corrupt");
  EXPECT_NE(bad.exit_code, 0);
  EXPECT_NE(bad.output.find("FAIL"), std::string::npos) << bad.output;
}

TEST(CliBench, ReportParsesAndBaselineIsOne) {
  const fs::path dir = scratch_dir("cli_bench");
  const fs::path out = dir / "bench.json";
  const auto r = cli("bench --threads-list 2 --repeat 1 --out " + out.string());
  ASSERT_EQ(r.exit_code, 0) << r.output;
  const Json report = read_json_file(out);
  ASSERT_EQ(report.at("rows").size(), 2u);
  EXPECT_EQ(report.at("rows")[0].at("threads"), 1);
  EXPECT_DOUBLE_EQ(report.at("rows")[0].at("speedup").get<double>(), 1.0);
  EXPECT_GT(report.at("rows")[1].at("mean_seconds").get<double>(), 0.0);
}

TEST(CliMisc, VersionAndUsage) {
  const auto v = cli("--version");
  EXPECT_EQ(v.exit_code, 0);
  EXPECT_NE(v.output.find(std::string("parsac ") + kToolVersion), std::string::npos);
  EXPECT_NE(cli("").exit_code, 0);
  EXPECT_NE(cli("frobnicate").exit_code, 0);
}

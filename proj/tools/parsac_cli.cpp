// Command-line front end: generate | fit | train | eval | gradcheck | bench.

#include "parsac/datagen.hpp"
#include "parsac/gradcheck.hpp"
#include "parsac/io.hpp"
#include "parsac/metrics.hpp"
#include "parsac/parallel.hpp"
#include "parsac/training.hpp"
#include "parsac/weights.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <iomanip>
#include <iostream>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using namespace parsac;

namespace {

struct CommonOptions {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 0;
  std::string provider;
  std::string weights;
  std::string out;
  std::vector<std::string> inputs;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_inputs = true) {
  cmd->add_option("--config", o.config, "JSON configuration file");
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&o](const std::uint64_t& s) { o.seed = s, o.seed_given = true; }, "Random seed");
  cmd->add_option("--threads", o.threads, "Worker threads (default: PARSAC_THREADS or 1)")->check(CLI::PositiveNumber);
  cmd->add_option("--provider", o.provider, "Weight provider")->check(CLI::IsMember({"uniform", "oracle", "neural"}));
  cmd->add_option("--weights", o.weights, "Network weights file");
  cmd->add_option("--out", o.out, "Output path");
  if (with_inputs) cmd->add_option("inputs", o.inputs, "Scene files, scene directories or manifests");
}

int thread_count(const CommonOptions& o) { return o.threads > 0 ? o.threads : default_thread_count(); }

Json config_or_empty(const CommonOptions& o) { return o.config.empty() ? Json::object() : read_json_file(o.config); }

std::vector<NamedScene> gather_scenes(const std::vector<std::string>& inputs, const Json& cfg, const char* key) {
  std::vector<std::string> paths = inputs;
  if (paths.empty() && cfg.contains(key)) {
    if (cfg.at(key).is_array())
      paths = cfg.at(key).get<std::vector<std::string>>();
    else
      paths.push_back(cfg.at(key).get<std::string>());
  }
  if (paths.empty()) throw std::invalid_argument(std::string("no scenes given (positional inputs or config '") + key + "')");
  std::vector<NamedScene> out;
  for (const auto& p : paths) {
    auto more = load_scenes(p);
    out.insert(out.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
  }
  return out;
}

std::unique_ptr<WeightProvider> make_provider(const CommonOptions& o, Task task, int m_star) {
  const std::string kind = o.provider.empty() ? (o.weights.empty() ? "uniform" : "neural") : o.provider;
  if (kind == "uniform") return std::make_unique<UniformProvider>();
  if (kind == "oracle") return std::make_unique<OracleProvider>();
  if (o.weights.empty()) throw std::invalid_argument("--provider neural needs --weights");
  const Json meta = load_params_meta(o.weights);
  if (meta.contains("task") && meta.at("task").get<std::string>() != to_string(task))
    throw std::invalid_argument("weights were trained for task '" + meta.at("task").get<std::string>() +
                                "', scenes are '" + std::string(to_string(task)) + "'");
  return std::make_unique<NeuralProvider>(load_params(o.weights, m_star));
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-")
    std::cout << text;
  else
    write_text_file(out, text);
}

// --------------------------------------------------------------------------

int cmd_generate(const CommonOptions& o) {
  if (o.config.empty()) throw std::invalid_argument("generate needs --config");
  if (o.out.empty()) throw std::invalid_argument("generate needs --out <directory>");
  Json cj = read_json_file(o.config);
  if (o.seed_given) cj["seed"] = o.seed;
  const GenConfig cfg = gen_config_from_json(cj);
  const fs::path dir = o.out;
  fs::create_directories(dir);
  std::vector<std::string> names(static_cast<std::size_t>(cfg.count));
  parallel_for(cfg.count, thread_count(o), [&](int i) {
    std::ostringstream name;
    name << "scene_" << std::setw(5) << std::setfill('0') << i << ".json";
    names[i] = name.str();
    save_scene(generate_scene(cfg, std::uint64_t(i)), dir / names[i]);
  });
  Json manifest = {{"format_version", kSceneFormatVersion},
                   {"task", std::string(to_string(cfg.task))},
                   {"count", cfg.count},
                   {"config", to_json(cfg)},
                   {"scenes", names}};
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "wrote " << cfg.count << " scenes to " << dir.string() << "\n";
  return 0;
}

int cmd_fit(const CommonOptions& o) {
  const Json cfg = config_or_empty(o);
  const auto scenes = gather_scenes(o.inputs, cfg, "scenes");
  const Task task = scenes.front().scene.task;
  const PipelineParams params = pipeline_params_from_json(task, cfg.value("params", Json::object()), Phase::Test);
  const auto provider = make_provider(o, task, params.m_star);
  const Json results = run_fit(scenes, *provider, params, o.seed, thread_count(o));
  emit(o.out, results.dump(2) + "\n");
  if (!o.out.empty() && o.out != "-") {
    const Json& a = results.at("aggregate");
    std::cerr << "fit " << scenes.size() << " scenes";
    if (a.contains("me")) std::cerr << ", mean ME " << a["me"]["mean"].get<double>();
    std::cerr << "\n";
  }
  return 0;
}

int cmd_train(const CommonOptions& o) {
  const Json cfg = config_or_empty(o);
  const auto train_named = gather_scenes(o.inputs, cfg, "train");
  std::vector<Scene> train_set, val_set;
  for (const auto& s : train_named) train_set.push_back(s.scene);
  if (cfg.contains("val"))
    for (auto& s : gather_scenes({}, cfg, "val")) val_set.push_back(std::move(s.scene));
  const Task task = train_set.front().task;
  const TrainParams tp = train_params_from_json(task, cfg);
  if (o.out.empty()) throw std::invalid_argument("train needs --out <directory>");
  const fs::path dir = o.out;
  fs::create_directories(dir);

  NetworkParams init;
  if (!o.weights.empty()) {
    init = load_params(o.weights, tp.pipeline.m_star);
  } else {
    NetworkConfig nc;
    nc.m_star = tp.pipeline.m_star;
    nc.width = cfg.value("width", nc.width);
    nc.blocks = cfg.value("blocks", nc.blocks);
    init = init_params(nc, o.seed);
  }
  const Json meta = {{"task", std::string(to_string(task))}, {"loss", std::string(to_string(tp.loss))}};
  std::string log;
  TrainOutcome outcome = train(train_set, val_set, std::move(init), tp, o.seed, thread_count(o), [&](const EpochStats& e) {
    Json line = {{"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"steps", e.steps}, {"skipped_steps", e.skipped_steps}};
    line["validation"] = e.validation ? Json(*e.validation) : Json(nullptr);
    log += line.dump() + "\n";
    std::cerr << line.dump() << "\n";
  });
  save_params(outcome.final_params, dir / "final.weights", meta);
  save_params(outcome.best_params, dir / "best.weights", meta);
  write_text_file(dir / "train_log.jsonl", log);
  Json summary = {{"best_epoch", outcome.best_epoch},
                  {"best_score", outcome.best_score},
                  {"diverged", outcome.diverged},
                  {"params", to_json(tp)},
                  {"seed", o.seed}};
  write_text_file(dir / "summary.json", summary.dump(2) + "\n");
  if (outcome.diverged) {
    std::cerr << "training diverged; kept the last finite parameters\n";
    return 3;
  }
  return 0;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(std::stod(item));
  return out;
}

int cmd_eval(const CommonOptions& o, const std::string& metrics, const std::string& cutoffs_text) {
  const std::vector<double> cutoffs = parse_list(cutoffs_text);
  std::set<std::string> wanted;
  {
    std::stringstream ss(metrics);
    for (std::string m; std::getline(ss, m, ',');)
      if (!m.empty()) wanted.insert(m);
  }
  Json results;
  const bool from_results = o.inputs.size() == 1 && fs::is_regular_file(o.inputs.front()) &&
                            read_json_file(o.inputs.front()).value("kind", std::string()) == "results";
  if (from_results) {
    results = read_json_file(o.inputs.front());
    check_results_consistency(results);
    if (cutoffs != results["aggregate"]["auc_cutoffs"].get<std::vector<double>>())
      results["aggregate"] = compute_aggregates(results["scenes"], cutoffs);
  } else {
    const Json cfg = config_or_empty(o);
    const auto scenes = gather_scenes(o.inputs, cfg, "scenes");
    const Task task = scenes.front().scene.task;
    const PipelineParams params = pipeline_params_from_json(task, cfg.value("params", Json::object()), Phase::Test);
    const auto provider = make_provider(o, task, params.m_star);
    results = run_fit(scenes, *provider, params, o.seed, thread_count(o), cutoffs);
  }
  const Task task = task_from_string(results.at("task").get<std::string>());
  if (wanted.empty()) {
    wanted = {"me"};
    wanted.insert(task == Task::Fundamental ? "se" : task == Task::Homography ? "te" : "auc");
  }
  if (wanted.count("se") && task != Task::Fundamental) throw std::invalid_argument("SE is only defined for the fundamental task");
  if (wanted.count("te") && task != Task::Homography) throw std::invalid_argument("TE is only defined for the homography task");
  if (wanted.count("auc") && task != Task::VanishingPoint) throw std::invalid_argument("AUC is only defined for the vp task");

  const Json& a = results.at("aggregate");
  Json report = {{"task", results.at("task")}, {"scenes", a.at("scenes")}};
  std::ostringstream table;
  table << std::left << std::setw(16) << "metric" << std::setw(14) << "mean" << "median\n";
  auto row = [&](const std::string& name, const char* key) {
    if (!a.contains(key)) return;
    table << std::setw(16) << name << std::setw(14) << a[key]["mean"].get<double>() << a[key]["median"].get<double>() << "\n";
    report[key] = a[key];
  };
  if (wanted.count("me")) row("ME", "me");
  if (wanted.count("se")) row("SE [px]", "se_px");
  if (wanted.count("te")) row("TE [px]", "te_px");
  if (wanted.count("auc") && a.contains("auc")) {
    for (const auto& [k, v] : a["auc"].items()) table << std::setw(16) << ("AUC@" + k) << v.get<double>() << "\n";
    report["auc"] = a["auc"];
  }
  std::cout << table.str();
  if (!o.out.empty()) write_text_file(o.out, report.dump(2) + "\n");
  return 0;
}

int cmd_gradcheck(const CommonOptions& o, bool corrupt) {
  GradcheckOptions opt;
  opt.corrupt = corrupt;
  const CheckReport reports[] = {backprop_check(o.seed, opt), estimator_check(o.seed, opt)};
  Json out = Json::array();
  bool ok = true;
  for (const auto& r : reports) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": max relative error " << r.max_error << " (tolerance "
              << r.tolerance << ", " << r.evaluated << " values, worst " << r.worst << ")\n";
    out.push_back({{"name", r.name}, {"max_relative_error", r.max_error}, {"tolerance", r.tolerance},
                   {"worst", r.worst}, {"passed", r.passed}});
    ok = ok && r.passed;
  }
  if (!o.out.empty()) write_text_file(o.out, out.dump(2) + "\n");
  return ok ? 0 : 1;
}

int cmd_bench(const CommonOptions& o, const std::string& thread_list, int repeat) {
  const Json cfg = config_or_empty(o);
  std::vector<NamedScene> scenes;
  if (!o.inputs.empty() || cfg.contains("scenes")) {
    scenes = gather_scenes(o.inputs, cfg, "scenes");
  } else {
    GenConfig g = gen_config_from_json(cfg.value("generate", Json{{"task", "homography"}, {"count", 3}}));
    if (o.seed_given) g.seed = o.seed;
    for (int i = 0; i < g.count; ++i) scenes.push_back({"generated_" + std::to_string(i), generate_scene(g, i)});
  }
  const Task task = scenes.front().scene.task;
  const PipelineParams params = pipeline_params_from_json(task, cfg.value("params", Json::object()), Phase::Test);
  const auto provider = make_provider(o, task, params.m_star);
  std::vector<WeightMatrices> weights;
  for (const auto& s : scenes) weights.push_back(provider->weights(s.scene, params.m_star));

  std::vector<int> counts;
  for (double t : parse_list(thread_list)) counts.push_back(static_cast<int>(t));
  if (std::find(counts.begin(), counts.end(), 1) == counts.end()) counts.insert(counts.begin(), 1);
  std::sort(counts.begin(), counts.end());

  Json rows = Json::array();
  double base_mean = 0;
  std::cout << std::left << std::setw(10) << "threads" << std::setw(16) << "mean [s]" << std::setw(16) << "median [s]"
            << "speedup\n";
  for (int threads : counts) {
    std::vector<double> times;
    for (int r = 0; r < repeat; ++r)
      for (std::size_t i = 0; i < scenes.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        parsac_fit(scenes[i].scene, weights[i], params, substream_seed(o.seed, {i}), threads);
        times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      }
    const double mean = std::accumulate(times.begin(), times.end(), 0.0) / double(times.size());
    std::sort(times.begin(), times.end());
    const double median = times.size() % 2 ? times[times.size() / 2]
                                           : 0.5 * (times[times.size() / 2 - 1] + times[times.size() / 2]);
    if (threads == 1) base_mean = mean;
    const double speedup = base_mean / mean;
    std::cout << std::setw(10) << threads << std::setw(16) << mean << std::setw(16) << median << speedup << "\n";
    rows.push_back({{"threads", threads}, {"mean_seconds", mean}, {"median_seconds", median}, {"speedup", speedup}});
  }
  const Json report = {{"format_version", 1},
                       {"kind", "bench"},
                       {"task", std::string(to_string(task))},
                       {"scenes", scenes.size()},
                       {"hardware_threads", std::thread::hardware_concurrency()},
                       {"rows", rows}};
  if (!o.out.empty()) write_text_file(o.out, report.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parallel multi-model fitting with learned sampling and inlier weights"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("parsac ") + kToolVersion);

  CommonOptions o;
  std::string metrics, cutoffs = "1,3,5,10", thread_list = "1,2,4,8";
  int repeat = 1;
  bool corrupt = false;

  auto* generate = app.add_subcommand("generate", "Write synthetic scenes and a manifest");
  add_common(generate, o, false);
  auto* fit = app.add_subcommand("fit", "Fit models to scenes and write a results file");
  add_common(fit, o);
  auto* trn = app.add_subcommand("train", "Train the weight network");
  add_common(trn, o);
  auto* eval = app.add_subcommand("eval", "Report metrics for a results file or for scenes");
  add_common(eval, o);
  eval->add_option("--metrics", metrics, "Comma-separated subset of me,se,te,auc (default: all that apply)");
  eval->add_option("--auc-cutoffs", cutoffs, "Comma-separated AUC cutoffs in degrees");
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference and enumeration checks of the gradients");
  add_common(grad, o, false);
  grad->add_flag("--corrupt", corrupt, "Perturb the analytic gradients (negative control)")->group("");
  auto* bench = app.add_subcommand("bench", "Time fitting across thread counts");
  add_common(bench, o);
  bench->add_option("--threads-list", thread_list, "Comma-separated thread counts");
  bench->add_option("--repeat", repeat, "Repetitions per scene")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);
  try {
    if (generate->parsed()) return cmd_generate(o);
    if (fit->parsed()) return cmd_fit(o);
    if (trn->parsed()) return cmd_train(o);
    if (eval->parsed()) return cmd_eval(o, metrics, cutoffs);
    if (grad->parsed()) return cmd_gradcheck(o, corrupt);
    if (bench->parsed()) return cmd_bench(o, thread_list, repeat);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

#include "parsac/io.hpp"

#include "parsac/metrics.hpp"
#include "parsac/parallel.hpp"
#include "parsac/weights.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace parsac {

namespace fs = std::filesystem;

// --------------------------------------------------------------------------
// Models and scenes

Json model_to_json(const ModelInstance& model) {
  return {{"kind", std::string(to_string(task_of(model)))}, {"params", model_parameters(model)}};
}

ModelInstance model_from_json(const Json& j) {
  const Task task = task_from_string(j.at("kind").get<std::string>());
  const auto values = j.at("params").get<std::vector<double>>();
  return model_from_parameters(task, values);
}

Json scene_to_json(const Scene& scene) {
  Json j;
  j["format_version"] = kSceneFormatVersion;
  j["task"] = std::string(to_string(scene.task));
  j["width"] = scene.width;
  j["height"] = scene.height;
  if (scene.intrinsics) {
    std::vector<double> k;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) k.push_back((*scene.intrinsics)(r, c));
    j["K"] = k;
  }
  Json obs = Json::array(), ends = Json::array();
  for (const auto& o : scene.observations) {
    obs.push_back(std::vector<double>(o.features.data(), o.features.data() + 4));
    if (scene.task == Task::VanishingPoint) ends.push_back(std::vector<double>(o.points.data(), o.points.data() + 4));
  }
  j["observations"] = std::move(obs);
  if (scene.task == Task::VanishingPoint) j["endpoints"] = std::move(ends);
  if (scene.gt_labels) j["gt_labels"] = *scene.gt_labels;
  Json models = Json::array();
  for (const auto& m : scene.gt_models) models.push_back(model_to_json(m));
  j["gt_models"] = std::move(models);
  j["seed"] = scene.seed;
  return j;
}

Scene scene_from_json(const Json& j) {
  const int version = j.at("format_version").get<int>();
  if (version != kSceneFormatVersion)
    throw std::runtime_error("scene: unsupported format_version " + std::to_string(version));
  Scene s;
  s.task = task_from_string(j.at("task").get<std::string>());
  s.width = j.at("width").get<int>();
  s.height = j.at("height").get<int>();
  if (j.contains("K")) {
    const auto k = j.at("K").get<std::vector<double>>();
    if (k.size() != 9) throw std::runtime_error("scene: K needs 9 numbers");
    Eigen::Matrix3d K;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) K(r, c) = k[3 * r + c];
    s.intrinsics = K;
  }
  const auto& obs = j.at("observations");
  const bool vp = s.task == Task::VanishingPoint;
  if (vp && (!j.contains("endpoints") || j.at("endpoints").size() != obs.size()))
    throw std::runtime_error("scene: vp observations need matching endpoints");
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const auto f = obs[i].get<std::vector<double>>();
    if (f.size() != 4) throw std::runtime_error("scene: observation " + std::to_string(i) + " needs 4 numbers");
    Observation o;
    o.features = Eigen::Vector4d(f[0], f[1], f[2], f[3]);
    if (vp) {
      const auto p = j.at("endpoints")[i].get<std::vector<double>>();
      if (p.size() != 4) throw std::runtime_error("scene: endpoints " + std::to_string(i) + " need 4 numbers");
      o.points = Eigen::Vector4d(p[0], p[1], p[2], p[3]);
    } else {
      o.points = o.features;
    }
    s.observations.push_back(o);
  }
  if (j.contains("gt_labels")) {
    s.gt_labels = j.at("gt_labels").get<std::vector<int>>();
    if (s.gt_labels->size() != s.observations.size())
      throw std::runtime_error("scene: gt_labels length differs from observation count");
  }
  if (j.contains("gt_models"))
    for (const auto& m : j.at("gt_models")) s.gt_models.push_back(model_from_json(m));
  if (s.gt_labels)
    for (int l : *s.gt_labels)
      if (l < 0 || l > static_cast<int>(s.gt_models.size()))
        throw std::runtime_error("scene: label " + std::to_string(l) + " has no ground-truth model");
  s.seed = j.value("seed", std::uint64_t(0));
  return s;
}

Json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void save_scene(const Scene& scene, const fs::path& path) { write_text_file(path, scene_to_json(scene).dump() + "\n"); }

Scene load_scene(const fs::path& path) {
  try {
    return scene_from_json(read_json_file(path));
  } catch (const Json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

std::vector<NamedScene> load_scenes(const fs::path& path) {
  std::vector<NamedScene> out;
  if (fs::is_directory(path)) {
    if (fs::exists(path / "manifest.json")) return load_scenes(path / "manifest.json");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path))
      if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) out.push_back({f.filename().string(), load_scene(f)});
    return out;
  }
  const Json j = read_json_file(path);
  if (j.contains("scenes") && j.contains("count")) {
    for (const auto& name : j.at("scenes")) {
      const fs::path file = path.parent_path() / name.get<std::string>();
      out.push_back({name.get<std::string>(), load_scene(file)});
    }
    return out;
  }
  out.push_back({path.filename().string(), scene_from_json(j)});
  return out;
}

// --------------------------------------------------------------------------
// Configuration

GenConfig gen_config_from_json(const Json& j) {
  if (!j.contains("task")) throw std::invalid_argument("generator config field 'task': missing");
  GenConfig c = default_gen_config(task_from_string(j.at("task").get<std::string>()));
  auto take = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(field);
    } catch (const Json::exception&) {
      throw std::invalid_argument(std::string("generator config field '") + key + "': wrong type");
    }
  };
  take("count", c.count);
  take("width", c.width);
  take("height", c.height);
  take("models_min", c.models_min);
  take("models_max", c.models_max);
  take("points_min", c.points_min);
  take("points_max", c.points_max);
  take("noise_px", c.noise_px);
  take("outlier_rate", c.outlier_rate);
  take("seed", c.seed);
  take("manhattan", c.manhattan);
  take("equal_models", c.equal_models);
  take("focal_min_mm", c.focal_min_mm);
  take("focal_max_mm", c.focal_max_mm);
  take("sensor_mm", c.sensor_mm);
  take("outlier_cap", c.outlier_cap);
  take("separation", c.separation);
  for (const auto& [key, _] : j.items()) {
    static const std::vector<std::string> known = {
        "task", "count", "width", "height", "models_min", "models_max", "points_min", "points_max", "noise_px",
        "outlier_rate", "seed", "manhattan", "equal_models", "focal_min_mm", "focal_max_mm", "sensor_mm", "outlier_cap",
        "separation"};
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw std::invalid_argument("generator config field '" + key + "': unknown");
  }
  c.validate();
  return c;
}

Json to_json(const GenConfig& c) {
  return {{"task", std::string(to_string(c.task))},
          {"count", c.count},
          {"width", c.width},
          {"height", c.height},
          {"models_min", c.models_min},
          {"models_max", c.models_max},
          {"points_min", c.points_min},
          {"points_max", c.points_max},
          {"noise_px", c.noise_px},
          {"outlier_rate", c.outlier_rate},
          {"seed", c.seed},
          {"manhattan", c.manhattan},
          {"equal_models", c.equal_models},
          {"focal_min_mm", c.focal_min_mm},
          {"focal_max_mm", c.focal_max_mm},
          {"sensor_mm", c.sensor_mm},
          {"outlier_cap", c.outlier_cap},
          {"separation", c.separation}};
}

namespace {

void apply_pipeline_overrides(PipelineParams& p, const Json& j) {
  if (j.is_null()) return;
  if (j.contains("m_star")) p.m_star = j.at("m_star").get<int>();
  if (j.contains("tau")) p.consensus.tau = j.at("tau").get<double>();
  if (j.contains("tau_a")) {
    if (j.at("tau_a").is_null())
      p.tau_a.reset();
    else
      p.tau_a = j.at("tau_a").get<double>();
  }
  if (j.contains("hypotheses")) p.consensus.hypotheses = j.at("hypotheses").get<int>();
  if (j.contains("alpha_s")) p.consensus.alpha_s = j.at("alpha_s").get<double>();
  if (j.contains("beta")) p.consensus.beta = j.at("beta").get<double>();
  if (j.contains("weighted")) p.consensus.weighted = j.at("weighted").get<bool>();
  if (j.contains("refine_vp")) p.refine_vp = j.at("refine_vp").get<bool>();
}

}  // namespace

PipelineParams pipeline_params_from_json(Task task, const Json& overrides, Phase phase) {
  PipelineParams p = default_pipeline_params(task, phase);
  apply_pipeline_overrides(p, overrides);
  p.validate(task);
  return p;
}

Json to_json(const PipelineParams& p) {
  Json j = {{"m_star", p.m_star},
            {"tau", p.consensus.tau},
            {"hypotheses", p.consensus.hypotheses},
            {"alpha_s", p.consensus.alpha_s},
            {"beta", p.consensus.beta},
            {"minimal_set", p.consensus.minimal_set},
            {"weighted", p.consensus.weighted},
            {"refine_vp", p.refine_vp}};
  j["tau_a"] = p.tau_a ? Json(*p.tau_a) : Json(nullptr);
  return j;
}

TrainParams train_params_from_json(Task task, const Json& j) {
  const LossKind loss = loss_kind_from_string(
      j.value("loss", std::string(task == Task::VanishingPoint ? "hungarian_vp" : "me")));
  TrainParams p = default_train_params(task, loss);
  if (j.contains("K")) p.K = j.at("K").get<int>();
  if (j.contains("K_tilde")) p.K_tilde = j.at("K_tilde").get<int>();
  if (j.contains("learning_rate")) p.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("epochs")) p.epochs = j.at("epochs").get<int>();
  if (j.contains("lr_drop_epoch")) p.lr_drop_epoch = j.at("lr_drop_epoch").get<int>();
  if (j.contains("batch_size")) p.batch_size = j.at("batch_size").get<int>();
  if (j.contains("gamma")) p.gamma = j.at("gamma").get<double>();
  if (j.contains("max_observations")) p.max_observations = j.at("max_observations").get<int>();
  apply_pipeline_overrides(p.pipeline, j);
  p.validate(task);
  return p;
}

Json to_json(const TrainParams& p) {
  return {{"loss", std::string(to_string(p.loss))},
          {"K", p.K},
          {"K_tilde", p.K_tilde},
          {"learning_rate", p.learning_rate},
          {"epochs", p.epochs},
          {"lr_drop_epoch", p.lr_drop_epoch},
          {"batch_size", p.batch_size},
          {"gamma", p.gamma},
          {"max_observations", p.max_observations},
          {"pipeline", to_json(p.pipeline)}};
}

// --------------------------------------------------------------------------
// Results

namespace {

std::string cutoff_key(double c) {
  std::ostringstream s;
  s << c;
  return s.str();
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

Json compute_aggregates(const Json& entries, const std::vector<double>& cutoffs) {
  std::vector<double> me, se, te, vp;
  for (const auto& e : entries) {
    if (e.contains("me") && !e.at("me").is_null()) me.push_back(e.at("me").get<double>());
    if (e.contains("se_px") && !e.at("se_px").is_null()) se.push_back(e.at("se_px").get<double>());
    if (e.contains("te_px") && !e.at("te_px").is_null()) te.push_back(e.at("te_px").get<double>());
    if (e.contains("vp_errors"))
      for (const auto& x : e.at("vp_errors")) vp.push_back(x.get<double>());
  }
  Json a;
  a["scenes"] = entries.size();
  a["auc_cutoffs"] = cutoffs;
  if (!me.empty()) a["me"] = {{"mean", mean_of(me)}, {"median", median_of(me)}, {"count", me.size()}};
  if (!se.empty()) a["se_px"] = {{"mean", mean_of(se)}, {"median", median_of(se)}, {"count", se.size()}};
  if (!te.empty()) a["te_px"] = {{"mean", mean_of(te)}, {"median", median_of(te)}, {"count", te.size()}};
  if (!vp.empty()) {
    Json auc;
    for (double c : cutoffs) auc[cutoff_key(c)] = auc_at(vp, c);
    a["auc"] = std::move(auc);
    a["vp_errors"] = {{"count", vp.size()}, {"mean", mean_of(vp)}, {"median", median_of(vp)}};
  }
  return a;
}

Json run_fit(const std::vector<NamedScene>& scenes, const WeightProvider& provider, const PipelineParams& params,
             std::uint64_t seed, int threads, const std::vector<double>& auc_cutoffs) {
  if (scenes.empty()) throw std::invalid_argument("fit: no scenes");
  const Task task = scenes.front().scene.task;
  for (const auto& s : scenes)
    if (s.scene.task != task) throw std::invalid_argument("fit: scene '" + s.name + "' has a different task");
  params.validate(task);

  std::vector<Json> entries(scenes.size());
  parallel_for(static_cast<int>(scenes.size()), threads, [&](int i) {
    const Scene& scene = scenes[i].scene;
    const FitResult fit = parsac_fit(scene, provider, params, substream_seed(seed, {std::uint64_t(i)}), 1);
    Json e;
    e["name"] = scenes[i].name;
    Json models = Json::array();
    for (const auto& m : fit.models) models.push_back(model_to_json(m));
    e["models"] = std::move(models);
    e["labels"] = fit.labels;
    e["per_model_inliers"] = fit.per_model_inliers;
    e["me"] = scene.has_labels() ? Json(misclassification_error(fit.labels, *scene.gt_labels)) : Json(nullptr);
    if (scene.has_labels() && task == Task::Fundamental) {
      const auto se = sampson_error_metric(scene, fit.models);
      e["se_px"] = se ? Json(*se * scene.pixel_scale()) : Json(nullptr);
    }
    if (scene.has_labels() && task == Task::Homography) {
      const auto te = transfer_error_metric(scene, fit.models);
      e["te_px"] = te ? Json(*te * scene.pixel_scale()) : Json(nullptr);
    }
    if (task == Task::VanishingPoint && scene.intrinsics && !scene.gt_models.empty())
      e["vp_errors"] = vp_angle_errors(fit.models, scene);
    e["timing"] = {{"elapsed_seconds", fit.elapsed_seconds}};
    entries[i] = std::move(e);
  });

  Json r;
  r["format_version"] = kResultsFormatVersion;
  r["kind"] = "results";
  r["tool_version"] = std::string("parsac ") + kToolVersion;
  r["task"] = std::string(to_string(task));
  r["seed"] = seed;
  r["provider"] = provider.name();
  r["params"] = to_json(params);
  r["scenes"] = entries;
  r["aggregate"] = compute_aggregates(r["scenes"], auc_cutoffs);
  double total = 0;
  for (const auto& e : entries) total += e["timing"]["elapsed_seconds"].get<double>();
  r["timing"] = {{"total_fit_seconds", total}};
  return r;
}

void check_results_consistency(const Json& results) {
  if (results.value("kind", std::string()) != "results") throw std::runtime_error("not a results file");
  if (results.at("format_version").get<int>() != kResultsFormatVersion)
    throw std::runtime_error("results: unsupported format_version");
  const auto cutoffs = results.at("aggregate").at("auc_cutoffs").get<std::vector<double>>();
  const Json recomputed = compute_aggregates(results.at("scenes"), cutoffs);
  if (recomputed != results.at("aggregate"))
    throw std::runtime_error("results: aggregates do not match the per-scene entries");
}

Json strip_timing(const Json& results) {
  if (results.is_object()) {
    Json out = Json::object();
    for (const auto& [k, v] : results.items())
      if (k != "timing") out[k] = strip_timing(v);
    return out;
  }
  if (results.is_array()) {
    Json out = Json::array();
    for (const auto& v : results) out.push_back(strip_timing(v));
    return out;
  }
  return results;
}

}  // namespace parsac

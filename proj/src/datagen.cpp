#include "parsac/datagen.hpp"
#include "parsac/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace parsac {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct Camera {
  Eigen::Matrix3d K;       // pixels
  Eigen::Matrix3d K_norm;  // normalized frame
};

Camera sample_camera(const GenConfig& cfg, Rng& rng) {
  const double f_mm = uniform(rng, cfg.focal_min_mm, cfg.focal_max_mm);
  const double f = f_mm / cfg.sensor_mm * std::max(cfg.width, cfg.height);
  Camera cam;
  cam.K << f, 0, cfg.width / 2.0, 0, f, cfg.height / 2.0, 0, 0, 1;
  cam.K_norm = normalization_transform(cfg.width, cfg.height) * cam.K;
  return cam;
}

Eigen::Vector3d random_unit(Rng& rng) {
  Eigen::Vector3d v;
  do {
    v = {normal(rng), normal(rng), normal(rng)};
  } while (v.norm() < 1e-9);
  return v.normalized();
}

bool in_frame(const Eigen::Vector2d& p, const GenConfig& cfg) {
  const double s = std::max(cfg.width, cfg.height);
  return std::abs(p.x()) <= cfg.width / (2.0 * s) && std::abs(p.y()) <= cfg.height / (2.0 * s);
}

/// Projects a camera-frame point; nullopt behind the camera or out of frame.
std::optional<Eigen::Vector2d> project(const Camera& cam, const Eigen::Vector3d& X, const GenConfig& cfg) {
  if (X.z() < 0.1) return std::nullopt;
  const Eigen::Vector3d x = cam.K_norm * X;
  const Eigen::Vector2d p = x.head<2>() / x.z();
  if (!in_frame(p, cfg)) return std::nullopt;
  return p;
}

Eigen::Vector2d random_in_frame(const GenConfig& cfg, Rng& rng) {
  const double s = std::max(cfg.width, cfg.height);
  return {uniform(rng, -cfg.width / (2.0 * s), cfg.width / (2.0 * s)),
          uniform(rng, -cfg.height / (2.0 * s), cfg.height / (2.0 * s))};
}

int points_for_model(const GenConfig& cfg, Rng& rng) {
  return cfg.equal_models ? cfg.points_min : uniform_int(rng, cfg.points_min, cfg.points_max);
}

int nearest_below(const Observation& x, const std::vector<ModelInstance>& models, double threshold) {
  int best = 0;
  double best_d = threshold;
  for (std::size_t k = 0; k < models.size(); ++k) {
    const double d = residual(x, models[k]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k) + 1;
    }
  }
  return best;
}

// Removes observations that lie within `separation` of a model other than
// the one that generated them.
void drop_ambiguous(Scene& scene, const std::vector<int>& source, double separation) {
  if (!(separation > 0)) return;
  std::vector<Observation> kept;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    bool ambiguous = false;
    for (std::size_t k = 0; k < scene.gt_models.size() && !ambiguous; ++k)
      ambiguous = int(k) != source[i] && residual(scene.observations[i], scene.gt_models[k]) < separation;
    if (!ambiguous) kept.push_back(scene.observations[i]);
  }
  scene.observations = std::move(kept);
}

Observation random_outlier(const Scene& scene, Rng& rng) {
  GenConfig frame;
  frame.width = scene.width;
  frame.height = scene.height;
  if (scene.task == Task::VanishingPoint) {
    const double half = 50.0 / scene.pixel_scale();
    for (;;) {
      const Eigen::Vector2d c = random_in_frame(frame, rng);
      const Eigen::Vector2d a = c + Eigen::Vector2d(uniform(rng, -half, half), uniform(rng, -half, half));
      const Eigen::Vector2d b = c + Eigen::Vector2d(uniform(rng, -half, half), uniform(rng, -half, half));
      if ((a - b).norm() > 1e-9) return Observation::segment(a.x(), a.y(), b.x(), b.y());
    }
  }
  const Eigen::Vector2d a = random_in_frame(frame, rng), b = random_in_frame(frame, rng);
  return Observation::correspondence(a.x(), a.y(), b.x(), b.y());
}

Scene empty_scene(const GenConfig& cfg, const Camera& cam) {
  Scene s;
  s.task = cfg.task;
  s.width = cfg.width;
  s.height = cfg.height;
  s.intrinsics = cam.K;
  s.gt_labels = std::vector<int>{};
  return s;
}

}  // namespace

void GenConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("generator config field '" + field + "': " + why);
  };
  if (count < 0) fail("count", "must be non-negative");
  if (width < 1) fail("width", "must be positive");
  if (height < 1) fail("height", "must be positive");
  if (models_min < 1) fail("models_min", "must be at least 1");
  if (models_max < models_min) fail("models_max", "must be at least models_min");
  if (points_min < 1) fail("points_min", "must be positive");
  if (points_max < points_min) fail("points_max", "must be at least points_min");
  if (!(noise_px >= 0)) fail("noise_px", "must be non-negative");
  if (!(outlier_rate >= 0 && outlier_rate < 1)) fail("outlier_rate", "must lie in [0, 1)");
  if (!(focal_min_mm > 0) || focal_max_mm < focal_min_mm) fail("focal_min_mm", "invalid focal range");
  if (!(sensor_mm > 0)) fail("sensor_mm", "must be positive");
  if (outlier_cap < 0) fail("outlier_cap", "must be non-negative");
  if (!(separation >= 0)) fail("separation", "must be non-negative");
  if (manhattan && task != Task::VanishingPoint) fail("manhattan", "only valid for the vp task");
}

GenConfig default_gen_config(Task task) {
  GenConfig cfg;
  cfg.task = task;
  cfg.separation = task_defaults(task).tau_test;
  switch (task) {
    case Task::Fundamental:
      cfg.models_min = 1, cfg.models_max = 4, cfg.points_min = 40, cfg.points_max = 120;
      break;
    case Task::Homography:
      cfg.models_min = 2, cfg.models_max = 8, cfg.points_min = 20, cfg.points_max = 100;
      break;
    case Task::VanishingPoint:
      cfg.models_min = 3, cfg.models_max = 3, cfg.points_min = 20, cfg.points_max = 60;
      break;
  }
  return cfg;
}

double generation_threshold(Task task, int width, int height) {
  const double s = std::max(width, height);
  switch (task) {
    case Task::Fundamental: return 2.0 / s;
    case Task::Homography: return 1.0 / s;
    case Task::VanishingPoint: return 1.0 - std::cos(0.5 * kDeg);
  }
  return 0;
}

Eigen::Matrix3d random_rotation(Rng& rng, double max_angle_rad) {
  const Eigen::Vector3d axis = random_unit(rng);
  return Eigen::AngleAxisd(uniform(rng, 0.0, max_angle_rad), axis).toRotationMatrix();
}

namespace {

/// Sorts models by descending label count (stable) and renumbers labels.
void order_by_significance(Scene& scene) {
  std::vector<int>& labels = *scene.gt_labels;
  std::vector<int> counts(scene.gt_models.size(), 0);
  for (int l : labels)
    if (l > 0) ++counts[l - 1];
  std::vector<int> order(counts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return counts[a] > counts[b]; });
  std::vector<int> rank(order.size());
  std::vector<ModelInstance> sorted;
  for (std::size_t r = 0; r < order.size(); ++r) {
    rank[order[r]] = static_cast<int>(r) + 1;
    sorted.push_back(scene.gt_models[order[r]]);
  }
  for (int& l : labels)
    if (l > 0) l = rank[l - 1];
  scene.gt_models = std::move(sorted);
}

}  // namespace

void label_and_order(Scene& scene, int min_inliers) {
  const double thr = generation_threshold(scene.task, scene.width, scene.height);
  std::vector<int>& labels = scene.gt_labels.emplace(scene.size(), 0);
  for (;;) {
    for (std::size_t i = 0; i < scene.size(); ++i) labels[i] = nearest_below(scene.observations[i], scene.gt_models, thr);
    std::vector<int> counts(scene.gt_models.size(), 0);
    for (int l : labels)
      if (l > 0) ++counts[l - 1];
    std::vector<int> keep;
    for (std::size_t k = 0; k < counts.size(); ++k)
      if (counts[k] >= min_inliers) keep.push_back(static_cast<int>(k));
    if (keep.size() == scene.gt_models.size()) {
      order_by_significance(scene);
      return;
    }
    std::vector<ModelInstance> kept;
    for (int k : keep) kept.push_back(scene.gt_models[k]);
    scene.gt_models = std::move(kept);
  }
}

Scene gen_fmat_scene(const GenConfig& cfg, Rng& rng) {
  const Camera cam = sample_camera(cfg, rng);
  Scene scene = empty_scene(cfg, cam);
  const int min_inliers = minimal_set_size(Task::Fundamental) + 1;
  const int models = uniform_int(rng, cfg.models_min, cfg.models_max);
  std::vector<int> source;
  for (int k = 0; k < models; ++k) {
    const int wanted = points_for_model(cfg, rng);
    for (int retry = 0; retry < 20; ++retry) {
      // An object near a random viewing ray moves rigidly between the views.
      const Eigen::Vector2d pix = random_in_frame(cfg, rng) * 0.7;
      const double depth = uniform(rng, 3.0, 8.0);
      const Eigen::Vector3d centre = depth * (cam.K_norm.inverse() * Eigen::Vector3d(pix.x(), pix.y(), 1.0));
      const Eigen::Matrix3d R = random_rotation(rng, 60.0 * kDeg);
      const Eigen::Vector3d shift = uniform(rng, 0.5, 1.5) * random_unit(rng);
      const Eigen::Vector3d t = centre + shift - R * centre;

      std::vector<Observation> points;
      for (int attempt = 0; int(points.size()) < wanted && attempt < 50 * wanted; ++attempt) {
        const Eigen::Vector3d X = centre + Eigen::Vector3d(uniform(rng, -1.2, 1.2), uniform(rng, -1.2, 1.2),
                                                           uniform(rng, -1.2, 1.2));
        const auto a = project(cam, X, cfg);
        const auto b = project(cam, R * X + t, cfg);
        if (a && b) points.push_back(Observation::correspondence(a->x(), a->y(), b->x(), b->y()));
      }
      if (int(points.size()) < min_inliers) continue;
      source.insert(source.end(), points.size(), int(scene.gt_models.size()));
      scene.gt_models.push_back(gt_fmat_from_pose(cam.K_norm, R, t));
      scene.observations.insert(scene.observations.end(), points.begin(), points.end());
      break;
    }
  }
  drop_ambiguous(scene, source, cfg.separation);
  label_and_order(scene, min_inliers);
  return scene;
}

std::vector<int> merge_coplanar(const std::vector<Plane>& planes, double max_angle_deg, double max_offset) {
  std::vector<int> cluster(planes.size());
  std::iota(cluster.begin(), cluster.end(), 0);
  auto root = [&](int i) {
    while (cluster[i] != i) i = cluster[i];
    return i;
  };
  const double cos_limit = std::cos(max_angle_deg * kDeg);
  for (std::size_t i = 0; i < planes.size(); ++i)
    for (std::size_t j = i + 1; j < planes.size(); ++j) {
      if (planes[i].n.dot(planes[j].n) < cos_limit - 1e-15) continue;
      if (std::abs(planes[i].d - planes[j].d) > max_offset + 1e-15) continue;
      const int a = root(static_cast<int>(i)), b = root(static_cast<int>(j));
      cluster[std::max(a, b)] = std::min(a, b);
    }
  for (std::size_t i = 0; i < planes.size(); ++i) cluster[i] = root(static_cast<int>(i));
  return cluster;
}

namespace {

Scene homography_attempt(const GenConfig& cfg, Rng& rng) {
  const Camera cam = sample_camera(cfg, rng);
  Scene scene = empty_scene(cfg, cam);
  const Eigen::Matrix3d K_inv = cam.K_norm.inverse();
  const Eigen::Matrix3d R = random_rotation(rng, 10.0 * kDeg);
  const Eigen::Vector3d t = uniform(rng, 0.5, 1.5) * random_unit(rng);

  const int count = uniform_int(rng, cfg.models_min, cfg.models_max);
  std::vector<Plane> planes;
  std::vector<Eigen::Vector2d> anchors;
  for (int k = 0; k < count; ++k) {
    const Eigen::Vector2d pix = random_in_frame(cfg, rng) * 0.8;
    const Eigen::Vector3d P0 = uniform(rng, 3.0, 10.0) * (K_inv * Eigen::Vector3d(pix.x(), pix.y(), 1.0));
    // Normal within 60 degrees of the viewing axis, facing the camera.
    Eigen::Vector3d n;
    do {
      n = random_unit(rng);
    } while (-n.z() < std::cos(60.0 * kDeg));
    planes.push_back({n, -n.dot(P0)});
    anchors.push_back(pix);
  }
  const std::vector<int> cluster = merge_coplanar(planes);
  std::vector<int> model_of(count, -1), source;
  for (int k = 0; k < count; ++k)
    if (cluster[k] == k) {
      model_of[k] = static_cast<int>(scene.gt_models.size());
      scene.gt_models.push_back(gt_homography_from_plane(cam.K_norm, R, t, planes[k].n, planes[k].d));
    }

  for (int k = 0; k < count; ++k) {
    const double radius = uniform(rng, 80.0, 250.0) / scene.pixel_scale();
    const int wanted = points_for_model(cfg, rng);
    int added = 0;
    for (int attempt = 0; added < wanted && attempt < 50 * wanted; ++attempt) {
      const Eigen::Vector2d a = anchors[k] + Eigen::Vector2d(uniform(rng, -radius, radius), uniform(rng, -radius, radius));
      if (!in_frame(a, cfg)) continue;
      const Eigen::Vector3d ray = K_inv * Eigen::Vector3d(a.x(), a.y(), 1.0);
      const double denom = planes[k].n.dot(ray);
      if (std::abs(denom) < 1e-12) continue;
      const double lambda = -planes[k].d / denom;
      if (lambda <= 0) continue;
      const auto b = project(cam, R * (lambda * ray) + t, cfg);
      if (!b) continue;
      scene.observations.push_back(Observation::correspondence(a.x(), a.y(), b->x(), b->y()));
      source.push_back(model_of[cluster[k]]);
      ++added;
    }
  }
  drop_ambiguous(scene, source, cfg.separation);
  label_and_order(scene, std::max(10, minimal_set_size(Task::Homography) + 1));
  return scene;
}

}  // namespace

Scene gen_homography_scene(const GenConfig& cfg, Rng& rng) {
  // A draw whose planes all leave the second view is redrawn.
  Scene scene = homography_attempt(cfg, rng);
  for (int retry = 0; retry < 20 && scene.gt_models.empty(); ++retry) scene = homography_attempt(cfg, rng);
  return scene;
}

Scene gen_vp_scene(const GenConfig& cfg, Rng& rng) {
  const Camera cam = sample_camera(cfg, rng);
  Scene scene = empty_scene(cfg, cam);
  std::vector<Eigen::Vector3d> dirs;
  if (cfg.manhattan) {
    const Eigen::Matrix3d R = random_rotation(rng, std::numbers::pi);
    for (int k = 0; k < 3; ++k) dirs.push_back(R.col(k));
  } else {
    const int models = uniform_int(rng, cfg.models_min, cfg.models_max);
    for (int attempt = 0; static_cast<int>(dirs.size()) < models && attempt < 10000; ++attempt) {
      const Eigen::Vector3d d = random_unit(rng);
      bool separated = true;
      for (const auto& e : dirs) separated = separated && vp_direction_angle(d, e) >= 15.0 * kDeg;
      if (separated) dirs.push_back(d);
    }
  }
  const double s = scene.pixel_scale();
  std::vector<int> source;
  for (const auto& d : dirs) {
    const Eigen::Vector3d v = (cam.K_norm * d).normalized();
    scene.gt_models.push_back(VanishingPoint{v});
    const int wanted = points_for_model(cfg, rng);
    int added = 0;
    for (int attempt = 0; added < wanted && attempt < 50 * wanted; ++attempt) {
      const Eigen::Vector2d m = random_in_frame(cfg, rng);
      Eigen::Vector2d dir = v.head<2>() - v.z() * m;
      if (dir.norm() < 1e-9) continue;
      dir = Eigen::Rotation2Dd(uniform(rng, -0.5, 0.5) * kDeg) * dir.normalized();
      const double half = uniform(rng, 15.0, 75.0) / s;
      const Eigen::Vector2d a = m - half * dir, b = m + half * dir;
      if (!in_frame(a, cfg) || !in_frame(b, cfg)) continue;
      scene.observations.push_back(Observation::segment(a.x(), a.y(), b.x(), b.y()));
      source.push_back(static_cast<int>(scene.gt_models.size()) - 1);
      ++added;
    }
  }
  drop_ambiguous(scene, source, cfg.separation);
  label_and_order(scene, minimal_set_size(Task::VanishingPoint) + 1);
  return scene;
}

Scene inject_noise(const Scene& scene, double sigma_px, Rng& rng) {
  if (!(sigma_px >= 0)) throw std::invalid_argument("inject_noise: sigma must be non-negative");
  if (sigma_px == 0) return scene;
  Scene out = scene;
  const double sigma = sigma_px / scene.pixel_scale();
  for (auto& obs : out.observations) {
    Eigen::Vector4d p = obs.points;
    for (int k = 0; k < 4; ++k) p[k] += normal(rng, 0.0, sigma);
    obs = scene.task == Task::VanishingPoint ? Observation::segment(p[0], p[1], p[2], p[3])
                                             : Observation::correspondence(p[0], p[1], p[2], p[3]);
  }
  return out;
}

Scene inject_outliers(const Scene& scene, double rate, Rng& rng, int cap) {
  if (!(rate >= 0 && rate < 1)) throw std::invalid_argument("inject_outliers: rate must lie in [0, 1)");
  Scene out = scene;
  out.observations.clear();
  std::vector<int> labels;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const int l = scene.gt_labels ? (*scene.gt_labels)[i] : 0;
    if (l == 0) continue;
    out.observations.push_back(scene.observations[i]);
    labels.push_back(l);
  }
  const double inliers = double(out.observations.size());
  const long extra = std::lround(rate * inliers / (1.0 - rate));
  if (extra > cap)
    throw std::invalid_argument("inject_outliers: " + std::to_string(extra) + " outliers exceed the cap of " +
                                std::to_string(cap));
  const double thr = generation_threshold(scene.task, scene.width, scene.height);
  for (long k = 0; k < extra; ++k) {
    const Observation o = random_outlier(scene, rng);
    out.observations.push_back(o);
    labels.push_back(nearest_below(o, scene.gt_models, thr));
  }
  out.gt_labels = std::move(labels);
  return out;
}

Scene generate_scene(const GenConfig& cfg, std::uint64_t index) {
  cfg.validate();
  Rng rng = substream(cfg.seed, {index});
  Scene scene;
  switch (cfg.task) {
    case Task::Fundamental: scene = gen_fmat_scene(cfg, rng); break;
    case Task::Homography: scene = gen_homography_scene(cfg, rng); break;
    case Task::VanishingPoint: scene = gen_vp_scene(cfg, rng); break;
  }
  scene = inject_outliers(scene, cfg.outlier_rate, rng, cfg.outlier_cap);
  // Relabeled collisions can change which model is largest.
  order_by_significance(scene);
  scene = inject_noise(scene, cfg.noise_px, rng);
  scene.seed = substream_seed(cfg.seed, {index});
  return scene;
}

}  // namespace parsac

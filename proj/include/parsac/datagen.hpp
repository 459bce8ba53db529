#ifndef PARSAC_DATAGEN_HPP_
#define PARSAC_DATAGEN_HPP_

#include "parsac/rng.hpp"
#include "parsac/scene.hpp"

#include <cstdint>
#include <vector>

namespace parsac {

struct GenConfig {
  Task task = Task::Fundamental;
  int count = 1;
  int width = 1024;
  int height = 1024;
  int models_min = 1;
  int models_max = 4;
  int points_min = 40;   // per model, before labeling
  int points_max = 120;
  double noise_px = 0.0;
  double outlier_rate = 0.0;
  std::uint64_t seed = 0;
  bool manhattan = false;      // VP: three orthogonal directions
  bool equal_models = false;   // every model gets points_min points
  double focal_min_mm = 24.0;
  double focal_max_mm = 40.0;
  double sensor_mm = 36.0;
  int outlier_cap = 100000;
  /// Observations closer than this (normalized residual) to a model other
  /// than their own are discarded before labeling; 0 keeps everything.
  /// default_gen_config uses the task's test-time inlier threshold.
  double separation = 0.0;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

GenConfig default_gen_config(Task task);

/// Residual bound used for labeling, in the normalized frame: 2 px Sampson
/// for F, 1 px transfer for H, 0.5 degree deviation for VP.
double generation_threshold(Task task, int width, int height);

/// Scene `index` of the configured set, drawn from substream (seed, index).
Scene generate_scene(const GenConfig& cfg, std::uint64_t index);

Scene gen_fmat_scene(const GenConfig& cfg, Rng& rng);
Scene gen_homography_scene(const GenConfig& cfg, Rng& rng);
Scene gen_vp_scene(const GenConfig& cfg, Rng& rng);

/// Adds N(0, sigma_px) to every observed coordinate. Labels are unchanged.
Scene inject_noise(const Scene& scene, double sigma_px, Rng& rng);

/// Replaces all label-0 observations with round(rate * n / (1 - rate))
/// synthetic outliers, n being the inlier count. Outliers that fall within
/// the generation threshold of a model are relabeled to it.
Scene inject_outliers(const Scene& scene, double rate, Rng& rng, int cap = 100000);

/// Labels every observation by its nearest model below the generation
/// threshold, drops models with fewer than `min_inliers`, and orders the
/// remaining models by descending inlier count.
void label_and_order(Scene& scene, int min_inliers);

struct Plane {
  Eigen::Vector3d n;  // unit normal
  double d;           // n^T X + d = 0
};

/// Groups planes whose normals differ by at most `max_angle_deg` and whose
/// offsets differ by at most `max_offset`. Returns a cluster index per plane;
/// the cluster representative is its lowest-index member.
std::vector<int> merge_coplanar(const std::vector<Plane>& planes, double max_angle_deg = 2.0,
                                double max_offset = 0.1);

Eigen::Matrix3d random_rotation(Rng& rng, double max_angle_rad);

}  // namespace parsac

#endif  // PARSAC_DATAGEN_HPP_

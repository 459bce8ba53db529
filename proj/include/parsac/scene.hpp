#ifndef PARSAC_SCENE_HPP_
#define PARSAC_SCENE_HPP_

#include "parsac/geometry.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace parsac {

/// Observations in the normalized frame plus whatever ground truth is known.
/// Label 0 is an outlier; label k > 0 refers to gt_models[k - 1].
struct Scene {
  Task task = Task::VanishingPoint;
  int width = 1024;
  int height = 1024;
  std::vector<Observation> observations;
  std::optional<std::vector<int>> gt_labels;
  std::vector<ModelInstance> gt_models;
  std::optional<Eigen::Matrix3d> intrinsics;  // pixels
  std::uint64_t seed = 0;

  std::size_t size() const { return observations.size(); }
  double pixel_scale() const { return double(std::max(width, height)); }
  bool has_labels() const { return gt_labels.has_value(); }
};

/// Features stacked as an N x 4 matrix.
inline Eigen::MatrixXd feature_matrix(const Scene& scene) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(scene.size()), 4);
  for (std::size_t i = 0; i < scene.size(); ++i) X.row(i) = scene.observations[i].features.transpose();
  return X;
}

}  // namespace parsac

#endif  // PARSAC_SCENE_HPP_

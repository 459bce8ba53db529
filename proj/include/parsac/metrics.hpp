#ifndef PARSAC_METRICS_HPP_
#define PARSAC_METRICS_HPP_

#include "parsac/geometry.hpp"
#include "parsac/scene.hpp"

#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace parsac {

struct Assignment {
  std::vector<std::pair<int, int>> pairs;  // (row, col), sorted by row
  double cost = 0;
};

/// Minimum-cost injective matching of the smaller side of `cost` into the
/// larger one.
Assignment hungarian_assign(const Eigen::MatrixXd& cost);

inline constexpr double kUnmatchedVpError = 90.0;

/// Angle in degrees between two 3D directions, sign-insensitive. Zero-norm
/// input yields 90.
double direction_angle_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b);

/// Per ground-truth VP angle error in degrees. `to_camera` maps a VP in the
/// observation frame to a camera direction. Only the first min(|gt|, M)
/// predictions enter the matching; unmatched ground truth gets 90 degrees.
std::vector<double> vp_angle_errors(std::span<const Eigen::Vector3d> predicted,
                                    std::span<const Eigen::Vector3d> ground_truth,
                                    const Eigen::Matrix3d& to_camera);

/// Uses the scene intrinsics and normalization to build `to_camera`.
std::vector<double> vp_angle_errors(const std::vector<ModelInstance>& models, const Scene& scene);

/// (1/theta_c) * integral over [0, theta_c] of the recall curve.
double auc_at(std::span<const double> errors, double theta_c);

/// Fraction of positions with differing labels. Labels are compared as-is.
double misclassification_error(std::span<const int> labels, std::span<const int> gt_labels);

/// Mean over ground-truth inliers of the minimum residual to the first
/// min(|gt|, M) predicted models, clipped at 1 (max(W, H) in pixels).
/// An empty prediction falls back to the identity matrix. Normalized units;
/// nullopt when the scene has no ground-truth inliers.
std::optional<double> sampson_error_metric(const Scene& scene, const std::vector<ModelInstance>& models);
std::optional<double> transfer_error_metric(const Scene& scene, const std::vector<ModelInstance>& models);

}  // namespace parsac

#endif  // PARSAC_METRICS_HPP_

#include "parsac/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace parsac {

Assignment hungarian_assign(const Eigen::MatrixXd& cost) {
  Assignment result;
  if (cost.size() == 0) return result;
  if (!cost.allFinite()) throw std::invalid_argument("hungarian_assign: non-finite cost");
  const bool transposed = cost.rows() > cost.cols();
  const Eigen::MatrixXd a = transposed ? Eigen::MatrixXd(cost.transpose()) : cost;
  const int n = static_cast<int>(a.rows()), m = static_cast<int>(a.cols());

  // Shortest augmenting paths with potentials; 1-based with a virtual column 0.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> match(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  for (int j = 1; j <= m; ++j) {
    if (match[j] == 0) continue;
    const int r = match[j] - 1, c = j - 1;
    result.pairs.emplace_back(transposed ? c : r, transposed ? r : c);
  }
  std::sort(result.pairs.begin(), result.pairs.end());
  for (const auto& [r, c] : result.pairs) result.cost += cost(r, c);
  return result;
}

double direction_angle_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double na = a.norm(), nb = b.norm();
  if (!(na > 0) || !(nb > 0) || !std::isfinite(na) || !std::isfinite(nb)) return kUnmatchedVpError;
  // atan2 keeps full precision near 0 and 90 degrees, where acos does not.
  return std::atan2(a.cross(b).norm(), std::abs(a.dot(b))) * 180.0 / std::numbers::pi;
}

std::vector<double> vp_angle_errors(std::span<const Eigen::Vector3d> predicted,
                                    std::span<const Eigen::Vector3d> ground_truth,
                                    const Eigen::Matrix3d& to_camera) {
  const std::size_t used = std::min(predicted.size(), ground_truth.size());
  std::vector<double> errors(ground_truth.size(), kUnmatchedVpError);
  if (used == 0) return errors;
  Eigen::MatrixXd cost(static_cast<Eigen::Index>(used), static_cast<Eigen::Index>(ground_truth.size()));
  for (std::size_t i = 0; i < used; ++i)
    for (std::size_t j = 0; j < ground_truth.size(); ++j)
      cost(i, j) = direction_angle_deg(to_camera * predicted[i], to_camera * ground_truth[j]);
  for (const auto& [r, c] : hungarian_assign(cost).pairs) errors[c] = cost(r, c);
  return errors;
}

std::vector<double> vp_angle_errors(const std::vector<ModelInstance>& models, const Scene& scene) {
  if (!scene.intrinsics) throw std::invalid_argument("vp_angle_errors: scene has no intrinsics");
  const Eigen::Matrix3d K_norm = normalization_transform(scene.width, scene.height) * *scene.intrinsics;
  const Eigen::Matrix3d to_camera = K_norm.inverse();
  auto vps = [](const std::vector<ModelInstance>& ms) {
    std::vector<Eigen::Vector3d> out;
    for (const auto& m : ms) {
      const auto* vp = std::get_if<VanishingPoint>(&m);
      if (!vp) throw std::invalid_argument("vp_angle_errors: non-VP model");
      out.push_back(vp->v);
    }
    return out;
  };
  const auto pred = vps(models), gt = vps(scene.gt_models);
  return vp_angle_errors(pred, gt, to_camera);
}

double auc_at(std::span<const double> errors, double theta_c) {
  if (!(theta_c > 0)) throw std::invalid_argument("auc_at: cutoff must be positive");
  if (errors.empty()) return 0.0;
  double area = 0;
  for (double e : errors)
    if (e <= theta_c) area += theta_c - e;
  return area / (theta_c * double(errors.size()));
}

double misclassification_error(std::span<const int> labels, std::span<const int> gt_labels) {
  if (labels.size() != gt_labels.size())
    throw std::invalid_argument("misclassification_error: label vectors differ in length");
  if (labels.empty()) return 0.0;
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) wrong += labels[i] != gt_labels[i];
  return double(wrong) / double(labels.size());
}

namespace {

std::optional<double> min_residual_metric(const Scene& scene, const std::vector<ModelInstance>& models,
                                          const ModelInstance& fallback) {
  if (!scene.has_labels()) throw std::invalid_argument("error metric: scene has no ground-truth labels");
  const std::size_t used = std::min(models.size(), scene.gt_models.size());
  std::vector<ModelInstance> considered(models.begin(), models.begin() + static_cast<long>(used));
  if (considered.empty()) considered.push_back(fallback);
  const double clip = 1.0;  // max(W, H) pixels in the normalized frame
  double sum = 0;
  int count = 0;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    if ((*scene.gt_labels)[i] <= 0) continue;
    double best = clip;
    for (const auto& h : considered) best = std::min(best, residual(scene.observations[i], h));
    sum += best;
    ++count;
  }
  if (count == 0) return std::nullopt;
  return sum / count;
}

}  // namespace

std::optional<double> sampson_error_metric(const Scene& scene, const std::vector<ModelInstance>& models) {
  if (scene.task != Task::Fundamental) throw std::invalid_argument("Sampson error requires a fundamental-matrix task");
  return min_residual_metric(scene, models, FundamentalMatrix{Eigen::Matrix3d::Identity()});
}

std::optional<double> transfer_error_metric(const Scene& scene, const std::vector<ModelInstance>& models) {
  if (scene.task != Task::Homography) throw std::invalid_argument("transfer error requires a homography task");
  return min_residual_metric(scene, models, *Homography::from_matrix(Eigen::Matrix3d::Identity()));
}

}  // namespace parsac

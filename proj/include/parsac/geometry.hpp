#ifndef PARSAC_GEOMETRY_HPP_
#define PARSAC_GEOMETRY_HPP_

#include <Eigen/Core>
#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

namespace parsac {

enum class Task { VanishingPoint, Fundamental, Homography };

std::string_view to_string(Task task);
Task task_from_string(std::string_view name);

/// Number of observations a minimal solver consumes (VP: 2, F: 7, H: 4).
int minimal_set_size(Task task);

/// Returned by residuals when a model cannot be evaluated at an observation.
inline constexpr double kResidualSentinel = 1e12;

/// A single datum. `features` is what the weight predictor sees; `points`
/// holds the raw geometry used by solvers and residuals. For line segments
/// `points` are the two endpoints and `features` is (mid x, mid y, length,
/// angle). For correspondences both hold (x1, y1, x2, y2).
struct Observation {
  Eigen::Vector4d features = Eigen::Vector4d::Zero();
  Eigen::Vector4d points = Eigen::Vector4d::Zero();

  static Observation segment(double x1, double y1, double x2, double y2);
  static Observation correspondence(double x1, double y1, double x2, double y2);

  Eigen::Vector3d first() const { return {points[0], points[1], 1.0}; }
  Eigen::Vector3d second() const { return {points[2], points[3], 1.0}; }

  bool finite() const { return features.allFinite() && points.allFinite(); }
};

struct VanishingPoint {
  Eigen::Vector3d v;
};

struct FundamentalMatrix {
  Eigen::Matrix3d F;
};

/// Keeps the inverse alongside the matrix; the symmetric transfer residual
/// needs both directions.
struct Homography {
  Eigen::Matrix3d H;
  Eigen::Matrix3d H_inv;

  /// nullopt when H is numerically singular.
  static std::optional<Homography> from_matrix(const Eigen::Matrix3d& H);
};

using ModelInstance = std::variant<VanishingPoint, FundamentalMatrix, Homography>;

/// A solver output slot; nullopt marks a degenerate hypothesis.
using Hypothesis = std::optional<ModelInstance>;

Task task_of(const ModelInstance& model);

/// Frobenius norm 1, largest-magnitude entry positive.
template <typename Derived>
typename Derived::PlainObject canonicalize(const Eigen::MatrixBase<Derived>& m) {
  typename Derived::PlainObject out = m / m.norm();
  Eigen::Index r = 0, c = 0;
  out.cwiseAbs().maxCoeff(&r, &c);
  if (out(r, c) < 0) out = -out;
  return out;
}

ModelInstance canonicalize(const ModelInstance& model);

/// Flattened parameters: 3 values for a VP, 9 row-major values otherwise.
std::vector<double> model_parameters(const ModelInstance& model);
ModelInstance model_from_parameters(Task task, std::span<const double> values);

// --------------------------------------------------------------------------
// Coordinate frame

/// Maps pixels to the centred frame x' = (x - W/2) / max(W, H).
Eigen::Vector2d normalize_coords(const Eigen::Vector2d& pixel, int width, int height);
Eigen::Vector2d denormalize_coords(const Eigen::Vector2d& normalized, int width, int height);

/// Homogeneous form of normalize_coords.
Eigen::Matrix3d normalization_transform(int width, int height);

// --------------------------------------------------------------------------
// Residuals

/// Homogeneous line through a segment's endpoints, scaled so (a, b) is unit.
Eigen::Vector3d segment_line(const Observation& segment);

/// 1 - |cos| of the angle between the segment and the line joining its
/// midpoint to the vanishing point.
double residual_vp(const Observation& segment, const VanishingPoint& vp);

template <typename Scalar>
Scalar sampson_sqrt(const Eigen::Matrix<Scalar, 3, 3>& F,
                    const Eigen::Matrix<Scalar, 3, 1>& pa,
                    const Eigen::Matrix<Scalar, 3, 1>& pb) {
  const Eigen::Matrix<Scalar, 3, 1> Fpa = F * pa;
  const Eigen::Matrix<Scalar, 3, 1> Ftpb = F.transpose() * pb;
  const Scalar numerator = pb.dot(Fpa);
  const Scalar denominator = Fpa[0] * Fpa[0] + Fpa[1] * Fpa[1] +
                             Ftpb[0] * Ftpb[0] + Ftpb[1] * Ftpb[1];
  if (!(denominator > Scalar(0))) return Scalar(kResidualSentinel);
  return std::sqrt(numerator * numerator / denominator);
}

template <typename Scalar>
Scalar transfer_sqrt(const Eigen::Matrix<Scalar, 3, 3>& H,
                     const Eigen::Matrix<Scalar, 3, 3>& H_inv,
                     const Eigen::Matrix<Scalar, 3, 1>& pa,
                     const Eigen::Matrix<Scalar, 3, 1>& pb) {
  const Eigen::Matrix<Scalar, 3, 1> forward = H * pa;
  const Eigen::Matrix<Scalar, 3, 1> backward = H_inv * pb;
  if (std::abs(forward[2]) < Scalar(1e-12) || std::abs(backward[2]) < Scalar(1e-12))
    return Scalar(kResidualSentinel);
  const Scalar d_b = (forward.template head<2>() / forward[2] - pb.template head<2>()).squaredNorm();
  const Scalar d_a = (backward.template head<2>() / backward[2] - pa.template head<2>()).squaredNorm();
  return std::sqrt(d_a + d_b);
}

double residual_sampson_sqrt(const Observation& x, const FundamentalMatrix& F);
double residual_transfer_sqrt(const Observation& x, const Homography& H);

/// Dispatches on the model kind.
double residual(const Observation& x, const ModelInstance& model);

/// Residuals of every observation to one model.
Eigen::VectorXd residuals(std::span<const Observation> observations, const ModelInstance& model);

// --------------------------------------------------------------------------
// Minimal solvers. An empty result is the degenerate-hypothesis marker.

std::optional<VanishingPoint> vp_from_lines(const Observation& a, const Observation& b);

/// Up to three rank-2 solutions, one per real root of the cubic.
std::vector<FundamentalMatrix> fmat_seven_point(std::span<const Observation> set);

std::optional<Homography> homography_four_point_dlt(std::span<const Observation> set);

/// Task-generic wrapper over the three solvers.
std::vector<ModelInstance> solve_minimal(Task task, std::span<const Observation> set);

/// Least-squares VP from lines weighted by `weights` (one per observation).
/// Returns `vp` unchanged when the weighted system has rank below 2.
VanishingPoint refine_vp_weighted(const VanishingPoint& vp,
                                  std::span<const Observation> segments,
                                  std::span<const double> weights);

/// Angle in radians between two vanishing directions, folded into [0, pi/2].
double vp_direction_angle(const Eigen::Vector3d& a, const Eigen::Vector3d& b);

// --------------------------------------------------------------------------
// Ground truth construction

Eigen::Matrix3d skew(const Eigen::Vector3d& t);

/// F = K^-T [t]x R K^-1 for a second camera x2 ~ K (R X + t).
FundamentalMatrix gt_fmat_from_pose(const Eigen::Matrix3d& K, const Eigen::Matrix3d& R,
                                    const Eigen::Vector3d& t);

/// H = K (R - t n^T / d) K^-1 for the plane n^T X + d = 0 seen by a second
/// camera x2 ~ K (R X + t).
Homography gt_homography_from_plane(const Eigen::Matrix3d& K, const Eigen::Matrix3d& R,
                                    const Eigen::Vector3d& t, const Eigen::Vector3d& n,
                                    double d);

}  // namespace parsac

#endif  // PARSAC_GEOMETRY_HPP_

#include "parsac/geometry.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <numbers>
#include <stdexcept>
#include <string>

namespace parsac {

std::string_view to_string(Task task) {
  switch (task) {
    case Task::VanishingPoint: return "vp";
    case Task::Fundamental: return "fundamental";
    case Task::Homography: return "homography";
  }
  return "unknown";
}

Task task_from_string(std::string_view name) {
  if (name == "vp" || name == "vanishing_point") return Task::VanishingPoint;
  if (name == "fundamental" || name == "f") return Task::Fundamental;
  if (name == "homography" || name == "h") return Task::Homography;
  throw std::invalid_argument("unknown task '" + std::string(name) + "'");
}

int minimal_set_size(Task task) {
  switch (task) {
    case Task::VanishingPoint: return 2;
    case Task::Fundamental: return 7;
    case Task::Homography: return 4;
  }
  return 0;
}

Observation Observation::segment(double x1, double y1, double x2, double y2) {
  Observation o;
  o.points << x1, y1, x2, y2;
  const double dx = x2 - x1, dy = y2 - y1;
  double angle = std::atan2(dy, dx);
  if (angle < 0) angle += std::numbers::pi;
  if (angle >= std::numbers::pi) angle -= std::numbers::pi;
  o.features << 0.5 * (x1 + x2), 0.5 * (y1 + y2), std::hypot(dx, dy), angle;
  return o;
}

Observation Observation::correspondence(double x1, double y1, double x2, double y2) {
  Observation o;
  o.points << x1, y1, x2, y2;
  o.features = o.points;
  return o;
}

std::optional<Homography> Homography::from_matrix(const Eigen::Matrix3d& H) {
  const double norm = H.norm();
  if (!(norm > 0) || !H.allFinite()) return std::nullopt;
  const Eigen::Matrix3d scaled = H / norm;
  if (std::abs(scaled.determinant()) < 1e-12) return std::nullopt;
  return Homography{H, H.inverse()};
}

Task task_of(const ModelInstance& model) {
  switch (model.index()) {
    case 0: return Task::VanishingPoint;
    case 1: return Task::Fundamental;
    default: return Task::Homography;
  }
}

ModelInstance canonicalize(const ModelInstance& model) {
  if (const auto* vp = std::get_if<VanishingPoint>(&model)) return VanishingPoint{canonicalize(vp->v)};
  if (const auto* f = std::get_if<FundamentalMatrix>(&model)) return FundamentalMatrix{canonicalize(f->F)};
  const auto& h = std::get<Homography>(model);
  const Eigen::Matrix3d H = canonicalize(h.H);
  return Homography{H, H.inverse()};
}

std::vector<double> model_parameters(const ModelInstance& model) {
  if (const auto* vp = std::get_if<VanishingPoint>(&model)) return {vp->v[0], vp->v[1], vp->v[2]};
  const Eigen::Matrix3d& m = std::holds_alternative<FundamentalMatrix>(model)
                                 ? std::get<FundamentalMatrix>(model).F
                                 : std::get<Homography>(model).H;
  std::vector<double> out(9);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out[3 * r + c] = m(r, c);
  return out;
}

ModelInstance model_from_parameters(Task task, std::span<const double> values) {
  if (task == Task::VanishingPoint) {
    if (values.size() != 3) throw std::invalid_argument("vanishing point needs 3 parameters");
    return VanishingPoint{Eigen::Vector3d(values[0], values[1], values[2])};
  }
  if (values.size() != 9) throw std::invalid_argument("matrix model needs 9 parameters");
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = values[3 * r + c];
  if (task == Task::Fundamental) return FundamentalMatrix{m};
  auto h = Homography::from_matrix(m);
  if (!h) throw std::invalid_argument("singular homography");
  return *h;
}

Eigen::Vector2d normalize_coords(const Eigen::Vector2d& pixel, int width, int height) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("image size must be positive");
  if (!pixel.allFinite()) throw std::invalid_argument("non-finite pixel coordinate");
  const double scale = std::max(width, height);
  return {(pixel.x() - 0.5 * width) / scale, (pixel.y() - 0.5 * height) / scale};
}

Eigen::Vector2d denormalize_coords(const Eigen::Vector2d& normalized, int width, int height) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("image size must be positive");
  const double scale = std::max(width, height);
  return {normalized.x() * scale + 0.5 * width, normalized.y() * scale + 0.5 * height};
}

Eigen::Matrix3d normalization_transform(int width, int height) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("image size must be positive");
  const double s = std::max(width, height);
  Eigen::Matrix3d T;
  T << 1 / s, 0, -0.5 * width / s,
       0, 1 / s, -0.5 * height / s,
       0, 0, 1;
  return T;
}

Eigen::Vector3d segment_line(const Observation& segment) {
  Eigen::Vector3d l = segment.first().cross(segment.second());
  const double n = l.head<2>().norm();
  if (n > 0) l /= n;
  return l;
}

double residual_vp(const Observation& segment, const VanishingPoint& vp) {
  const Eigen::Vector2d direction = segment.points.tail<2>() - segment.points.head<2>();
  const double length = direction.norm();
  if (!(length > 0)) return 1.0;
  const double vnorm = vp.v.norm();
  if (!(vnorm > 0)) return 1.0;
  const Eigen::Vector3d v = vp.v / vnorm;
  const Eigen::Vector3d mid(0.5 * (segment.points[0] + segment.points[2]),
                            0.5 * (segment.points[1] + segment.points[3]), 1.0);
  const Eigen::Vector3d constrained = mid.cross(v);
  const double cn = constrained.head<2>().norm();
  if (cn < 1e-12) return 0.0;
  // The constrained line's direction is perpendicular to its normal.
  const double c = std::abs(direction.x() * -constrained.y() + direction.y() * constrained.x()) /
                   (length * cn);
  return 1.0 - std::min(c, 1.0);
}

double residual_sampson_sqrt(const Observation& x, const FundamentalMatrix& F) {
  return sampson_sqrt<double>(F.F, x.first(), x.second());
}

double residual_transfer_sqrt(const Observation& x, const Homography& H) {
  return transfer_sqrt<double>(H.H, H.H_inv, x.first(), x.second());
}

double residual(const Observation& x, const ModelInstance& model) {
  switch (model.index()) {
    case 0: return residual_vp(x, std::get<VanishingPoint>(model));
    case 1: return residual_sampson_sqrt(x, std::get<FundamentalMatrix>(model));
    default: return residual_transfer_sqrt(x, std::get<Homography>(model));
  }
}

Eigen::VectorXd residuals(std::span<const Observation> observations, const ModelInstance& model) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(observations.size()));
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        for (std::size_t i = 0; i < observations.size(); ++i) {
          if constexpr (std::is_same_v<M, VanishingPoint>)
            out[i] = residual_vp(observations[i], m);
          else if constexpr (std::is_same_v<M, FundamentalMatrix>)
            out[i] = residual_sampson_sqrt(observations[i], m);
          else
            out[i] = residual_transfer_sqrt(observations[i], m);
        }
      },
      model);
  return out;
}

// --------------------------------------------------------------------------

namespace {

/// Isotropic conditioning: centroid to origin, mean distance sqrt(2).
template <std::size_t N>
Eigen::Matrix3d conditioning_transform(const std::array<Eigen::Vector2d, N>& pts) {
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= double(N);
  double mean_dist = 0;
  for (const auto& p : pts) mean_dist += (p - centroid).norm();
  mean_dist /= double(N);
  const double s = mean_dist > 0 ? std::numbers::sqrt2 / mean_dist : 1.0;
  Eigen::Matrix3d T;
  T << s, 0, -s * centroid.x(),
       0, s, -s * centroid.y(),
       0, 0, 1;
  return T;
}

bool has_duplicate_points(std::span<const Observation> set) {
  for (std::size_t i = 0; i < set.size(); ++i)
    for (std::size_t j = i + 1; j < set.size(); ++j)
      if (set[i].points == set[j].points) return true;
  return false;
}

/// Real roots of c3 x^3 + c2 x^2 + c1 x + c0.
std::vector<double> real_cubic_roots(double c3, double c2, double c1, double c0) {
  const double scale = std::max({std::abs(c3), std::abs(c2), std::abs(c1), std::abs(c0)});
  std::vector<double> roots;
  if (!(scale > 0)) return roots;
  c3 /= scale; c2 /= scale; c1 /= scale; c0 /= scale;

  if (std::abs(c3) < 1e-10) {
    if (std::abs(c2) < 1e-10) {
      if (std::abs(c1) > 1e-14) roots.push_back(-c0 / c1);
      return roots;
    }
    const double disc = c1 * c1 - 4 * c2 * c0;
    if (disc < 0) return roots;
    const double q = -0.5 * (c1 + std::copysign(std::sqrt(disc), c1));
    roots.push_back(q / c2);
    if (q != 0) roots.push_back(c0 / q);
    return roots;
  }

  const double a = c2 / c3, b = c1 / c3, c = c0 / c3;
  const double Q = (a * a - 3 * b) / 9;
  const double R = (2 * a * a * a - 9 * a * b + 27 * c) / 54;
  const double Q3 = Q * Q * Q;
  if (R * R < Q3) {
    const double theta = std::acos(std::clamp(R / std::sqrt(Q3), -1.0, 1.0));
    const double m = -2 * std::sqrt(Q);
    roots.push_back(m * std::cos(theta / 3) - a / 3);
    roots.push_back(m * std::cos((theta + 2 * std::numbers::pi) / 3) - a / 3);
    roots.push_back(m * std::cos((theta - 2 * std::numbers::pi) / 3) - a / 3);
  } else {
    const double A = -std::copysign(std::cbrt(std::abs(R) + std::sqrt(R * R - Q3)), R);
    const double B = A != 0 ? Q / A : 0;
    roots.push_back(A + B - a / 3);
  }
  // Newton polish against the original polynomial.
  for (double& x : roots) {
    for (int it = 0; it < 3; ++it) {
      const double f = ((c3 * x + c2) * x + c1) * x + c0;
      const double df = (3 * c3 * x + 2 * c2) * x + c1;
      if (df == 0) break;
      x -= f / df;
    }
  }
  return roots;
}

Eigen::Matrix3d enforce_rank_two(const Eigen::Matrix3d& F) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(F, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d s = svd.singularValues();
  s[2] = 0;
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

}  // namespace

std::optional<VanishingPoint> vp_from_lines(const Observation& a, const Observation& b) {
  if (!(a.features[2] > 0) || !(b.features[2] > 0)) return std::nullopt;
  const Eigen::Vector3d v = segment_line(a).cross(segment_line(b));
  if (v.norm() < 1e-12) return std::nullopt;
  return VanishingPoint{canonicalize(v)};
}

std::vector<FundamentalMatrix> fmat_seven_point(std::span<const Observation> set) {
  if (set.size() != 7) throw std::invalid_argument("seven-point solver needs exactly 7 correspondences");
  if (has_duplicate_points(set)) return {};

  std::array<Eigen::Vector2d, 7> a, b;
  for (int i = 0; i < 7; ++i) {
    a[i] = set[i].points.head<2>();
    b[i] = set[i].points.tail<2>();
  }
  const Eigen::Matrix3d Ta = conditioning_transform(a);
  const Eigen::Matrix3d Tb = conditioning_transform(b);

  Eigen::Matrix<double, 7, 9> A;
  for (int i = 0; i < 7; ++i) {
    const Eigen::Vector3d pa = Ta * a[i].homogeneous();
    const Eigen::Vector3d pb = Tb * b[i].homogeneous();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) A(i, 3 * r + c) = pb[r] * pa[c];
  }
  Eigen::JacobiSVD<Eigen::Matrix<double, 7, 9>> svd(A, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (!(sv[0] > 0) || sv[6] < 1e-10 * sv[0]) return {};

  const Eigen::Matrix<double, 9, 1> f1 = svd.matrixV().col(7);
  const Eigen::Matrix<double, 9, 1> f2 = svd.matrixV().col(8);
  const Eigen::Matrix3d F1 = Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(f1.data());
  const Eigen::Matrix3d F2 = Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(f2.data());

  // det(x F1 + (1 - x) F2) is a cubic in x; recover it by interpolation.
  auto det_at = [&](double x) { return (x * F1 + (1 - x) * F2).determinant(); };
  const double d0 = det_at(0), d1 = det_at(1), dm1 = det_at(-1), d2 = det_at(2);
  const double c0 = d0;
  const double c2 = 0.5 * (d1 + dm1) - c0;
  const double c3 = (d2 - 4 * c2 - c0 - (d1 - dm1)) / 6;
  const double c1 = 0.5 * (d1 - dm1) - c3;

  std::vector<FundamentalMatrix> out;
  for (double x : real_cubic_roots(c3, c2, c1, c0)) {
    if (!std::isfinite(x)) continue;
    const Eigen::Matrix3d Fn = enforce_rank_two(x * F1 + (1 - x) * F2);
    const Eigen::Matrix3d F = Tb.transpose() * Fn * Ta;
    if (!F.allFinite() || !(F.norm() > 0)) continue;
    out.push_back(FundamentalMatrix{canonicalize(F)});
  }
  return out;
}

std::optional<Homography> homography_four_point_dlt(std::span<const Observation> set) {
  if (set.size() != 4) throw std::invalid_argument("four-point DLT needs exactly 4 correspondences");

  std::array<Eigen::Vector2d, 4> a, b;
  for (int i = 0; i < 4; ++i) {
    a[i] = set[i].points.head<2>();
    b[i] = set[i].points.tail<2>();
  }
  auto collinear_triple = [](const std::array<Eigen::Vector2d, 4>& p) {
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j)
        for (int k = j + 1; k < 4; ++k) {
          const Eigen::Vector2d u = p[j] - p[i], v = p[k] - p[i];
          const double cross = std::abs(u.x() * v.y() - u.y() * v.x());
          if (cross <= 1e-9 * u.norm() * v.norm()) return true;
        }
    return false;
  };
  if (collinear_triple(a) || collinear_triple(b)) return std::nullopt;

  const Eigen::Matrix3d Ta = conditioning_transform(a);
  const Eigen::Matrix3d Tb = conditioning_transform(b);
  Eigen::Matrix<double, 8, 9> A;
  for (int i = 0; i < 4; ++i) {
    const Eigen::Vector3d p = Ta * a[i].homogeneous();
    const Eigen::Vector3d q = Tb * b[i].homogeneous();
    const double x = p.x(), y = p.y(), u = q.x(), v = q.y();
    A.row(2 * i) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
    A.row(2 * i + 1) << x, y, 1, 0, 0, 0, -u * x, -u * y, -u;
  }
  Eigen::JacobiSVD<Eigen::Matrix<double, 8, 9>> svd(A, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (!(sv[0] > 0) || sv[7] < 1e-10 * sv[0]) return std::nullopt;
  const Eigen::Matrix<double, 9, 1> h = svd.matrixV().col(8);
  const Eigen::Matrix3d Hn = Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(h.data());
  const Eigen::Matrix3d H = Tb.inverse() * Hn * Ta;
  if (!H.allFinite()) return std::nullopt;
  return Homography::from_matrix(canonicalize(H));
}

std::vector<ModelInstance> solve_minimal(Task task, std::span<const Observation> set) {
  std::vector<ModelInstance> out;
  switch (task) {
    case Task::VanishingPoint:
      if (set.size() != 2) throw std::invalid_argument("VP solver needs exactly 2 segments");
      if (auto vp = vp_from_lines(set[0], set[1])) out.emplace_back(*vp);
      break;
    case Task::Fundamental:
      for (auto& f : fmat_seven_point(set)) out.emplace_back(f);
      break;
    case Task::Homography:
      if (auto h = homography_four_point_dlt(set)) out.emplace_back(*h);
      break;
  }
  return out;
}

VanishingPoint refine_vp_weighted(const VanishingPoint& vp, std::span<const Observation> segments,
                                  std::span<const double> weights) {
  if (segments.size() != weights.size())
    throw std::invalid_argument("refine_vp_weighted: one weight per segment required");
  Eigen::Matrix3d normal = Eigen::Matrix3d::Zero();
  int active = 0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (!(weights[i] > 0)) continue;
    const Eigen::Vector3d row = segment_line(segments[i]) * weights[i];
    normal.noalias() += row * row.transpose();
    ++active;
  }
  if (active < 2) return vp;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(normal);
  const Eigen::Vector3d lambda = eig.eigenvalues();
  if (!(lambda[2] > 0) || lambda[1] <= 1e-14 * lambda[2]) return vp;
  Eigen::Vector3d v = eig.eigenvectors().col(0);
  return VanishingPoint{canonicalize(v)};
}

double vp_direction_angle(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double na = a.norm(), nb = b.norm();
  if (!(na > 0) || !(nb > 0)) return 0.5 * std::numbers::pi;
  return std::atan2(a.cross(b).norm(), std::abs(a.dot(b)));
}

Eigen::Matrix3d skew(const Eigen::Vector3d& t) {
  Eigen::Matrix3d m;
  m << 0, -t.z(), t.y(),
       t.z(), 0, -t.x(),
       -t.y(), t.x(), 0;
  return m;
}

FundamentalMatrix gt_fmat_from_pose(const Eigen::Matrix3d& K, const Eigen::Matrix3d& R,
                                    const Eigen::Vector3d& t) {
  if (!(t.norm() > 0)) throw std::invalid_argument("fundamental matrix undefined for zero translation");
  const Eigen::Matrix3d K_inv = K.inverse();
  return FundamentalMatrix{canonicalize(Eigen::Matrix3d(K_inv.transpose() * skew(t) * R * K_inv))};
}

Homography gt_homography_from_plane(const Eigen::Matrix3d& K, const Eigen::Matrix3d& R,
                                    const Eigen::Vector3d& t, const Eigen::Vector3d& n, double d) {
  if (d == 0) throw std::invalid_argument("plane offset must be nonzero");
  const Eigen::Matrix3d H = K * (R - t * n.transpose() / d) * K.inverse();
  auto h = Homography::from_matrix(canonicalize(H));
  if (!h) throw std::invalid_argument("plane induces a singular homography");
  return *h;
}

}  // namespace parsac

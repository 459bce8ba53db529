// Shared helpers for the test binaries. Everything here is built from first
// principles so tests do not lean on the library code they check.
#ifndef PARSAC_TESTS_SUPPORT_HPP_
#define PARSAC_TESTS_SUPPORT_HPP_

#include "parsac/geometry.hpp"
#include "parsac/rng.hpp"
#include "parsac/scene.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace testing_support {

using parsac::Observation;
using parsac::Rng;

/// Pixel to centred frame for a 1024 x 1024 image.
inline Eigen::Vector2d to_frame(const Eigen::Vector2d& px) { return (px - Eigen::Vector2d(512, 512)) / 1024.0; }

inline Eigen::Matrix3d frame_matrix() {
  Eigen::Matrix3d T;
  T << 1.0 / 1024, 0, -0.5, 0, 1.0 / 1024, -0.5, 0, 0, 1;
  return T;
}

inline Eigen::Matrix3d random_rotation(Rng& rng) {
  std::normal_distribution<double> n;
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized().toRotationMatrix();
}

inline Eigen::Matrix3d camera_matrix(double f) {
  Eigen::Matrix3d K;
  K << f, 0, 512, 0, f, 512, 0, 0, 1;
  return K;
}

/// Camera pair with the first camera at the origin and the second at x2 ~ K (R X + t).
struct CameraPair {
  Eigen::Matrix3d K;
  Eigen::Matrix3d R;
  Eigen::Vector3d t;
};

inline CameraPair random_cameras(Rng& rng) {
  CameraPair c;
  c.K = camera_matrix(parsac::uniform(rng, 600, 1200));
  const Eigen::Vector3d axis = Eigen::Vector3d::NullaryExpr([&] { return parsac::normal(rng); }).normalized();
  c.R = Eigen::AngleAxisd(parsac::uniform(rng, 0.05, 0.3), axis).toRotationMatrix();
  c.t = Eigen::Vector3d::NullaryExpr([&] { return parsac::normal(rng); }).normalized();
  return c;
}

/// Projects X into both views and returns a correspondence in the centred frame.
inline Observation project_pair(const CameraPair& c, const Eigen::Vector3d& X) {
  const Eigen::Vector3d a = c.K * X;
  const Eigen::Vector3d b = c.K * (c.R * X + c.t);
  const Eigen::Vector2d pa = to_frame(a.hnormalized());
  const Eigen::Vector2d pb = to_frame(b.hnormalized());
  return Observation::correspondence(pa.x(), pa.y(), pb.x(), pb.y());
}

inline Eigen::Vector3d random_point_in_front(Rng& rng) {
  return {parsac::uniform(rng, -1.5, 1.5), parsac::uniform(rng, -1.5, 1.5), parsac::uniform(rng, 4, 8)};
}

/// Segment of the given half length through `mid` pointing at the
/// homogeneous point v (centred frame).
inline Observation segment_towards(const Eigen::Vector3d& v, const Eigen::Vector2d& mid, double half) {
  Eigen::Vector2d d = v.head<2>() - v.z() * mid;
  d.normalize();
  return Observation::segment(mid.x() - half * d.x(), mid.y() - half * d.y(), mid.x() + half * d.x(),
                              mid.y() + half * d.y());
}

/// Minimum assignment cost over all injections of the smaller side.
inline double brute_force_assignment(const Eigen::MatrixXd& cost) {
  const bool transpose = cost.rows() > cost.cols();
  const Eigen::MatrixXd c = transpose ? Eigen::MatrixXd(cost.transpose()) : cost;
  const int rows = static_cast<int>(c.rows()), cols = static_cast<int>(c.cols());
  if (rows == 0) return 0;
  std::vector<int> perm(cols);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0;
    for (int r = 0; r < rows; ++r) s += c(r, perm[r]);
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Fresh scratch directory under the system temp path.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("parsac_test_" + tag + "_" + std::to_string(std::random_device{}()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

struct CommandResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr combined
};

inline CommandResult run_command(const std::string& command) {
  CommandResult r;
  FILE* pipe = popen((command + " 2>&1").c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buffer{};
  std::size_t n = 0;
  while ((n = fread(buffer.data(), 1, buffer.size(), pipe)) > 0) r.output.append(buffer.data(), n);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  std::string s;
  if (!f) return s;
  std::array<char, 4096> buffer{};
  std::size_t n = 0;
  while ((n = std::fread(buffer.data(), 1, buffer.size(), f)) > 0) s.append(buffer.data(), n);
  std::fclose(f);
  return s;
}

}  // namespace testing_support

#endif  // PARSAC_TESTS_SUPPORT_HPP_

#include "parsac/datagen.hpp"
#include "parsac/metrics.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace parsac;
using namespace testing_support;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

Scene noise_free_scene(Task task, std::uint64_t seed, double rate = 0.0) {
  GenConfig cfg = default_gen_config(task);
  cfg.outlier_rate = rate;
  return generate_scene(cfg, seed);
}

/// Mean over ground-truth inliers of the clipped residual to the best of
/// the given models.
double reference_error(const Scene& s, const std::vector<ModelInstance>& models) {
  double sum = 0;
  int n = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if ((*s.gt_labels)[i] == 0) continue;
    double best = 1e300;
    for (const auto& m : models) best = std::min(best, residual(s.observations[i], m));
    sum += std::min(best, 1.0);
    ++n;
  }
  return sum / n;
}

}  // namespace

TEST(Hungarian, SmallExample) {
  Eigen::MatrixXd c(2, 2);
  c << 1, 2, 3, 0;
  const Assignment a = hungarian_assign(c);
  EXPECT_EQ(a.cost, 1.0);
  ASSERT_EQ(a.pairs.size(), 2u);
  EXPECT_EQ(a.pairs[0], std::make_pair(0, 0));
  EXPECT_EQ(a.pairs[1], std::make_pair(1, 1));
}

TEST(Hungarian, DiagonalZero) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Constant(4, 4, 5.0);
  c.diagonal().setZero();
  const Assignment a = hungarian_assign(c);
  EXPECT_EQ(a.cost, 0.0);
  for (const auto& [r, col] : a.pairs) EXPECT_EQ(r, col);
}

TEST(Hungarian, EmptyMatrix) {
  const Assignment a = hungarian_assign(Eigen::MatrixXd(0, 0));
  EXPECT_TRUE(a.pairs.empty());
  EXPECT_EQ(a.cost, 0.0);
}

TEST(Hungarian, AgreesWithBruteForce) {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const int r = uniform_int(rng, 1, 7), c = uniform_int(rng, 1, 7);
    Eigen::MatrixXd m = Eigen::MatrixXd::NullaryExpr(r, c, [&] { return double(uniform_int(rng, 0, 20)); });
    if (trial % 2) m = Eigen::MatrixXd::NullaryExpr(r, c, [&] { return uniform(rng, 0, 10); });
    const Assignment a = hungarian_assign(m);
    ASSERT_EQ(static_cast<int>(a.pairs.size()), std::min(r, c));
    double recomputed = 0;
    std::vector<bool> used_r(r, false), used_c(c, false);
    for (const auto& [i, j] : a.pairs) {
      ASSERT_FALSE(used_r[i] || used_c[j]);
      used_r[i] = used_c[j] = true;
      recomputed += m(i, j);
    }
    EXPECT_NEAR(recomputed, a.cost, 1e-9);
    EXPECT_NEAR(a.cost, brute_force_assignment(m), 1e-9);
  }
}

TEST(VpAngleErrors, ExactAndAntipodal) {
  const std::vector<Eigen::Vector3d> gt = {{1, 0, 0}, {0, 1, 0}};
  EXPECT_EQ(vp_angle_errors(gt, gt, Eigen::Matrix3d::Identity()), (std::vector<double>{0, 0}));
  const std::vector<Eigen::Vector3d> flipped = {{0, -1, 0}, {-2, 0, 0}};
  for (double e : vp_angle_errors(flipped, gt, Eigen::Matrix3d::Identity())) EXPECT_NEAR(e, 0, 1e-12);
}

TEST(VpAngleErrors, UnmatchedGetsNinety) {
  const std::vector<Eigen::Vector3d> gt = {{1, 0, 0}, {0, 1, 0}};
  const std::vector<Eigen::Vector3d> pred = {Eigen::Vector3d(std::cos(5 * kDeg), 0, std::sin(5 * kDeg))};
  const auto e = vp_angle_errors(pred, gt, Eigen::Matrix3d::Identity());
  ASSERT_EQ(e.size(), 2u);
  EXPECT_NEAR(e[0], 5.0, 1e-9);
  EXPECT_EQ(e[1], kUnmatchedVpError);
}

TEST(VpAngleErrors, OnlyTopRankedPredictionsEnter) {
  const std::vector<Eigen::Vector3d> gt = {{1, 0, 0}};
  // The perfect match is ranked second and must be ignored.
  const std::vector<Eigen::Vector3d> pred = {{0, 1, 0}, {1, 0, 0}};
  EXPECT_NEAR(vp_angle_errors(pred, gt, Eigen::Matrix3d::Identity())[0], 90.0, 1e-9);
}

TEST(VpAngleErrors, ZeroDirectionCostsNinety) {
  const std::vector<Eigen::Vector3d> gt = {{1, 0, 0}};
  const std::vector<Eigen::Vector3d> pred = {Eigen::Vector3d::Zero()};
  EXPECT_EQ(vp_angle_errors(pred, gt, Eigen::Matrix3d::Identity())[0], 90.0);
  EXPECT_EQ(direction_angle_deg(Eigen::Vector3d::Zero(), {1, 0, 0}), 90.0);
}

TEST(VpAngleErrors, InvariantToSignAndScale) {
  Rng rng(3);
  const Eigen::Matrix3d T = (frame_matrix() * camera_matrix(700)).inverse();
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Eigen::Vector3d> gt, pred, scaled;
    for (int k = 0; k < 3; ++k) {
      gt.push_back(Eigen::Vector3d::NullaryExpr([&] { return normal(rng); }));
      pred.push_back(Eigen::Vector3d::NullaryExpr([&] { return normal(rng); }));
      scaled.push_back(pred.back() * (k % 2 ? -3.5 : 0.01));
    }
    const auto a = vp_angle_errors(pred, gt, T), b = vp_angle_errors(scaled, gt, T);
    for (std::size_t k = 0; k < a.size(); ++k) {
      EXPECT_NEAR(a[k], b[k], 1e-9);
      EXPECT_GE(a[k], 0.0);
      EXPECT_LE(a[k], 90.0);
    }
  }
}

TEST(VpAngleErrors, SceneOverloadUsesIntrinsics) {
  GenConfig cfg = default_gen_config(Task::VanishingPoint);
  const Scene s = generate_scene(cfg, 4);
  for (double e : vp_angle_errors(s.gt_models, s)) EXPECT_NEAR(e, 0.0, 1e-9);
}

TEST(Auc, Examples) {
  EXPECT_DOUBLE_EQ(auc_at(std::vector<double>{0, 0, 0}, 5), 1.0);
  EXPECT_NEAR(auc_at(std::vector<double>{0, 0, 90}, 90), 2.0 / 3, 1e-15);
  EXPECT_DOUBLE_EQ(auc_at(std::vector<double>{2.5}, 5), 0.5);
  EXPECT_EQ(auc_at(std::vector<double>{}, 5), 0.0);
}

TEST(Auc, MonotonicityProperties) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> e(uniform_int(rng, 1, 30));
    for (auto& x : e) x = uniform(rng, 0, 20);
    double prev = 0;
    for (double c = 0.5; c <= 25; c += 0.5) {
      const double a = auc_at(e, c);
      EXPECT_GE(a, prev - 1e-15);
      prev = a;
    }
    auto with_zero = e;
    with_zero.push_back(0);
    EXPECT_GE(auc_at(with_zero, 5), auc_at(e, 5));
    auto with_far = e;
    with_far.push_back(5);
    EXPECT_LE(auc_at(with_far, 5), auc_at(e, 5));
  }
}

TEST(Misclassification, Examples) {
  EXPECT_EQ(misclassification_error(std::vector<int>{0, 1}, std::vector<int>{0, 1}), 0.0);
  EXPECT_EQ(misclassification_error(std::vector<int>{1, 2}, std::vector<int>{2, 1}), 1.0);
  EXPECT_EQ(misclassification_error(std::vector<int>{1, 1, 2, 0}, std::vector<int>{1, 2, 2, 0}), 0.25);
}

TEST(SampsonMetric, GroundTruthGivesZero) {
  const Scene s = noise_free_scene(Task::Fundamental, 1);
  const auto e = sampson_error_metric(s, s.gt_models);
  ASSERT_TRUE(e);
  EXPECT_NEAR(*e, 0.0, 1e-9);
}

TEST(SampsonMetric, EmptyPredictionUsesIdentity) {
  const Scene s = noise_free_scene(Task::Fundamental, 2, 0.2);
  const auto e = sampson_error_metric(s, {});
  ASSERT_TRUE(e);
  EXPECT_NEAR(*e, reference_error(s, {FundamentalMatrix{Eigen::Matrix3d::Identity()}}), 1e-12);
}

TEST(SampsonMetric, TruncatesToGroundTruthCountAndIsScaleInvariant) {
  const Scene s = noise_free_scene(Task::Fundamental, 3);
  std::vector<ModelInstance> pred;
  for (const auto& m : s.gt_models) pred.push_back(FundamentalMatrix{-4.0 * std::get<FundamentalMatrix>(m).F});
  EXPECT_NEAR(*sampson_error_metric(s, pred), 0.0, 1e-9);
  // A junk model in front pushes a real one out of the considered range.
  std::vector<ModelInstance> shifted = {FundamentalMatrix{Eigen::Matrix3d::Identity()}};
  shifted.insert(shifted.end(), s.gt_models.begin(), s.gt_models.end());
  std::vector<ModelInstance> considered(shifted.begin(), shifted.begin() + s.gt_models.size());
  EXPECT_NEAR(*sampson_error_metric(s, shifted), reference_error(s, considered), 1e-12);
}

TEST(SampsonMetric, NoInliersIsAbsent) {
  Scene s = noise_free_scene(Task::Fundamental, 4);
  std::fill(s.gt_labels->begin(), s.gt_labels->end(), 0);
  EXPECT_FALSE(sampson_error_metric(s, s.gt_models));
}

TEST(TransferMetric, GroundTruthGivesZero) {
  const Scene s = noise_free_scene(Task::Homography, 5);
  EXPECT_NEAR(*transfer_error_metric(s, s.gt_models), 0.0, 1e-9);
}

TEST(TransferMetric, TranslationUnderIdentity) {
  Scene s;
  s.task = Task::Homography;
  Rng rng(6);
  for (int i = 0; i < 30; ++i) {
    const Eigen::Vector2d p(uniform(rng, -0.4, 0.4), uniform(rng, -0.4, 0.4));
    s.observations.push_back(Observation::correspondence(p.x(), p.y(), p.x() + 3.0 / 1024, p.y() + 4.0 / 1024));
  }
  s.gt_labels = std::vector<int>(30, 1);
  Eigen::Matrix3d T = Eigen::Matrix3d::Identity();
  T(0, 2) = 3.0 / 1024;
  T(1, 2) = 4.0 / 1024;
  s.gt_models = {*Homography::from_matrix(T)};
  const auto e = transfer_error_metric(s, {*Homography::from_matrix(Eigen::Matrix3d::Identity())});
  EXPECT_NEAR(*e * 1024, std::sqrt(50.0), 1e-9);
}

TEST(TransferMetric, ClippedAtOne) {
  Scene s;
  s.task = Task::Homography;
  for (int i = 0; i < 5; ++i) s.observations.push_back(Observation::correspondence(0.01 * i, 0, 5.0, 5.0));
  s.gt_labels = std::vector<int>(5, 1);
  s.gt_models = {*Homography::from_matrix(Eigen::Matrix3d::Identity())};
  EXPECT_EQ(*transfer_error_metric(s, {*Homography::from_matrix(Eigen::Matrix3d::Identity())}), 1.0);
}

TEST(TransferMetric, ScaleInvariant) {
  const Scene s = noise_free_scene(Task::Homography, 7);
  Rng rng(8);
  const Eigen::Matrix3d A = Eigen::Matrix3d::Identity() + 0.05 * Eigen::Matrix3d::NullaryExpr([&] { return normal(rng); });
  const double a = *transfer_error_metric(s, {*Homography::from_matrix(A)});
  const double b = *transfer_error_metric(s, {*Homography::from_matrix(-6.0 * A)});
  EXPECT_NEAR(a, b, 1e-12);
}

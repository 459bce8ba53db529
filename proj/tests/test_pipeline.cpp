#include "parsac/datagen.hpp"
#include "parsac/metrics.hpp"
#include "parsac/pipeline.hpp"
#include "parsac/weights.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace parsac;
using namespace testing_support;

namespace {

InlierSet make_set(std::size_t n, std::initializer_list<int> members) {
  InlierSet s(n);
  for (int i : members) s.set(static_cast<std::size_t>(i));
  return s;
}

InlierSet range_set(std::size_t n, int begin, int end) {
  InlierSet s(n);
  for (int i = begin; i < end; ++i) s.set(static_cast<std::size_t>(i));
  return s;
}

/// Straightforward greedy ranking over std::set, used as the reference.
std::vector<int> reference_ranking(const std::vector<std::set<int>>& sets, int C) {
  std::set<int> covered;
  std::vector<bool> used(sets.size(), false);
  std::vector<int> order;
  for (;;) {
    int best = -1, best_score = 0;
    for (std::size_t k = 0; k < sets.size(); ++k) {
      if (used[k]) continue;
      int unique = 0, overlap = 0;
      for (int i : sets[k]) (covered.count(i) ? overlap : unique)++;
      if (best < 0 || unique - overlap > best_score) {
        best = static_cast<int>(k);
        best_score = unique - overlap;
      }
    }
    if (best < 0 || best_score < C) break;
    used[best] = true;
    order.push_back(best);
    covered.insert(sets[best].begin(), sets[best].end());
  }
  return order;
}

Scene planted_homography_scene(std::uint64_t seed, int models, double rate) {
  GenConfig cfg = default_gen_config(Task::Homography);
  cfg.models_min = cfg.models_max = models;
  cfg.outlier_rate = rate;
  return generate_scene(cfg, seed);
}

}  // namespace

TEST(InlierSet, BitOperations) {
  InlierSet a = make_set(130, {0, 5, 64, 129});
  const InlierSet b = make_set(130, {5, 64, 100});
  EXPECT_EQ(a.count(), 4);
  EXPECT_EQ(a.count_and(b), 2);
  EXPECT_EQ(a.count_and_not(b), 2);
  a |= b;
  EXPECT_EQ(a.count(), 5);
  EXPECT_TRUE(a.test(100));
  Eigen::VectorXd r(4);
  r << 0.1, 2, 0.5, 1;
  const InlierSet below = InlierSet::below(r, 1.0);
  EXPECT_EQ(below.count(), 2);
  EXPECT_TRUE(below.test(0) && below.test(2) && !below.test(3));
}

TEST(RankInlierSets, DisjointSetsLargerFirst) {
  const auto steps = rank_inlier_sets({range_set(30, 0, 8), range_set(30, 10, 20)}, 2);
  ASSERT_EQ(steps.size(), 2u);
  EXPECT_EQ(steps[0].index, 1);
  EXPECT_EQ(steps[0].unique, 10);
  EXPECT_EQ(steps[1].index, 0);
  EXPECT_EQ(steps[1].unique, 8);
}

TEST(RankInlierSets, DuplicateIsDropped) {
  const auto steps = rank_inlier_sets({range_set(30, 0, 10), range_set(30, 0, 10)}, 2);
  ASSERT_EQ(steps.size(), 1u);
  EXPECT_EQ(steps[0].index, 0);
}

TEST(RankInlierSets, OverlapStopsTheLoop) {
  // A has 12 inliers; B has 9 of which 5 are shared with A.
  const auto steps = rank_inlier_sets({range_set(40, 0, 12), range_set(40, 7, 16)}, 2);
  ASSERT_EQ(steps.size(), 1u);
  EXPECT_EQ(steps[0].index, 0);
}

TEST(RankInlierSets, TiesGoToLowestIndex) {
  const auto steps = rank_inlier_sets({range_set(20, 0, 5), range_set(20, 10, 15)}, 2);
  ASSERT_EQ(steps.size(), 2u);
  EXPECT_EQ(steps[0].index, 0);
}

TEST(RankInlierSets, EmptyInput) { EXPECT_TRUE(rank_inlier_sets({}, 2).empty()); }

TEST(RankInlierSets, MatchesReferenceAndTraceInvariants) {
  Rng rng(101);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = uniform_int(rng, 5, 150), m = uniform_int(rng, 1, 10), C = uniform_int(rng, 2, 7);
    std::vector<InlierSet> sets;
    std::vector<std::set<int>> ref;
    for (int k = 0; k < m; ++k) {
      InlierSet s(n);
      std::set<int> r;
      const double density = uniform(rng, 0, 0.5);
      for (int i = 0; i < n; ++i)
        if (uniform01(rng) < density) {
          s.set(i);
          r.insert(i);
        }
      sets.push_back(s);
      ref.push_back(r);
    }
    const auto steps = rank_inlier_sets(sets, C);
    const auto expected = reference_ranking(ref, C);
    ASSERT_EQ(steps.size(), expected.size());
    InlierSet covered(n);
    for (std::size_t k = 0; k < steps.size(); ++k) {
      EXPECT_EQ(steps[k].index, expected[k]);
      EXPECT_GE(steps[k].unique - steps[k].overlap, C);
      const int before = covered.count();
      covered |= sets[steps[k].index];
      EXPECT_GT(covered.count(), before);
    }
  }
}

TEST(AssignClusters, NearestBelowTau) {
  Eigen::MatrixXd r(1, 2);
  r << 0.5, 0.3;
  EXPECT_EQ(assign_clusters(r, 1.0, 2.0), std::vector<int>{2});
}

TEST(AssignClusters, FirstBelowAssignmentThreshold) {
  Eigen::MatrixXd r(1, 3);
  r << 1.5, 2.5, 1.2;
  // No model below tau, so the first model below tau_a wins even though
  // model 3 is nearer.
  EXPECT_EQ(assign_clusters(r, 1.0, 2.0), std::vector<int>{1});
}

TEST(AssignClusters, OutlierWhenAllFar) {
  Eigen::MatrixXd r(1, 2);
  r << 2.0, 3.0;
  EXPECT_EQ(assign_clusters(r, 1.0, 2.0), std::vector<int>{0});
  EXPECT_EQ(assign_clusters(r, 1.0, std::nullopt), std::vector<int>{0});
}

TEST(AssignClusters, ArgminTieGoesToLowerRank) {
  Eigen::MatrixXd r(1, 2);
  r << 0.4, 0.4;
  EXPECT_EQ(assign_clusters(r, 1.0, 2.0), std::vector<int>{1});
}

TEST(AssignClusters, NoAssignmentThresholdMeansNearestOnly) {
  Eigen::MatrixXd r(1, 2);
  r << 1.5, 1.2;
  EXPECT_EQ(assign_clusters(r, 1.0, std::nullopt), std::vector<int>{0});
}

TEST(ClusterAssignment, PermutationInvariant) {
  const Scene scene = planted_homography_scene(7, 3, 0.3);
  const PipelineParams p = default_pipeline_params(Task::Homography);
  const auto labels = cluster_assignment(scene.gt_models, scene, p.consensus.tau, p.tau_a);
  std::vector<int> perm(scene.size());
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(3);
  std::shuffle(perm.begin(), perm.end(), rng);
  Scene shuffled = scene;
  for (std::size_t i = 0; i < perm.size(); ++i) shuffled.observations[i] = scene.observations[perm[i]];
  const auto permuted = cluster_assignment(scene.gt_models, shuffled, p.consensus.tau, p.tau_a);
  for (std::size_t i = 0; i < perm.size(); ++i) EXPECT_EQ(permuted[i], labels[perm[i]]);
}

TEST(PipelineParams, AssignmentThresholdAboveTau) {
  PipelineParams p = default_pipeline_params(Task::Fundamental);
  EXPECT_NO_THROW(p.validate(Task::Fundamental));
  p.tau_a = p.consensus.tau * 0.5;
  EXPECT_THROW(p.validate(Task::Fundamental), std::invalid_argument);
  p = default_pipeline_params(Task::Fundamental);
  p.m_star = 0;
  EXPECT_THROW(p.validate(Task::Fundamental), std::invalid_argument);
}

TEST(ParsacFit, PlantedHomographyRecovered) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Scene scene = planted_homography_scene(seed, 1, 0.0);
    const FitResult fit = parsac_fit(scene, OracleProvider(), default_pipeline_params(Task::Homography), seed);
    EXPECT_EQ(fit.models.size(), 1u);
    EXPECT_EQ(misclassification_error(fit.labels, *scene.gt_labels), 0.0);
  }
}

TEST(ParsacFit, OutputInvariants) {
  for (Task task : {Task::VanishingPoint, Task::Fundamental, Task::Homography}) {
    GenConfig cfg = default_gen_config(task);
    cfg.outlier_rate = 0.3;
    cfg.noise_px = 0.5;
    const PipelineParams p = default_pipeline_params(task);
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const Scene scene = generate_scene(cfg, seed);
      const FitResult fit = parsac_fit(scene, UniformProvider(), p, seed);
      ASSERT_EQ(fit.labels.size(), scene.size());
      EXPECT_LE(static_cast<int>(fit.models.size()), p.m_star);
      ASSERT_EQ(fit.per_model_inliers.size(), fit.models.size());
      const double bound = p.tau_a.value_or(p.consensus.tau);
      for (std::size_t i = 0; i < scene.size(); ++i) {
        const int l = fit.labels[i];
        ASSERT_GE(l, 0);
        ASSERT_LE(l, static_cast<int>(fit.models.size()));
        if (l > 0) EXPECT_LT(residual(scene.observations[i], fit.models[l - 1]), bound);
      }
      for (std::size_t k = 0; k < fit.models.size(); ++k)
        EXPECT_EQ(fit.per_model_inliers[k],
                  InlierSet::below(residuals(scene.observations, fit.models[k]), p.consensus.tau).count());
    }
  }
}

TEST(ParsacFit, AllDegeneratePutativesGiveEmptyResult) {
  // Every minimal set draws the same segment twice over, so no hypothesis
  // can be solved.
  Scene scene;
  scene.task = Task::VanishingPoint;
  scene.observations.assign(5, Observation::segment(0.1, 0.1, 0.2, 0.15));
  const FitResult fit = parsac_fit(scene, UniformProvider(), default_pipeline_params(Task::VanishingPoint), 1);
  EXPECT_TRUE(fit.models.empty());
  EXPECT_EQ(fit.labels, std::vector<int>(5, 0));
}

TEST(ParsacFit, ThreadCountDoesNotChangeResult) {
  GenConfig cfg = default_gen_config(Task::Homography);
  cfg.outlier_rate = 0.3;
  cfg.noise_px = 0.5;
  const Scene scene = generate_scene(cfg, 5);
  const PipelineParams p = default_pipeline_params(Task::Homography);
  const FitResult a = parsac_fit(scene, UniformProvider(), p, 1234, 1);
  const FitResult b = parsac_fit(scene, UniformProvider(), p, 1234, 8);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(a.per_model_inliers, b.per_model_inliers);
  ASSERT_EQ(a.models.size(), b.models.size());
  for (std::size_t k = 0; k < a.models.size(); ++k) EXPECT_EQ(model_parameters(a.models[k]), model_parameters(b.models[k]));
}

TEST(FinishFit, DuplicatingARankedModelChangesNothing) {
  GenConfig cfg = default_gen_config(Task::Fundamental);
  cfg.outlier_rate = 0.3;
  const PipelineParams p = default_pipeline_params(Task::Fundamental);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Scene scene = generate_scene(cfg, seed);
    const WeightMatrices w = OracleProvider().weights(scene, p.m_star);
    std::vector<Hypothesis> putative = find_putative_models(scene, w, p, seed);
    const FitResult base = finish_fit(putative, scene, p);
    for (const auto& m : base.models) {
      auto extended = putative;
      extended.push_back(m);
      const FitResult again = finish_fit(extended, scene, p);
      ASSERT_EQ(again.models.size(), base.models.size());
      for (std::size_t k = 0; k < base.models.size(); ++k)
        EXPECT_EQ(model_parameters(again.models[k]), model_parameters(base.models[k]));
      EXPECT_EQ(again.labels, base.labels);
    }
  }
}

TEST(UniformProvider, SelectionMatchesUnweightedArgmax) {
  const Scene scene = planted_homography_scene(3, 3, 0.3);
  const PipelineParams p = default_pipeline_params(Task::Homography);
  ConsensusParams weighted = p.consensus, plain = p.consensus;
  weighted.hypotheses = plain.hypotheses = 64;
  plain.weighted = false;
  const WeightMatrices w = UniformProvider().weights(scene, p.m_star);
  for (int j = 0; j < 4; ++j)
    EXPECT_EQ(generate_and_select(j, scene, w, weighted, 9).index, generate_and_select(j, scene, w, plain, 9).index);
}

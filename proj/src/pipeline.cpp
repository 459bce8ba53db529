#include "parsac/pipeline.hpp"

#include "parsac/parallel.hpp"
#include "parsac/weights.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace parsac {

const TaskDefaults& task_defaults(Task task) {
  // Homography thresholds in the table apply to the squared transfer error;
  // the residual used here is its square root.
  static const TaskDefaults vp{2, 8, std::nullopt, 1e-4, 1e-4, 1e-4, 1000.0, 2000, 1500, 64, 8, 64, 32, 32, 512};
  static const TaskDefaults f{7, 4, 2e-2, 4e-3, 1e-2, 1e-4, 1000.0, 3000, 2500, 32, 16, 128, 32, 128, 512};
  static const TaskDefaults h{4, 24, std::sqrt(4e-6), std::sqrt(1e-6), std::sqrt(1e-6), 1e-4, 1000.0,
                              500, 350, 4, 8, 64, 32, 512, 512};
  switch (task) {
    case Task::VanishingPoint: return vp;
    case Task::Fundamental: return f;
    case Task::Homography: return h;
  }
  return vp;
}

void PipelineParams::validate(Task task) const {
  consensus.validate(task);
  if (m_star < 1) throw std::invalid_argument("pipeline: m_star must be at least 1");
  if (tau_a && !(*tau_a > consensus.tau))
    throw std::invalid_argument("pipeline: assignment threshold must exceed tau");
}

PipelineParams default_pipeline_params(Task task, Phase phase) {
  const TaskDefaults& d = task_defaults(task);
  PipelineParams p;
  p.m_star = d.m_star;
  p.tau_a = d.tau_a;
  p.consensus.tau = phase == Phase::Train ? d.tau_train : d.tau_test;
  p.consensus.hypotheses = phase == Phase::Train ? d.hypotheses_train : d.hypotheses_test;
  p.consensus.alpha_s = d.alpha_s;
  p.consensus.minimal_set = d.minimal_set;
  p.refine_vp = task == Task::VanishingPoint;
  return p;
}

InlierSet InlierSet::below(const Eigen::Ref<const Eigen::VectorXd>& residuals, double tau) {
  InlierSet s(static_cast<std::size_t>(residuals.size()));
  for (Eigen::Index i = 0; i < residuals.size(); ++i)
    if (residuals[i] < tau) s.set(static_cast<std::size_t>(i));
  return s;
}

int InlierSet::count() const {
  int c = 0;
  for (auto w : words_) c += std::popcount(w);
  return c;
}

int InlierSet::count_and(const InlierSet& other) const {
  int c = 0;
  for (std::size_t k = 0; k < words_.size(); ++k) c += std::popcount(words_[k] & other.words_[k]);
  return c;
}

int InlierSet::count_and_not(const InlierSet& other) const {
  int c = 0;
  for (std::size_t k = 0; k < words_.size(); ++k) c += std::popcount(words_[k] & ~other.words_[k]);
  return c;
}

InlierSet& InlierSet::operator|=(const InlierSet& other) {
  for (std::size_t k = 0; k < words_.size(); ++k) words_[k] |= other.words_[k];
  return *this;
}

std::vector<RankingStep> rank_inlier_sets(const std::vector<InlierSet>& sets, int C) {
  std::vector<RankingStep> ranked;
  if (sets.empty()) return ranked;
  InlierSet covered(sets.front().size());
  std::vector<bool> used(sets.size(), false);
  while (ranked.size() < sets.size()) {
    int best = -1, best_score = 0, best_u = 0, best_o = 0;
    for (std::size_t j = 0; j < sets.size(); ++j) {
      if (used[j]) continue;
      const int u = sets[j].count_and_not(covered);
      const int o = sets[j].count_and(covered);
      if (best < 0 || u - o > best_score) {
        best = static_cast<int>(j);
        best_score = u - o;
        best_u = u;
        best_o = o;
      }
    }
    if (best_score < C) break;
    ranked.push_back({best, best_u, best_o});
    used[best] = true;
    covered |= sets[best];
  }
  return ranked;
}

std::vector<ModelInstance> instance_ranking(const std::vector<ModelInstance>& putative,
                                            const Scene& scene, double tau, int C) {
  std::vector<InlierSet> sets;
  sets.reserve(putative.size());
  for (const auto& h : putative) sets.push_back(InlierSet::below(residuals(scene.observations, h), tau));
  std::vector<ModelInstance> out;
  for (const RankingStep& step : rank_inlier_sets(sets, C)) out.push_back(putative[step.index]);
  return out;
}

std::vector<int> assign_clusters(const Eigen::MatrixXd& residuals, double tau,
                                 std::optional<double> tau_a) {
  const auto N = residuals.rows();
  const auto M = residuals.cols();
  std::vector<int> labels(static_cast<std::size_t>(N), 0);
  if (M == 0) return labels;
  for (Eigen::Index i = 0; i < N; ++i) {
    Eigen::Index nearest = 0;
    const double dmin = residuals.row(i).minCoeff(&nearest);
    if (dmin < tau) {
      labels[i] = static_cast<int>(nearest) + 1;
      continue;
    }
    if (!tau_a) continue;
    for (Eigen::Index j = 0; j < M; ++j) {
      if (residuals(i, j) < *tau_a) {
        labels[i] = static_cast<int>(j) + 1;
        break;
      }
    }
  }
  return labels;
}

std::vector<int> cluster_assignment(const std::vector<ModelInstance>& models, const Scene& scene,
                                    double tau, std::optional<double> tau_a) {
  Eigen::MatrixXd d(static_cast<Eigen::Index>(scene.size()), static_cast<Eigen::Index>(models.size()));
  for (std::size_t j = 0; j < models.size(); ++j) d.col(j) = residuals(scene.observations, models[j]);
  return assign_clusters(d, tau, tau_a);
}

ModelInstance refine_putative(const ModelInstance& model, const Scene& scene,
                              const ConsensusParams& params) {
  const auto* vp = std::get_if<VanishingPoint>(&model);
  if (!vp) return model;
  const Eigen::VectorXd d = residuals(scene.observations, model);
  std::vector<double> w(static_cast<std::size_t>(d.size()));
  for (Eigen::Index i = 0; i < d.size(); ++i) w[i] = soft_inlier_score(d[i], params.tau, params.beta);
  return refine_vp_weighted(*vp, scene.observations, w);
}

std::vector<Hypothesis> find_putative_models(const Scene& scene, const WeightMatrices& weights,
                                             const PipelineParams& params, std::uint64_t seed,
                                             int threads) {
  if (weights.m_star() != params.m_star)
    throw std::invalid_argument("find_putative_models: weights do not provide M* columns");
  std::vector<Hypothesis> putative(static_cast<std::size_t>(params.m_star));
  parallel_for(params.m_star, threads, [&](int j) {
    Selection sel = generate_and_select(j, scene, weights, params.consensus, seed);
    if (sel.model && params.refine_vp) sel.model = refine_putative(*sel.model, scene, params.consensus);
    putative[j] = std::move(sel.model);
  });
  return putative;
}

FitResult finish_fit(const std::vector<Hypothesis>& putative, const Scene& scene,
                     const PipelineParams& params) {
  std::vector<ModelInstance> valid;
  for (const auto& h : putative)
    if (h) valid.push_back(*h);

  const double tau = params.consensus.tau;
  std::vector<InlierSet> sets;
  std::vector<Eigen::VectorXd> dists;
  for (const auto& h : valid) {
    dists.push_back(residuals(scene.observations, h));
    sets.push_back(InlierSet::below(dists.back(), tau));
  }

  FitResult result;
  const auto steps = rank_inlier_sets(sets, params.consensus.minimal_set);
  Eigen::MatrixXd ranked_d(static_cast<Eigen::Index>(scene.size()), static_cast<Eigen::Index>(steps.size()));
  for (std::size_t k = 0; k < steps.size(); ++k) {
    result.models.push_back(canonicalize(valid[steps[k].index]));
    result.per_model_inliers.push_back(sets[steps[k].index].count());
    ranked_d.col(k) = dists[steps[k].index];
  }
  result.labels = assign_clusters(ranked_d, tau, params.tau_a);
  return result;
}

FitResult parsac_fit(const Scene& scene, const WeightMatrices& weights, const PipelineParams& params,
                     std::uint64_t seed, int threads) {
  if (scene.size() == 0) throw std::invalid_argument("parsac_fit: empty scene");
  params.validate(scene.task);
  const auto start = std::chrono::steady_clock::now();
  FitResult result = finish_fit(find_putative_models(scene, weights, params, seed, threads), scene, params);
  result.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

FitResult parsac_fit(const Scene& scene, const WeightProvider& provider, const PipelineParams& params,
                     std::uint64_t seed, int threads) {
  const auto start = std::chrono::steady_clock::now();
  const WeightMatrices weights = provider.weights(scene, params.m_star);
  FitResult result = parsac_fit(scene, weights, params, seed, threads);
  result.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace parsac

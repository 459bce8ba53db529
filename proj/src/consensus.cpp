#include "parsac/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace parsac {

void WeightMatrices::validate(double tol) const {
  const auto n = log_p.rows();
  if (n < 1) throw std::invalid_argument("weights: no observations");
  if (log_q.rows() != n) throw std::invalid_argument("weights: log_p and log_q row counts differ");
  if (log_q.cols() != log_p.cols() + 1)
    throw std::invalid_argument("weights: log_q needs M* + 1 columns");
  for (Eigen::Index j = 0; j < log_p.cols(); ++j) {
    const double s = log_p.col(j).array().exp().sum();
    if (std::abs(s - 1) > tol)
      throw std::invalid_argument("weights: sample weights of column " + std::to_string(j) +
                                  " do not sum to one");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = log_q.row(i).array().exp().sum();
    if (std::abs(s - 1) > tol)
      throw std::invalid_argument("weights: inlier weights of row " + std::to_string(i) +
                                  " do not sum to one");
  }
}

void ConsensusParams::validate(Task task) const {
  if (!(tau > 0)) throw std::invalid_argument("consensus: tau must be positive");
  if (!(beta > 0)) throw std::invalid_argument("consensus: beta must be positive");
  if (hypotheses < 1) throw std::invalid_argument("consensus: need at least one hypothesis");
  if (!(alpha_s > 0)) throw std::invalid_argument("consensus: alpha_s must be positive");
  if (minimal_set != minimal_set_size(task))
    throw std::invalid_argument("consensus: minimal set size does not match task");
}

double weighted_inlier_count(const ModelInstance& h, int j, const Scene& scene,
                             const Eigen::MatrixXd& q, const ConsensusParams& params) {
  const Eigen::VectorXd d = residuals(scene.observations, h);
  double total = 0;
  for (Eigen::Index i = 0; i < d.size(); ++i)
    total += soft_inlier_score(d[i], params.tau, params.beta) * q(i, j);
  return total;
}

double unweighted_inlier_count(const ModelInstance& h, const Scene& scene,
                               const ConsensusParams& params) {
  const Eigen::VectorXd d = residuals(scene.observations, h);
  double total = 0;
  for (Eigen::Index i = 0; i < d.size(); ++i) total += soft_inlier_score(d[i], params.tau, params.beta);
  return total;
}

CategoricalSampler::CategoricalSampler(const Eigen::Ref<const Eigen::VectorXd>& log_weights)
    : log_weights_(log_weights) {
  const auto n = log_weights.size();
  if (n < 1) throw std::invalid_argument("sampler: empty distribution");
  cdf_.resize(n);
  double acc = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = std::exp(log_weights[i]);
    acc += std::isfinite(w) && w > 0 ? w : 0.0;
    cdf_[i] = acc;
  }
  if (!(acc > 0) || !std::isfinite(acc)) {
    fallback_ = true;
    for (Eigen::Index i = 0; i < n; ++i) cdf_[i] = double(i + 1);
    log_weights_.setConstant(-std::log(double(n)));
  }
}

int CategoricalSampler::draw(Rng& rng) const {
  const double u = uniform01(rng) * cdf_.back();
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it != cdf_.end()) return static_cast<int>(it - cdf_.begin());
  // u rounded up to the total: take the last entry carrying mass.
  auto idx = static_cast<int>(cdf_.size()) - 1;
  while (idx > 0 && cdf_[idx] == cdf_[idx - 1]) --idx;
  return idx;
}

double CategoricalSampler::log_prob(int index) const { return log_weights_[index]; }

MinimalSet sample_minimal_set(int j, const Scene& scene, const Eigen::MatrixXd& log_p, int C, Rng& rng,
                              double* log_prob) {
  if (log_p.rows() != static_cast<Eigen::Index>(scene.size()))
    throw std::invalid_argument("sample_minimal_set: weight rows do not match the scene");
  const CategoricalSampler sampler(log_p.col(j));
  MinimalSet set;
  set.indices.reserve(C);
  double lp = 0;
  for (int c = 0; c < C; ++c) {
    const int idx = sampler.draw(rng);
    set.indices.push_back(idx);
    lp += sampler.log_prob(idx);
  }
  if (log_prob) *log_prob = lp;
  return set;
}

HypothesisSet score_minimal_sets(int j, const Scene& scene, const WeightMatrices& weights,
                                 const ConsensusParams& params, std::vector<MinimalSet> sets,
                                 bool keep_scores) {
  const auto S = static_cast<int>(sets.size());
  const auto N = static_cast<Eigen::Index>(scene.size());
  if (weights.size() != N) throw std::invalid_argument("score_minimal_sets: weights do not match scene");
  const Eigen::VectorXd q = weights.log_q.col(j).array().exp();

  HypothesisSet hs;
  hs.hypotheses.resize(S);
  hs.weighted_counts = Eigen::VectorXd::Zero(S);
  hs.log_sample_prob = Eigen::VectorXd::Zero(S);
  if (keep_scores) hs.scores = Eigen::MatrixXd::Zero(S, N);

  std::vector<Observation> subset;
  Eigen::VectorXd score(N);
  for (int l = 0; l < S; ++l) {
    const auto& indices = sets[l].indices;
    subset.clear();
    bool duplicate = false;
    for (std::size_t c = 0; c < indices.size(); ++c) {
      if (indices[c] < 0 || indices[c] >= N) throw std::out_of_range("score_minimal_sets: index out of range");
      for (std::size_t k = 0; k < c; ++k) duplicate |= indices[k] == indices[c];
      hs.log_sample_prob[l] += weights.log_p(indices[c], j);
      subset.push_back(scene.observations[indices[c]]);
    }
    if (duplicate) continue;  // degenerate by construction, count stays 0

    double best = -1;
    for (const ModelInstance& candidate : solve_minimal(scene.task, subset)) {
      const Eigen::VectorXd d = residuals(scene.observations, candidate);
      for (Eigen::Index i = 0; i < N; ++i) score[i] = soft_inlier_score(d[i], params.tau, params.beta);
      const double count = params.weighted ? score.dot(q) : score.sum();
      if (count > best) {
        best = count;
        hs.hypotheses[l] = candidate;
        hs.weighted_counts[l] = count;
        if (keep_scores) hs.scores.row(l) = score.transpose();
      }
    }
  }
  hs.minimal_sets = std::move(sets);
  return hs;
}

int best_hypothesis(const HypothesisSet& set) {
  int index = -1;
  double best = -1;
  for (int l = 0; l < set.size(); ++l) {
    if (!set.hypotheses[l]) continue;
    if (set.weighted_counts[l] > best) {
      best = set.weighted_counts[l];
      index = l;
    }
  }
  return index;
}

Selection generate_and_select(int j, const Scene& scene, const WeightMatrices& weights,
                              const ConsensusParams& params, std::uint64_t stream_seed,
                              bool keep_scores) {
  const auto N = static_cast<Eigen::Index>(scene.size());
  if (weights.size() != N) throw std::invalid_argument("generate_and_select: weights do not match scene");
  const CategoricalSampler sampler(weights.log_p.col(j));
  std::vector<MinimalSet> sets(static_cast<std::size_t>(params.hypotheses));
  for (int l = 0; l < params.hypotheses; ++l) {
    Rng rng = substream(stream_seed, {std::uint64_t(j), std::uint64_t(l)});
    sets[l].indices.resize(static_cast<std::size_t>(params.minimal_set));
    for (int& idx : sets[l].indices) idx = sampler.draw(rng);
  }
  Selection out;
  out.set = score_minimal_sets(j, scene, weights, params, std::move(sets), keep_scores);
  out.set.uniform_fallback = sampler.uniform_fallback();
  out.index = best_hypothesis(out.set);
  if (out.index >= 0) out.model = out.set.hypotheses[out.index];
  return out;
}

Eigen::VectorXd selection_distribution(const HypothesisSet& set, double alpha_s) {
  if (!(alpha_s > 0)) throw std::invalid_argument("selection_distribution: alpha_s must be positive");
  const Eigen::ArrayXd logits = alpha_s * set.weighted_counts.array();
  const Eigen::ArrayXd e = (logits - logits.maxCoeff()).exp();
  return (e / e.sum()).matrix();
}

}  // namespace parsac

#include "parsac/weights.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace parsac {

namespace {

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

}  // namespace

WeightMatrices normalize_log_weights(Eigen::MatrixXd log_p, Eigen::MatrixXd log_q) {
  for (Eigen::Index j = 0; j < log_p.cols(); ++j) log_p.col(j).array() -= log_sum_exp(log_p.col(j));
  for (Eigen::Index i = 0; i < log_q.rows(); ++i)
    log_q.row(i).array() -= log_sum_exp(log_q.row(i).transpose());
  return {std::move(log_p), std::move(log_q)};
}

WeightMatrices UniformProvider::weights(const Scene& scene, int m_star) const {
  const auto N = static_cast<Eigen::Index>(scene.size());
  if (N < 1) throw std::invalid_argument("uniform provider: empty scene");
  if (m_star < 1) throw std::invalid_argument("uniform provider: M* must be positive");
  return {Eigen::MatrixXd::Constant(N, m_star, -std::log(double(N))),
          Eigen::MatrixXd::Constant(N, m_star + 1, -std::log(double(m_star + 1)))};
}

WeightMatrices OracleProvider::weights(const Scene& scene, int m_star) const {
  if (!scene.has_labels()) throw std::invalid_argument("oracle provider: scene has no ground-truth labels");
  const auto& labels = *scene.gt_labels;
  const auto N = static_cast<Eigen::Index>(scene.size());
  if (N < 1) throw std::invalid_argument("oracle provider: empty scene");
  if (static_cast<Eigen::Index>(labels.size()) != N)
    throw std::invalid_argument("oracle provider: label count differs from observation count");
  const int models = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
  if (models > m_star)
    throw std::invalid_argument("oracle provider: " + std::to_string(models) + " ground-truth models exceed M* = " +
                                std::to_string(m_star));

  // Columns past the last model reuse the models cyclically, so surplus
  // slots reproduce a real model and ranking discards the duplicate.
  std::vector<int> source(static_cast<std::size_t>(m_star), 0);
  for (int j = 0; j < m_star; ++j) source[j] = models > 0 ? j % models + 1 : 0;

  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(N, m_star);
  for (int j = 0; j < m_star; ++j) {
    const auto members = std::count(labels.begin(), labels.end(), source[j]);
    for (Eigen::Index i = 0; i < N; ++i)
      P(i, j) = source[j] > 0 ? (labels[i] == source[j] ? 1.0 / double(members) : 0.0) : 1.0 / double(N);
    if (source[j] > 0 && members < N) {
      for (Eigen::Index i = 0; i < N; ++i) P(i, j) += eps_ / double(N - members) * (labels[i] != source[j]);
      P.col(j) /= P.col(j).sum();
    }
  }
  Eigen::MatrixXd Q = Eigen::MatrixXd::Constant(N, m_star + 1, eps_ / double(m_star));
  for (Eigen::Index i = 0; i < N; ++i) {
    if (labels[i] == 0) {
      Q(i, m_star) = 1.0 - eps_;
    } else {
      const double share = (1.0 - eps_) / double(std::count(source.begin(), source.end(), labels[i]));
      for (int j = 0; j < m_star; ++j)
        if (source[j] == labels[i]) Q(i, j) = share;
    }
    Q.row(i) /= Q.row(i).sum();
  }
  return normalize_log_weights(P.array().log().matrix(), Q.array().log().matrix());
}

WeightMatrices NeuralProvider::weights(const Scene& scene, int m_star) const {
  if (m_star != params_.config.m_star)
    throw std::invalid_argument("neural provider: weights are for M* = " + std::to_string(params_.config.m_star) +
                                ", requested " + std::to_string(m_star));
  return network_forward(params_, scene, Mode::Infer);
}

Scene pad_or_subsample(const Scene& scene, int n_max, Rng& rng) {
  const int N = static_cast<int>(scene.size());
  if (N < 1) throw std::invalid_argument("pad_or_subsample: empty scene");
  if (n_max < 1) throw std::invalid_argument("pad_or_subsample: n_max must be positive");
  if (N == n_max) return scene;
  std::vector<int> pick;
  if (N > n_max) {
    std::vector<int> all(N);
    std::iota(all.begin(), all.end(), 0);
    // Partial Fisher-Yates, then restore original order.
    for (int k = 0; k < n_max; ++k) std::swap(all[k], all[uniform_int(rng, k, N - 1)]);
    pick.assign(all.begin(), all.begin() + n_max);
    std::sort(pick.begin(), pick.end());
  } else {
    pick.resize(N);
    std::iota(pick.begin(), pick.end(), 0);
    while (static_cast<int>(pick.size()) < n_max) pick.push_back(uniform_int(rng, 0, N - 1));
  }
  Scene out = scene;
  out.observations.clear();
  if (out.gt_labels) out.gt_labels->clear();
  for (int i : pick) {
    out.observations.push_back(scene.observations[i]);
    if (out.gt_labels) out.gt_labels->push_back((*scene.gt_labels)[i]);
  }
  return out;
}

}  // namespace parsac

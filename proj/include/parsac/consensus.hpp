#ifndef PARSAC_CONSENSUS_HPP_
#define PARSAC_CONSENSUS_HPP_

#include "parsac/geometry.hpp"
#include "parsac/rng.hpp"
#include "parsac/scene.hpp"

#include <cstdint>
#include <vector>

namespace parsac {

/// Normalized log weights for one scene. Columns of exp(log_p) sum to one
/// over observations; rows of exp(log_q) sum to one over the M* putative
/// models plus the trailing outlier column.
struct WeightMatrices {
  Eigen::MatrixXd log_p;  // N x M*
  Eigen::MatrixXd log_q;  // N x (M* + 1)

  int m_star() const { return static_cast<int>(log_p.cols()); }
  int size() const { return static_cast<int>(log_p.rows()); }

  /// Throws unless shapes agree and both normalizations hold within `tol`.
  void validate(double tol = 1e-9) const;
};

struct ConsensusParams {
  double tau = 1e-4;         // inlier threshold, residual units
  double beta = 5.0;         // inlier softness
  int hypotheses = 32;       // S
  double alpha_s = 1000.0;   // selection softmax scale, training only
  int minimal_set = 2;       // C
  bool weighted = true;      // false: plain soft inlier count (ablation)

  void validate(Task task) const;
};

/// Logistic soft inlier score with midpoint at tau.
inline double soft_inlier_score(double d, double tau, double beta) {
  return 1.0 / (1.0 + std::exp(beta * (d / tau - 1.0)));
}

/// sum_i s(d(x_i, h)) * q(j, x_i), with q given as linear weights (N x M*+1).
double weighted_inlier_count(const ModelInstance& h, int j, const Scene& scene,
                             const Eigen::MatrixXd& q, const ConsensusParams& params);

/// sum_i s(d(x_i, h)).
double unweighted_inlier_count(const ModelInstance& h, const Scene& scene,
                               const ConsensusParams& params);

struct MinimalSet {
  std::vector<int> indices;
};

/// Categorical distribution over observations built from one column of
/// log sample weights. Falls back to uniform when the column has no mass.
class CategoricalSampler {
 public:
  explicit CategoricalSampler(const Eigen::Ref<const Eigen::VectorXd>& log_weights);

  int draw(Rng& rng) const;
  double log_prob(int index) const;
  bool uniform_fallback() const { return fallback_; }

 private:
  std::vector<double> cdf_;
  Eigen::VectorXd log_weights_;
  bool fallback_ = false;
};

/// Draws C indices i.i.d. from p(. | j). `log_prob`, when given, receives the
/// sum of the log sample weights of the drawn indices.
MinimalSet sample_minimal_set(int j, const Scene& scene, const Eigen::MatrixXd& log_p, int C,
                              Rng& rng, double* log_prob = nullptr);

struct HypothesisSet {
  std::vector<Hypothesis> hypotheses;
  std::vector<MinimalSet> minimal_sets;
  Eigen::VectorXd weighted_counts;
  Eigen::VectorXd log_sample_prob;
  /// S x N soft inlier scores; filled only when requested (training).
  Eigen::MatrixXd scores;
  bool uniform_fallback = false;

  int size() const { return static_cast<int>(hypotheses.size()); }
};

struct Selection {
  Hypothesis model;  // nullopt when every hypothesis was degenerate
  int index = -1;
  HypothesisSet set;
};

/// Solves and scores the given minimal sets for putative model j. A set
/// with a repeated index yields a degenerate hypothesis with count 0; of
/// several solver roots the one with the highest count is kept.
/// `log_sample_prob` uses the (normalized) log_p column j.
HypothesisSet score_minimal_sets(int j, const Scene& scene, const WeightMatrices& weights,
                                 const ConsensusParams& params, std::vector<MinimalSet> sets,
                                 bool keep_scores = false);

/// Index of the highest-count non-degenerate hypothesis, lowest on ties;
/// -1 when all are degenerate.
int best_hypothesis(const HypothesisSet& set);

/// Samples S minimal sets for putative model j, solves and scores them, and
/// returns the argmax of the (weighted) inlier count, lowest index on ties.
/// Hypothesis l draws from substream (stream_seed, j, l).
Selection generate_and_select(int j, const Scene& scene, const WeightMatrices& weights,
                              const ConsensusParams& params, std::uint64_t stream_seed,
                              bool keep_scores = false);

/// softmax(alpha_s * weighted_counts).
Eigen::VectorXd selection_distribution(const HypothesisSet& set, double alpha_s);

}  // namespace parsac

#endif  // PARSAC_CONSENSUS_HPP_

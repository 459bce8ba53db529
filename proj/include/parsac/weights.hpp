#ifndef PARSAC_WEIGHTS_HPP_
#define PARSAC_WEIGHTS_HPP_

#include "parsac/consensus.hpp"
#include "parsac/network.hpp"
#include "parsac/scene.hpp"

#include <memory>

namespace parsac {

/// Source of normalized sample and inlier weights for a scene.
class WeightProvider {
 public:
  virtual ~WeightProvider() = default;
  virtual WeightMatrices weights(const Scene& scene, int m_star) const = 0;
  virtual std::string name() const = 0;
};

/// Constant weights: log(1/N) for sampling, log(1/(M*+1)) for inliers.
class UniformProvider final : public WeightProvider {
 public:
  WeightMatrices weights(const Scene& scene, int m_star) const override;
  std::string name() const override { return "uniform"; }
};

/// Weights built from ground-truth labels. Column j of P is uniform over the
/// inliers of model j + 1; each Q row puts 1 - eps on the observation's own
/// column (outliers use the last column). When M* exceeds the model count,
/// column j serves model (j mod models) + 1 and an inlier's 1 - eps is split
/// evenly over all columns serving its model. A scene without models gets
/// uniform P columns. `eps` is spread over the remaining entries before
/// renormalization.
class OracleProvider final : public WeightProvider {
 public:
  explicit OracleProvider(double eps = 1e-6) : eps_(eps) {}
  WeightMatrices weights(const Scene& scene, int m_star) const override;
  std::string name() const override { return "oracle"; }

 private:
  double eps_;
};

/// Network inference with running batch-norm statistics.
class NeuralProvider final : public WeightProvider {
 public:
  explicit NeuralProvider(NetworkParams params) : params_(std::move(params)) {}
  WeightMatrices weights(const Scene& scene, int m_star) const override;
  std::string name() const override { return "neural"; }
  const NetworkParams& params() const { return params_; }

 private:
  NetworkParams params_;
};

/// Normalizes raw log weights: P over observations per column, Q over
/// columns per row.
WeightMatrices normalize_log_weights(Eigen::MatrixXd log_p, Eigen::MatrixXd log_q);

/// Subsamples without replacement when N > n_max, otherwise pads with
/// uniformly chosen duplicates. Labels follow their observations.
Scene pad_or_subsample(const Scene& scene, int n_max, Rng& rng);

}  // namespace parsac

#endif  // PARSAC_WEIGHTS_HPP_

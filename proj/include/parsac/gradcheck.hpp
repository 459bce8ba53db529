#ifndef PARSAC_GRADCHECK_HPP_
#define PARSAC_GRADCHECK_HPP_

#include "parsac/network.hpp"
#include "parsac/pipeline.hpp"
#include "parsac/training.hpp"

#include <cstdint>
#include <string>

namespace parsac {

struct CheckReport {
  std::string name;
  double max_error = 0;
  double tolerance = 0;
  std::string worst;  // offending parameter or component
  int evaluated = 0;
  bool passed = false;
};

struct GradcheckOptions {
  int seeds = 5;
  int observations = 6;
  int m_star = 2;
  int width = 16;
  int blocks = 6;
  double step = 1e-3;
  double tolerance = 1e-4;
  /// Negative control: perturbs the analytic gradient before comparison.
  bool corrupt = false;
};

/// Analytic network gradient versus fourth-order central finite differences
/// for every learnable scalar of a small network, over `seeds` random draws.
/// When a probe flips a ReLU, the step is shrunk (up to three times by 10x).
CheckReport backprop_check(std::uint64_t seed, const GradcheckOptions& options = {});

/// Four segments from two vanishing points, C = 2, S = 2, M* = 1; every
/// minimal-set draw and selection outcome can be enumerated.
struct MicroInstance {
  Scene scene;
  TrainParams train;
};

MicroInstance micro_instance();

/// Normalizes free logits into weights: log-softmax over observations for
/// P (N x M*), over columns for Q (N x (M* + 1)).
WeightMatrices weights_from_logits(const Eigen::MatrixXd& theta_p, const Eigen::MatrixXd& theta_q);

/// Exact expected task loss by enumeration of all outcomes.
double micro_expected_loss(const MicroInstance& micro, const WeightMatrices& weights);

/// Score-function estimator averaged over the full enumeration with the
/// exact mean as baseline; gradient with respect to (log P, log Q).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> micro_estimator(const MicroInstance& micro,
                                                            const WeightMatrices& weights);

/// Estimator versus finite differences of the expected loss with respect to
/// the free logits; relative error in the vector 2-norm.
CheckReport estimator_check(std::uint64_t seed, const GradcheckOptions& options = {}, double tolerance = 1e-3);

}  // namespace parsac

#endif  // PARSAC_GRADCHECK_HPP_

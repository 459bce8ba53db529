#ifndef PARSAC_TRAINING_HPP_
#define PARSAC_TRAINING_HPP_

#include "parsac/consensus.hpp"
#include "parsac/network.hpp"
#include "parsac/pipeline.hpp"
#include "parsac/scene.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace parsac {

class WeightProvider;

enum class LossKind { HungarianVp, Me, SelfWeighted, SelfPlain };

std::string_view to_string(LossKind kind);
LossKind loss_kind_from_string(std::string_view name);

struct TrainParams {
  int K = 8;          // hypothesis-set samples
  int K_tilde = 64;   // model-set samples per hypothesis set
  double learning_rate = 1e-4;
  int epochs = 2000;
  int lr_drop_epoch = 1500;
  int batch_size = 64;
  double gamma = 0.3;
  LossKind loss = LossKind::HungarianVp;
  int max_observations = 512;
  PipelineParams pipeline;  // training-phase thresholds, S and alpha_s

  void validate(Task task) const;
};

TrainParams default_train_params(Task task, LossKind loss);

/// Learning rate for a 1-based epoch index: divided by ten after lr_drop_epoch.
double learning_rate_for_epoch(const TrainParams& params, int epoch);

// --------------------------------------------------------------------------
// Task losses

/// Minimal assignment cost of `pairwise` (rows: ranked predictions, columns:
/// ground truth). Only the first min(rows, cols) predictions are used; each
/// unmatched ground-truth column adds `max_loss`.
double task_loss_hungarian(const Eigen::MatrixXd& pairwise, double max_loss);

/// Sum of per-ground-truth VP angle errors in degrees.
double vp_hungarian_loss(const std::vector<ModelInstance>& models, const Scene& scene);

double task_loss_me(std::span<const int> labels, std::span<const int> gt_labels);

/// -sum_i sum_j rho_ij gamma^j, rho_ij = max over the first j models of the
/// soft inlier score. `residuals[j]` holds the residuals to ranked model j.
double self_supervised_weighted_loss(std::span<const Eigen::VectorXd> residuals, double tau, double beta,
                                     double gamma);
double self_supervised_weighted_loss(const std::vector<ModelInstance>& models, const Scene& scene, double tau,
                                     double beta, double gamma);

/// Minus the size of the union of the hard inlier sets.
double self_supervised_plain_loss(const std::vector<ModelInstance>& models, const Scene& scene, double tau);

// --------------------------------------------------------------------------
// Score-function estimator

/// Adds the gradient of
///   c_sample * log p(H_j) + sum_l c_select[l] * log pi_j(l)
/// with respect to the normalized log weights, where H_j are the minimal
/// sets of `set` and pi_j = softmax(alpha_s * counts). Requires `set.scores`.
void add_score_terms(const HypothesisSet& set, int j, double c_sample, const Eigen::VectorXd& c_select,
                     const WeightMatrices& weights, double alpha_s, bool weighted, Eigen::MatrixXd& grad_log_p,
                     Eigen::MatrixXd& grad_log_q);

struct UpstreamGradient {
  Eigen::MatrixXd grad_log_p;
  Eigen::MatrixXd grad_log_q;
  double mean_loss = 0;
  std::vector<double> losses;  // K * K_tilde, set-major
};

/// Draws K hypothesis sets and K_tilde model selections per set, evaluates
/// the task loss of every draw and forms the mean-baseline estimator of the
/// gradient with respect to log P and log Q.
UpstreamGradient reinforce_upstream(const Scene& scene, const WeightMatrices& weights, const TrainParams& params,
                                    std::uint64_t stream_seed);

struct SceneGradient {
  GradientBundle bundle;
  double mean_loss = 0;
};

/// Train-mode forward on one scene, estimator, backward.
SceneGradient reinforce_gradient(const Scene& scene, const NetworkParams& net, const TrainParams& params,
                                 std::uint64_t stream_seed);

/// Loss of a single ranked model set, as used by the estimator.
double evaluate_task_loss(LossKind kind, const Scene& scene, const std::vector<ModelInstance>& ranked,
                          const PipelineParams& params);

// --------------------------------------------------------------------------
// Optimizer

struct AdamState {
  GradientBundle m;
  GradientBundle v;
  long step = 0;
};

AdamState init_adam(const NetworkParams& params);

/// One Adam update (beta1 0.9, beta2 0.999, eps 1e-8) of learnable tensors.
/// Returns false and leaves everything unchanged if the bundle is not finite.
bool adam_step(NetworkParams& params, const GradientBundle& grad, double lr, AdamState& state);

void save_adam_state(const AdamState& state, const std::filesystem::path& path);
AdamState load_adam_state(const std::filesystem::path& path, const NetworkParams& params);

// --------------------------------------------------------------------------
// Evaluation and epoch loop

struct EvalSummary {
  double mean_me = 0;
  std::vector<double> me;          // per scene
  std::vector<double> vp_errors;   // pooled per ground-truth VP (VP task)
  double auc5 = 0;                 // VP task only
  int scenes = 0;
};

EvalSummary evaluate_provider(const std::vector<Scene>& scenes, const WeightProvider& provider,
                              const PipelineParams& params, std::uint64_t seed, int threads = 1);

/// Higher is better: AUC@5 for VP, negative mean ME otherwise.
double validation_score(Task task, const EvalSummary& summary);

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0;
  int steps = 0;
  int skipped_steps = 0;
  std::optional<double> validation;  // validation_score
};

EpochStats train_epoch(const std::vector<Scene>& dataset, NetworkParams& params, AdamState& state,
                       const TrainParams& train_params, int epoch, std::uint64_t seed, int threads = 1);

struct TrainOutcome {
  NetworkParams final_params;
  NetworkParams best_params;
  double best_score = 0;
  int best_epoch = 0;
  std::vector<EpochStats> log;
  bool diverged = false;
};

/// Runs `epochs` epochs, validating after each one when `validation` is
/// nonempty (epoch 0 is the initial network). Stops at the first non-finite
/// epoch loss and keeps the last good parameters.
TrainOutcome train(const std::vector<Scene>& dataset, const std::vector<Scene>& validation, NetworkParams init,
                   const TrainParams& params, std::uint64_t seed, int threads = 1,
                   const std::function<void(const EpochStats&)>& on_epoch = {});

}  // namespace parsac

#endif  // PARSAC_TRAINING_HPP_

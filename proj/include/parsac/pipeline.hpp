#ifndef PARSAC_PIPELINE_HPP_
#define PARSAC_PIPELINE_HPP_

#include "parsac/consensus.hpp"
#include "parsac/scene.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace parsac {

class WeightProvider;

enum class Phase { Train, Test };

/// Per-task defaults from the published hyper-parameter table.
struct TaskDefaults {
  int minimal_set;
  int m_star;
  std::optional<double> tau_a;
  double tau_train;
  double tau_test;
  double learning_rate;
  double alpha_s;
  int epochs;
  int lr_drop_epoch;
  int batch_size;
  int hypothesis_set_samples;  // K
  int model_set_samples;       // K~
  int hypotheses_train;        // S during training
  int hypotheses_test;         // S at inference
  int max_observations;        // N during training
};

const TaskDefaults& task_defaults(Task task);

struct PipelineParams {
  int m_star = 8;
  std::optional<double> tau_a;  // VP has none: only the nearest-model branch
  ConsensusParams consensus;
  bool refine_vp = true;

  void validate(Task task) const;
};

PipelineParams default_pipeline_params(Task task, Phase phase = Phase::Test);

struct FitResult {
  std::vector<ModelInstance> models;   // ranked
  std::vector<int> labels;             // 0 = outlier, k = models[k - 1]
  std::vector<int> per_model_inliers;  // hard inliers at tau
  double elapsed_seconds = 0;
};

/// Fixed-size bitset over observations.
class InlierSet {
 public:
  InlierSet() = default;
  explicit InlierSet(std::size_t n) : n_(n), words_((n + 63) / 64, 0) {}

  static InlierSet below(const Eigen::Ref<const Eigen::VectorXd>& residuals, double tau);

  void set(std::size_t i) { words_[i >> 6] |= std::uint64_t(1) << (i & 63); }
  bool test(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1; }
  std::size_t size() const { return n_; }
  int count() const;
  int count_and(const InlierSet& other) const;
  int count_and_not(const InlierSet& other) const;
  InlierSet& operator|=(const InlierSet& other);

 private:
  std::size_t n_ = 0;
  std::vector<std::uint64_t> words_;
};

struct RankingStep {
  int index;    // into the putative list
  int unique;   // I^u at selection time
  int overlap;  // I^o at selection time
};

/// Greedy unique-minus-overlap ranking over hard inlier sets. Appends while
/// I^u - I^o >= C; ties go to the lowest putative index.
std::vector<RankingStep> rank_inlier_sets(const std::vector<InlierSet>& sets, int C);

std::vector<ModelInstance> instance_ranking(const std::vector<ModelInstance>& putative,
                                            const Scene& scene, double tau, int C);

/// `residuals` is N x M for M ranked models.
std::vector<int> assign_clusters(const Eigen::MatrixXd& residuals, double tau,
                                 std::optional<double> tau_a);

std::vector<int> cluster_assignment(const std::vector<ModelInstance>& models, const Scene& scene,
                                    double tau, std::optional<double> tau_a);

/// Soft-inlier-weighted least squares refit applied to selected VPs.
ModelInstance refine_putative(const ModelInstance& model, const Scene& scene,
                              const ConsensusParams& params);

/// Selection step of the pipeline: one (possibly degenerate) model per
/// putative slot, computed in parallel over slots.
std::vector<Hypothesis> find_putative_models(const Scene& scene, const WeightMatrices& weights,
                                             const PipelineParams& params, std::uint64_t seed,
                                             int threads = 1);

/// Ranking and assignment on an explicit putative list.
FitResult finish_fit(const std::vector<Hypothesis>& putative, const Scene& scene,
                     const PipelineParams& params);

FitResult parsac_fit(const Scene& scene, const WeightMatrices& weights, const PipelineParams& params,
                     std::uint64_t seed, int threads = 1);

FitResult parsac_fit(const Scene& scene, const WeightProvider& provider, const PipelineParams& params,
                     std::uint64_t seed, int threads = 1);

}  // namespace parsac

#endif  // PARSAC_PIPELINE_HPP_

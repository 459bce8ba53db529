#ifndef PARSAC_NETWORK_HPP_
#define PARSAC_NETWORK_HPP_

#include "parsac/consensus.hpp"
#include "parsac/scene.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace parsac {

/// Pointwise (1x1) convolution: y = W x + b per observation.
struct Conv1x1 {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
};

struct AffineNorm {
  Eigen::VectorXd scale;
  Eigen::VectorXd shift;
};

struct BatchNorm {
  Eigen::VectorXd scale;
  Eigen::VectorXd shift;
  Eigen::VectorXd running_mean;
  Eigen::VectorXd running_var;
};

/// conv -> instance norm -> batch norm -> ReLU
struct SubLayer {
  Conv1x1 conv;
  AffineNorm instance_norm;
  BatchNorm batch_norm;
};

struct ResidualBlock {
  std::array<SubLayer, 2> layers;
};

struct NetworkConfig {
  int input_dim = 4;
  int width = 128;
  int blocks = 6;
  int m_star = 8;
  double instance_eps = 1e-5;
  double batch_eps = 1e-5;
  double momentum = 0.1;

  bool operator==(const NetworkConfig&) const = default;
};

struct NetworkParams {
  NetworkConfig config;
  Conv1x1 stem;
  std::vector<ResidualBlock> blocks;
  Conv1x1 head_p;  // width -> M*
  Conv1x1 head_q;  // width -> M* + 1
};

/// Gradients share the parameter layout; running statistics stay zero.
using GradientBundle = NetworkParams;

/// Flat view of one tensor in manifest order. Matrices are visited
/// row-major by `at`.
template <typename T>
struct TensorView {
  std::string name;
  T* data;
  Eigen::Index rows;
  Eigen::Index cols;
  bool learnable;

  Eigen::Index size() const { return rows * cols; }
  /// Row-major element access over a column-major buffer.
  T& at(Eigen::Index k) const { return data[(k % cols) * rows + k / cols]; }
};

std::vector<TensorView<double>> tensors(NetworkParams& params);
std::vector<TensorView<const double>> tensors(const NetworkParams& params);

/// He fan-in init for conv weights, zero biases, unit scales, zero shifts,
/// running statistics (0, 1).
NetworkParams init_params(const NetworkConfig& config, std::uint64_t seed);

GradientBundle zeros_like(const NetworkParams& params);

/// Largest absolute entry over learnable tensors.
double max_abs(const GradientBundle& bundle);
bool all_finite(const GradientBundle& bundle);

/// a += scale * b over learnable tensors.
void accumulate(GradientBundle& a, const GradientBundle& b, double scale = 1.0);

enum class Mode { Train, Infer };

/// Everything the backward pass needs. Opaque to callers.
struct ForwardCache {
  struct SubLayerCache {
    Eigen::MatrixXd input;       // sublayer input (first sublayer: block input)
    Eigen::MatrixXd pre_norm;    // conv output
    Eigen::MatrixXd seg_mean;    // segments x C
    Eigen::MatrixXd seg_inv_std; // segments x C
    Eigen::RowVectorXd batch_mean;
    Eigen::RowVectorXd batch_inv_std;
  };
  Mode mode = Mode::Infer;
  std::vector<Eigen::Index> offsets;  // segment starts, plus total at the end
  Eigen::MatrixXd input;
  Eigen::MatrixXd stem_pre;
  std::vector<SubLayerCache> sublayers;
  Eigen::MatrixXd trunk_out;
  Eigen::MatrixXd logits_p;
  Eigen::MatrixXd logits_q;
  Eigen::MatrixXd log_p;
  Eigen::MatrixXd log_q;
  // Updated running statistics, one pair per sublayer (train mode only).
  std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> running;
  int width = 0;
  int m_star = 0;
};

struct ForwardResult {
  std::vector<WeightMatrices> weights;  // one per input scene
  ForwardCache cache;
};

/// Joint forward pass over a batch of observation matrices (N_b x D each).
/// Instance norm and both normalizations of the log weights act per scene;
/// batch norm in train mode pools statistics over the whole batch.
ForwardResult network_forward(const NetworkParams& params, std::span<const Eigen::MatrixXd> inputs,
                              Mode mode);

WeightMatrices network_forward(const NetworkParams& params, const Scene& scene, Mode mode = Mode::Infer);

/// Gradient of sum_b <grad_log_p[b], log_p[b]> + <grad_log_q[b], log_q[b]>
/// with respect to every learnable parameter. Requires a train-mode cache.
GradientBundle network_backward(const NetworkParams& params, const ForwardCache& cache,
                                std::span<const Eigen::MatrixXd> grad_log_p,
                                std::span<const Eigen::MatrixXd> grad_log_q);

/// Sign pattern of every ReLU input in the forward pass, in layer order.
std::vector<bool> activation_pattern(const NetworkParams& params, const ForwardCache& cache);

/// Copies the running statistics produced by a train-mode forward.
void apply_running_stats(NetworkParams& params, const ForwardCache& cache);

/// log(sigmoid(x)) evaluated as -softplus(-x).
inline double log_sigmoid(double x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

/// `extra_meta` entries are stored in the header next to the configuration.
void save_params(const NetworkParams& params, const std::filesystem::path& path,
                 const nlohmann::json& extra_meta = nlohmann::json::object());

/// Header metadata of a weights file.
nlohmann::json load_params_meta(const std::filesystem::path& path);

/// Throws naming the offending tensor on any manifest mismatch. When
/// `expected_m_star` is set, a different M* is rejected.
NetworkParams load_params(const std::filesystem::path& path,
                          std::optional<int> expected_m_star = std::nullopt);

}  // namespace parsac

#endif  // PARSAC_NETWORK_HPP_

#ifndef PARSAC_IO_HPP_
#define PARSAC_IO_HPP_

#include "parsac/datagen.hpp"
#include "parsac/pipeline.hpp"
#include "parsac/scene.hpp"
#include "parsac/training.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace parsac {

class WeightProvider;

inline constexpr int kSceneFormatVersion = 1;
inline constexpr int kResultsFormatVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

using Json = nlohmann::json;

Json model_to_json(const ModelInstance& model);
ModelInstance model_from_json(const Json& j);

Json scene_to_json(const Scene& scene);
Scene scene_from_json(const Json& j);

void save_scene(const Scene& scene, const std::filesystem::path& path);
Scene load_scene(const std::filesystem::path& path);

struct NamedScene {
  std::string name;
  Scene scene;
};

/// Accepts a manifest, a directory of scene files, or a single scene file.
std::vector<NamedScene> load_scenes(const std::filesystem::path& path);

Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// --------------------------------------------------------------------------
// Configuration

GenConfig gen_config_from_json(const Json& j);
Json to_json(const GenConfig& cfg);

/// Task defaults for `phase`, overridden by any of: m_star, tau, tau_a,
/// hypotheses, alpha_s, beta, weighted, refine_vp.
PipelineParams pipeline_params_from_json(Task task, const Json& overrides, Phase phase);
Json to_json(const PipelineParams& params);

/// Defaults for the task and loss, overridden by any TrainParams field
/// (K, K_tilde, learning_rate, epochs, lr_drop_epoch, batch_size, gamma,
/// max_observations) and any pipeline field.
TrainParams train_params_from_json(Task task, const Json& j);
Json to_json(const TrainParams& params);

// --------------------------------------------------------------------------
// Results

inline const std::vector<double> kDefaultAucCutoffs = {1.0, 3.0, 5.0, 10.0};

/// Fits every scene (scene i uses substream (seed, i)) and returns the
/// results document. Per-scene metrics are filled when ground truth exists.
Json run_fit(const std::vector<NamedScene>& scenes, const WeightProvider& provider, const PipelineParams& params,
             std::uint64_t seed, int threads, const std::vector<double>& auc_cutoffs = kDefaultAucCutoffs);

/// Aggregate block recomputed from the per-scene entries.
Json compute_aggregates(const Json& scene_entries, const std::vector<double>& auc_cutoffs);

/// Throws unless the stored aggregates equal a recomputation.
void check_results_consistency(const Json& results);

/// Copy with every "timing" member removed.
Json strip_timing(const Json& results);

}  // namespace parsac

#endif  // PARSAC_IO_HPP_

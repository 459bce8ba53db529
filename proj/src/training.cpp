#include "parsac/training.hpp"

#include "parsac/metrics.hpp"
#include "parsac/parallel.hpp"
#include "parsac/tensor_file.hpp"
#include "parsac/weights.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace parsac {

namespace {

// Substream tags, kept apart from the (j, l) hypothesis paths.
constexpr std::uint64_t kSelectTag = 0x53454c454354ull;
constexpr std::uint64_t kShuffleTag = 0x53485546ull;
constexpr std::uint64_t kPadTag = 0x504144ull;
constexpr std::uint64_t kEstimatorTag = 0x455354ull;

constexpr const char* kAdamMagic = "PARSAC-ADAM";

}  // namespace

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::HungarianVp: return "hungarian_vp";
    case LossKind::Me: return "me";
    case LossKind::SelfWeighted: return "self_weighted";
    case LossKind::SelfPlain: return "self_plain";
  }
  return "?";
}

LossKind loss_kind_from_string(std::string_view name) {
  for (LossKind k : {LossKind::HungarianVp, LossKind::Me, LossKind::SelfWeighted, LossKind::SelfPlain})
    if (name == to_string(k)) return k;
  throw std::invalid_argument("unknown loss kind '" + std::string(name) + "'");
}

void TrainParams::validate(Task task) const {
  pipeline.validate(task);
  if (K < 1) throw std::invalid_argument("train: K must be at least 1");
  if (K_tilde < 1) throw std::invalid_argument("train: K_tilde must be at least 1");
  if (!(learning_rate > 0)) throw std::invalid_argument("train: learning rate must be positive");
  if (epochs < 0) throw std::invalid_argument("train: epochs must be non-negative");
  if (batch_size < 1) throw std::invalid_argument("train: batch size must be at least 1");
  if (!(gamma > 0 && gamma < 1)) throw std::invalid_argument("train: gamma must lie in (0, 1)");
  if (max_observations < 1) throw std::invalid_argument("train: max_observations must be positive");
  if (loss == LossKind::HungarianVp && task != Task::VanishingPoint)
    throw std::invalid_argument("train: the Hungarian VP loss needs the vp task");
}

TrainParams default_train_params(Task task, LossKind loss) {
  const TaskDefaults& d = task_defaults(task);
  TrainParams p;
  p.K = d.hypothesis_set_samples;
  p.K_tilde = d.model_set_samples;
  p.learning_rate = d.learning_rate;
  p.epochs = d.epochs;
  p.lr_drop_epoch = d.lr_drop_epoch;
  p.batch_size = d.batch_size;
  p.loss = loss;
  p.max_observations = d.max_observations;
  p.pipeline = default_pipeline_params(task, Phase::Train);
  return p;
}

double learning_rate_for_epoch(const TrainParams& params, int epoch) {
  return epoch > params.lr_drop_epoch ? params.learning_rate / 10.0 : params.learning_rate;
}

// --------------------------------------------------------------------------
// Losses

double task_loss_hungarian(const Eigen::MatrixXd& pairwise, double max_loss) {
  const Eigen::Index used = std::min(pairwise.rows(), pairwise.cols());
  const Eigen::Index unmatched = pairwise.cols() - used;
  const double matched = used > 0 ? hungarian_assign(pairwise.topRows(used)).cost : 0.0;
  return matched + double(unmatched) * max_loss;
}

double vp_hungarian_loss(const std::vector<ModelInstance>& models, const Scene& scene) {
  const auto errors = vp_angle_errors(models, scene);
  return std::accumulate(errors.begin(), errors.end(), 0.0);
}

double task_loss_me(std::span<const int> labels, std::span<const int> gt_labels) {
  return misclassification_error(labels, gt_labels);
}

double self_supervised_weighted_loss(std::span<const Eigen::VectorXd> residuals, double tau, double beta,
                                     double gamma) {
  if (residuals.empty()) return 0.0;
  const Eigen::Index N = residuals.front().size();
  Eigen::VectorXd rho = Eigen::VectorXd::Zero(N);
  double loss = 0, weight = 1;
  for (const auto& d : residuals) {
    weight *= gamma;
    for (Eigen::Index i = 0; i < N; ++i) rho[i] = std::max(rho[i], soft_inlier_score(d[i], tau, beta));
    loss -= weight * rho.sum();
  }
  return loss;
}

double self_supervised_weighted_loss(const std::vector<ModelInstance>& models, const Scene& scene, double tau,
                                     double beta, double gamma) {
  std::vector<Eigen::VectorXd> d;
  for (const auto& m : models) d.push_back(residuals(scene.observations, m));
  return self_supervised_weighted_loss(d, tau, beta, gamma);
}

double self_supervised_plain_loss(const std::vector<ModelInstance>& models, const Scene& scene, double tau) {
  InlierSet all(scene.size());
  for (const auto& m : models) all |= InlierSet::below(residuals(scene.observations, m), tau);
  return -double(all.count());
}

namespace {

/// Everything a loss needs about one ranked model set.
struct RankedView {
  std::vector<const ModelInstance*> models;
  std::vector<const Eigen::VectorXd*> residuals;
  std::vector<const InlierSet*> sets;
};

struct LossContext {
  LossKind kind;
  const Scene* scene;
  const PipelineParams* params;
  Eigen::Matrix3d to_camera = Eigen::Matrix3d::Identity();
  std::vector<Eigen::Vector3d> gt_vps;

  LossContext(LossKind k, const Scene& s, const PipelineParams& p) : kind(k), scene(&s), params(&p) {
    if (kind == LossKind::HungarianVp) {
      if (!s.intrinsics) throw std::invalid_argument("Hungarian VP loss: scene has no intrinsics");
      to_camera = (normalization_transform(s.width, s.height) * *s.intrinsics).inverse();
      for (const auto& m : s.gt_models) gt_vps.push_back(std::get<VanishingPoint>(m).v);
    }
    if (kind == LossKind::Me && !s.has_labels()) throw std::invalid_argument("ME loss: scene has no labels");
  }

  double operator()(const RankedView& r) const {
    switch (kind) {
      case LossKind::HungarianVp: {
        std::vector<Eigen::Vector3d> pred;
        for (const auto* m : r.models) pred.push_back(std::get<VanishingPoint>(*m).v);
        const auto errors = vp_angle_errors(pred, gt_vps, to_camera);
        return std::accumulate(errors.begin(), errors.end(), 0.0);
      }
      case LossKind::Me: {
        Eigen::MatrixXd d(static_cast<Eigen::Index>(scene->size()), static_cast<Eigen::Index>(r.residuals.size()));
        for (std::size_t k = 0; k < r.residuals.size(); ++k) d.col(k) = *r.residuals[k];
        const auto labels = assign_clusters(d, params->consensus.tau, params->tau_a);
        return task_loss_me(labels, *scene->gt_labels);
      }
      case LossKind::SelfWeighted: {
        std::vector<Eigen::VectorXd> d;
        for (const auto* x : r.residuals) d.push_back(*x);
        return self_supervised_weighted_loss(d, params->consensus.tau, params->consensus.beta, gamma);
      }
      case LossKind::SelfPlain: {
        InlierSet all(scene->size());
        for (const auto* s : r.sets) all |= *s;
        return -double(all.count());
      }
    }
    return 0;
  }

  double gamma = 0.3;
};

struct Candidate {
  ModelInstance model;
  Eigen::VectorXd residuals;
  InlierSet inliers;
};

std::optional<Candidate> make_candidate(const Hypothesis& h, const Scene& scene, const PipelineParams& params) {
  if (!h) return std::nullopt;
  Candidate c{*h, {}, {}};
  if (params.refine_vp) c.model = refine_putative(c.model, scene, params.consensus);
  c.residuals = residuals(scene.observations, c.model);
  c.inliers = InlierSet::below(c.residuals, params.consensus.tau);
  return c;
}

double ranked_loss(const LossContext& loss, const std::vector<const Candidate*>& picked, int C) {
  std::vector<InlierSet> sets;
  sets.reserve(picked.size());
  for (const auto* c : picked) sets.push_back(c->inliers);
  RankedView view;
  for (const RankingStep& step : rank_inlier_sets(sets, C)) {
    const Candidate* c = picked[step.index];
    view.models.push_back(&c->model);
    view.residuals.push_back(&c->residuals);
    view.sets.push_back(&c->inliers);
  }
  return loss(view);
}

}  // namespace

double evaluate_task_loss(LossKind kind, const Scene& scene, const std::vector<ModelInstance>& ranked,
                          const PipelineParams& params) {
  LossContext loss(kind, scene, params);
  std::vector<Eigen::VectorXd> d;
  std::vector<InlierSet> s;
  for (const auto& m : ranked) {
    d.push_back(residuals(scene.observations, m));
    s.push_back(InlierSet::below(d.back(), params.consensus.tau));
  }
  RankedView view;
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    view.models.push_back(&ranked[k]);
    view.residuals.push_back(&d[k]);
    view.sets.push_back(&s[k]);
  }
  return loss(view);
}

// --------------------------------------------------------------------------
// Estimator

void add_score_terms(const HypothesisSet& set, int j, double c_sample, const Eigen::VectorXd& c_select,
                     const WeightMatrices& weights, double alpha_s, bool weighted, Eigen::MatrixXd& grad_log_p,
                     Eigen::MatrixXd& grad_log_q) {
  if (c_sample != 0.0)
    for (const MinimalSet& ms : set.minimal_sets)
      for (int idx : ms.indices) grad_log_p(idx, j) += c_sample;

  if (!weighted || c_select.size() == 0 || (c_select.array() == 0.0).all()) return;
  if (c_select.size() != set.size()) throw std::invalid_argument("add_score_terms: one coefficient per hypothesis");
  if (set.scores.rows() != set.size())
    throw std::invalid_argument("add_score_terms: hypothesis set was scored without keeping scores");
  // d log pi(k) / d count_l = alpha (delta_kl - pi_l);  d count_l / d log q_ij = s_li q_ij
  const Eigen::VectorXd pi = selection_distribution(set, alpha_s);
  const Eigen::VectorXd w = c_select - pi * c_select.sum();
  const Eigen::VectorXd q = weights.log_q.col(j).array().exp();
  grad_log_q.col(j).array() += alpha_s * (set.scores.transpose() * w).array() * q.array();
}

UpstreamGradient reinforce_upstream(const Scene& scene, const WeightMatrices& weights, const TrainParams& params,
                                    std::uint64_t stream_seed) {
  const int M = weights.m_star();
  const auto N = static_cast<Eigen::Index>(scene.size());
  const PipelineParams& pp = params.pipeline;
  if (M != pp.m_star) throw std::invalid_argument("reinforce: weights do not match M*");
  LossContext loss(params.loss, scene, pp);
  loss.gamma = params.gamma;

  const int K = params.K, KT = params.K_tilde;
  std::vector<std::vector<HypothesisSet>> sets(K);
  std::vector<std::vector<std::vector<int>>> choices(K);  // [k][t][j]
  UpstreamGradient out;
  out.losses.resize(static_cast<std::size_t>(K) * KT);

  for (int k = 0; k < K; ++k) {
    const std::uint64_t seed_k = substream_seed(stream_seed, {std::uint64_t(k)});
    std::vector<std::vector<std::optional<Candidate>>> cand(M);
    std::vector<std::vector<double>> cdf(M);
    for (int j = 0; j < M; ++j) {
      sets[k].push_back(generate_and_select(j, scene, weights, pp.consensus, seed_k, true).set);
      const HypothesisSet& hs = sets[k].back();
      for (const auto& h : hs.hypotheses) cand[j].push_back(make_candidate(h, scene, pp));
      const Eigen::VectorXd pi = selection_distribution(hs, pp.consensus.alpha_s);
      std::partial_sum(pi.begin(), pi.end(), std::back_inserter(cdf[j]));
    }
    choices[k].assign(KT, std::vector<int>(M));
    for (int t = 0; t < KT; ++t) {
      Rng rng = substream(seed_k, {kSelectTag, std::uint64_t(t)});
      std::vector<const Candidate*> picked;
      for (int j = 0; j < M; ++j) {
        const double u = uniform01(rng) * cdf[j].back();
        auto l = static_cast<int>(std::upper_bound(cdf[j].begin(), cdf[j].end(), u) - cdf[j].begin());
        l = std::min(l, static_cast<int>(cdf[j].size()) - 1);
        choices[k][t][j] = l;
        if (cand[j][l]) picked.push_back(&*cand[j][l]);
      }
      out.losses[static_cast<std::size_t>(k) * KT + t] = ranked_loss(loss, picked, pp.consensus.minimal_set);
    }
  }

  const double total = double(K) * KT;
  const double b = std::accumulate(out.losses.begin(), out.losses.end(), 0.0) / total;
  out.mean_loss = b;
  out.grad_log_p = Eigen::MatrixXd::Zero(N, M);
  out.grad_log_q = Eigen::MatrixXd::Zero(N, M + 1);
  for (int k = 0; k < K; ++k) {
    double c_sample = 0;
    for (int t = 0; t < KT; ++t) c_sample += (out.losses[static_cast<std::size_t>(k) * KT + t] - b) / total;
    for (int j = 0; j < M; ++j) {
      Eigen::VectorXd c_select = Eigen::VectorXd::Zero(sets[k][j].size());
      for (int t = 0; t < KT; ++t)
        c_select[choices[k][t][j]] += (out.losses[static_cast<std::size_t>(k) * KT + t] - b) / total;
      add_score_terms(sets[k][j], j, c_sample, c_select, weights, pp.consensus.alpha_s, pp.consensus.weighted,
                      out.grad_log_p, out.grad_log_q);
    }
  }
  return out;
}

SceneGradient reinforce_gradient(const Scene& scene, const NetworkParams& net, const TrainParams& params,
                                 std::uint64_t stream_seed) {
  const Eigen::MatrixXd X = feature_matrix(scene);
  ForwardResult fwd = network_forward(net, std::span<const Eigen::MatrixXd>(&X, 1), Mode::Train);
  UpstreamGradient up = reinforce_upstream(scene, fwd.weights.front(), params, stream_seed);
  SceneGradient out;
  out.mean_loss = up.mean_loss;
  out.bundle = network_backward(net, fwd.cache, std::span<const Eigen::MatrixXd>(&up.grad_log_p, 1),
                                std::span<const Eigen::MatrixXd>(&up.grad_log_q, 1));
  return out;
}

// --------------------------------------------------------------------------
// Adam

AdamState init_adam(const NetworkParams& params) { return {zeros_like(params), zeros_like(params), 0}; }

bool adam_step(NetworkParams& params, const GradientBundle& grad, double lr, AdamState& state) {
  if (!all_finite(grad)) return false;
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  ++state.step;
  const double c1 = 1.0 - std::pow(b1, double(state.step));
  const double c2 = 1.0 - std::pow(b2, double(state.step));
  auto p = tensors(params);
  const auto g = tensors(grad);
  auto m = tensors(state.m);
  auto v = tensors(state.v);
  if (g.size() != p.size() || m.size() != p.size() || v.size() != p.size())
    throw std::invalid_argument("adam_step: layout mismatch");
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (!p[k].learnable) continue;
    for (Eigen::Index e = 0; e < p[k].size(); ++e) {
      const double gi = g[k].data[e];
      m[k].data[e] = b1 * m[k].data[e] + (1 - b1) * gi;
      v[k].data[e] = b2 * v[k].data[e] + (1 - b2) * gi * gi;
      p[k].data[e] -= lr * (m[k].data[e] / c1) / (std::sqrt(v[k].data[e] / c2) + eps);
    }
  }
  return true;
}

void save_adam_state(const AdamState& state, const std::filesystem::path& path) {
  TensorFile file;
  file.meta = {{"step", state.step}};
  for (const auto* bundle : {&state.m, &state.v}) {
    const std::string prefix = bundle == &state.m ? "m." : "v.";
    for (const auto& t : tensors(*bundle)) {
      if (!t.learnable) continue;
      StoredTensor st{prefix + t.name, static_cast<long>(t.rows), static_cast<long>(t.cols), {}};
      for (Eigen::Index k = 0; k < t.size(); ++k) st.values.push_back(t.at(k));
      file.tensors.push_back(std::move(st));
    }
  }
  write_tensor_file(path, kAdamMagic, file);
}

AdamState load_adam_state(const std::filesystem::path& path, const NetworkParams& params) {
  const TensorFile file = read_tensor_file(path, kAdamMagic);
  AdamState state = init_adam(params);
  state.step = file.meta.at("step").get<long>();
  std::size_t next = 0;
  for (auto* bundle : {&state.m, &state.v}) {
    const std::string prefix = bundle == &state.m ? "m." : "v.";
    for (auto& t : tensors(*bundle)) {
      if (!t.learnable) continue;
      if (next >= file.tensors.size()) throw std::runtime_error(path.string() + ": missing tensor " + prefix + t.name);
      const StoredTensor& st = file.tensors[next++];
      if (st.name != prefix + t.name || st.rows != t.rows || st.cols != t.cols)
        throw std::runtime_error(path.string() + ": tensor '" + prefix + t.name + "' does not match the network");
      for (Eigen::Index k = 0; k < t.size(); ++k) t.at(k) = st.values[k];
    }
  }
  if (next != file.tensors.size()) throw std::runtime_error(path.string() + ": unexpected extra tensors");
  return state;
}

// --------------------------------------------------------------------------
// Evaluation and training loop

EvalSummary evaluate_provider(const std::vector<Scene>& scenes, const WeightProvider& provider,
                              const PipelineParams& params, std::uint64_t seed, int threads) {
  EvalSummary s;
  s.scenes = static_cast<int>(scenes.size());
  s.me.assign(scenes.size(), 0.0);
  std::vector<std::vector<double>> vp(scenes.size());
  parallel_for(static_cast<int>(scenes.size()), threads, [&](int i) {
    const Scene& scene = scenes[i];
    const FitResult fit = parsac_fit(scene, provider, params, substream_seed(seed, {std::uint64_t(i)}), 1);
    if (scene.has_labels()) s.me[i] = misclassification_error(fit.labels, *scene.gt_labels);
    if (scene.task == Task::VanishingPoint && scene.intrinsics) vp[i] = vp_angle_errors(fit.models, scene);
  });
  for (const auto& v : vp) s.vp_errors.insert(s.vp_errors.end(), v.begin(), v.end());
  if (!scenes.empty()) s.mean_me = std::accumulate(s.me.begin(), s.me.end(), 0.0) / double(scenes.size());
  s.auc5 = auc_at(s.vp_errors, 5.0);
  return s;
}

double validation_score(Task task, const EvalSummary& summary) {
  return task == Task::VanishingPoint ? summary.auc5 : -summary.mean_me;
}

EpochStats train_epoch(const std::vector<Scene>& dataset, NetworkParams& params, AdamState& state,
                       const TrainParams& tp, int epoch, std::uint64_t seed, int threads) {
  if (dataset.empty()) throw std::invalid_argument("train_epoch: empty dataset");
  tp.validate(dataset.front().task);
  if (params.config.m_star != tp.pipeline.m_star) throw std::invalid_argument("train_epoch: network M* differs");

  std::vector<int> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng = substream(seed, {std::uint64_t(epoch), kShuffleTag});
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_int(shuffle_rng, 0, int(i) - 1)]);

  EpochStats stats;
  stats.epoch = epoch;
  const double lr = learning_rate_for_epoch(tp, epoch);
  double loss_sum = 0;
  for (std::size_t start = 0; start < order.size(); start += tp.batch_size) {
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(tp.batch_size));
    const int B = static_cast<int>(end - start);
    std::vector<Scene> batch;
    std::vector<Eigen::MatrixXd> inputs;
    for (std::size_t k = start; k < end; ++k) {
      Rng pad_rng = substream(seed, {std::uint64_t(epoch), std::uint64_t(order[k]), kPadTag});
      batch.push_back(pad_or_subsample(dataset[order[k]], tp.max_observations, pad_rng));
      inputs.push_back(feature_matrix(batch.back()));
    }
    ForwardResult fwd = network_forward(params, inputs, Mode::Train);
    std::vector<Eigen::MatrixXd> gp(B), gq(B);
    std::vector<double> losses(B);
    parallel_for(B, threads, [&](int b) {
      const std::uint64_t s = substream_seed(seed, {std::uint64_t(epoch), std::uint64_t(order[start + b]), kEstimatorTag});
      UpstreamGradient up = reinforce_upstream(batch[b], fwd.weights[b], tp, s);
      gp[b] = up.grad_log_p / double(B);
      gq[b] = up.grad_log_q / double(B);
      losses[b] = up.mean_loss;
    });
    for (double l : losses) loss_sum += l;
    const GradientBundle grad = network_backward(params, fwd.cache, gp, gq);
    if (adam_step(params, grad, lr, state)) {
      ++stats.steps;
      apply_running_stats(params, fwd.cache);
    } else {
      ++stats.skipped_steps;
    }
  }
  stats.mean_loss = loss_sum / double(dataset.size());
  return stats;
}

TrainOutcome train(const std::vector<Scene>& dataset, const std::vector<Scene>& validation, NetworkParams init,
                   const TrainParams& params, std::uint64_t seed, int threads,
                   const std::function<void(const EpochStats&)>& on_epoch) {
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  const Task task = dataset.front().task;
  PipelineParams val_params = default_pipeline_params(task, Phase::Test);
  val_params.m_star = params.pipeline.m_star;
  auto validate = [&](const NetworkParams& p) -> std::optional<double> {
    if (validation.empty()) return std::nullopt;
    return validation_score(task, evaluate_provider(validation, NeuralProvider(p), val_params, seed, threads));
  };

  TrainOutcome out;
  out.final_params = std::move(init);
  AdamState state = init_adam(out.final_params);
  EpochStats initial;
  initial.validation = validate(out.final_params);
  out.best_params = out.final_params;
  out.best_score = initial.validation.value_or(0.0);
  out.log.push_back(initial);
  if (on_epoch) on_epoch(initial);

  for (int epoch = 1; epoch <= params.epochs; ++epoch) {
    NetworkParams candidate = out.final_params;
    EpochStats stats = train_epoch(dataset, candidate, state, params, epoch, seed, threads);
    if (!std::isfinite(stats.mean_loss) || !all_finite(candidate)) {
      out.diverged = true;
      out.log.push_back(stats);
      if (on_epoch) on_epoch(stats);
      break;
    }
    out.final_params = std::move(candidate);
    stats.validation = validate(out.final_params);
    if (stats.validation && *stats.validation > out.best_score) {
      out.best_score = *stats.validation;
      out.best_params = out.final_params;
      out.best_epoch = epoch;
    }
    if (!stats.validation) {
      out.best_params = out.final_params;
      out.best_epoch = epoch;
    }
    out.log.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return out;
}

}  // namespace parsac

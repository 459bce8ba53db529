#include "parsac/gradcheck.hpp"

#include "parsac/rng.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace parsac {

namespace {

double probe_loss(const NetworkParams& net, const Eigen::MatrixXd& X, const Eigen::MatrixXd& gp,
                  const Eigen::MatrixXd& gq, std::vector<bool>* pattern) {
  ForwardResult fwd = network_forward(net, std::span<const Eigen::MatrixXd>(&X, 1), Mode::Train);
  if (pattern) *pattern = activation_pattern(net, fwd.cache);
  const WeightMatrices& w = fwd.weights.front();
  return gp.cwiseProduct(w.log_p).sum() + gq.cwiseProduct(w.log_q).sum();
}

}  // namespace

CheckReport backprop_check(std::uint64_t seed, const GradcheckOptions& opt) {
  CheckReport report;
  report.name = "network_backward vs finite differences";
  report.tolerance = opt.tolerance;
  for (int s = 0; s < opt.seeds; ++s) {
    Rng rng = substream(seed, {0x4243ull, std::uint64_t(s)});
    NetworkConfig cfg;
    cfg.width = opt.width;
    cfg.blocks = opt.blocks;
    cfg.m_star = opt.m_star;
    NetworkParams net = init_params(cfg, substream_seed(seed, {std::uint64_t(s)}));
    // Move away from the identity initialization so every path is generic.
    for (auto& t : tensors(net)) {
      if (!t.learnable) continue;
      const bool is_scale = t.name.ends_with(".scale");
      const bool is_offset = t.name.ends_with(".bias") || t.name.ends_with(".shift");
      for (Eigen::Index k = 0; k < t.size(); ++k) {
        if (is_scale) t.data[k] = uniform(rng, 0.5, 1.5);
        if (is_offset) t.data[k] = normal(rng, 0.0, 0.1);
      }
    }
    const Eigen::MatrixXd X = Eigen::MatrixXd::NullaryExpr(opt.observations, 4, [&] { return normal(rng); });
    const Eigen::MatrixXd gp = Eigen::MatrixXd::NullaryExpr(opt.observations, opt.m_star, [&] { return normal(rng); });
    const Eigen::MatrixXd gq =
        Eigen::MatrixXd::NullaryExpr(opt.observations, opt.m_star + 1, [&] { return normal(rng); });

    ForwardResult fwd = network_forward(net, std::span<const Eigen::MatrixXd>(&X, 1), Mode::Train);
    const std::vector<bool> base_pattern = activation_pattern(net, fwd.cache);
    GradientBundle analytic = network_backward(net, fwd.cache, std::span<const Eigen::MatrixXd>(&gp, 1),
                                               std::span<const Eigen::MatrixXd>(&gq, 1));
    if (opt.corrupt) {
      auto views = tensors(analytic);
      views.front().data[0] = views.front().data[0] * 1.01 + 1e-3;
    }

    const auto grads = tensors(analytic);
    auto params = tensors(net);
    for (std::size_t t = 0; t < params.size(); ++t) {
      if (!params[t].learnable) continue;
      for (Eigen::Index e = 0; e < params[t].size(); ++e) {
        double& value = params[t].data[e];
        const double original = value;
        double numeric = 0;
        double h = opt.step;
        for (int attempt = 0; attempt < 4; ++attempt, h /= 10) {
          // Fourth-order central stencil; the normalization layers make the
          // loss strongly curved, so the three-point rule is too coarse.
          bool same_pattern = true;
          double f[4];
          const double offsets[4] = {-2 * h, -h, h, 2 * h};
          for (int k = 0; k < 4; ++k) {
            std::vector<bool> pattern;
            value = original + offsets[k];
            f[k] = probe_loss(net, X, gp, gq, &pattern);
            same_pattern = same_pattern && pattern == base_pattern;
          }
          value = original;
          numeric = (f[0] - 8 * f[1] + 8 * f[2] - f[3]) / (12 * h);
          if (same_pattern) break;
        }
        const double a = grads[t].data[e];
        const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
        ++report.evaluated;
        if (err > report.max_error || report.worst.empty()) {
          report.max_error = err;
          std::ostringstream w;
          w << params[t].name << "[" << e << "] (seed " << s << ")";
          report.worst = w.str();
        }
      }
    }
  }
  report.passed = report.max_error < report.tolerance;
  return report;
}

MicroInstance micro_instance() {
  MicroInstance m;
  Scene& s = m.scene;
  s.task = Task::VanishingPoint;
  s.width = 1024;
  s.height = 1024;
  Eigen::Matrix3d K;
  K << 800, 0, 512, 0, 800, 512, 0, 0, 1;
  s.intrinsics = K;
  const Eigen::Matrix3d K_norm = normalization_transform(s.width, s.height) * K;
  const Eigen::Vector3d v1 = (K_norm * Eigen::Vector3d(0.9, 0.1, 0.4)).normalized();
  const Eigen::Vector3d v2 = (K_norm * Eigen::Vector3d(-0.2, 0.95, 0.25)).normalized();
  auto towards = [](const Eigen::Vector3d& v, double mx, double my, double half) {
    Eigen::Vector2d d = v.head<2>() - v.z() * Eigen::Vector2d(mx, my);
    d.normalize();
    return Observation::segment(mx - half * d.x(), my - half * d.y(), mx + half * d.x(), my + half * d.y());
  };
  s.observations = {towards(v1, -0.2, 0.1, 0.05), towards(v1, 0.15, -0.25, 0.04), towards(v2, 0.1, 0.2, 0.06),
                    towards(v2, -0.3, -0.1, 0.03)};
  s.gt_labels = std::vector<int>{1, 1, 2, 2};
  s.gt_models = {VanishingPoint{v1}, VanishingPoint{v2}};

  TrainParams& t = m.train;
  t.loss = LossKind::HungarianVp;
  t.pipeline.m_star = 1;
  t.pipeline.tau_a.reset();
  t.pipeline.refine_vp = false;
  t.pipeline.consensus.tau = 1e-4;
  t.pipeline.consensus.beta = 5.0;
  t.pipeline.consensus.hypotheses = 2;
  t.pipeline.consensus.minimal_set = 2;
  t.pipeline.consensus.alpha_s = 5.0;
  return m;
}

WeightMatrices weights_from_logits(const Eigen::MatrixXd& theta_p, const Eigen::MatrixXd& theta_q) {
  WeightMatrices w{theta_p, theta_q};
  for (Eigen::Index j = 0; j < w.log_p.cols(); ++j) {
    const double m = w.log_p.col(j).maxCoeff();
    w.log_p.col(j).array() -= m + std::log((w.log_p.col(j).array() - m).exp().sum());
  }
  for (Eigen::Index i = 0; i < w.log_q.rows(); ++i) {
    const double m = w.log_q.row(i).maxCoeff();
    w.log_q.row(i).array() -= m + std::log((w.log_q.row(i).array() - m).exp().sum());
  }
  return w;
}

namespace {

/// Calls fn(sets, probability) for every joint draw of S minimal sets.
template <typename Fn>
void enumerate_draws(const MicroInstance& micro, const WeightMatrices& w, Fn&& fn) {
  const int N = static_cast<int>(micro.scene.size());
  const int C = micro.train.pipeline.consensus.minimal_set;
  const int S = micro.train.pipeline.consensus.hypotheses;
  const int slots = C * S;
  std::vector<int> digits(slots, 0);
  for (;;) {
    std::vector<MinimalSet> sets(S);
    double log_prob = 0;
    for (int l = 0; l < S; ++l)
      for (int c = 0; c < C; ++c) {
        sets[l].indices.push_back(digits[l * C + c]);
        log_prob += w.log_p(digits[l * C + c], 0);
      }
    fn(std::move(sets), std::exp(log_prob));
    int k = 0;
    while (k < slots && ++digits[k] == N) digits[k++] = 0;
    if (k == slots) break;
  }
}

std::vector<double> outcome_losses(const MicroInstance& micro, const HypothesisSet& hs) {
  std::vector<double> losses;
  for (const auto& h : hs.hypotheses) {
    std::vector<Hypothesis> putative{h};
    const FitResult fit = finish_fit(putative, micro.scene, micro.train.pipeline);
    losses.push_back(evaluate_task_loss(micro.train.loss, micro.scene, fit.models, micro.train.pipeline));
  }
  return losses;
}

}  // namespace

double micro_expected_loss(const MicroInstance& micro, const WeightMatrices& w) {
  const auto& cp = micro.train.pipeline.consensus;
  double expected = 0;
  enumerate_draws(micro, w, [&](std::vector<MinimalSet> sets, double p) {
    const HypothesisSet hs = score_minimal_sets(0, micro.scene, w, cp, std::move(sets));
    const Eigen::VectorXd pi = selection_distribution(hs, cp.alpha_s);
    const auto losses = outcome_losses(micro, hs);
    for (int k = 0; k < hs.size(); ++k) expected += p * pi[k] * losses[k];
  });
  return expected;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> micro_estimator(const MicroInstance& micro, const WeightMatrices& w) {
  const auto& cp = micro.train.pipeline.consensus;
  const double b = micro_expected_loss(micro, w);
  Eigen::MatrixXd gp = Eigen::MatrixXd::Zero(w.log_p.rows(), w.log_p.cols());
  Eigen::MatrixXd gq = Eigen::MatrixXd::Zero(w.log_q.rows(), w.log_q.cols());
  enumerate_draws(micro, w, [&](std::vector<MinimalSet> sets, double p) {
    const HypothesisSet hs = score_minimal_sets(0, micro.scene, w, cp, std::move(sets), true);
    const Eigen::VectorXd pi = selection_distribution(hs, cp.alpha_s);
    const auto losses = outcome_losses(micro, hs);
    Eigen::VectorXd c_select(hs.size());
    for (int k = 0; k < hs.size(); ++k) c_select[k] = p * pi[k] * (losses[k] - b);
    add_score_terms(hs, 0, c_select.sum(), c_select, w, cp.alpha_s, cp.weighted, gp, gq);
  });
  return {gp, gq};
}

CheckReport estimator_check(std::uint64_t seed, const GradcheckOptions& opt, double tolerance) {
  CheckReport report;
  report.name = "score-function estimator vs finite differences of the expected loss";
  report.tolerance = tolerance;
  const MicroInstance micro = micro_instance();
  Rng rng = substream(seed, {0x455354ull});
  const auto N = static_cast<Eigen::Index>(micro.scene.size());
  Eigen::MatrixXd tp = Eigen::MatrixXd::NullaryExpr(N, 1, [&] { return normal(rng, 0.0, 0.7); });
  Eigen::MatrixXd tq = Eigen::MatrixXd::NullaryExpr(N, 2, [&] { return normal(rng, 0.0, 0.7); });

  const WeightMatrices w = weights_from_logits(tp, tq);
  auto [gp, gq] = micro_estimator(micro, w);
  // Chain through the log-softmax normalizations to the free logits.
  Eigen::MatrixXd ap = gp;
  for (Eigen::Index j = 0; j < gp.cols(); ++j)
    ap.col(j) = gp.col(j) - w.log_p.col(j).array().exp().matrix() * gp.col(j).sum();
  Eigen::MatrixXd aq = gq;
  for (Eigen::Index i = 0; i < gq.rows(); ++i)
    aq.row(i) = gq.row(i) - w.log_q.row(i).array().exp().matrix() * gq.row(i).sum();
  if (opt.corrupt) {
    ap *= 1.05;
    aq *= 1.05;
  }

  const double h = 1e-5;
  auto fd = [&](Eigen::MatrixXd& theta, Eigen::Index r, Eigen::Index c) {
    const double orig = theta(r, c);
    theta(r, c) = orig + h;
    const double fp = micro_expected_loss(micro, weights_from_logits(tp, tq));
    theta(r, c) = orig - h;
    const double fm = micro_expected_loss(micro, weights_from_logits(tp, tq));
    theta(r, c) = orig;
    return (fp - fm) / (2 * h);
  };
  Eigen::MatrixXd np(tp.rows(), tp.cols()), nq(tq.rows(), tq.cols());
  for (Eigen::Index r = 0; r < tp.rows(); ++r)
    for (Eigen::Index c = 0; c < tp.cols(); ++c) np(r, c) = fd(tp, r, c);
  for (Eigen::Index r = 0; r < tq.rows(); ++r)
    for (Eigen::Index c = 0; c < tq.cols(); ++c) nq(r, c) = fd(tq, r, c);

  const double num = std::sqrt((ap - np).squaredNorm() + (aq - nq).squaredNorm());
  const double den = std::sqrt(np.squaredNorm() + nq.squaredNorm());
  report.max_error = num / std::max(den, 1e-12);
  report.evaluated = static_cast<int>(np.size() + nq.size());
  report.worst = (ap - np).norm() >= (aq - nq).norm() ? "sampling logits" : "inlier logits";
  report.passed = report.max_error < tolerance;
  return report;
}

}  // namespace parsac

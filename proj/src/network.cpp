#include "parsac/network.hpp"

#include "parsac/rng.hpp"
#include "parsac/tensor_file.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace parsac {

namespace {

template <typename P, typename T>
std::vector<TensorView<T>> collect_tensors(P& params) {
  std::vector<TensorView<T>> out;
  auto add_matrix = [&](const std::string& name, auto& m, bool learnable) {
    out.push_back({name, m.data(), m.rows(), m.cols(), learnable});
  };
  auto add_vector = [&](const std::string& name, auto& v, bool learnable) {
    out.push_back({name, v.data(), v.size(), 1, learnable});
  };
  auto add_conv = [&](const std::string& prefix, auto& conv) {
    add_matrix(prefix + ".weight", conv.weight, true);
    add_vector(prefix + ".bias", conv.bias, true);
  };
  add_conv("stem", params.stem);
  for (std::size_t b = 0; b < params.blocks.size(); ++b) {
    for (int s = 0; s < 2; ++s) {
      auto& layer = params.blocks[b].layers[s];
      const std::string prefix = "blocks." + std::to_string(b) + ".layers." + std::to_string(s);
      add_conv(prefix + ".conv", layer.conv);
      add_vector(prefix + ".instance_norm.scale", layer.instance_norm.scale, true);
      add_vector(prefix + ".instance_norm.shift", layer.instance_norm.shift, true);
      add_vector(prefix + ".batch_norm.scale", layer.batch_norm.scale, true);
      add_vector(prefix + ".batch_norm.shift", layer.batch_norm.shift, true);
      add_vector(prefix + ".batch_norm.running_mean", layer.batch_norm.running_mean, false);
      add_vector(prefix + ".batch_norm.running_var", layer.batch_norm.running_var, false);
    }
  }
  add_conv("head_p", params.head_p);
  add_conv("head_q", params.head_q);
  return out;
}

Eigen::MatrixXd relu(const Eigen::MatrixXd& x) { return x.cwiseMax(0.0); }

Eigen::MatrixXd pointwise(const Eigen::MatrixXd& x, const Conv1x1& conv) {
  Eigen::MatrixXd y = x * conv.weight.transpose();
  y.rowwise() += conv.bias.transpose();
  return y;
}

struct NormIntermediates {
  Eigen::MatrixXd normalized;   // instance-normalized conv output
  Eigen::MatrixXd affine;       // after instance-norm scale/shift
  Eigen::MatrixXd batch_hat;    // batch-normalized
  Eigen::MatrixXd pre_act;      // after batch-norm scale/shift
};

NormIntermediates norm_chain(const SubLayer& layer, const ForwardCache::SubLayerCache& sc,
                             const std::vector<Eigen::Index>& offsets) {
  NormIntermediates r;
  const Eigen::MatrixXd& U = sc.pre_norm;
  r.normalized.resize(U.rows(), U.cols());
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    const Eigen::Index off = offsets[s], n = offsets[s + 1] - offsets[s];
    r.normalized.middleRows(off, n) =
        ((U.middleRows(off, n).rowwise() - sc.seg_mean.row(s)).array().rowwise() *
         sc.seg_inv_std.row(s).array())
            .matrix();
  }
  r.affine = (r.normalized.array().rowwise() * layer.instance_norm.scale.transpose().array()).matrix();
  r.affine.rowwise() += layer.instance_norm.shift.transpose();
  r.batch_hat = ((r.affine.rowwise() - sc.batch_mean).array().rowwise() * sc.batch_inv_std.array()).matrix();
  r.pre_act = (r.batch_hat.array().rowwise() * layer.batch_norm.scale.transpose().array()).matrix();
  r.pre_act.rowwise() += layer.batch_norm.shift.transpose();
  return r;
}

/// Backward through x_hat = (x - mean) * inv_std with statistics over all rows.
Eigen::MatrixXd normalize_backward(const Eigen::MatrixXd& d_hat, const Eigen::MatrixXd& x_hat,
                                   const Eigen::RowVectorXd& inv_std) {
  const double n = double(d_hat.rows());
  const Eigen::RowVectorXd mean_d = d_hat.colwise().sum() / n;
  const Eigen::RowVectorXd mean_dx = d_hat.cwiseProduct(x_hat).colwise().sum() / n;
  Eigen::MatrixXd out = d_hat.rowwise() - mean_d;
  out -= (x_hat.array().rowwise() * mean_dx.array()).matrix();
  return (out.array().rowwise() * inv_std.array()).matrix();
}

void check_config(const NetworkConfig& c) {
  if (c.input_dim < 1 || c.width < 1 || c.blocks < 0 || c.m_star < 1)
    throw std::invalid_argument("network: invalid configuration");
}

}  // namespace

std::vector<TensorView<double>> tensors(NetworkParams& params) {
  return collect_tensors<NetworkParams, double>(params);
}

std::vector<TensorView<const double>> tensors(const NetworkParams& params) {
  return collect_tensors<const NetworkParams, const double>(params);
}

NetworkParams init_params(const NetworkConfig& config, std::uint64_t seed) {
  check_config(config);
  Rng rng = substream(seed, {0x6e6574ull});
  auto conv = [&](int in, int out) {
    Conv1x1 c;
    c.weight.resize(out, in);
    const double stddev = std::sqrt(2.0 / in);
    for (Eigen::Index k = 0; k < c.weight.size(); ++k) c.weight.data()[k] = normal(rng, 0.0, stddev);
    c.bias = Eigen::VectorXd::Zero(out);
    return c;
  };
  const int W = config.width;
  NetworkParams p;
  p.config = config;
  p.stem = conv(config.input_dim, W);
  p.blocks.resize(config.blocks);
  for (auto& block : p.blocks) {
    for (auto& layer : block.layers) {
      layer.conv = conv(W, W);
      layer.instance_norm = {Eigen::VectorXd::Ones(W), Eigen::VectorXd::Zero(W)};
      layer.batch_norm = {Eigen::VectorXd::Ones(W), Eigen::VectorXd::Zero(W), Eigen::VectorXd::Zero(W),
                          Eigen::VectorXd::Ones(W)};
    }
  }
  p.head_p = conv(W, config.m_star);
  p.head_q = conv(W, config.m_star + 1);
  return p;
}

GradientBundle zeros_like(const NetworkParams& params) {
  GradientBundle g = params;
  for (auto& t : tensors(g)) std::fill(t.data, t.data + t.size(), 0.0);
  return g;
}

double max_abs(const GradientBundle& bundle) {
  double m = 0;
  for (const auto& t : tensors(bundle))
    if (t.learnable)
      for (Eigen::Index k = 0; k < t.size(); ++k) m = std::max(m, std::abs(t.data[k]));
  return m;
}

bool all_finite(const GradientBundle& bundle) {
  for (const auto& t : tensors(bundle))
    if (t.learnable)
      for (Eigen::Index k = 0; k < t.size(); ++k)
        if (!std::isfinite(t.data[k])) return false;
  return true;
}

void accumulate(GradientBundle& a, const GradientBundle& b, double scale) {
  auto ta = tensors(a);
  const auto tb = tensors(b);
  if (ta.size() != tb.size()) throw std::invalid_argument("accumulate: layout mismatch");
  for (std::size_t k = 0; k < ta.size(); ++k) {
    if (!ta[k].learnable) continue;
    if (ta[k].size() != tb[k].size()) throw std::invalid_argument("accumulate: shape mismatch in " + ta[k].name);
    for (Eigen::Index e = 0; e < ta[k].size(); ++e) ta[k].data[e] += scale * tb[k].data[e];
  }
}

ForwardResult network_forward(const NetworkParams& params, std::span<const Eigen::MatrixXd> inputs,
                              Mode mode) {
  const NetworkConfig& cfg = params.config;
  if (inputs.empty()) throw std::invalid_argument("network_forward: empty batch");
  ForwardResult result;
  ForwardCache& cache = result.cache;
  cache.mode = mode;
  cache.width = cfg.width;
  cache.m_star = cfg.m_star;
  cache.offsets.push_back(0);
  for (const auto& x : inputs) {
    if (x.rows() < 1) throw std::invalid_argument("network_forward: scene without observations");
    if (x.cols() != cfg.input_dim) throw std::invalid_argument("network_forward: wrong observation dimension");
    cache.offsets.push_back(cache.offsets.back() + x.rows());
  }
  const Eigen::Index R = cache.offsets.back();
  const auto segments = static_cast<Eigen::Index>(inputs.size());
  cache.input.resize(R, cfg.input_dim);
  for (Eigen::Index s = 0; s < segments; ++s)
    cache.input.middleRows(cache.offsets[s], inputs[s].rows()) = inputs[s];

  cache.stem_pre = pointwise(cache.input, params.stem);
  Eigen::MatrixXd act = relu(cache.stem_pre);

  for (const ResidualBlock& block : params.blocks) {
    const Eigen::MatrixXd block_in = act;
    for (const SubLayer& layer : block.layers) {
      ForwardCache::SubLayerCache sc;
      sc.input = act;
      sc.pre_norm = pointwise(act, layer.conv);
      sc.seg_mean.resize(segments, cfg.width);
      sc.seg_inv_std.resize(segments, cfg.width);
      for (Eigen::Index s = 0; s < segments; ++s) {
        const auto seg = sc.pre_norm.middleRows(cache.offsets[s], cache.offsets[s + 1] - cache.offsets[s]);
        const Eigen::RowVectorXd mean = seg.colwise().mean();
        const Eigen::RowVectorXd var = (seg.rowwise() - mean).array().square().colwise().mean();
        sc.seg_mean.row(s) = mean;
        sc.seg_inv_std.row(s) = (var.array() + cfg.instance_eps).rsqrt();
      }
      // Batch statistics need the instance-normalized affine output first.
      sc.batch_mean = Eigen::RowVectorXd::Zero(cfg.width);
      sc.batch_inv_std = Eigen::RowVectorXd::Ones(cfg.width);
      NormIntermediates partial = norm_chain(layer, sc, cache.offsets);
      if (mode == Mode::Train) {
        const Eigen::RowVectorXd mean = partial.affine.colwise().mean();
        const Eigen::RowVectorXd var = (partial.affine.rowwise() - mean).array().square().colwise().mean();
        sc.batch_mean = mean;
        sc.batch_inv_std = (var.array() + cfg.batch_eps).rsqrt();
        const double unbias = R > 1 ? double(R) / double(R - 1) : 1.0;
        const double m = cfg.momentum;
        cache.running.emplace_back(
            ((1 - m) * layer.batch_norm.running_mean.transpose() + m * mean).transpose(),
            ((1 - m) * layer.batch_norm.running_var.transpose() + m * unbias * var).transpose());
      } else {
        sc.batch_mean = layer.batch_norm.running_mean.transpose();
        sc.batch_inv_std = (layer.batch_norm.running_var.transpose().array() + cfg.batch_eps).rsqrt();
      }
      const NormIntermediates full = norm_chain(layer, sc, cache.offsets);
      act = relu(full.pre_act);
      cache.sublayers.push_back(std::move(sc));
    }
    act += block_in;
  }
  cache.trunk_out = act;
  cache.logits_p = pointwise(act, params.head_p);
  cache.logits_q = pointwise(act, params.head_q);

  const Eigen::MatrixXd lp = cache.logits_p.unaryExpr([](double x) { return log_sigmoid(x); });
  const Eigen::MatrixXd lq = cache.logits_q.unaryExpr([](double x) { return log_sigmoid(x); });
  cache.log_p.resize(lp.rows(), lp.cols());
  for (Eigen::Index s = 0; s < segments; ++s) {
    const Eigen::Index off = cache.offsets[s], n = cache.offsets[s + 1] - off;
    for (Eigen::Index j = 0; j < lp.cols(); ++j) {
      const auto col = lp.col(j).segment(off, n);
      const double m = col.maxCoeff();
      const Eigen::VectorXd shifted = col.array() - m;
      cache.log_p.col(j).segment(off, n) = shifted.array() - std::log(shifted.array().exp().sum());
    }
  }
  cache.log_q.resize(lq.rows(), lq.cols());
  for (Eigen::Index i = 0; i < R; ++i) {
    const double m = lq.row(i).maxCoeff();
    const Eigen::RowVectorXd shifted = lq.row(i).array() - m;
    cache.log_q.row(i) = shifted.array() - std::log(shifted.array().exp().sum());
  }

  result.weights.resize(inputs.size());
  for (Eigen::Index s = 0; s < segments; ++s) {
    const Eigen::Index off = cache.offsets[s], n = cache.offsets[s + 1] - off;
    result.weights[s].log_p = cache.log_p.middleRows(off, n);
    result.weights[s].log_q = cache.log_q.middleRows(off, n);
  }
  return result;
}

WeightMatrices network_forward(const NetworkParams& params, const Scene& scene, Mode mode) {
  const Eigen::MatrixXd X = feature_matrix(scene);
  return std::move(network_forward(params, std::span<const Eigen::MatrixXd>(&X, 1), mode).weights.front());
}

GradientBundle network_backward(const NetworkParams& params, const ForwardCache& cache,
                                std::span<const Eigen::MatrixXd> grad_log_p,
                                std::span<const Eigen::MatrixXd> grad_log_q) {
  if (cache.mode != Mode::Train) throw std::invalid_argument("network_backward: needs a train-mode cache");
  const auto segments = static_cast<Eigen::Index>(cache.offsets.size()) - 1;
  if (static_cast<Eigen::Index>(grad_log_p.size()) != segments ||
      static_cast<Eigen::Index>(grad_log_q.size()) != segments)
    throw std::invalid_argument("network_backward: one gradient pair per scene required");
  const Eigen::Index R = cache.offsets.back();
  const int M = cache.m_star;

  Eigen::MatrixXd g_log_p(R, M), g_log_q(R, M + 1);
  for (Eigen::Index s = 0; s < segments; ++s) {
    const Eigen::Index off = cache.offsets[s], n = cache.offsets[s + 1] - off;
    if (grad_log_p[s].rows() != n || grad_log_p[s].cols() != M || grad_log_q[s].rows() != n ||
        grad_log_q[s].cols() != M + 1)
      throw std::invalid_argument("network_backward: gradient shape mismatch for scene " + std::to_string(s));
    g_log_p.middleRows(off, n) = grad_log_p[s];
    g_log_q.middleRows(off, n) = grad_log_q[s];
  }

  GradientBundle g = zeros_like(params);

  // Through the log-sum-exp normalizations.
  Eigen::MatrixXd g_pre_p(R, M);
  for (Eigen::Index s = 0; s < segments; ++s) {
    const Eigen::Index off = cache.offsets[s], n = cache.offsets[s + 1] - off;
    const Eigen::RowVectorXd col_sum = g_log_p.middleRows(off, n).colwise().sum();
    g_pre_p.middleRows(off, n) =
        g_log_p.middleRows(off, n) -
        (cache.log_p.middleRows(off, n).array().exp().rowwise() * col_sum.array()).matrix();
  }
  const Eigen::VectorXd row_sum = g_log_q.rowwise().sum();
  const Eigen::MatrixXd g_pre_q =
      g_log_q - (cache.log_q.array().exp().colwise() * row_sum.array()).matrix();

  // d log_sigmoid(x) / dx = sigmoid(-x)
  auto sigmoid_neg = [](double x) { return 1.0 / (1.0 + std::exp(x)); };
  const Eigen::MatrixXd g_lp = g_pre_p.cwiseProduct(cache.logits_p.unaryExpr(sigmoid_neg));
  const Eigen::MatrixXd g_lq = g_pre_q.cwiseProduct(cache.logits_q.unaryExpr(sigmoid_neg));

  g.head_p.weight = g_lp.transpose() * cache.trunk_out;
  g.head_p.bias = g_lp.colwise().sum().transpose();
  g.head_q.weight = g_lq.transpose() * cache.trunk_out;
  g.head_q.bias = g_lq.colwise().sum().transpose();
  Eigen::MatrixXd d_act = g_lp * params.head_p.weight + g_lq * params.head_q.weight;

  for (Eigen::Index b = static_cast<Eigen::Index>(params.blocks.size()) - 1; b >= 0; --b) {
    const Eigen::MatrixXd d_block_out = d_act;
    Eigen::MatrixXd d = d_act;
    for (int s = 1; s >= 0; --s) {
      const SubLayer& layer = params.blocks[b].layers[s];
      SubLayer& grad = g.blocks[b].layers[s];
      const auto& sc = cache.sublayers[2 * b + s];
      const NormIntermediates mid = norm_chain(layer, sc, cache.offsets);

      const Eigen::MatrixXd d_pre = d.cwiseProduct((mid.pre_act.array() > 0).cast<double>().matrix());
      grad.batch_norm.scale = d_pre.cwiseProduct(mid.batch_hat).colwise().sum().transpose();
      grad.batch_norm.shift = d_pre.colwise().sum().transpose();
      const Eigen::MatrixXd d_bhat =
          (d_pre.array().rowwise() * layer.batch_norm.scale.transpose().array()).matrix();
      const Eigen::MatrixXd d_affine = normalize_backward(d_bhat, mid.batch_hat, sc.batch_inv_std);

      grad.instance_norm.scale = d_affine.cwiseProduct(mid.normalized).colwise().sum().transpose();
      grad.instance_norm.shift = d_affine.colwise().sum().transpose();
      const Eigen::MatrixXd d_norm =
          (d_affine.array().rowwise() * layer.instance_norm.scale.transpose().array()).matrix();
      Eigen::MatrixXd d_conv(R, cache.width);
      for (Eigen::Index seg = 0; seg < segments; ++seg) {
        const Eigen::Index off = cache.offsets[seg], n = cache.offsets[seg + 1] - off;
        d_conv.middleRows(off, n) = normalize_backward(d_norm.middleRows(off, n), mid.normalized.middleRows(off, n),
                                                       sc.seg_inv_std.row(seg));
      }
      grad.conv.weight = d_conv.transpose() * sc.input;
      grad.conv.bias = d_conv.colwise().sum().transpose();
      d = d_conv * layer.conv.weight;
    }
    d_act = d + d_block_out;
  }

  const Eigen::MatrixXd d_stem = d_act.cwiseProduct((cache.stem_pre.array() > 0).cast<double>().matrix());
  g.stem.weight = d_stem.transpose() * cache.input;
  g.stem.bias = d_stem.colwise().sum().transpose();
  return g;
}

std::vector<bool> activation_pattern(const NetworkParams& params, const ForwardCache& cache) {
  std::vector<bool> out;
  auto append = [&](const Eigen::MatrixXd& m) {
    for (Eigen::Index k = 0; k < m.size(); ++k) out.push_back(m.data()[k] > 0);
  };
  append(cache.stem_pre);
  for (std::size_t b = 0; b < params.blocks.size(); ++b)
    for (int s = 0; s < 2; ++s)
      append(norm_chain(params.blocks[b].layers[s], cache.sublayers[2 * b + s], cache.offsets).pre_act);
  return out;
}

void apply_running_stats(NetworkParams& params, const ForwardCache& cache) {
  if (cache.mode != Mode::Train) return;
  if (cache.running.size() != 2 * params.blocks.size())
    throw std::invalid_argument("apply_running_stats: cache does not match network");
  for (std::size_t b = 0; b < params.blocks.size(); ++b)
    for (int s = 0; s < 2; ++s) {
      auto& bn = params.blocks[b].layers[s].batch_norm;
      bn.running_mean = cache.running[2 * b + s].first;
      bn.running_var = cache.running[2 * b + s].second;
    }
}

// --------------------------------------------------------------------------
// Tensor container

namespace {

void put_le(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  char bytes[8];
  for (int k = 0; k < 8; ++k) bytes[k] = static_cast<char>((bits >> (8 * k)) & 0xff);
  out.write(bytes, 8);
}

double get_le(std::istream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  if (!in) throw std::runtime_error("tensor file: truncated payload");
  std::uint64_t bits = 0;
  for (int k = 0; k < 8; ++k) bits |= std::uint64_t(bytes[k]) << (8 * k);
  return std::bit_cast<double>(bits);
}

}  // namespace

void write_tensor_file(const std::filesystem::path& path, const std::string& magic, const TensorFile& file) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  nlohmann::json header;
  header["format_version"] = file.format_version;
  header["meta"] = file.meta;
  header["tensors"] = nlohmann::json::array();
  for (const auto& t : file.tensors) header["tensors"].push_back({{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}});
  out << magic << '\n' << header.dump() << '\n';
  for (const auto& t : file.tensors) {
    if (static_cast<long>(t.values.size()) != t.rows * t.cols)
      throw std::invalid_argument("tensor file: size mismatch in " + t.name);
    for (double v : t.values) put_le(out, v);
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

TensorFile read_tensor_file(const std::filesystem::path& path, const std::string& magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != magic) throw std::runtime_error(path.string() + ": not a '" + magic + "' file");
  std::getline(in, line);
  const nlohmann::json header = nlohmann::json::parse(line);
  TensorFile file;
  file.format_version = header.at("format_version").get<int>();
  if (file.format_version != kTensorFileVersion)
    throw std::runtime_error(path.string() + ": unsupported format version " + std::to_string(file.format_version));
  file.meta = header.at("meta");
  for (const auto& entry : header.at("tensors")) {
    StoredTensor t;
    t.name = entry.at("name").get<std::string>();
    t.rows = entry.at("rows").get<long>();
    t.cols = entry.at("cols").get<long>();
    t.values.resize(static_cast<std::size_t>(t.rows * t.cols));
    for (double& v : t.values) v = get_le(in);
    file.tensors.push_back(std::move(t));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw std::runtime_error(path.string() + ": trailing bytes");
  return file;
}

// --------------------------------------------------------------------------
// Weights file

namespace {
constexpr const char* kWeightsMagic = "PARSAC-WEIGHTS";
}

void save_params(const NetworkParams& params, const std::filesystem::path& path,
                 const nlohmann::json& extra_meta) {
  TensorFile file;
  const auto& c = params.config;
  file.meta = extra_meta.is_object() ? extra_meta : nlohmann::json::object();
  file.meta.update(nlohmann::json{{"m_star", c.m_star},         {"input_dim", c.input_dim}, {"width", c.width},
               {"blocks", c.blocks},         {"instance_eps", c.instance_eps},
               {"batch_eps", c.batch_eps},   {"momentum", c.momentum}});
  for (const auto& t : tensors(params)) {
    StoredTensor st{t.name, static_cast<long>(t.rows), static_cast<long>(t.cols), {}};
    st.values.resize(static_cast<std::size_t>(t.size()));
    for (Eigen::Index k = 0; k < t.size(); ++k) st.values[k] = t.at(k);
    file.tensors.push_back(std::move(st));
  }
  write_tensor_file(path, kWeightsMagic, file);
}

nlohmann::json load_params_meta(const std::filesystem::path& path) {
  return read_tensor_file(path, kWeightsMagic).meta;
}

NetworkParams load_params(const std::filesystem::path& path, std::optional<int> expected_m_star) {
  const TensorFile file = read_tensor_file(path, kWeightsMagic);
  NetworkConfig c;
  c.m_star = file.meta.at("m_star").get<int>();
  c.input_dim = file.meta.at("input_dim").get<int>();
  c.width = file.meta.at("width").get<int>();
  c.blocks = file.meta.at("blocks").get<int>();
  c.instance_eps = file.meta.at("instance_eps").get<double>();
  c.batch_eps = file.meta.at("batch_eps").get<double>();
  c.momentum = file.meta.at("momentum").get<double>();
  if (expected_m_star && *expected_m_star != c.m_star)
    throw std::runtime_error(path.string() + ": weights are for M* = " + std::to_string(c.m_star) +
                             ", expected " + std::to_string(*expected_m_star) + " (tensor head_p.weight)");
  NetworkParams params = init_params(c, 0);
  auto views = tensors(params);
  if (views.size() != file.tensors.size())
    throw std::runtime_error(path.string() + ": expected " + std::to_string(views.size()) + " tensors, found " +
                             std::to_string(file.tensors.size()));
  for (std::size_t k = 0; k < views.size(); ++k) {
    const auto& st = file.tensors[k];
    if (st.name != views[k].name || st.rows != views[k].rows || st.cols != views[k].cols)
      throw std::runtime_error(path.string() + ": tensor '" + views[k].name + "' expected shape " +
                               std::to_string(views[k].rows) + "x" + std::to_string(views[k].cols) + ", found '" +
                               st.name + "' " + std::to_string(st.rows) + "x" + std::to_string(st.cols));
    for (Eigen::Index e = 0; e < views[k].size(); ++e) views[k].at(e) = st.values[e];
  }
  return params;
}

}  // namespace parsac

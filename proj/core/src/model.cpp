#include "termrel/model.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "termrel/error.hpp"
#include "termrel/log.hpp"
#include "termrel/metrics.hpp"

namespace termrel {

namespace {

constexpr double kProbClamp = 1e-7;

// P = A_hat * M, rows accumulated in CSR column order so the summation
// order is fixed for every caller.
Mat aggregate(const NormAdjacency& adj, const Mat& m) {
  Mat out = Mat::Zero(m.rows(), m.cols());
  for (int i = 0; i < adj.n; ++i) {
    for (std::int64_t p = adj.row_ptr[static_cast<std::size_t>(i)];
         p < adj.row_ptr[static_cast<std::size_t>(i) + 1]; ++p) {
      out.row(i) += adj.vals[static_cast<std::size_t>(p)] *
                    m.row(adj.cols[static_cast<std::size_t>(p)]);
    }
  }
  return out;
}

Vec sigmoid(const Vec& v) {
  return (1.0 / (1.0 + (-v.array()).exp())).matrix();
}

void glorot_init(Mat& w, Rng& rng) {
  const double limit =
      std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    w.data()[i] = rng.uniform(-limit, limit);
  }
}

DenseLayer make_layer(int out, int in, Rng& rng) {
  DenseLayer layer;
  layer.w = Mat::Zero(out, in);
  glorot_init(layer.w, rng);
  layer.b = Vec::Zero(out);
  return layer;
}

DenseLayer zero_like(const DenseLayer& layer) {
  return {Mat::Zero(layer.w.rows(), layer.w.cols()),
          Vec::Zero(layer.b.size())};
}

ModelParams zero_like(const ModelParams& params) {
  ModelParams g;
  g.mode = params.mode;
  g.input_dim = params.input_dim;
  g.hidden = params.hidden;
  g.levels = params.levels;
  g.alpha = params.alpha;
  for (const auto& l : params.gcn) g.gcn.push_back(zero_like(l));
  for (const auto& bn : params.bn) {
    BatchNormState s;
    s.gamma = Vec::Zero(bn.gamma.size());
    s.beta = Vec::Zero(bn.beta.size());
    s.running_mean = Vec::Zero(bn.running_mean.size());
    s.running_var = Vec::Zero(bn.running_var.size());
    g.bn.push_back(std::move(s));
  }
  for (const auto& l : params.global) g.global.push_back(zero_like(l));
  g.global_out = params.mode == ModelMode::HiCFL ? zero_like(params.global_out)
                                                 : DenseLayer{};
  for (const auto& l : params.local_hidden) {
    g.local_hidden.push_back(zero_like(l));
  }
  for (const auto& l : params.local_out) g.local_out.push_back(zero_like(l));
  return g;
}

struct LayerCache {
  Mat m;        // h_in * W^T
  Mat a;        // aggregate(m) + b
  Vec mu, var;  // batch statistics (non-output layers, training mode)
  Mat xhat;
  Mat pre_act;  // batch-normed pre-activation
  Mat drop_mask;
  Mat h_out;
};

void batch_norm_forward(const BatchNormState& bn, const Mat& a, bool training,
                        LayerCache& cache) {
  const auto rows = a.rows();
  cache.pre_act.resize(a.rows(), a.cols());
  if (training) {
    cache.xhat.resize(a.rows(), a.cols());
    cache.mu.resize(a.cols());
    cache.var.resize(a.cols());
    for (Eigen::Index k = 0; k < a.cols(); ++k) {
      const double mu = a.col(k).mean();
      const double var =
          (a.col(k).array() - mu).square().sum() / static_cast<double>(rows);
      cache.mu[k] = mu;
      cache.var[k] = var;
      const double inv_std = 1.0 / std::sqrt(var + BatchNormState::kEps);
      cache.xhat.col(k) = (a.col(k).array() - mu) * inv_std;
      cache.pre_act.col(k) =
          bn.gamma[k] * cache.xhat.col(k).array() + bn.beta[k];
    }
  } else {
    for (Eigen::Index k = 0; k < a.cols(); ++k) {
      const double inv_std =
          1.0 / std::sqrt(bn.running_var[k] + BatchNormState::kEps);
      cache.pre_act.col(k) =
          bn.gamma[k] * ((a.col(k).array() - bn.running_mean[k]) * inv_std) +
          bn.beta[k];
    }
  }
}

void batch_norm_update_running(BatchNormState& bn, const LayerCache& cache,
                               Eigen::Index rows) {
  const double m = BatchNormState::kMomentum;
  const double unbias =
      rows > 1 ? static_cast<double>(rows) / static_cast<double>(rows - 1)
               : 1.0;
  bn.running_mean = m * bn.running_mean + (1.0 - m) * cache.mu;
  bn.running_var = m * bn.running_var + (1.0 - m) * (unbias * cache.var);
}

// Returns dA given the gradient at the normalized output.
Mat batch_norm_backward(const BatchNormState& bn, const LayerCache& cache,
                        const Mat& a, const Mat& d_out, Vec& d_gamma,
                        Vec& d_beta) {
  const auto rows = static_cast<double>(a.rows());
  Mat da(a.rows(), a.cols());
  for (Eigen::Index k = 0; k < a.cols(); ++k) {
    const double inv_std = 1.0 / std::sqrt(cache.var[k] + BatchNormState::kEps);
    d_gamma[k] += (d_out.col(k).array() * cache.xhat.col(k).array()).sum();
    d_beta[k] += d_out.col(k).sum();
    Eigen::ArrayXd dxhat = d_out.col(k).array() * bn.gamma[k];
    Eigen::ArrayXd centered = a.col(k).array() - cache.mu[k];
    const double dvar =
        (dxhat * centered).sum() * -0.5 * inv_std * inv_std * inv_std;
    const double dmu = -inv_std * dxhat.sum();
    da.col(k) =
        dxhat * inv_std + centered * (2.0 * dvar / rows) + dmu / rows;
  }
  return da;
}

struct HeadCache {
  std::vector<Mat> u;       // global pre-activations per level
  std::vector<Mat> a_glob;  // relu(u)
  Vec global_logit;
  std::vector<Mat> t;      // local hidden pre-activations
  std::vector<Mat> a_loc;  // relu(t)
  std::vector<Vec> local_logit;
};

void heads_forward(const ModelParams& params, const Mat& h, HeadCache& cache,
                   ModelOutputs& out) {
  const int levels = params.levels;
  if (levels < 1) throw_validation("hierarchy heads need >= 1 level");
  cache.u.resize(static_cast<std::size_t>(levels));
  cache.a_glob.resize(static_cast<std::size_t>(levels));
  cache.t.resize(static_cast<std::size_t>(levels));
  cache.a_loc.resize(static_cast<std::size_t>(levels));
  cache.local_logit.resize(static_cast<std::size_t>(levels));
  out.z_local.resize(static_cast<std::size_t>(levels));
  for (int l = 0; l < levels; ++l) {
    auto li = static_cast<std::size_t>(l);
    const DenseLayer& layer = params.global[li];
    Mat& u = cache.u[li];
    if (l == 0) {
      u.noalias() = h * layer.w.transpose();
    } else {
      // input is the concatenation [a^(l); h]
      u.noalias() = cache.a_glob[li - 1] *
                        layer.w.leftCols(params.hidden).transpose() +
                    h * layer.w.rightCols(h.cols()).transpose();
    }
    u.rowwise() += layer.b.transpose();
    cache.a_glob[li] = u.cwiseMax(0.0);

    const DenseLayer& lh = params.local_hidden[li];
    cache.t[li].noalias() = cache.a_glob[li] * lh.w.transpose();
    cache.t[li].rowwise() += lh.b.transpose();
    cache.a_loc[li] = cache.t[li].cwiseMax(0.0);

    const DenseLayer& lo = params.local_out[li];
    cache.local_logit[li].noalias() =
        cache.a_loc[li] * lo.w.row(0).transpose();
    cache.local_logit[li].array() += lo.b[0];
    out.z_local[li] = sigmoid(cache.local_logit[li]);
  }
  cache.global_logit.noalias() =
      cache.a_glob.back() * params.global_out.w.row(0).transpose();
  cache.global_logit.array() += params.global_out.b[0];
  out.z_global = sigmoid(cache.global_logit);
}

}  // namespace

ModelParams init_params(const TrainConfig& config, int input_dim, int levels) {
  if (config.hidden < 1) throw_config("hidden dimension must be >= 1");
  if (config.gcn_layers < 1) throw_config("need >= 1 graph conv layer");
  if (input_dim < 1) throw_config("input dimension must be >= 1");
  if (config.mode == ModelMode::HiCFL && levels < 1) {
    throw_config("hierarchical mode needs >= 1 hierarchy level");
  }
  if (config.alpha < 0.0 || config.alpha > 1.0) {
    throw_config("alpha must lie in [0, 1]");
  }
  Rng rng(config.seed);
  ModelParams params;
  params.mode = config.mode;
  params.input_dim = input_dim;
  params.hidden = config.hidden;
  params.levels = config.mode == ModelMode::HiCFL ? levels : 0;
  params.alpha = config.alpha;

  const int out_last = config.mode == ModelMode::CFL ? 1 : config.hidden;
  for (int l = 0; l < config.gcn_layers; ++l) {
    const int in = l == 0 ? input_dim : config.hidden;
    const int out = l == config.gcn_layers - 1 ? out_last : config.hidden;
    params.gcn.push_back(make_layer(out, in, rng));
    if (l != config.gcn_layers - 1) {
      BatchNormState bn;
      bn.gamma = Vec::Ones(out);
      bn.beta = Vec::Zero(out);
      bn.running_mean = Vec::Zero(out);
      bn.running_var = Vec::Ones(out);
      params.bn.push_back(std::move(bn));
    }
  }
  if (config.mode == ModelMode::HiCFL) {
    for (int l = 0; l < levels; ++l) {
      const int in = l == 0 ? out_last : config.hidden + out_last;
      params.global.push_back(make_layer(config.hidden, in, rng));
    }
    params.global_out = make_layer(1, config.hidden, rng);
    for (int l = 0; l < levels; ++l) {
      params.local_hidden.push_back(make_layer(config.hidden, config.hidden, rng));
      params.local_out.push_back(make_layer(1, config.hidden, rng));
    }
  }
  return params;
}

std::vector<TensorRef> parameter_refs(ModelParams& params) {
  std::vector<TensorRef> refs;
  auto add_mat = [&refs](const std::string& name, Mat& m) {
    refs.push_back({name, m.data(), static_cast<std::size_t>(m.size())});
  };
  auto add_vec = [&refs](const std::string& name, Vec& v) {
    refs.push_back({name, v.data(), static_cast<std::size_t>(v.size())});
  };
  for (std::size_t l = 0; l < params.gcn.size(); ++l) {
    add_mat("gcn" + std::to_string(l) + ".w", params.gcn[l].w);
    add_vec("gcn" + std::to_string(l) + ".b", params.gcn[l].b);
  }
  for (std::size_t l = 0; l < params.bn.size(); ++l) {
    add_vec("bn" + std::to_string(l) + ".gamma", params.bn[l].gamma);
    add_vec("bn" + std::to_string(l) + ".beta", params.bn[l].beta);
  }
  for (std::size_t l = 0; l < params.global.size(); ++l) {
    add_mat("global" + std::to_string(l) + ".w", params.global[l].w);
    add_vec("global" + std::to_string(l) + ".b", params.global[l].b);
  }
  if (params.mode == ModelMode::HiCFL) {
    add_mat("global_out.w", params.global_out.w);
    add_vec("global_out.b", params.global_out.b);
  }
  for (std::size_t l = 0; l < params.local_hidden.size(); ++l) {
    add_mat("local_hidden" + std::to_string(l) + ".w", params.local_hidden[l].w);
    add_vec("local_hidden" + std::to_string(l) + ".b", params.local_hidden[l].b);
  }
  for (std::size_t l = 0; l < params.local_out.size(); ++l) {
    add_mat("local_out" + std::to_string(l) + ".w", params.local_out[l].w);
    add_vec("local_out" + std::to_string(l) + ".b", params.local_out[l].b);
  }
  return refs;
}

namespace {

// Runs the graph-convolution stack, filling one cache entry per layer.
// Non-output layers: aggregate -> affine -> batch norm -> relu -> dropout.
// The output layer stops after the affine map.
void gcn_stack(ModelParams& params, const NormAdjacency& adj, const Mat& x,
               double dropout, const ForwardOptions& opts,
               std::vector<LayerCache>& caches) {
  if (adj.n != x.rows()) {
    throw_numeric("adjacency and feature matrix disagree on node count");
  }
  if (x.cols() != params.input_dim) {
    throw_numeric("feature dimension " + std::to_string(x.cols()) +
                  " does not match model input " +
                  std::to_string(params.input_dim));
  }
  const int layer_count = params.gcn_layer_count();
  caches.resize(static_cast<std::size_t>(layer_count));
  const Mat* h_in = &x;
  for (int l = 0; l < layer_count; ++l) {
    auto li = static_cast<std::size_t>(l);
    LayerCache& cache = caches[li];
    cache.m.noalias() = *h_in * params.gcn[li].w.transpose();
    cache.a = aggregate(adj, cache.m);
    cache.a.rowwise() += params.gcn[li].b.transpose();
    if (l == layer_count - 1) {
      cache.h_out = cache.a;
      break;
    }
    batch_norm_forward(params.bn[li], cache.a, opts.training, cache);
    if (opts.training && opts.update_running) {
      batch_norm_update_running(params.bn[li], cache, cache.a.rows());
    }
    cache.h_out = cache.pre_act.cwiseMax(0.0);
    if (opts.training && opts.dropout_rng != nullptr && dropout > 0.0) {
      const double keep = 1.0 - dropout;
      cache.drop_mask.resize(cache.h_out.rows(), cache.h_out.cols());
      for (Eigen::Index i = 0; i < cache.drop_mask.size(); ++i) {
        cache.drop_mask.data()[i] =
            opts.dropout_rng->uniform() < keep ? 1.0 / keep : 0.0;
      }
      cache.h_out.array() *= cache.drop_mask.array();
    }
    h_in = &cache.h_out;
  }
}

ModelOutputs outputs_from(const ModelParams& params,
                          std::vector<LayerCache>& caches, HeadCache* heads) {
  ModelOutputs out;
  out.hidden = caches.back().h_out;
  if (params.mode == ModelMode::CFL) {
    out.z = sigmoid(out.hidden.col(0));
    out.s = out.z;
  } else {
    HeadCache local;
    HeadCache& cache = heads != nullptr ? *heads : local;
    heads_forward(params, out.hidden, cache, out);
    out.s = hicfl_score(out, params.alpha);
  }
  return out;
}

}  // namespace

std::vector<Mat> gcn_forward(ModelParams& params, const NormAdjacency& adj,
                             const Mat& x, double dropout,
                             const ForwardOptions& opts) {
  std::vector<LayerCache> caches;
  gcn_stack(params, adj, x, dropout, opts, caches);
  std::vector<Mat> hs;
  hs.reserve(caches.size());
  for (LayerCache& cache : caches) hs.push_back(std::move(cache.h_out));
  return hs;
}

ModelOutputs hicfl_forward(const ModelParams& params, const Mat& h) {
  if (params.mode != ModelMode::HiCFL) {
    throw_config("hicfl_forward requires a hierarchical model");
  }
  ModelOutputs out;
  out.hidden = h;
  HeadCache cache;
  heads_forward(params, h, cache, out);
  out.s = hicfl_score(out, params.alpha);
  return out;
}

ModelOutputs model_forward(ModelParams& params, const NormAdjacency& adj,
                           const Mat& x, double dropout,
                           const ForwardOptions& opts) {
  std::vector<LayerCache> caches;
  gcn_stack(params, adj, x, dropout, opts, caches);
  return outputs_from(params, caches, nullptr);
}

double masked_bce(const Vec& z, const std::vector<signed char>& labels,
                  const std::vector<int>& mask) {
  if (mask.empty()) throw_validation("loss mask is empty");
  double loss = 0.0;
  for (int id : mask) {
    if (id < 0 || id >= z.size()) {
      throw_validation("loss mask id out of range: " + std::to_string(id));
    }
    const signed char y = labels[static_cast<std::size_t>(id)];
    if (y < 0) {
      throw_validation("unlabeled node " + std::to_string(id) +
                       " inside a loss mask");
    }
    const double p =
        std::clamp(z[id], kProbClamp, 1.0 - kProbClamp);
    loss -= y == 1 ? std::log(p) : std::log(1.0 - p);
  }
  return loss;
}

Supervision cfl_supervision(const LabelMatrix& matrix, int level,
                            const std::vector<int>& mask) {
  if (level < 0 || level >= matrix.depth()) {
    throw_validation("label level out of range");
  }
  Supervision sup;
  sup.level_labels.push_back(matrix.y[static_cast<std::size_t>(level)]);
  std::vector<int> filtered;
  for (int id : mask) {
    if (sup.level_labels[0][static_cast<std::size_t>(id)] >= 0) {
      filtered.push_back(id);
    }
  }
  sup.level_masks.push_back(std::move(filtered));
  return sup;
}

Supervision hicfl_supervision(const LabelMatrix& matrix,
                              const std::vector<int>& mask) {
  Supervision sup;
  for (int level = 0; level < matrix.depth(); ++level) {
    Supervision one = cfl_supervision(matrix, level, mask);
    sup.level_labels.push_back(std::move(one.level_labels[0]));
    sup.level_masks.push_back(std::move(one.level_masks[0]));
  }
  return sup;
}

Supervision pu_supervision(const LabelMatrix& matrix, const PULabelSet& pu,
                           const std::vector<int>& mask) {
  Supervision sup = hicfl_supervision(matrix, mask);
  std::vector<signed char> target(static_cast<std::size_t>(matrix.n), -1);
  for (int id : pu.positives) target[static_cast<std::size_t>(id)] = 1;
  for (int id : pu.reliable_negatives) {
    target[static_cast<std::size_t>(id)] = 0;
  }
  std::vector<int> target_mask;
  for (int id : mask) {
    if (target[static_cast<std::size_t>(id)] >= 0) target_mask.push_back(id);
  }
  sup.level_labels.push_back(std::move(target));
  sup.level_masks.push_back(std::move(target_mask));
  return sup;
}

double cfl_loss(const ModelOutputs& out, const Supervision& sup) {
  if (sup.level_labels.size() != 1) {
    throw_validation("flat loss expects exactly one supervised level");
  }
  return masked_bce(out.z, sup.level_labels[0], sup.level_masks[0]);
}

double hicfl_loss(const ModelOutputs& out, const Supervision& sup) {
  if (sup.level_labels.size() != out.z_local.size()) {
    throw_validation("hierarchical loss: level count mismatch (" +
                     std::to_string(sup.level_labels.size()) + " vs " +
                     std::to_string(out.z_local.size()) + ")");
  }
  double loss =
      masked_bce(out.z_global, sup.level_labels.back(), sup.level_masks.back());
  for (std::size_t l = 0; l < out.z_local.size(); ++l) {
    loss += masked_bce(out.z_local[l], sup.level_labels[l], sup.level_masks[l]);
  }
  return loss;
}

Vec hicfl_score(const ModelOutputs& out, double alpha) {
  Vec product = Vec::Ones(out.z_global.size());
  for (const Vec& zq : out.z_local) {
    product.array() *= zq.array();
  }
  return alpha * out.z_global + (1.0 - alpha) * product;
}

namespace {

// (z - y) on the mask, zero elsewhere: the fused sigmoid + cross-entropy
// gradient at the logit.
Vec bce_logit_grad(const Vec& z, const std::vector<signed char>& labels,
                   const std::vector<int>& mask) {
  Vec g = Vec::Zero(z.size());
  for (int id : mask) {
    g[id] = z[id] - static_cast<double>(labels[static_cast<std::size_t>(id)]);
  }
  return g;
}

}  // namespace

double loss_and_gradients(ModelParams& params, const NormAdjacency& adj,
                          const Mat& x, const Supervision& sup,
                          double dropout, const ForwardOptions& opts,
                          ModelParams* grads) {
  std::vector<LayerCache> caches;
  gcn_stack(params, adj, x, dropout, opts, caches);
  HeadCache heads;
  ModelOutputs out = outputs_from(params, caches, &heads);

  double loss = params.mode == ModelMode::CFL ? cfl_loss(out, sup)
                                              : hicfl_loss(out, sup);
  if (grads == nullptr) return loss;
  ModelParams& g = *grads;

  // --- heads / output gradient ------------------------------------------
  Mat d_hidden;  // gradient at the gcn output
  if (params.mode == ModelMode::CFL) {
    Vec gz = bce_logit_grad(out.z, sup.level_labels[0], sup.level_masks[0]);
    d_hidden = gz;  // n x 1
  } else {
    const int levels = params.levels;
    d_hidden = Mat::Zero(x.rows(), params.hidden);
    std::vector<Mat> d_ap(static_cast<std::size_t>(levels));
    for (auto& m : d_ap) m = Mat::Zero(x.rows(), params.hidden);

    Vec g_p = bce_logit_grad(out.z_global, sup.level_labels.back(),
                             sup.level_masks.back());
    g.global_out.w.row(0).noalias() +=
        g_p.transpose() * heads.a_glob.back();
    g.global_out.b[0] += g_p.sum();
    d_ap.back().noalias() += g_p * params.global_out.w.row(0);

    for (int l = 0; l < levels; ++l) {
      auto li = static_cast<std::size_t>(l);
      Vec g_q =
          bce_logit_grad(out.z_local[li], sup.level_labels[li], sup.level_masks[li]);
      g.local_out[li].w.row(0).noalias() += g_q.transpose() * heads.a_loc[li];
      g.local_out[li].b[0] += g_q.sum();
      Mat d_aloc = g_q * params.local_out[li].w.row(0);
      Mat d_t = (heads.t[li].array() > 0.0).select(d_aloc, 0.0);
      g.local_hidden[li].w.noalias() += d_t.transpose() * heads.a_glob[li];
      g.local_hidden[li].b += d_t.colwise().sum().transpose();
      d_ap[li].noalias() += d_t * params.local_hidden[li].w;
    }

    for (int l = levels - 1; l >= 0; --l) {
      auto li = static_cast<std::size_t>(l);
      Mat d_u = (heads.u[li].array() > 0.0).select(d_ap[li], 0.0);
      g.global[li].b += d_u.colwise().sum().transpose();
      if (l == 0) {
        g.global[li].w.noalias() += d_u.transpose() * out.hidden;
        d_hidden.noalias() += d_u * params.global[li].w;
      } else {
        g.global[li].w.leftCols(params.hidden).noalias() +=
            d_u.transpose() * heads.a_glob[li - 1];
        g.global[li].w.rightCols(out.hidden.cols()).noalias() +=
            d_u.transpose() * out.hidden;
        d_ap[li - 1].noalias() +=
            d_u * params.global[li].w.leftCols(params.hidden);
        d_hidden.noalias() +=
            d_u * params.global[li].w.rightCols(out.hidden.cols());
      }
    }
  }

  // --- gcn stack ----------------------------------------------------------
  Mat d_out = std::move(d_hidden);  // gradient at layer output h_out
  for (int l = params.gcn_layer_count() - 1; l >= 0; --l) {
    auto li = static_cast<std::size_t>(l);
    const LayerCache& cache = caches[li];
    Mat d_a;
    if (l == params.gcn_layer_count() - 1) {
      d_a = std::move(d_out);
    } else {
      if (cache.drop_mask.size() > 0) {
        d_out.array() *= cache.drop_mask.array();
      }
      Mat d_pre = (cache.pre_act.array() > 0.0).select(d_out, 0.0);
      d_a = batch_norm_backward(params.bn[li], cache, cache.a, d_pre,
                                g.bn[li].gamma, g.bn[li].beta);
    }
    g.gcn[li].b += d_a.colwise().sum().transpose();
    Mat d_m = aggregate(adj, d_a);
    const Mat& h_in = l == 0 ? x : caches[li - 1].h_out;
    g.gcn[li].w.noalias() += d_m.transpose() * h_in;
    if (l > 0) d_out.noalias() = d_m * params.gcn[li].w;
  }
  return loss;
}

namespace {

void validate_supervision(const ModelParams& params, const Supervision& sup) {
  const std::size_t expect =
      params.mode == ModelMode::CFL ? 1 : static_cast<std::size_t>(params.levels);
  if (sup.level_labels.size() != expect ||
      sup.level_masks.size() != expect) {
    throw_validation("supervision level count does not match the model");
  }
  for (std::size_t l = 0; l < expect; ++l) {
    if (sup.level_masks[l].empty()) {
      throw_validation("supervised level " + std::to_string(l) +
                       " has an empty mask");
    }
    int positives = 0;
    for (int id : sup.level_masks[l]) {
      if (sup.level_labels[l][static_cast<std::size_t>(id)] == 1) ++positives;
    }
    if (positives == 0) {
      throw_validation("supervised level " + std::to_string(l) +
                       " has zero positive labels");
    }
  }
}

}  // namespace

TrainResult train_model(const TrainConfig& config, const NormAdjacency& adj,
                        const Mat& x, const Supervision& sup,
                        const std::vector<int>& val_ids,
                        const std::vector<signed char>& val_labels) {
  if (config.learning_rate <= 0.0) throw_config("learning rate must be > 0");
  if (config.dropout < 0.0 || config.dropout >= 1.0) {
    throw_config("dropout must lie in [0, 1)");
  }
  if (config.epochs < 0) throw_config("epochs must be >= 0");

  const int levels = config.mode == ModelMode::HiCFL
                         ? static_cast<int>(sup.level_labels.size())
                         : 0;
  TrainResult result;
  result.params = init_params(config, static_cast<int>(x.cols()), levels);
  validate_supervision(result.params, sup);
  if (config.epochs == 0) return result;

  ModelParams params = result.params;
  auto refs = parameter_refs(params);
  std::size_t total = 0;
  for (const auto& ref : refs) total += ref.size;
  std::vector<double> adam_m(total, 0.0), adam_v(total, 0.0);

  Rng dropout_rng(config.seed ^ 0xd509a7b9c1b2e53full);
  double best_pr = -1.0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    ModelParams grads = zero_like(params);
    ForwardOptions opts;
    opts.training = true;
    opts.update_running = true;
    opts.dropout_rng = config.dropout > 0.0 ? &dropout_rng : nullptr;
    double loss = loss_and_gradients(params, adj, x, sup, config.dropout,
                                     opts, &grads);
    if (!std::isfinite(loss)) {
      throw_numeric("training loss diverged (NaN/Inf) at epoch " +
                    std::to_string(epoch) +
                    "; a lower learning rate usually fixes this");
    }
    auto grad_refs = parameter_refs(grads);
    const double bc1 = 1.0 - std::pow(config.beta1, epoch);
    const double bc2 = 1.0 - std::pow(config.beta2, epoch);
    std::size_t offset = 0;
    for (std::size_t r = 0; r < refs.size(); ++r) {
      double* w = refs[r].data;
      const double* gw = grad_refs[r].data;
      for (std::size_t i = 0; i < refs[r].size; ++i) {
        double& m = adam_m[offset + i];
        double& v = adam_v[offset + i];
        m = config.beta1 * m + (1.0 - config.beta1) * gw[i];
        v = config.beta2 * v + (1.0 - config.beta2) * gw[i] * gw[i];
        w[i] -= config.learning_rate * (m / bc1) /
                (std::sqrt(v / bc2) + config.adam_eps);
      }
      offset += refs[r].size;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.loss = loss;
    if (!val_ids.empty()) {
      ForwardOptions infer;
      ModelOutputs out = model_forward(params, adj, x, 0.0, infer);
      std::vector<double> scores;
      std::vector<signed char> labels;
      scores.reserve(val_ids.size());
      for (int id : val_ids) {
        const signed char y = val_labels[static_cast<std::size_t>(id)];
        if (y < 0) continue;
        scores.push_back(out.s[id]);
        labels.push_back(y);
      }
      record.val_roc_auc = roc_auc(scores, labels);
      record.val_pr_auc = pr_auc(scores, labels);
      if (record.val_pr_auc > best_pr) {
        best_pr = record.val_pr_auc;
        result.params = params;
        result.best_epoch = epoch;
        result.best_val_pr_auc = record.val_pr_auc;
      }
    }
    result.log.push_back(record);
  }
  if (val_ids.empty()) {
    result.params = std::move(params);
    result.best_epoch = config.epochs;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Localized inference. Hidden states are materialized per node from its
// in-row of the adjacency, memoized across requests; each row is always
// computed by the same routine in the same order, so scoring one node or
// every node produces identical values.

namespace {

class LocalScorer {
 public:
  LocalScorer(const ModelParams& params, const NormAdjacency& adj,
              const Mat& x)
      : params_(params), adj_(adj), x_(x) {
    layer_cache_.resize(params_.gcn.size());
    transform_cache_.resize(params_.gcn.size());
  }

  double score(int id) {
    const Vec h = hidden_state(static_cast<int>(params_.gcn.size()), id);
    if (params_.mode == ModelMode::CFL) {
      return 1.0 / (1.0 + std::exp(-h[0]));
    }
    // hierarchy heads, row-local
    Vec a_prev;
    double product = 1.0;
    for (int l = 0; l < params_.levels; ++l) {
      auto li = static_cast<std::size_t>(l);
      Vec u;
      if (l == 0) {
        u = params_.global[li].w * h;
      } else {
        u = params_.global[li].w.leftCols(params_.hidden) * a_prev +
            params_.global[li].w.rightCols(h.size()) * h;
      }
      u += params_.global[li].b;
      Vec a = u.cwiseMax(0.0);
      Vec t = params_.local_hidden[li].w * a + params_.local_hidden[li].b;
      Vec a_loc = t.cwiseMax(0.0);
      const double logit =
          params_.local_out[li].w.row(0).dot(a_loc) + params_.local_out[li].b[0];
      product *= 1.0 / (1.0 + std::exp(-logit));
      a_prev = std::move(a);
    }
    const double glogit =
        params_.global_out.w.row(0).dot(a_prev) + params_.global_out.b[0];
    const double z_p = 1.0 / (1.0 + std::exp(-glogit));
    return params_.alpha * z_p + (1.0 - params_.alpha) * product;
  }

 private:
  // W_l applied to the previous layer's hidden state of node j.
  const Vec& transformed(int layer, int j) {
    auto& cache = transform_cache_[static_cast<std::size_t>(layer)];
    auto it = cache.find(j);
    if (it != cache.end()) return it->second;
    Vec h_prev = layer == 0
                     ? Vec(x_.row(j).transpose())
                     : hidden_state(layer, j);
    Vec t = params_.gcn[static_cast<std::size_t>(layer)].w * h_prev;
    return cache.emplace(j, std::move(t)).first->second;
  }

  // h^(layer) for node i; layer in 1..gcn_layers.
  const Vec& hidden_state(int layer, int i) {
    auto& cache = layer_cache_[static_cast<std::size_t>(layer - 1)];
    auto it = cache.find(i);
    if (it != cache.end()) return it->second;
    const auto li = static_cast<std::size_t>(layer - 1);
    Vec a = Vec::Zero(params_.gcn[li].w.rows());
    for (std::int64_t p = adj_.row_ptr[static_cast<std::size_t>(i)];
         p < adj_.row_ptr[static_cast<std::size_t>(i) + 1]; ++p) {
      a += adj_.vals[static_cast<std::size_t>(p)] *
           transformed(layer - 1, adj_.cols[static_cast<std::size_t>(p)]);
    }
    a += params_.gcn[li].b;
    if (layer != static_cast<int>(params_.gcn.size())) {
      const BatchNormState& bn = params_.bn[li];
      for (Eigen::Index k = 0; k < a.size(); ++k) {
        const double inv_std =
            1.0 / std::sqrt(bn.running_var[k] + BatchNormState::kEps);
        a[k] = bn.gamma[k] * ((a[k] - bn.running_mean[k]) * inv_std) +
               bn.beta[k];
        if (a[k] < 0.0) a[k] = 0.0;
      }
    }
    return cache.emplace(i, std::move(a)).first->second;
  }

  const ModelParams& params_;
  const NormAdjacency& adj_;
  const Mat& x_;
  std::vector<std::unordered_map<int, Vec>> layer_cache_;
  std::vector<std::unordered_map<int, Vec>> transform_cache_;
};

}  // namespace

std::vector<double> score_terms(const ModelParams& params,
                                const NormAdjacency& adj, const Mat& x,
                                const std::vector<int>& ids) {
  if (adj.n != x.rows()) {
    throw_numeric("adjacency and feature matrix disagree on node count");
  }
  LocalScorer scorer(params, adj, x);
  std::vector<double> scores;
  scores.reserve(ids.size());
  for (int id : ids) {
    if (id < 0 || id >= adj.n) {
      throw_validation("unknown node id: " + std::to_string(id));
    }
    scores.push_back(scorer.score(id));
  }
  return scores;
}

}  // namespace termrel

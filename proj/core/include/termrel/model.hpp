#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "termrel/annotation.hpp"
#include "termrel/features.hpp"
#include "termrel/graph.hpp"
#include "termrel/rng.hpp"

namespace termrel {

enum class ModelMode { CFL, HiCFL };

struct TrainConfig {
  ModelMode mode = ModelMode::CFL;
  double learning_rate = 0.01;
  int epochs = 300;
  double dropout = 0.5;
  int hidden = 256;
  int gcn_layers = 2;
  double alpha = 0.5;  // HiCFL global/local blend
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
};

struct DenseLayer {
  Mat w;  // out x in
  Vec b;  // out
};

struct BatchNormState {
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.9;

  Vec gamma, beta;
  Vec running_mean, running_var;
};

/// All trainable state. The graph convolution stack is shared by both
/// modes; the hierarchy heads exist only in HiCFL mode (levels >= 1).
struct ModelParams {
  ModelMode mode = ModelMode::CFL;
  int input_dim = 0;
  int hidden = 0;
  int levels = 0;  // hierarchy depth; 0 in CFL mode
  double alpha = 0.5;

  std::vector<DenseLayer> gcn;     // gcn_layers entries
  std::vector<BatchNormState> bn;  // one per non-output gcn layer

  // HiCFL heads. global[0] maps the gcn output h; global[l>0] maps the
  // concatenation [a^(l); h]. global_out produces the global logit; each
  // level additionally has a local hidden layer and a local logit layer.
  std::vector<DenseLayer> global;
  DenseLayer global_out;
  std::vector<DenseLayer> local_hidden;
  std::vector<DenseLayer> local_out;

  int gcn_layer_count() const { return static_cast<int>(gcn.size()); }
};

/// Seeded uniform Glorot-style initialization; biases zero, batch norm at
/// identity.
ModelParams init_params(const TrainConfig& config, int input_dim, int levels);

/// Named view of one trainable tensor's storage.
struct TensorRef {
  std::string name;
  double* data = nullptr;
  std::size_t size = 0;
};

/// All trainable tensors in a fixed order (weights, biases, batch-norm
/// scale/shift). Running statistics are not trainable and not included.
std::vector<TensorRef> parameter_refs(ModelParams& params);

struct ModelOutputs {
  Vec z;                    // CFL output probability (empty in HiCFL mode)
  Vec z_global;             // HiCFL global probability z_p
  std::vector<Vec> z_local; // HiCFL per-level probabilities z_q
  Vec s;                    // final relevance score
  Mat hidden;               // gcn output h^(l_c), kept for inspection
};

struct ForwardOptions {
  bool training = false;        // batch statistics instead of running ones
  bool update_running = false;  // fold batch statistics into running ones
  Rng* dropout_rng = nullptr;   // enables dropout when set (training only)
};

/// Hidden states h^(1)..h^(l_c). Non-output layers apply batch norm before
/// the ReLU and dropout after it; the output layer is a plain aggregated
/// affine map.
std::vector<Mat> gcn_forward(ModelParams& params, const NormAdjacency& adj,
                             const Mat& x, double dropout,
                             const ForwardOptions& opts);

/// Hierarchy heads on a given gcn output (inference path, no dropout).
ModelOutputs hicfl_forward(const ModelParams& params, const Mat& h);

/// Full forward in either mode.
ModelOutputs model_forward(ModelParams& params, const NormAdjacency& adj,
                           const Mat& x, double dropout,
                           const ForwardOptions& opts);

/// Masked binary cross-entropy, summed (not averaged) over the mask.
/// Probabilities are clamped to [1e-7, 1 - 1e-7] to keep the value finite;
/// the matching gradient at the logit is (z - y).
double masked_bce(const Vec& z, const std::vector<signed char>& labels,
                  const std::vector<int>& mask);

/// Per-level labels and loss masks. CFL uses exactly one level; HiCFL uses
/// `levels` entries, the last of which also supervises the global head.
struct Supervision {
  std::vector<std::vector<signed char>> level_labels;  // each size n
  std::vector<std::vector<int>> level_masks;
};

Supervision cfl_supervision(const LabelMatrix& matrix, int level,
                            const std::vector<int>& mask);
Supervision hicfl_supervision(const LabelMatrix& matrix,
                              const std::vector<int>& mask);
/// Parent levels from the matrix on the full mask; the target level from
/// the PU set (positives vs reliable negatives, unlabeled excluded).
Supervision pu_supervision(const LabelMatrix& matrix, const PULabelSet& pu,
                           const std::vector<int>& mask);

double cfl_loss(const ModelOutputs& out, const Supervision& sup);
double hicfl_loss(const ModelOutputs& out, const Supervision& sup);

Vec hicfl_score(const ModelOutputs& out, double alpha);

/// Loss plus exact gradients for every trainable tensor (same layout as
/// parameter_refs). Dropout is active only when opts.dropout_rng is set.
double loss_and_gradients(ModelParams& params, const NormAdjacency& adj,
                          const Mat& x, const Supervision& sup,
                          double dropout, const ForwardOptions& opts,
                          ModelParams* grads);

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double val_roc_auc = 0.0;
  double val_pr_auc = 0.0;
};

struct TrainResult {
  ModelParams params;  // snapshot from the best validation epoch
  std::vector<EpochRecord> log;
  int best_epoch = 0;  // 0 = initial parameters
  double best_val_pr_auc = 0.0;
};

/// Full-batch Adam with per-epoch validation PR-AUC selection. Labels for
/// validation are read from `val_labels` (size n, -1 ignored) on `val_ids`;
/// with no validation ids the final epoch wins. Deterministic given
/// config.seed.
TrainResult train_model(const TrainConfig& config, const NormAdjacency& adj,
                        const Mat& x, const Supervision& sup,
                        const std::vector<int>& val_ids,
                        const std::vector<signed char>& val_labels);

/// Inference scores for selected nodes, computed from each node's 2-hop
/// neighborhood with running batch-norm statistics. Scoring one node and
/// scoring all nodes agree exactly.
std::vector<double> score_terms(const ModelParams& params,
                                const NormAdjacency& adj, const Mat& x,
                                const std::vector<int>& ids);

// --- checkpointing ---------------------------------------------------------

struct Checkpoint {
  ModelParams params;
  TrainConfig config;
  std::uint64_t input_hash = 0;  // graph + feature signature
  int best_epoch = 0;
};

/// FNV-1a signature of the graph structure and feature matrix, stored in
/// checkpoints so a scorer can warn when inputs changed since training.
std::uint64_t input_signature(const CoreFringeGraph& graph, const Mat& x);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace termrel

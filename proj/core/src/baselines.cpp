#include <algorithm>
#include <cmath>

#include "termrel/error.hpp"
#include "termrel/eval.hpp"
#include "termrel/rng.hpp"

namespace termrel {

namespace {

struct AdamState {
  std::vector<double> m, v;
  explicit AdamState(std::size_t size) : m(size, 0.0), v(size, 0.0) {}
};

void adam_step(double* w, const double* g, AdamState& state,
               std::size_t offset, std::size_t count, int t,
               const TrainConfig& c) {
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < count; ++i) {
    double& m = state.m[offset + i];
    double& v = state.v[offset + i];
    m = c.beta1 * m + (1.0 - c.beta1) * g[i];
    v = c.beta2 * v + (1.0 - c.beta2) * g[i] * g[i];
    w[i] -= c.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + c.adam_eps);
  }
}

Vec sigmoid(const Vec& v) {
  return (1.0 / (1.0 + (-v.array()).exp())).matrix();
}

Vec logit_grad(const Vec& z, const std::vector<signed char>& labels,
               const std::vector<int>& ids) {
  Vec g = Vec::Zero(z.size());
  for (int id : ids) {
    g[id] = z[id] - static_cast<double>(labels[static_cast<std::size_t>(id)]);
  }
  return g;
}

std::pair<double, double> val_metrics(const Vec& scores,
                                      const std::vector<signed char>& labels,
                                      const std::vector<int>& ids) {
  std::vector<double> s;
  std::vector<signed char> y;
  for (int id : ids) {
    const signed char v = labels[static_cast<std::size_t>(id)];
    if (v < 0) continue;
    s.push_back(scores[id]);
    y.push_back(v);
  }
  return {roc_auc(s, y), pr_auc(s, y)};
}

}  // namespace

BaselineResult train_baseline(BaselineKind kind, const Mat& x,
                              const std::vector<signed char>& labels,
                              const std::vector<int>& train_ids,
                              const std::vector<int>& val_ids,
                              const std::vector<signed char>& val_labels,
                              const TrainConfig& config) {
  if (config.epochs < 0) throw_config("epochs must be >= 0");
  std::vector<int> train;
  for (int id : train_ids) {
    if (labels[static_cast<std::size_t>(id)] >= 0) train.push_back(id);
  }
  if (train.empty()) throw_validation("baseline: no labeled training ids");

  const auto d = x.cols();
  const int hidden = config.hidden;
  Rng init_rng(config.seed ^ 0x7b4ee1c391acd2ffull);
  Rng dropout_rng(config.seed ^ 0x1fb39c2e5d01aa77ull);

  // LR: sigmoid(x w + b). MLP: sigmoid(relu(x W1^T + b1) [dropout] . w2 + b2)
  Mat w1;
  Vec b1, w_out;
  double b_out = 0.0;
  const bool mlp = kind == BaselineKind::Mlp;
  if (mlp) {
    w1 = Mat::Zero(hidden, d);
    const double limit1 = std::sqrt(6.0 / static_cast<double>(d + hidden));
    for (Eigen::Index i = 0; i < w1.size(); ++i) {
      w1.data()[i] = init_rng.uniform(-limit1, limit1);
    }
    b1 = Vec::Zero(hidden);
    w_out = Vec::Zero(hidden);
    const double limit2 = std::sqrt(6.0 / static_cast<double>(hidden + 1));
    for (Eigen::Index i = 0; i < w_out.size(); ++i) {
      w_out[i] = init_rng.uniform(-limit2, limit2);
    }
  } else {
    w_out = Vec::Zero(d);
    const double limit = std::sqrt(6.0 / static_cast<double>(d + 1));
    for (Eigen::Index i = 0; i < w_out.size(); ++i) {
      w_out[i] = init_rng.uniform(-limit, limit);
    }
  }

  const std::size_t total =
      mlp ? static_cast<std::size_t>(w1.size() + b1.size() + w_out.size() + 1)
          : static_cast<std::size_t>(w_out.size() + 1);
  AdamState adam(total);

  auto forward_scores = [&](bool training) -> Vec {
    if (!mlp) {
      Vec logits = x * w_out;
      logits.array() += b_out;
      return sigmoid(logits);
    }
    Mat a = x * w1.transpose();
    a.rowwise() += b1.transpose();
    Mat r = a.cwiseMax(0.0);
    if (training && config.dropout > 0.0) {
      const double keep = 1.0 - config.dropout;
      for (Eigen::Index i = 0; i < r.size(); ++i) {
        r.data()[i] *= dropout_rng.uniform() < keep ? 1.0 / keep : 0.0;
      }
    }
    Vec logits = r * w_out;
    logits.array() += b_out;
    return sigmoid(logits);
  };

  BaselineResult result;
  Vec best_w_out = w_out, best_b1 = b1;
  Mat best_w1 = w1;
  double best_b_out = b_out, best_pr = -1.0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    // forward with cached intermediates
    Vec z;
    Mat a, r, drop;
    if (mlp) {
      a = x * w1.transpose();
      a.rowwise() += b1.transpose();
      r = a.cwiseMax(0.0);
      if (config.dropout > 0.0) {
        const double keep = 1.0 - config.dropout;
        drop.resize(r.rows(), r.cols());
        for (Eigen::Index i = 0; i < drop.size(); ++i) {
          drop.data()[i] = dropout_rng.uniform() < keep ? 1.0 / keep : 0.0;
        }
        r.array() *= drop.array();
      }
      Vec logits = r * w_out;
      logits.array() += b_out;
      z = sigmoid(logits);
    } else {
      Vec logits = x * w_out;
      logits.array() += b_out;
      z = sigmoid(logits);
    }
    double loss = 0.0;
    for (int id : train) {
      const double p = std::clamp(z[id], 1e-7, 1.0 - 1e-7);
      loss -= labels[static_cast<std::size_t>(id)] == 1 ? std::log(p)
                                                        : std::log(1.0 - p);
    }
    if (!std::isfinite(loss)) {
      throw_numeric("baseline loss diverged at epoch " + std::to_string(epoch));
    }
    Vec g = logit_grad(z, labels, train);

    if (mlp) {
      Vec gw_out = r.transpose() * g;
      const double gb_out = g.sum();
      Mat gr = g * w_out.transpose();
      if (drop.size() > 0) gr.array() *= drop.array();
      Mat ga = (a.array() > 0.0).select(gr, 0.0);
      Mat gw1 = ga.transpose() * x;
      Vec gb1 = ga.colwise().sum().transpose();
      std::size_t off = 0;
      adam_step(w1.data(), gw1.data(), adam, off,
                static_cast<std::size_t>(w1.size()), epoch, config);
      off += static_cast<std::size_t>(w1.size());
      adam_step(b1.data(), gb1.data(), adam, off,
                static_cast<std::size_t>(b1.size()), epoch, config);
      off += static_cast<std::size_t>(b1.size());
      adam_step(w_out.data(), gw_out.data(), adam, off,
                static_cast<std::size_t>(w_out.size()), epoch, config);
      off += static_cast<std::size_t>(w_out.size());
      adam_step(&b_out, &gb_out, adam, off, 1, epoch, config);
    } else {
      Vec gw = x.transpose() * g;
      const double gb = g.sum();
      adam_step(w_out.data(), gw.data(), adam, 0,
                static_cast<std::size_t>(w_out.size()), epoch, config);
      adam_step(&b_out, &gb, adam, static_cast<std::size_t>(w_out.size()), 1,
                epoch, config);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.loss = loss;
    if (!val_ids.empty()) {
      Vec scores = forward_scores(false);
      auto [roc, pr] = val_metrics(scores, val_labels, val_ids);
      record.val_roc_auc = roc;
      record.val_pr_auc = pr;
      if (pr > best_pr) {
        best_pr = pr;
        best_w1 = w1;
        best_b1 = b1;
        best_w_out = w_out;
        best_b_out = b_out;
        result.best_epoch = epoch;
      }
    }
    result.log.push_back(record);
  }
  if (!val_ids.empty() && best_pr >= 0.0) {
    w1 = best_w1;
    b1 = best_b1;
    w_out = best_w_out;
    b_out = best_b_out;
  } else {
    result.best_epoch = config.epochs;
  }
  Vec final_scores = forward_scores(false);
  result.scores.assign(final_scores.data(),
                       final_scores.data() + final_scores.size());
  return result;
}

}  // namespace termrel

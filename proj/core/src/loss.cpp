// Copyright (c) the svkit authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#include "svkit/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "svkit/error.hpp"
#include "svkit/rng.hpp"

namespace sv::loss {

namespace {

void check_batch(const Matrix& scores, const std::vector<int>& labels) {
  if (scores.rows() == 0) throw DataError("loss: empty batch");
  if (static_cast<std::size_t>(scores.rows()) != labels.size())
    throw DataError("loss: scores/labels size mismatch");
  for (int y : labels)
    if (y < 0 || y >= scores.cols())
      throw DataError("loss: label " + std::to_string(y) +
                      " out of range for " + std::to_string(scores.cols()) +
                      " classes");
}

// Mean softmax cross-entropy and its gradient, log-sum-exp stabilized.
LossValue softmax_xent(const Matrix& scores, const std::vector<int>& labels) {
  const Eigen::Index n = scores.rows();
  LossValue lv;
  lv.grad = Matrix::Zero(n, scores.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double m = scores.row(i).maxCoeff();
    Eigen::ArrayXd shifted = scores.row(i).transpose().array() - m;
    Eigen::ArrayXd ex = shifted.exp();
    double z = ex.sum();
    total += std::log(z) - shifted(labels[static_cast<std::size_t>(i)]);
    lv.grad.row(i) = (ex / z).matrix().transpose();
    lv.grad(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
  }
  lv.value = total / static_cast<double>(n);
  lv.grad /= static_cast<double>(n);
  return lv;
}

}  // namespace

LossValue ams_loss(const Matrix& cosines, const std::vector<int>& labels,
                   const AmsConfig& cfg) {
  check_batch(cosines, labels);
  if (cfg.scale <= 0.0) throw DataError("ams_loss: scale must be positive");
  if (cfg.margin < 0.0) throw DataError("ams_loss: negative margin");
  Matrix adjusted = cosines;
  for (Eigen::Index i = 0; i < adjusted.rows(); ++i)
    adjusted(i, labels[static_cast<std::size_t>(i)]) -= cfg.margin;
  adjusted *= cfg.scale;
  LossValue lv = softmax_xent(adjusted, labels);
  lv.grad *= cfg.scale;
  return lv;
}

LossValue ce_loss(const Matrix& logits, const std::vector<int>& labels) {
  check_batch(logits, labels);
  return softmax_xent(logits, labels);
}

JointValue joint_loss(const Matrix& cosines, const Matrix& ce_logits,
                      const std::vector<int>& labels, const AmsConfig& ams,
                      double ce_weight) {
  if (ce_weight < 0.0) throw DataError("joint_loss: negative ce_weight");
  LossValue a = ams_loss(cosines, labels, ams);
  LossValue c = ce_loss(ce_logits, labels);
  JointValue j;
  j.value = a.value + ce_weight * c.value;
  j.ams_grad = std::move(a.grad);
  j.ce_grad = ce_weight * c.grad;
  return j;
}

namespace {

using nnet::Layer;
using nnet::Network;

constexpr double kNormFloor = 1e-12;

Matrix normalized_rows(const Matrix& m) {
  Matrix out = m;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    double r = std::max(m.row(i).norm(), kNormFloor);
    out.row(i) /= r;
  }
  return out;
}

// d(objective)/d(rows of m) given the gradient w.r.t. the normalized rows.
Matrix normalized_rows_backward(const Matrix& m, const Matrix& dnorm) {
  Matrix dm(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    double r = std::max(m.row(i).norm(), kNormFloor);
    Eigen::RowVectorXd unit = m.row(i) / r;
    dm.row(i) = (dnorm.row(i) - (dnorm.row(i).dot(unit)) * unit) / r;
  }
  return dm;
}

struct ParamBlock {
  double* data = nullptr;
  std::size_t n = 0;
  Vector velocity;
};

void collect_blocks(std::vector<Layer>& layers, std::vector<ParamBlock>& out) {
  for (Layer& l : layers)
    nnet::visit_params(l, [&](const std::string&, double* p, std::size_t n) {
      out.push_back({p, n, Vector::Zero(static_cast<Eigen::Index>(n))});
    });
}

void collect_grad_ptrs(std::vector<Layer>& layers, std::vector<double*>& out) {
  for (Layer& l : layers)
    nnet::visit_params(l, [&](const std::string&, double* p, std::size_t) {
      out.push_back(p);
    });
}

void zero_layers(std::vector<Layer>& layers) {
  for (Layer& l : layers)
    nnet::visit_params(l, [&](const std::string&, double* p, std::size_t n) {
      std::fill(p, p + n, 0.0);
    });
}

}  // namespace

TrainResult train_toy(const nnet::Network& init,
                      const std::vector<TrainSample>& data,
                      const TrainOptions& opts) {
  init.validate();
  if (data.empty()) throw DataError("train: no samples");
  if (opts.lr_schedule.empty()) throw DataError("train: empty lr schedule");
  if (opts.ce_weight_schedule.empty())
    throw DataError("train: empty ce weight schedule");
  if (opts.batch_size < 1) throw DataError("train: batch_size must be >= 1");
  if (opts.max_epochs < 1) throw DataError("train: max_epochs must be >= 1");
  if (opts.plateau_patience < 1)
    throw DataError("train: plateau_patience must be >= 1");

  int n_classes = 0;
  for (const TrainSample& s : data) {
    if (s.label < 0) throw DataError("train: negative label");
    n_classes = std::max(n_classes, s.label + 1);
    if (static_cast<int>(s.features.cols()) != init.input_dim)
      throw DataError("train: sample feature dim mismatch");
  }
  if (n_classes < 2) throw DataError("train: need at least two classes");

  TrainResult result;
  result.net = init;
  Network& net = result.net;
  const int pool = net.stats_pool_index();
  const int emb = net.embedding_layer;
  const int emb_dim = net.embedding_dim();

  Rng rng(opts.seed);

  // Cosine classifier for the margin loss.
  Matrix head_w(n_classes, emb_dim);
  {
    double a = std::sqrt(1.0 / emb_dim);
    for (Eigen::Index r = 0; r < head_w.rows(); ++r)
      for (Eigen::Index c = 0; c < head_w.cols(); ++c)
        head_w(r, c) = rng.uniform(-a, a);
  }

  // Auxiliary CE branch: mirrors the post-pooling layers with its own
  // freshly initialized parameters, then an affine classifier.
  std::vector<Layer> branch;
  Matrix ce_w;
  Vector ce_b;
  if (opts.use_ce_branch) {
    for (int i = pool + 1; i <= emb; ++i) {
      Layer copy = net.layers[static_cast<std::size_t>(i)];
      nnet::init_params(copy, rng);
      branch.push_back(std::move(copy));
    }
    ce_w = Matrix(n_classes, emb_dim);
    double a = std::sqrt(1.0 / emb_dim);
    for (Eigen::Index r = 0; r < ce_w.rows(); ++r)
      for (Eigen::Index c = 0; c < ce_w.cols(); ++c)
        ce_w(r, c) = rng.uniform(-a, a);
    ce_b = Vector::Zero(n_classes);
  }

  // One momentum buffer per parameter tensor, shared traversal order with
  // the gradient holders below.
  std::vector<ParamBlock> blocks;
  collect_blocks(net.layers, blocks);
  collect_blocks(branch, blocks);
  blocks.push_back({head_w.data(), static_cast<std::size_t>(head_w.size()),
                    Vector::Zero(head_w.size())});
  if (opts.use_ce_branch) {
    blocks.push_back({ce_w.data(), static_cast<std::size_t>(ce_w.size()),
                      Vector::Zero(ce_w.size())});
    blocks.push_back({ce_b.data(), static_cast<std::size_t>(ce_b.size()),
                      Vector::Zero(ce_b.size())});
  }

  nnet::NetGradients net_grads = nnet::zero_gradients(net);
  std::vector<Layer> branch_grads;
  for (const Layer& l : branch) branch_grads.push_back(nnet::zero_like(l));
  Matrix g_head = Matrix::Zero(head_w.rows(), head_w.cols());
  Matrix g_ce_w;
  Vector g_ce_b;
  if (opts.use_ce_branch) {
    g_ce_w = Matrix::Zero(ce_w.rows(), ce_w.cols());
    g_ce_b = Vector::Zero(ce_b.size());
  }

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  std::size_t sched_idx = 0;
  double best_loss = std::numeric_limits<double>::infinity();
  int stall = 0;

  auto sched_at = [](const std::vector<double>& s, std::size_t i) {
    return s[std::min(i, s.size() - 1)];
  };

  for (int epoch = 0; epoch < opts.max_epochs; ++epoch) {
    const double lr = sched_at(opts.lr_schedule, sched_idx);
    const double ce_weight =
        opts.use_ce_branch ? sched_at(opts.ce_weight_schedule, sched_idx)
                           : 0.0;
    rng.shuffle(order);

    double epoch_loss = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(opts.batch_size)) {
      std::size_t end = std::min(
          order.size(), start + static_cast<std::size_t>(opts.batch_size));
      const Eigen::Index bsz = static_cast<Eigen::Index>(end - start);

      std::vector<std::vector<Matrix>> traces(static_cast<std::size_t>(bsz));
      std::vector<std::vector<Matrix>> branch_traces(
          static_cast<std::size_t>(bsz));
      std::vector<int> labels(static_cast<std::size_t>(bsz));
      Matrix embeddings(bsz, emb_dim);
      Matrix branch_out(bsz, emb_dim);
      for (Eigen::Index b = 0; b < bsz; ++b) {
        const TrainSample& s = data[order[start + static_cast<std::size_t>(b)]];
        labels[static_cast<std::size_t>(b)] = s.label;
        traces[static_cast<std::size_t>(b)] =
            nnet::chain_forward(net.layers, s.features);
        embeddings.row(b) =
            traces[static_cast<std::size_t>(b)][static_cast<std::size_t>(
                emb + 1)];
        if (opts.use_ce_branch) {
          branch_traces[static_cast<std::size_t>(b)] = nnet::chain_forward(
              branch,
              traces[static_cast<std::size_t>(b)][static_cast<std::size_t>(
                  pool + 1)]);
          branch_out.row(b) =
              branch_traces[static_cast<std::size_t>(b)].back();
        }
      }

      Matrix emb_norm = normalized_rows(embeddings);
      Matrix w_norm = normalized_rows(head_w);
      Matrix cosines = emb_norm * w_norm.transpose();

      double batch_loss = 0.0;
      Matrix d_embeddings;
      Matrix d_branch_out;
      zero_layers(net_grads.layers);
      zero_layers(branch_grads);
      g_head.setZero();
      if (opts.use_ce_branch) {
        g_ce_w.setZero();
        g_ce_b.setZero();
      }

      if (opts.use_ce_branch) {
        Matrix logits = branch_out * ce_w.transpose();
        logits.rowwise() += ce_b.transpose();
        JointValue j = joint_loss(cosines, logits, labels, opts.ams,
                                  ce_weight);
        batch_loss = j.value;
        // cosine head
        Matrix d_emb_norm = j.ams_grad * w_norm;
        Matrix d_w_norm = j.ams_grad.transpose() * emb_norm;
        d_embeddings = normalized_rows_backward(embeddings, d_emb_norm);
        g_head += normalized_rows_backward(head_w, d_w_norm);
        // affine CE head
        g_ce_w += j.ce_grad.transpose() * branch_out;
        g_ce_b += j.ce_grad.colwise().sum().transpose();
        d_branch_out = j.ce_grad * ce_w;
      } else {
        LossValue a = ams_loss(cosines, labels, opts.ams);
        batch_loss = a.value;
        Matrix d_emb_norm = a.grad * w_norm;
        Matrix d_w_norm = a.grad.transpose() * emb_norm;
        d_embeddings = normalized_rows_backward(embeddings, d_emb_norm);
        g_head += normalized_rows_backward(head_w, d_w_norm);
      }

      if (!std::isfinite(batch_loss))
        throw NumericalError("train: loss diverged at epoch " +
                             std::to_string(epoch + 1));

      for (Eigen::Index b = 0; b < bsz; ++b) {
        const auto& trace = traces[static_cast<std::size_t>(b)];
        Matrix d_pool = Matrix::Zero(1, trace[static_cast<std::size_t>(
                                            pool + 1)].cols());
        // post-pool layers of the embedding path
        {
          std::span<const Layer> post(net.layers.data() + pool + 1,
                                      static_cast<std::size_t>(emb - pool));
          std::span<Layer> post_g(net_grads.layers.data() + pool + 1,
                                  static_cast<std::size_t>(emb - pool));
          std::vector<Matrix> sub(trace.begin() + pool + 1,
                                  trace.begin() + emb + 2);
          d_pool += nnet::chain_backward(post, sub, d_embeddings.row(b),
                                         post_g);
        }
        if (opts.use_ce_branch) {
          d_pool += nnet::chain_backward(
              branch, branch_traces[static_cast<std::size_t>(b)],
              d_branch_out.row(b), branch_grads);
        }
        std::span<const Layer> pre(net.layers.data(),
                                   static_cast<std::size_t>(pool + 1));
        std::span<Layer> pre_g(net_grads.layers.data(),
                               static_cast<std::size_t>(pool + 1));
        std::vector<Matrix> sub(trace.begin(), trace.begin() + pool + 2);
        nnet::chain_backward(pre, sub, d_pool, pre_g);
      }

      // SGD with momentum and weight decay, one tensor at a time.
      std::vector<double*> grad_ptrs;
      collect_grad_ptrs(net_grads.layers, grad_ptrs);
      collect_grad_ptrs(branch_grads, grad_ptrs);
      grad_ptrs.push_back(g_head.data());
      if (opts.use_ce_branch) {
        grad_ptrs.push_back(g_ce_w.data());
        grad_ptrs.push_back(g_ce_b.data());
      }
      if (grad_ptrs.size() != blocks.size())
        throw NumericalError("train: internal gradient bookkeeping mismatch");
      for (std::size_t k = 0; k < blocks.size(); ++k) {
        ParamBlock& blk = blocks[k];
        const double* g = grad_ptrs[k];
        for (std::size_t i = 0; i < blk.n; ++i) {
          double step_g = g[i] + opts.weight_decay * blk.data[i];
          blk.velocity(static_cast<Eigen::Index>(i)) =
              opts.momentum * blk.velocity(static_cast<Eigen::Index>(i)) -
              lr * step_g;
          blk.data[i] += blk.velocity(static_cast<Eigen::Index>(i));
        }
      }

      epoch_loss += batch_loss;
      ++n_batches;
    }

    epoch_loss /= static_cast<double>(n_batches);
    result.trace.push_back({epoch_loss, lr, ce_weight});

    bool improved =
        best_loss - epoch_loss >
        opts.plateau_rel_tol * std::max(std::abs(best_loss), 1e-12);
    if (improved)
      stall = 0;
    else
      ++stall;
    best_loss = std::min(best_loss, epoch_loss);
    if (stall >= opts.plateau_patience) {
      ++sched_idx;  // lr and CE weight advance together
      stall = 0;
    }
  }

  return result;
}

}  // namespace sv::loss

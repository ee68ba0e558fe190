// Copyright (c) the svkit authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#ifndef SVKIT_LOSS_HPP_
#define SVKIT_LOSS_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "svkit/nnet.hpp"

namespace sv::loss {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct AmsConfig {
  double scale = 30.0;
  double margin = 0.1;
};

struct LossValue {
  double value = 0.0;
  Matrix grad;  // same shape as the input scores, already averaged over N
};

// Additive-margin softmax over cosine similarities (batch x classes):
// the target cosine is shifted by -margin, everything is scaled by `scale`,
// then cross-entropy. margin=0, scale=1 reduces it to plain cross-entropy
// on the cosines.
LossValue ams_loss(const Matrix& cosines, const std::vector<int>& labels,
                   const AmsConfig& cfg);

// Softmax cross-entropy on raw logits, averaged over the batch.
LossValue ce_loss(const Matrix& logits, const std::vector<int>& labels);

struct JointValue {
  double value = 0.0;
  Matrix ams_grad;
  Matrix ce_grad;  // pre-multiplied by ce_weight
};

// total = ams + ce_weight * ce. The two branches see the same labels but
// different score matrices (cosine head vs. auxiliary affine head).
JointValue joint_loss(const Matrix& cosines, const Matrix& ce_logits,
                      const std::vector<int>& labels, const AmsConfig& ams,
                      double ce_weight);

struct TrainOptions {
  std::vector<double> lr_schedule{0.1, 0.01, 0.001};
  std::vector<double> ce_weight_schedule{1.0, 0.5, 0.1};
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int plateau_patience = 3;
  double plateau_rel_tol = 1e-3;
  int max_epochs = 30;
  int batch_size = 16;
  std::uint64_t seed = 0;
  AmsConfig ams;
  bool use_ce_branch = true;
};

struct TrainSample {
  Matrix features;  // frames x input_dim
  int label = 0;
};

struct EpochStats {
  double mean_loss = 0.0;
  double lr = 0.0;
  double ce_weight = 0.0;
};

struct TrainResult {
  nnet::Network net;
  std::vector<EpochStats> trace;
};

// SGD with momentum and weight decay on the embedding network plus two
// classifier heads: a cosine head trained with additive-margin softmax and
// (optionally) an auxiliary cross-entropy branch that forks right after
// statistics pooling and mirrors the post-pooling layer structure. The
// learning-rate and CE-weight schedules advance together whenever the mean
// epoch loss stops improving by plateau_rel_tol (relative) for
// plateau_patience consecutive epochs.
TrainResult train_toy(const nnet::Network& init,
                      const std::vector<TrainSample>& data,
                      const TrainOptions& opts);

}  // namespace sv::loss

#endif  // SVKIT_LOSS_HPP_

// Copyright (c) the svkit authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#ifndef SVKIT_NNET_HPP_
#define SVKIT_NNET_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "svkit/features.hpp"
#include "svkit/rng.hpp"

namespace sv::nnet {

using Matrix = Eigen::MatrixXd;  // frames x channels
using Vector = Eigen::VectorXd;

// Frame splicing over temporal context offsets, with clamped replication at
// the edges. Output column block o holds x[t + offsets[o]].
Matrix splice_frames(const Matrix& x, std::span<const int> offsets);
Matrix splice_frames_backward(const Matrix& dspliced, Eigen::Index n_frames,
                              Eigen::Index dim, std::span<const int> offsets);

// Affine over spliced context, then ReLU.
struct TdnnLayer {
  std::vector<int> offsets;
  Matrix weight;  // out x (in * n_offsets)
  Vector bias;
};

// Plain affine, framewise (post-pooling inputs are single rows).
struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;
};

// Two-factor linear bottleneck: w2 * (w1 * x) + bias.
struct FactoredDenseLayer {
  Matrix w1;  // bottleneck x in
  Matrix w2;  // out x bottleneck
  Vector bias;
};

struct ReluLayer {};

// Per-utterance feature normalization (stands in for batch normalization at
// toy scale, where single-utterance batches make batch statistics
// degenerate): normalize each dimension over the utterance's frames, then
// scale/shift by learned gamma/beta.
struct BatchNormLayer {
  Vector gamma;
  Vector beta;
  static constexpr double kEps = 1e-5;
};

// Basic residual unit: 1-D convolution plus identity shortcut, then ReLU.
struct ResBlockLayer {
  int kernel = 3;
  Matrix weight;  // channels x (channels * kernel)
  Vector bias;
};

// Multi-scale residual block. Input channels (= scale * width) are split
// into `scale` groups of `width`; the first group passes through untouched,
// each later group is convolved after adding the previous group's output:
//   y_1 = x_1,  y_i = K_i(x_i + y_{i-1})  for i >= 2.
// The concatenated groups plus the identity shortcut feed one ReLU.
// scale = 1 degenerates to a basic residual unit over all channels.
struct Res2BlockLayer {
  int scale = 1;
  int width = 1;
  int kernel = 3;
  std::vector<Matrix> weights;  // one conv per group after the first
  std::vector<Vector> biases;
};

// Temporal statistics pooling: concatenated per-dimension mean and standard
// deviation (population, variance floored at 1e-10). frames x d -> 1 x 2d.
struct StatsPoolLayer {
  static constexpr double kVarianceFloor = 1e-10;
};

using Layer = std::variant<TdnnLayer, DenseLayer, FactoredDenseLayer,
                           ReluLayer, BatchNormLayer, ResBlockLayer,
                           Res2BlockLayer, StatsPoolLayer>;

std::string layer_kind(const Layer& layer);
int layer_out_dim(const Layer& layer, int in_dim);
Layer zero_like(const Layer& layer);
std::size_t param_count(const Layer& layer);

// Calls fn(tensor_name, data, size) for each parameter tensor of the layer.
void visit_params(
    Layer& layer,
    const std::function<void(const std::string&, double*, std::size_t)>& fn);

// Fresh initialization: weights uniform in +-sqrt(1/fan_in), biases zero,
// batchnorm back to identity.
void init_params(Layer& layer, Rng& rng);

Matrix layer_forward(const Layer& layer, const Matrix& x);

// Accumulates parameter gradients into `grad` (shape of zero_like(layer))
// and returns the gradient with respect to the layer input.
Matrix layer_backward(const Layer& layer, const Matrix& x, const Matrix& dy,
                      Layer& grad);

// Activation trace for a layer chain: trace[0] = input, trace[i+1] = output
// of layer i.
std::vector<Matrix> chain_forward(std::span<const Layer> layers,
                                  const Matrix& input);
Matrix chain_backward(std::span<const Layer> layers,
                      const std::vector<Matrix>& trace, const Matrix& upstream,
                      std::span<Layer> grads);

// Embedding extractor: frame-level layers, one statistics pooling layer,
// then dense layers; the embedding is the output of `embedding_layer`.
struct Network {
  int input_dim = 0;
  int embedding_layer = -1;
  std::vector<Layer> layers;

  void validate() const;
  int embedding_dim() const;
  int stats_pool_index() const;
  std::size_t param_count() const;
};

// Gradients with the same tensor structure as the network's layers.
struct NetGradients {
  std::vector<Layer> layers;
};

NetGradients zero_gradients(const Network& net);
void visit_params(
    Network& net,
    const std::function<void(const std::string&, double*, std::size_t)>& fn);
void visit_params(
    NetGradients& grads,
    const std::function<void(const std::string&, double*, std::size_t)>& fn);

std::vector<Matrix> forward_trace(const Network& net, const Matrix& input);
Matrix network_forward(const Network& net, const Matrix& input);

// Output of the embedding layer for one utterance's features.
Vector forward_embedding(const Network& net, const feat::FeatureMatrix& feat);

// Analytic parameter gradients for d(sum(upstream .* output))/d(params).
NetGradients backward(const Network& net, const Matrix& input,
                      const Matrix& upstream);

struct GradCheckEntry {
  std::string tensor;
  double max_rel_err = 0.0;
};
struct GradCheckReport {
  std::vector<GradCheckEntry> tensors;
  double max_rel_err = 0.0;
  bool pass(double tol) const { return max_rel_err < tol; }
};

// Central finite differences against the given analytic gradients, using the
// scalar objective sum(upstream .* output).
GradCheckReport compare_with_finite_differences(Network& net,
                                                const Matrix& input,
                                                const NetGradients& analytic,
                                                const Matrix& upstream,
                                                double eps);

// Convenience wrapper: seeded random upstream weights, analytic backward,
// finite-difference comparison. Requires param_count() <= 10000.
GradCheckReport check_gradients(Network& net, const Matrix& input, double tol,
                                std::uint64_t seed, double eps = 1e-4);

// Topology text: "svnet 1" magic, input_dim, embedding_layer, then one layer
// per line (tdnn / dense / factored_dense / relu / batchnorm / res /
// res2 / stats_pool). Parameters are freshly initialized from the seed.
Network build_network(const std::string& spec_text, std::uint64_t seed);

// Full model file: topology text, then named parameter tensors as
// "name rows cols" header lines followed by row-major little-endian
// 32-bit floats.
void save_network(const std::string& path, const Network& net);
Network load_network(const std::string& path);

}  // namespace sv::nnet

#endif  // SVKIT_NNET_HPP_

// Copyright (c) the svkit authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#include "svkit/nnet.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>

#include "svkit/error.hpp"
#include "svkit/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "model files are little-endian");

namespace sv::nnet {

namespace {

std::vector<int> conv_offsets(int kernel) {
  std::vector<int> off(static_cast<std::size_t>(kernel));
  for (int i = 0; i < kernel; ++i) off[static_cast<std::size_t>(i)] = i - kernel / 2;
  return off;
}

Matrix conv1d(const Matrix& x, const Matrix& w, const Vector& b, int kernel) {
  Matrix s = splice_frames(x, conv_offsets(kernel));
  Matrix out = s * w.transpose();
  out.rowwise() += b.transpose();
  return out;
}

// Accumulates dw/db and returns the input gradient for `dpre`, the gradient
// at the pre-activation output of conv1d.
Matrix conv1d_backward(const Matrix& x, const Matrix& dpre, const Matrix& w,
                       int kernel, Matrix& dw, Vector& db) {
  auto off = conv_offsets(kernel);
  Matrix s = splice_frames(x, off);
  dw += dpre.transpose() * s;
  db += dpre.colwise().sum().transpose();
  Matrix ds = dpre * w;
  return splice_frames_backward(ds, x.rows(), x.cols(), off);
}

// One callback per tensor, with logical (rows, cols) shape; vectors are
// (n, 1). Data pointers are Eigen's column-major storage.
template <typename Fn>
void for_each_tensor(Layer& layer, Fn&& fn) {
  std::visit(
      [&](auto& l) {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, TdnnLayer> ||
                      std::is_same_v<T, DenseLayer> ||
                      std::is_same_v<T, ResBlockLayer>) {
          fn("weight", l.weight.data(), l.weight.rows(), l.weight.cols());
          fn("bias", l.bias.data(), l.bias.size(), Eigen::Index{1});
        } else if constexpr (std::is_same_v<T, FactoredDenseLayer>) {
          fn("w1", l.w1.data(), l.w1.rows(), l.w1.cols());
          fn("w2", l.w2.data(), l.w2.rows(), l.w2.cols());
          fn("bias", l.bias.data(), l.bias.size(), Eigen::Index{1});
        } else if constexpr (std::is_same_v<T, BatchNormLayer>) {
          fn("gamma", l.gamma.data(), l.gamma.size(), Eigen::Index{1});
          fn("beta", l.beta.data(), l.beta.size(), Eigen::Index{1});
        } else if constexpr (std::is_same_v<T, Res2BlockLayer>) {
          for (std::size_t g = 0; g < l.weights.size(); ++g) {
            std::string stem = "conv" + std::to_string(g);
            fn(stem + ".weight", l.weights[g].data(), l.weights[g].rows(),
               l.weights[g].cols());
            fn(stem + ".bias", l.biases[g].data(), l.biases[g].size(),
               Eigen::Index{1});
          }
        }
      },
      layer);
}

int res2_groups_with_conv(const Res2BlockLayer& l) {
  return l.scale == 1 ? 1 : l.scale - 1;
}

}  // namespace

Matrix splice_frames(const Matrix& x, std::span<const int> offsets) {
  const Eigen::Index t_len = x.rows();
  const Eigen::Index dim = x.cols();
  if (t_len < 1) throw DataError("splice_frames: empty input");
  if (offsets.empty()) throw DataError("splice_frames: no offsets");
  Matrix out(t_len, dim * static_cast<Eigen::Index>(offsets.size()));
  for (std::size_t o = 0; o < offsets.size(); ++o) {
    for (Eigen::Index t = 0; t < t_len; ++t) {
      Eigen::Index src =
          std::clamp<Eigen::Index>(t + offsets[o], 0, t_len - 1);
      out.block(t, static_cast<Eigen::Index>(o) * dim, 1, dim) = x.row(src);
    }
  }
  return out;
}

Matrix splice_frames_backward(const Matrix& dspliced, Eigen::Index n_frames,
                              Eigen::Index dim, std::span<const int> offsets) {
  if (dspliced.rows() != n_frames ||
      dspliced.cols() != dim * static_cast<Eigen::Index>(offsets.size()))
    throw DataError("splice_frames_backward: shape mismatch");
  Matrix dx = Matrix::Zero(n_frames, dim);
  for (std::size_t o = 0; o < offsets.size(); ++o) {
    for (Eigen::Index t = 0; t < n_frames; ++t) {
      Eigen::Index src =
          std::clamp<Eigen::Index>(t + offsets[o], 0, n_frames - 1);
      dx.row(src) +=
          dspliced.block(t, static_cast<Eigen::Index>(o) * dim, 1, dim);
    }
  }
  return dx;
}

std::string layer_kind(const Layer& layer) {
  return std::visit(
      [](const auto& l) -> std::string {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, TdnnLayer>) return "tdnn";
        if constexpr (std::is_same_v<T, DenseLayer>) return "dense";
        if constexpr (std::is_same_v<T, FactoredDenseLayer>)
          return "factored_dense";
        if constexpr (std::is_same_v<T, ReluLayer>) return "relu";
        if constexpr (std::is_same_v<T, BatchNormLayer>) return "batchnorm";
        if constexpr (std::is_same_v<T, ResBlockLayer>) return "res";
        if constexpr (std::is_same_v<T, Res2BlockLayer>) return "res2";
        if constexpr (std::is_same_v<T, StatsPoolLayer>) return "stats_pool";
      },
      layer);
}

int layer_out_dim(const Layer& layer, int in_dim) {
  auto mismatch = [&](const std::string& why) {
    throw DataError("layer '" + layer_kind(layer) + "': " + why +
                    " (input dim " + std::to_string(in_dim) + ")");
  };
  return std::visit(
      [&](const auto& l) -> int {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, TdnnLayer>) {
          if (l.weight.cols() !=
              static_cast<Eigen::Index>(l.offsets.size()) * in_dim)
            mismatch("weight does not match input dim times context size");
          return static_cast<int>(l.weight.rows());
        } else if constexpr (std::is_same_v<T, DenseLayer>) {
          if (l.weight.cols() != in_dim) mismatch("weight/input dim mismatch");
          return static_cast<int>(l.weight.rows());
        } else if constexpr (std::is_same_v<T, FactoredDenseLayer>) {
          if (l.w1.cols() != in_dim) mismatch("w1/input dim mismatch");
          if (l.w2.cols() != l.w1.rows()) mismatch("w1/w2 shape mismatch");
          return static_cast<int>(l.w2.rows());
        } else if constexpr (std::is_same_v<T, ReluLayer>) {
          return in_dim;
        } else if constexpr (std::is_same_v<T, BatchNormLayer>) {
          if (l.gamma.size() != in_dim) mismatch("gamma/input dim mismatch");
          return in_dim;
        } else if constexpr (std::is_same_v<T, ResBlockLayer>) {
          if (l.weight.rows() != in_dim ||
              l.weight.cols() != static_cast<Eigen::Index>(l.kernel) * in_dim)
            mismatch("conv weight must be channels x channels*kernel");
          return in_dim;
        } else if constexpr (std::is_same_v<T, Res2BlockLayer>) {
          if (l.scale * l.width != in_dim)
            mismatch("scale*width must equal input dim");
          if (static_cast<int>(l.weights.size()) != res2_groups_with_conv(l))
            mismatch("wrong number of group convolutions");
          for (const auto& w : l.weights)
            if (w.rows() != l.width ||
                w.cols() != static_cast<Eigen::Index>(l.kernel) * l.width)
              mismatch("group conv weight must be width x width*kernel");
          return in_dim;
        } else {
          static_assert(std::is_same_v<T, StatsPoolLayer>);
          return 2 * in_dim;
        }
      },
      layer);
}

Layer zero_like(const Layer& layer) {
  Layer g = layer;
  for_each_tensor(g, [](const std::string&, double* data, Eigen::Index rows,
                        Eigen::Index cols) {
    std::fill(data, data + rows * cols, 0.0);
  });
  return g;
}

std::size_t param_count(const Layer& layer) {
  std::size_t n = 0;
  for_each_tensor(const_cast<Layer&>(layer),
                  [&](const std::string&, double*, Eigen::Index rows,
                      Eigen::Index cols) {
                    n += static_cast<std::size_t>(rows * cols);
                  });
  return n;
}

void visit_params(
    Layer& layer,
    const std::function<void(const std::string&, double*, std::size_t)>& fn) {
  for_each_tensor(layer, [&](const std::string& name, double* data,
                             Eigen::Index rows, Eigen::Index cols) {
    fn(name, data, static_cast<std::size_t>(rows * cols));
  });
}

Matrix layer_forward(const Layer& layer, const Matrix& x) {
  if (x.rows() == 0)
    throw DataError("layer '" + layer_kind(layer) + "': no input frames");
  (void)layer_out_dim(layer, static_cast<int>(x.cols()));
  return std::visit(
      [&](const auto& l) -> Matrix {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, TdnnLayer>) {
          Matrix pre = splice_frames(x, l.offsets) * l.weight.transpose();
          pre.rowwise() += l.bias.transpose();
          return pre.cwiseMax(0.0);
        } else if constexpr (std::is_same_v<T, DenseLayer>) {
          Matrix out = x * l.weight.transpose();
          out.rowwise() += l.bias.transpose();
          return out;
        } else if constexpr (std::is_same_v<T, FactoredDenseLayer>) {
          Matrix out = (x * l.w1.transpose()) * l.w2.transpose();
          out.rowwise() += l.bias.transpose();
          return out;
        } else if constexpr (std::is_same_v<T, ReluLayer>) {
          return x.cwiseMax(0.0);
        } else if constexpr (std::is_same_v<T, BatchNormLayer>) {
          Vector mu = x.colwise().mean().transpose();
          Matrix centered = x.rowwise() - mu.transpose();
          Vector var =
              centered.array().square().matrix().colwise().mean().transpose();
          Eigen::ArrayXd inv_std =
              (var.array() + BatchNormLayer::kEps).sqrt().inverse();
          Matrix out =
              (centered.array().rowwise() * inv_std.transpose()).matrix();
          out = (out.array().rowwise() * l.gamma.transpose().array()).matrix();
          out.rowwise() += l.beta.transpose();
          return out;
        } else if constexpr (std::is_same_v<T, ResBlockLayer>) {
          Matrix z = conv1d(x, l.weight, l.bias, l.kernel) + x;
          return z.cwiseMax(0.0);
        } else if constexpr (std::is_same_v<T, Res2BlockLayer>) {
          const Eigen::Index w = l.width;
          Matrix z(x.rows(), x.cols());
          if (l.scale == 1) {
            z = conv1d(x, l.weights[0], l.biases[0], l.kernel);
          } else {
            z.leftCols(w) = x.leftCols(w);
            for (int g = 1; g < l.scale; ++g) {
              Matrix in = x.middleCols(g * w, w) + z.middleCols((g - 1) * w, w);
              z.middleCols(g * w, w) = conv1d(
                  in, l.weights[static_cast<std::size_t>(g - 1)],
                  l.biases[static_cast<std::size_t>(g - 1)], l.kernel);
            }
          }
          return (z + x).cwiseMax(0.0);
        } else {
          static_assert(std::is_same_v<T, StatsPoolLayer>);
          Vector mu = x.colwise().mean().transpose();
          Vector var = (x.rowwise() - mu.transpose())
                           .array()
                           .square()
                           .matrix()
                           .colwise()
                           .mean()
                           .transpose();
          Vector sd =
              var.array().max(StatsPoolLayer::kVarianceFloor).sqrt().matrix();
          Matrix out(1, 2 * x.cols());
          out << mu.transpose(), sd.transpose();
          return out;
        }
      },
      layer);
}

Matrix layer_backward(const Layer& layer, const Matrix& x, const Matrix& dy,
                      Layer& grad) {
  return std::visit(
      [&](const auto& l) -> Matrix {
        using T = std::decay_t<decltype(l)>;
        auto& gl = std::get<T>(grad);
        (void)gl;
        if constexpr (std::is_same_v<T, TdnnLayer>) {
          Matrix s = splice_frames(x, l.offsets);
          Matrix pre = s * l.weight.transpose();
          pre.rowwise() += l.bias.transpose();
          Matrix dpre =
              (dy.array() * (pre.array() > 0.0).cast<double>()).matrix();
          gl.weight += dpre.transpose() * s;
          gl.bias += dpre.colwise().sum().transpose();
          return splice_frames_backward(dpre * l.weight, x.rows(), x.cols(),
                                        l.offsets);
        } else if constexpr (std::is_same_v<T, DenseLayer>) {
          gl.weight += dy.transpose() * x;
          gl.bias += dy.colwise().sum().transpose();
          return dy * l.weight;
        } else if constexpr (std::is_same_v<T, FactoredDenseLayer>) {
          Matrix h = x * l.w1.transpose();
          gl.w2 += dy.transpose() * h;
          gl.bias += dy.colwise().sum().transpose();
          Matrix dh = dy * l.w2;
          gl.w1 += dh.transpose() * x;
          return dh * l.w1;
        } else if constexpr (std::is_same_v<T, ReluLayer>) {
          return (dy.array() * (x.array() > 0.0).cast<double>()).matrix();
        } else if constexpr (std::is_same_v<T, BatchNormLayer>) {
          const double t_len = static_cast<double>(x.rows());
          Vector mu = x.colwise().mean().transpose();
          Matrix centered = x.rowwise() - mu.transpose();
          Vector var =
              centered.array().square().matrix().colwise().mean().transpose();
          Eigen::ArrayXd inv_std =
              (var.array() + BatchNormLayer::kEps).sqrt().inverse();
          Matrix xhat =
              (centered.array().rowwise() * inv_std.transpose()).matrix();
          gl.gamma +=
              (dy.array() * xhat.array()).colwise().sum().matrix().transpose();
          gl.beta += dy.colwise().sum().transpose();
          Matrix dxhat =
              (dy.array().rowwise() * l.gamma.transpose().array()).matrix();
          Eigen::RowVectorXd sum_d = dxhat.colwise().sum();
          Eigen::RowVectorXd sum_dx =
              (dxhat.array() * xhat.array()).colwise().sum();
          Matrix dx = t_len * dxhat;
          dx.rowwise() -= sum_d;
          dx -= (xhat.array().rowwise() * sum_dx.array()).matrix();
          dx = (dx.array().rowwise() * (inv_std.transpose() / t_len)).matrix();
          return dx;
        } else if constexpr (std::is_same_v<T, ResBlockLayer>) {
          Matrix z = conv1d(x, l.weight, l.bias, l.kernel) + x;
          Matrix dz =
              (dy.array() * (z.array() > 0.0).cast<double>()).matrix();
          Matrix dx =
              conv1d_backward(x, dz, l.weight, l.kernel, gl.weight, gl.bias);
          return dx + dz;
        } else if constexpr (std::is_same_v<T, Res2BlockLayer>) {
          const Eigen::Index w = l.width;
          // Recompute the group outputs and their conv inputs.
          Matrix z(x.rows(), x.cols());
          std::vector<Matrix> conv_in(l.weights.size());
          if (l.scale == 1) {
            conv_in[0] = x;
            z = conv1d(x, l.weights[0], l.biases[0], l.kernel);
          } else {
            z.leftCols(w) = x.leftCols(w);
            for (int g = 1; g < l.scale; ++g) {
              conv_in[static_cast<std::size_t>(g - 1)] =
                  x.middleCols(g * w, w) + z.middleCols((g - 1) * w, w);
              z.middleCols(g * w, w) =
                  conv1d(conv_in[static_cast<std::size_t>(g - 1)],
                         l.weights[static_cast<std::size_t>(g - 1)],
                         l.biases[static_cast<std::size_t>(g - 1)], l.kernel);
            }
          }
          Matrix out_pre = z + x;
          Matrix dz =
              (dy.array() * (out_pre.array() > 0.0).cast<double>()).matrix();
          Matrix dx = dz;  // identity shortcut
          if (l.scale == 1) {
            dx += conv1d_backward(x, dz, l.weights[0], l.kernel,
                                  gl.weights[0], gl.biases[0]);
            return dx;
          }
          Matrix carry = Matrix::Zero(x.rows(), w);
          for (int g = l.scale - 1; g >= 1; --g) {
            Matrix dyg = dz.middleCols(g * w, w) + carry;
            Matrix din = conv1d_backward(
                conv_in[static_cast<std::size_t>(g - 1)], dyg,
                l.weights[static_cast<std::size_t>(g - 1)], l.kernel,
                gl.weights[static_cast<std::size_t>(g - 1)],
                gl.biases[static_cast<std::size_t>(g - 1)]);
            dx.middleCols(g * w, w) += din;
            carry = din;
          }
          // the first group reaches the output twice: once through the
          // block shortcut and once as y1 = x1, so it takes dz twice
          dx.leftCols(w) += carry + dz.leftCols(w);
          return dx;
        } else {
          static_assert(std::is_same_v<T, StatsPoolLayer>);
          const double t_len = static_cast<double>(x.rows());
          const Eigen::Index dim = x.cols();
          Vector mu = x.colwise().mean().transpose();
          Matrix centered = x.rowwise() - mu.transpose();
          Vector var =
              centered.array().square().matrix().colwise().mean().transpose();
          Vector sd =
              var.array().max(StatsPoolLayer::kVarianceFloor).sqrt().matrix();
          Eigen::RowVectorXd dmu = dy.leftCols(dim);
          Eigen::RowVectorXd dsd = dy.rightCols(dim);
          Eigen::RowVectorXd coef =
              (dsd.array() *
               (var.array() > StatsPoolLayer::kVarianceFloor)
                   .cast<double>()
                   .transpose() /
               (t_len * sd.array().transpose()))
                  .matrix();
          Matrix dx = (centered.array().rowwise() * coef.array()).matrix();
          dx.rowwise() += dmu / t_len;
          return dx;
        }
      },
      layer);
}

std::vector<Matrix> chain_forward(std::span<const Layer> layers,
                                  const Matrix& input) {
  std::vector<Matrix> trace;
  trace.reserve(layers.size() + 1);
  trace.push_back(input);
  for (const Layer& l : layers)
    trace.push_back(layer_forward(l, trace.back()));
  return trace;
}

Matrix chain_backward(std::span<const Layer> layers,
                      const std::vector<Matrix>& trace, const Matrix& upstream,
                      std::span<Layer> grads) {
  if (trace.size() != layers.size() + 1 || grads.size() != layers.size())
    throw DataError("chain_backward: trace/gradient size mismatch");
  Matrix d = upstream;
  for (std::size_t i = layers.size(); i-- > 0;)
    d = layer_backward(layers[i], trace[i], d, grads[i]);
  return d;
}

void Network::validate() const {
  if (input_dim < 1) throw DataError("network: input_dim must be positive");
  if (layers.empty()) throw DataError("network: no layers");
  int pool = -1;
  int dim = input_dim;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (std::holds_alternative<StatsPoolLayer>(layers[i])) {
      if (pool >= 0) throw DataError("network: multiple stats_pool layers");
      pool = static_cast<int>(i);
    }
    dim = layer_out_dim(layers[i], dim);
  }
  if (pool < 0) throw DataError("network: needs a stats_pool layer");
  if (embedding_layer < pool ||
      embedding_layer >= static_cast<int>(layers.size()))
    throw DataError(
        "network: embedding_layer must name a layer at or after stats_pool");
}

int Network::embedding_dim() const {
  validate();
  int dim = input_dim;
  for (int i = 0; i <= embedding_layer; ++i)
    dim = layer_out_dim(layers[static_cast<std::size_t>(i)], dim);
  return dim;
}

int Network::stats_pool_index() const {
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (std::holds_alternative<StatsPoolLayer>(layers[i]))
      return static_cast<int>(i);
  throw DataError("network: needs a stats_pool layer");
}

std::size_t Network::param_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers) n += sv::nnet::param_count(l);
  return n;
}

NetGradients zero_gradients(const Network& net) {
  NetGradients g;
  g.layers.reserve(net.layers.size());
  for (const Layer& l : net.layers) g.layers.push_back(zero_like(l));
  return g;
}

namespace {
void visit_layer_list(
    std::vector<Layer>& layers,
    const std::function<void(const std::string&, double*, std::size_t)>& fn) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    std::string prefix = "layer" + std::to_string(i) + ".";
    visit_params(layers[i],
                 [&](const std::string& name, double* data, std::size_t n) {
                   fn(prefix + name, data, n);
                 });
  }
}
}  // namespace

void visit_params(
    Network& net,
    const std::function<void(const std::string&, double*, std::size_t)>& fn) {
  visit_layer_list(net.layers, fn);
}

void visit_params(
    NetGradients& grads,
    const std::function<void(const std::string&, double*, std::size_t)>& fn) {
  visit_layer_list(grads.layers, fn);
}

std::vector<Matrix> forward_trace(const Network& net, const Matrix& input) {
  net.validate();
  if (input.cols() != net.input_dim)
    throw DataError("network: input has dim " + std::to_string(input.cols()) +
                    ", expected " + std::to_string(net.input_dim));
  return chain_forward(net.layers, input);
}

Matrix network_forward(const Network& net, const Matrix& input) {
  return forward_trace(net, input).back();
}

Vector forward_embedding(const Network& net, const feat::FeatureMatrix& feat) {
  net.validate();
  if (feat.dim() != net.input_dim)
    throw DataError("embedding: features have dim " +
                    std::to_string(feat.dim()) + ", network expects " +
                    std::to_string(net.input_dim));
  Matrix act = feat.values;
  for (int i = 0; i <= net.embedding_layer; ++i)
    act = layer_forward(net.layers[static_cast<std::size_t>(i)], act);
  if (act.rows() != 1)
    throw DataError("embedding: layer output is not a single vector");
  if (!act.allFinite())
    throw NumericalError("embedding: non-finite values (parameter blow-up?)");
  return act.row(0).transpose();
}

NetGradients backward(const Network& net, const Matrix& input,
                      const Matrix& upstream) {
  auto trace = forward_trace(net, input);
  if (upstream.rows() != trace.back().rows() ||
      upstream.cols() != trace.back().cols())
    throw DataError("backward: upstream gradient shape mismatch");
  NetGradients grads = zero_gradients(net);
  chain_backward(net.layers, trace, upstream, grads.layers);
  return grads;
}

GradCheckReport compare_with_finite_differences(Network& net,
                                                const Matrix& input,
                                                const NetGradients& analytic,
                                                const Matrix& upstream,
                                                double eps) {
  if (eps <= 0.0) throw DataError("finite differences: eps must be positive");
  auto objective = [&]() {
    return (network_forward(net, input).array() * upstream.array()).sum();
  };
  struct Ref {
    std::string name;
    double* data;
    std::size_t n;
  };
  std::vector<Ref> net_refs;
  visit_params(net, [&](const std::string& name, double* data, std::size_t n) {
    net_refs.push_back({name, data, n});
  });
  NetGradients analytic_copy = analytic;
  std::vector<Ref> grad_refs;
  visit_params(analytic_copy,
               [&](const std::string& name, double* data, std::size_t n) {
                 grad_refs.push_back({name, data, n});
               });
  if (grad_refs.size() != net_refs.size())
    throw DataError("finite differences: gradient structure mismatch");

  GradCheckReport report;
  for (std::size_t r = 0; r < net_refs.size(); ++r) {
    if (net_refs[r].name != grad_refs[r].name ||
        net_refs[r].n != grad_refs[r].n)
      throw DataError("finite differences: gradient structure mismatch at " +
                      net_refs[r].name);
    GradCheckEntry entry{net_refs[r].name, 0.0};
    for (std::size_t i = 0; i < net_refs[r].n; ++i) {
      double saved = net_refs[r].data[i];
      net_refs[r].data[i] = saved + eps;
      double f_plus = objective();
      net_refs[r].data[i] = saved - eps;
      double f_minus = objective();
      net_refs[r].data[i] = saved;
      double numeric = (f_plus - f_minus) / (2.0 * eps);
      double a = grad_refs[r].data[i];
      double rel = std::abs(a - numeric) /
                   std::max({std::abs(a), std::abs(numeric), 1e-4});
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.tensors.push_back(std::move(entry));
  }
  return report;
}

GradCheckReport check_gradients(Network& net, const Matrix& input, double tol,
                                std::uint64_t seed, double eps) {
  if (net.param_count() > 10000)
    throw DataError("gradient check is limited to networks with <= 10000 "
                    "parameters");
  Matrix out = network_forward(net, input);
  Rng rng(seed);
  Matrix upstream(out.rows(), out.cols());
  for (Eigen::Index rr = 0; rr < upstream.rows(); ++rr)
    for (Eigen::Index cc = 0; cc < upstream.cols(); ++cc) {
      double mag = rng.uniform(0.5, 1.5);
      upstream(rr, cc) = rng.uniform() < 0.5 ? -mag : mag;
    }
  NetGradients analytic = backward(net, input, upstream);
  auto report = compare_with_finite_differences(net, input, analytic,
                                                upstream, eps);
  (void)tol;  // callers assert report.pass(tol); kept for API symmetry
  return report;
}

// ---------------------------------------------------------------------------
// Topology text and model files.

namespace {

struct KeyValues {
  std::vector<std::pair<std::string, std::string>> items;
  std::string get(const std::string& key, int line_no) const {
    for (const auto& [k, v] : items)
      if (k == key) return v;
    throw DataError("network spec line " + std::to_string(line_no) +
                    ": missing key '" + key + "'");
  }
  std::string get_or(const std::string& key, const std::string& dflt) const {
    for (const auto& [k, v] : items)
      if (k == key) return v;
    return dflt;
  }
};

int parse_int(const std::string& s, int line_no, const std::string& what) {
  try {
    std::size_t pos = 0;
    int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("network spec line " + std::to_string(line_no) +
                    ": bad integer for " + what + ": '" + s + "'");
  }
}

std::vector<int> parse_offsets(const std::string& s, int line_no) {
  std::vector<int> out;
  std::string cur;
  std::istringstream ss(s);
  while (std::getline(ss, cur, ','))
    out.push_back(parse_int(cur, line_no, "offsets"));
  if (out.empty())
    throw DataError("network spec line " + std::to_string(line_no) +
                    ": empty offsets");
  return out;
}

Layer make_layer(const std::string& kind, const KeyValues& kv, int in_dim,
                 int line_no) {
  auto bad = [&](const std::string& why) {
    throw DataError("network spec line " + std::to_string(line_no) + ": " +
                    why);
  };
  if (kind == "tdnn") {
    TdnnLayer l;
    l.offsets = parse_offsets(kv.get("offsets", line_no), line_no);
    int out = parse_int(kv.get("out", line_no), line_no, "out");
    if (out < 1) bad("tdnn out must be positive");
    l.weight = Matrix::Zero(out, static_cast<Eigen::Index>(l.offsets.size()) *
                                     in_dim);
    l.bias = Vector::Zero(out);
    return l;
  }
  if (kind == "dense") {
    DenseLayer l;
    int out = parse_int(kv.get("out", line_no), line_no, "out");
    if (out < 1) bad("dense out must be positive");
    l.weight = Matrix::Zero(out, in_dim);
    l.bias = Vector::Zero(out);
    return l;
  }
  if (kind == "factored_dense") {
    FactoredDenseLayer l;
    int out = parse_int(kv.get("out", line_no), line_no, "out");
    int bottleneck = parse_int(kv.get("bottleneck", line_no), line_no,
                               "bottleneck");
    if (out < 1 || bottleneck < 1)
      bad("factored_dense out/bottleneck must be positive");
    l.w1 = Matrix::Zero(bottleneck, in_dim);
    l.w2 = Matrix::Zero(out, bottleneck);
    l.bias = Vector::Zero(out);
    return l;
  }
  if (kind == "relu") return ReluLayer{};
  if (kind == "batchnorm") {
    BatchNormLayer l;
    l.gamma = Vector::Ones(in_dim);
    l.beta = Vector::Zero(in_dim);
    return l;
  }
  if (kind == "res") {
    ResBlockLayer l;
    l.kernel = parse_int(kv.get_or("kernel", "3"), line_no, "kernel");
    if (l.kernel < 1 || l.kernel % 2 == 0) bad("res kernel must be odd");
    l.weight = Matrix::Zero(in_dim, static_cast<Eigen::Index>(l.kernel) *
                                        in_dim);
    l.bias = Vector::Zero(in_dim);
    return l;
  }
  if (kind == "res2") {
    Res2BlockLayer l;
    l.scale = parse_int(kv.get("scale", line_no), line_no, "scale");
    l.width = parse_int(kv.get("width", line_no), line_no, "width");
    l.kernel = parse_int(kv.get_or("kernel", "3"), line_no, "kernel");
    if (l.scale < 1 || l.width < 1) bad("res2 scale/width must be positive");
    if (l.kernel < 1 || l.kernel % 2 == 0) bad("res2 kernel must be odd");
    if (l.scale * l.width != in_dim)
      bad("res2 scale*width must equal input dim " + std::to_string(in_dim));
    int n_convs = l.scale == 1 ? 1 : l.scale - 1;
    for (int g = 0; g < n_convs; ++g) {
      l.weights.push_back(Matrix::Zero(
          l.width, static_cast<Eigen::Index>(l.kernel) * l.width));
      l.biases.push_back(Vector::Zero(l.width));
    }
    return l;
  }
  if (kind == "stats_pool") return StatsPoolLayer{};
  bad("unknown layer kind '" + kind + "'");
  return ReluLayer{};  // unreachable
}

std::string trimmed(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Reads the topology header and layer lines. Stops before a "params" line
// (leaving it consumed, with the tensor count in *n_params if non-null).
Network parse_topology(std::istream& in, int* n_params) {
  Network net;
  if (n_params) *n_params = -1;
  std::string line;
  int line_no = 0;
  bool saw_magic = false, saw_input = false, saw_embed = false;
  int dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trimmed(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream ss(t);
    std::string head;
    ss >> head;
    if (!saw_magic) {
      std::string version;
      ss >> version;
      if (head != "svnet" || version != "1")
        throw DataError("network spec line " + std::to_string(line_no) +
                        ": expected 'svnet 1' header");
      saw_magic = true;
      continue;
    }
    if (head == "input_dim") {
      std::string v;
      ss >> v;
      net.input_dim = parse_int(v, line_no, "input_dim");
      if (net.input_dim < 1)
        throw DataError("network spec line " + std::to_string(line_no) +
                        ": input_dim must be positive");
      dim = net.input_dim;
      saw_input = true;
      continue;
    }
    if (head == "embedding_layer") {
      std::string v;
      ss >> v;
      net.embedding_layer = parse_int(v, line_no, "embedding_layer");
      saw_embed = true;
      continue;
    }
    if (head == "params") {
      std::string v;
      ss >> v;
      if (!n_params)
        throw DataError("network spec line " + std::to_string(line_no) +
                        ": unexpected params section");
      *n_params = parse_int(v, line_no, "params");
      break;
    }
    if (!saw_input)
      throw DataError("network spec line " + std::to_string(line_no) +
                      ": input_dim must come before layers");
    KeyValues kv;
    std::string tok;
    while (ss >> tok) {
      auto eq = tok.find('=');
      if (eq == std::string::npos || eq == 0)
        throw DataError("network spec line " + std::to_string(line_no) +
                        ": expected key=value, got '" + tok + "'");
      kv.items.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
    }
    net.layers.push_back(make_layer(head, kv, dim, line_no));
    dim = layer_out_dim(net.layers.back(), dim);
  }
  if (!saw_magic) throw DataError("network spec: missing 'svnet 1' header");
  if (!saw_input) throw DataError("network spec: missing input_dim");
  if (!saw_embed) throw DataError("network spec: missing embedding_layer");
  net.validate();
  return net;
}

std::string layer_spec_line(const Layer& layer) {
  std::ostringstream out;
  std::visit(
      [&](const auto& l) {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, TdnnLayer>) {
          out << "tdnn out=" << l.weight.rows() << " offsets=";
          for (std::size_t i = 0; i < l.offsets.size(); ++i)
            out << (i ? "," : "") << l.offsets[i];
        } else if constexpr (std::is_same_v<T, DenseLayer>) {
          out << "dense out=" << l.weight.rows();
        } else if constexpr (std::is_same_v<T, FactoredDenseLayer>) {
          out << "factored_dense out=" << l.w2.rows()
              << " bottleneck=" << l.w1.rows();
        } else if constexpr (std::is_same_v<T, ReluLayer>) {
          out << "relu";
        } else if constexpr (std::is_same_v<T, BatchNormLayer>) {
          out << "batchnorm";
        } else if constexpr (std::is_same_v<T, ResBlockLayer>) {
          out << "res kernel=" << l.kernel;
        } else if constexpr (std::is_same_v<T, Res2BlockLayer>) {
          out << "res2 scale=" << l.scale << " width=" << l.width
              << " kernel=" << l.kernel;
        } else {
          out << "stats_pool";
        }
      },
      layer);
  return out.str();
}

}  // namespace

void init_params(Layer& layer, Rng& rng) {
  auto fill_uniform = [&](Matrix& m, double fan_in) {
    double a = std::sqrt(1.0 / std::max(1.0, fan_in));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(-a, a);
  };
  std::visit(
      [&](auto& l) {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, TdnnLayer> ||
                      std::is_same_v<T, DenseLayer> ||
                      std::is_same_v<T, ResBlockLayer>) {
          fill_uniform(l.weight, static_cast<double>(l.weight.cols()));
          l.bias.setZero();
        } else if constexpr (std::is_same_v<T, FactoredDenseLayer>) {
          fill_uniform(l.w1, static_cast<double>(l.w1.cols()));
          fill_uniform(l.w2, static_cast<double>(l.w2.cols()));
          l.bias.setZero();
        } else if constexpr (std::is_same_v<T, BatchNormLayer>) {
          l.gamma.setOnes();
          l.beta.setZero();
        } else if constexpr (std::is_same_v<T, Res2BlockLayer>) {
          for (auto& w : l.weights)
            fill_uniform(w, static_cast<double>(w.cols()));
          for (auto& b : l.biases) b.setZero();
        }
      },
      layer);
}

Network build_network(const std::string& spec_text, std::uint64_t seed) {
  std::istringstream in(spec_text);
  Network net = parse_topology(in, nullptr);
  Rng rng(seed);
  for (Layer& layer : net.layers) init_params(layer, rng);
  return net;
}

void save_network(const std::string& path, const Network& net) {
  net.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model file: " + path);
  out << "svnet 1\n";
  out << "input_dim " << net.input_dim << "\n";
  out << "embedding_layer " << net.embedding_layer << "\n";
  for (const Layer& l : net.layers) out << layer_spec_line(l) << "\n";
  struct Tensor {
    std::string name;
    const double* data;
    Eigen::Index rows, cols;
  };
  std::vector<Tensor> tensors;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    std::string prefix = "layer" + std::to_string(i) + ".";
    for_each_tensor(const_cast<Layer&>(net.layers[i]),
                    [&](const std::string& name, double* data,
                        Eigen::Index rows, Eigen::Index cols) {
                      tensors.push_back({prefix + name, data, rows, cols});
                    });
  }
  out << "params " << tensors.size() << "\n";
  for (const Tensor& t : tensors) {
    out << t.name << " " << t.rows << " " << t.cols << "\n";
    for (Eigen::Index r = 0; r < t.rows; ++r)
      for (Eigen::Index c = 0; c < t.cols; ++c) {
        // column-major storage, row-major file order
        float v = static_cast<float>(t.data[c * t.rows + r]);
        out.write(reinterpret_cast<const char*>(&v), sizeof v);
      }
  }
  if (!out) throw DataError("failed writing model file: " + path);
}

Network load_network(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file: " + path);
  int n_params = -1;
  Network net = parse_topology(in, &n_params);
  if (n_params < 0)
    throw DataError("model file missing params section: " + path);
  struct Tensor {
    std::string name;
    double* data;
    Eigen::Index rows, cols;
  };
  std::vector<Tensor> expected;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    std::string prefix = "layer" + std::to_string(i) + ".";
    for_each_tensor(net.layers[i],
                    [&](const std::string& name, double* data,
                        Eigen::Index rows, Eigen::Index cols) {
                      expected.push_back({prefix + name, data, rows, cols});
                    });
  }
  if (static_cast<std::size_t>(n_params) != expected.size())
    throw DataError("model file " + path + ": expected " +
                    std::to_string(expected.size()) + " tensors, header says " +
                    std::to_string(n_params));
  for (Tensor& t : expected) {
    std::string line;
    if (!std::getline(in, line))
      throw DataError("model file " + path + ": truncated before tensor " +
                      t.name);
    std::istringstream ss(line);
    std::string name;
    Eigen::Index rows = 0, cols = 0;
    ss >> name >> rows >> cols;
    if (name != t.name || rows != t.rows || cols != t.cols)
      throw DataError("model file " + path + ": expected tensor '" + t.name +
                      " " + std::to_string(t.rows) + " " +
                      std::to_string(t.cols) + "', got '" + line + "'");
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) {
        float v = 0.0f;
        in.read(reinterpret_cast<char*>(&v), sizeof v);
        if (!in)
          throw DataError("model file " + path + ": truncated tensor " +
                          t.name);
        if (!std::isfinite(v))
          throw DataError("model file " + path + ": non-finite value in " +
                          t.name);
        t.data[c * rows + r] = static_cast<double>(v);
      }
  }
  net.validate();
  return net;
}

}  // namespace sv::nnet

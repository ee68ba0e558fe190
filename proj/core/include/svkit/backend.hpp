// Copyright (c) the svkit authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#ifndef SVKIT_BACKEND_HPP_
#define SVKIT_BACKEND_HPP_

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace sv::backend {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Embedding {
  std::string utt_id;
  std::string spk_id = "-";  // "-" means unknown
  Vector vec;
};

// Text: one line per embedding, "utt_id spk_id v1 ... vD". Binary mirrors
// the feature files: per-record header line "utt_id spk_id dim" followed by
// dim row-major little-endian 32-bit floats.
std::vector<Embedding> read_embeddings(const std::string& path, bool binary);
void write_embeddings(const std::string& path,
                      const std::vector<Embedding>& embs, bool binary);

// center -> ZCA whiten -> LDA project -> length-normalize, each stage
// optional.
struct PreprocessChain {
  Vector mean;
  Matrix whitener;   // D x D, symmetric
  Matrix lda;        // d x D, rows are projection directions
  bool center_active = true;
  bool whiten_active = true;
  bool lda_active = true;
  bool length_norm_active = true;

  int input_dim() const { return static_cast<int>(mean.size()); }
  int output_dim() const {
    return lda_active ? static_cast<int>(lda.rows()) : input_dim();
  }
};

struct PreprocessOptions {
  int lda_dim = 0;  // 0 means keep full dimension (rotation only)
  bool whiten = true;
  bool lda = true;
  bool length_norm = true;
};

// Needs >= 2 speakers with >= 2 utterances each. The whitener comes from the
// eigendecomposition of total covariance (eigenvalues floored at 1e-8 of the
// largest); LDA solves the between/within generalized eigenproblem on
// whitened data and keeps the top lda_dim directions.
PreprocessChain fit_preprocess(const std::vector<Embedding>& train,
                               const PreprocessOptions& opts);

Vector apply_preprocess(const PreprocessChain& chain, const Vector& v);
std::vector<Embedding> apply_preprocess(const PreprocessChain& chain,
                                        const std::vector<Embedding>& embs);

void save_chain(const std::string& path, const PreprocessChain& chain);
PreprocessChain load_chain(const std::string& path);

// Two-covariance PLDA: x = mu + y + eps with y ~ N(0, B) across speakers
// and eps ~ N(0, W) within a speaker.
struct PldaModel {
  Vector mu;
  Matrix b_cov;
  Matrix w_cov;
  int dim() const { return static_cast<int>(mu.size()); }
};

struct PldaTrainOptions {
  int n_iter = 10;
};

struct PldaTrainResult {
  PldaModel model;
  std::vector<double> loglik;  // total data log-likelihood per iteration
  int n_floored = 0;           // covariance eigenvalue floor activations
};

// EM with mu fixed at the global mean. Log-likelihood is recorded at the
// start of each iteration and is nondecreasing.
PldaTrainResult train_plda(const std::vector<Embedding>& train,
                           const PldaTrainOptions& opts);

void save_plda(const std::string& path, const PldaModel& model);
PldaModel load_plda(const std::string& path);

// Verification log-likelihood ratio, same-speaker vs different-speaker.
// Exactly symmetric in its two arguments, and identically zero when B = 0.
class PldaScorer {
 public:
  explicit PldaScorer(const PldaModel& model);
  double score(const Vector& enroll, const Vector& test) const;

 private:
  Vector mu_;
  Matrix q_sum_;   // (4B+2W)^-1 - (2B+2W)^-1
  Matrix q_diff_;  // (2W)^-1   - (2B+2W)^-1
  double logdet_term_ = 0.0;
};

double score_plda(const PldaModel& model, const Vector& enroll,
                  const Vector& test);

double score_cosine(const Vector& a, const Vector& b);

// Mean of the original and its augmented versions, length-normalized when
// requested (used with the chain's norm stage).
Embedding eda_enroll(const Embedding& original,
                     const std::vector<Embedding>& augmented,
                     bool length_norm);

}  // namespace sv::backend

#endif  // SVKIT_BACKEND_HPP_

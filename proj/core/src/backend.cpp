// Copyright (c) the svkit authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#include "svkit/backend.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "svkit/error.hpp"

namespace sv::backend {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kEigFloorRel = 1e-8;

double parse_double(const std::string& tok, const std::string& where) {
  try {
    std::size_t pos = 0;
    double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    if (!std::isfinite(v)) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw DataError(where + ": bad number '" + tok + "'");
  }
}

void check_collection(const std::vector<Embedding>& embs,
                      const std::string& what) {
  if (embs.empty()) throw DataError(what + ": empty embedding set");
  Eigen::Index dim = embs.front().vec.size();
  if (dim < 1) throw DataError(what + ": zero-dimensional embeddings");
  for (const Embedding& e : embs) {
    if (e.vec.size() != dim)
      throw DataError(what + ": embedding dim mismatch at " + e.utt_id);
    if (!e.vec.allFinite())
      throw DataError(what + ": non-finite embedding " + e.utt_id);
  }
}

std::map<std::string, std::vector<const Vector*>> group_by_speaker(
    const std::vector<Embedding>& embs, const std::string& what) {
  std::map<std::string, std::vector<const Vector*>> groups;
  for (const Embedding& e : embs) {
    if (e.spk_id == "-" || e.spk_id.empty())
      throw DataError(what + ": unlabeled embedding " + e.utt_id);
    groups[e.spk_id].push_back(&e.vec);
  }
  if (groups.size() < 2) throw DataError(what + ": needs >= 2 speakers");
  for (const auto& [spk, vecs] : groups)
    if (vecs.size() < 2)
      throw DataError(what + ": speaker " + spk +
                      " has a single utterance (needs >= 2)");
  return groups;
}

// Eigenvalue floor at kEigFloorRel * max eigenvalue; returns the count of
// floored eigenvalues and symmetrizes the result.
int floor_spd(Matrix& m, const std::string& what) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (m + m.transpose()));
  if (eig.info() != Eigen::Success)
    throw NumericalError(what + ": eigendecomposition failed");
  Vector lam = eig.eigenvalues();
  double top = lam.maxCoeff();
  if (!(top > 0.0))
    throw NumericalError(what + ": covariance has no positive eigenvalues");
  double floor = kEigFloorRel * top;
  int n_floored = 0;
  for (Eigen::Index i = 0; i < lam.size(); ++i)
    if (lam(i) < floor) {
      lam(i) = floor;
      ++n_floored;
    }
  m = eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
  m = 0.5 * (m + m.transpose());
  return n_floored;
}

struct SpdInfo {
  Matrix inv;
  double logdet = 0.0;
};

SpdInfo invert_spd(const Matrix& m, const std::string& what) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success)
    throw NumericalError(what + ": matrix is not positive definite");
  SpdInfo out;
  out.inv = llt.solve(Matrix::Identity(m.rows(), m.cols()));
  out.logdet = 2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum();
  return out;
}

// ---- named-tensor model files --------------------------------------------

void write_tensor(std::ofstream& os, const std::string& name,
                  const Matrix& m) {
  os << name << " " << m.rows() << " " << m.cols() << "\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      float v = static_cast<float>(m(r, c));
      os.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
}

Matrix read_tensor(std::ifstream& is, const std::string& path,
                   const std::string& expect_name) {
  std::string line;
  if (!std::getline(is, line))
    throw DataError(path + ": truncated before tensor " + expect_name);
  std::istringstream ss(line);
  std::string name;
  Eigen::Index rows = -1, cols = -1;
  ss >> name >> rows >> cols;
  if (name != expect_name || rows < 0 || cols < 0)
    throw DataError(path + ": expected tensor '" + expect_name + "', got '" +
                    line + "'");
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) {
      float v = 0.0f;
      is.read(reinterpret_cast<char*>(&v), sizeof v);
      if (!is) throw DataError(path + ": truncated tensor " + expect_name);
      if (!std::isfinite(v))
        throw DataError(path + ": non-finite value in " + expect_name);
      m(r, c) = static_cast<double>(v);
    }
  return m;
}

}  // namespace

// ---- embedding files ------------------------------------------------------

std::vector<Embedding> read_embeddings(const std::string& path, bool binary) {
  std::ifstream is(path, binary ? std::ios::binary : std::ios::in);
  if (!is) throw DataError("cannot open embeddings file: " + path);
  std::vector<Embedding> out;
  Eigen::Index dim = -1;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::string where = path + " line " + std::to_string(line_no);
    std::istringstream ss(line);
    Embedding e;
    if (binary) {
      long long n = -1;
      ss >> e.utt_id >> e.spk_id >> n;
      if (e.utt_id.empty() || e.spk_id.empty() || n < 1)
        throw DataError(where + ": bad embedding record header");
      e.vec.resize(n);
      for (long long i = 0; i < n; ++i) {
        float v = 0.0f;
        is.read(reinterpret_cast<char*>(&v), sizeof v);
        if (!is) throw DataError(where + ": truncated embedding data");
        if (!std::isfinite(v))
          throw DataError(where + ": non-finite embedding value");
        e.vec(i) = static_cast<double>(v);
      }
    } else {
      ss >> e.utt_id >> e.spk_id;
      if (e.utt_id.empty() || e.spk_id.empty())
        throw DataError(where + ": expected 'utt_id spk_id v1 ...'");
      std::vector<double> vals;
      std::string tok;
      while (ss >> tok) vals.push_back(parse_double(tok, where));
      if (vals.empty()) throw DataError(where + ": no embedding values");
      e.vec = Eigen::Map<Vector>(vals.data(),
                                 static_cast<Eigen::Index>(vals.size()));
    }
    if (dim < 0)
      dim = e.vec.size();
    else if (e.vec.size() != dim)
      throw DataError(where + ": embedding dim " +
                      std::to_string(e.vec.size()) + " != " +
                      std::to_string(dim));
    out.push_back(std::move(e));
  }
  if (out.empty()) throw DataError("empty embeddings file: " + path);
  return out;
}

void write_embeddings(const std::string& path,
                      const std::vector<Embedding>& embs, bool binary) {
  check_collection(embs, "write_embeddings");
  std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
  if (!os) throw DataError("cannot write embeddings file: " + path);
  for (const Embedding& e : embs) {
    if (binary) {
      os << e.utt_id << " " << e.spk_id << " " << e.vec.size() << "\n";
      for (Eigen::Index i = 0; i < e.vec.size(); ++i) {
        float v = static_cast<float>(e.vec(i));
        os.write(reinterpret_cast<const char*>(&v), sizeof v);
      }
      os << "\n";
    } else {
      os << e.utt_id << " " << e.spk_id;
      std::ostringstream vals;
      vals.precision(9);
      for (Eigen::Index i = 0; i < e.vec.size(); ++i)
        vals << " " << e.vec(i);
      os << vals.str() << "\n";
    }
  }
  if (!os) throw DataError("failed writing embeddings file: " + path);
}

// ---- preprocessing --------------------------------------------------------

PreprocessChain fit_preprocess(const std::vector<Embedding>& train,
                               const PreprocessOptions& opts) {
  check_collection(train, "fit_preprocess");
  auto groups = group_by_speaker(train, "fit_preprocess");
  const Eigen::Index dim = train.front().vec.size();
  const Eigen::Index n = static_cast<Eigen::Index>(train.size());
  const Eigen::Index n_spk = static_cast<Eigen::Index>(groups.size());

  int lda_dim = opts.lda_dim == 0 ? static_cast<int>(dim) : opts.lda_dim;
  if (lda_dim < 1 || lda_dim > dim)
    throw DataError("fit_preprocess: lda_dim out of range");
  if (opts.lda && lda_dim < dim && lda_dim > static_cast<int>(n_spk) - 1)
    throw DataError("fit_preprocess: lda_dim " + std::to_string(lda_dim) +
                    " exceeds n_speakers-1 = " + std::to_string(n_spk - 1));

  PreprocessChain chain;
  chain.whiten_active = opts.whiten;
  chain.lda_active = opts.lda;
  chain.length_norm_active = opts.length_norm;

  chain.mean = Vector::Zero(dim);
  for (const Embedding& e : train) chain.mean += e.vec;
  chain.mean /= static_cast<double>(n);

  // ZCA whitening from total covariance, eigenvalues floored.
  Matrix centered(n, dim);
  for (Eigen::Index i = 0; i < n; ++i)
    centered.row(i) =
        (train[static_cast<std::size_t>(i)].vec - chain.mean).transpose();
  if (opts.whiten) {
    Matrix cov = centered.transpose() * centered / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    if (eig.info() != Eigen::Success)
      throw NumericalError("fit_preprocess: covariance eigendecomposition "
                           "failed");
    Vector lam = eig.eigenvalues();
    double top = lam.maxCoeff();
    if (!(top > 0.0))
      throw DataError("fit_preprocess: degenerate training set (zero "
                      "covariance)");
    double floor = kEigFloorRel * top;
    Vector inv_sqrt(lam.size());
    for (Eigen::Index i = 0; i < lam.size(); ++i)
      inv_sqrt(i) = 1.0 / std::sqrt(std::max(lam(i), floor));
    chain.whitener = eig.eigenvectors() * inv_sqrt.asDiagonal() *
                     eig.eigenvectors().transpose();
  } else {
    chain.whitener = Matrix::Identity(dim, dim);
  }

  if (opts.lda) {
    // Scatter matrices on whitened, centered data.
    Matrix white = centered * chain.whitener.transpose();
    Matrix sw = Matrix::Zero(dim, dim);
    Matrix sb = Matrix::Zero(dim, dim);
    Vector global = white.colwise().mean().transpose();
    std::map<std::string, std::vector<Eigen::Index>> rows_of;
    for (Eigen::Index i = 0; i < n; ++i)
      rows_of[train[static_cast<std::size_t>(i)].spk_id].push_back(i);
    for (const auto& [spk, idxs] : rows_of) {
      Vector m = Vector::Zero(dim);
      for (Eigen::Index i : idxs) m += white.row(i).transpose();
      m /= static_cast<double>(idxs.size());
      for (Eigen::Index i : idxs) {
        Vector d = white.row(i).transpose() - m;
        sw += d * d.transpose();
      }
      Vector dm = m - global;
      sb += static_cast<double>(idxs.size()) * dm * dm.transpose();
    }
    sw /= static_cast<double>(n);
    sb /= static_cast<double>(n);

    double sw_top =
        Eigen::SelfAdjointEigenSolver<Matrix>(sw).eigenvalues().maxCoeff();
    if (!(sw_top > 0.0))
      throw DataError("fit_preprocess: singular within-class scatter");
    Matrix sw_floored = sw;
    floor_spd(sw_floored, "fit_preprocess within-class scatter");
    Eigen::LLT<Matrix> llt(sw_floored);
    if (llt.info() != Eigen::Success)
      throw NumericalError("fit_preprocess: within-class scatter Cholesky "
                           "failed");
    Matrix l_inv = llt.matrixL().solve(Matrix::Identity(dim, dim));
    Matrix m_sym = l_inv * sb * l_inv.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (m_sym +
                                                     m_sym.transpose()));
    if (eig.info() != Eigen::Success)
      throw NumericalError("fit_preprocess: LDA eigendecomposition failed");
    chain.lda = Matrix(lda_dim, dim);
    for (int k = 0; k < lda_dim; ++k) {
      // eigenvalues ascending; take from the top
      Vector u = eig.eigenvectors().col(dim - 1 - k);
      Vector w = l_inv.transpose() * u;
      double norm = w.norm();
      if (!(norm > 0.0))
        throw NumericalError("fit_preprocess: degenerate LDA direction");
      w /= norm;
      // sign convention: largest-magnitude entry positive
      Eigen::Index arg = 0;
      w.cwiseAbs().maxCoeff(&arg);
      if (w(arg) < 0.0) w = -w;
      chain.lda.row(k) = w.transpose();
    }
  } else {
    chain.lda = Matrix::Identity(dim, dim);
  }
  return chain;
}

Vector apply_preprocess(const PreprocessChain& chain, const Vector& v) {
  if (v.size() != chain.mean.size())
    throw DataError("apply_preprocess: dim mismatch");
  Vector x = v;
  if (chain.center_active) x -= chain.mean;
  if (chain.whiten_active) x = chain.whitener * x;
  if (chain.lda_active) x = chain.lda * x;
  if (chain.length_norm_active) {
    double norm = x.norm();
    if (norm == 0.0)
      throw DataError("apply_preprocess: zero vector at length "
                      "normalization");
    x /= norm;
  }
  if (!x.allFinite())
    throw NumericalError("apply_preprocess: non-finite output");
  return x;
}

std::vector<Embedding> apply_preprocess(const PreprocessChain& chain,
                                        const std::vector<Embedding>& embs) {
  std::vector<Embedding> out;
  out.reserve(embs.size());
  for (const Embedding& e : embs)
    out.push_back({e.utt_id, e.spk_id, apply_preprocess(chain, e.vec)});
  return out;
}

void save_chain(const std::string& path, const PreprocessChain& chain) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write chain file: " + path);
  os << "svchain 1\n";
  os << "stages center=" << int{chain.center_active}
     << " whiten=" << int{chain.whiten_active}
     << " lda=" << int{chain.lda_active}
     << " length_norm=" << int{chain.length_norm_active} << "\n";
  os << "params 3\n";
  write_tensor(os, "mean", chain.mean);
  write_tensor(os, "whitener", chain.whitener);
  write_tensor(os, "lda", chain.lda);
  if (!os) throw DataError("failed writing chain file: " + path);
}

PreprocessChain load_chain(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open chain file: " + path);
  std::string line;
  if (!std::getline(is, line) || line != "svchain 1")
    throw DataError(path + ": expected 'svchain 1' header");
  if (!std::getline(is, line))
    throw DataError(path + ": missing stages line");
  PreprocessChain chain;
  {
    std::istringstream ss(line);
    std::string head;
    ss >> head;
    if (head != "stages") throw DataError(path + ": missing stages line");
    std::string tok;
    while (ss >> tok) {
      auto eq = tok.find('=');
      if (eq == std::string::npos)
        throw DataError(path + ": bad stages entry '" + tok + "'");
      std::string key = tok.substr(0, eq);
      bool on = tok.substr(eq + 1) == "1";
      if (key == "center")
        chain.center_active = on;
      else if (key == "whiten")
        chain.whiten_active = on;
      else if (key == "lda")
        chain.lda_active = on;
      else if (key == "length_norm")
        chain.length_norm_active = on;
      else
        throw DataError(path + ": unknown stage '" + key + "'");
    }
  }
  if (!std::getline(is, line) || line.rfind("params ", 0) != 0)
    throw DataError(path + ": missing params line");
  chain.mean = read_tensor(is, path, "mean");
  chain.whitener = read_tensor(is, path, "whitener");
  chain.lda = read_tensor(is, path, "lda");
  const Eigen::Index dim = chain.mean.rows();
  if (chain.mean.cols() != 1 || dim < 1)
    throw DataError(path + ": mean must be a column vector");
  chain.mean = Vector(chain.mean.col(0));
  if (chain.whiten_active &&
      (chain.whitener.rows() != dim || chain.whitener.cols() != dim))
    throw DataError(path + ": whitener shape mismatch");
  if (chain.lda_active && chain.lda.cols() != dim)
    throw DataError(path + ": lda shape mismatch");
  return chain;
}

// ---- PLDA -----------------------------------------------------------------

PldaTrainResult train_plda(const std::vector<Embedding>& train,
                           const PldaTrainOptions& opts) {
  check_collection(train, "train_plda");
  if (opts.n_iter < 1) throw DataError("train_plda: n_iter must be >= 1");
  auto groups = group_by_speaker(train, "train_plda");
  const Eigen::Index dim = train.front().vec.size();
  const double n_total = static_cast<double>(train.size());
  const double n_spk = static_cast<double>(groups.size());

  PldaTrainResult result;
  PldaModel& model = result.model;

  model.mu = Vector::Zero(dim);
  for (const Embedding& e : train) model.mu += e.vec;
  model.mu /= n_total;

  // Per-speaker sufficient statistics around the (fixed) global mean.
  struct SpeakerStats {
    double n = 0.0;
    Vector f;
    Matrix t;
  };
  std::vector<SpeakerStats> stats;
  stats.reserve(groups.size());
  Matrix within = Matrix::Zero(dim, dim);
  Matrix between = Matrix::Zero(dim, dim);
  for (const auto& [spk, vecs] : groups) {
    SpeakerStats s;
    s.n = static_cast<double>(vecs.size());
    s.f = Vector::Zero(dim);
    s.t = Matrix::Zero(dim, dim);
    Vector cls_mean = Vector::Zero(dim);
    for (const Vector* v : vecs) cls_mean += *v;
    cls_mean /= s.n;
    for (const Vector* v : vecs) {
      Vector c = *v - model.mu;
      s.f += c;
      s.t += c * c.transpose();
      Vector d = *v - cls_mean;
      within += d * d.transpose();
    }
    Vector dm = cls_mean - model.mu;
    between += s.n * dm * dm.transpose();
    stats.push_back(std::move(s));
  }

  model.w_cov = within / n_total;
  model.b_cov = between / n_total;
  result.n_floored += floor_spd(model.w_cov, "train_plda W init");
  result.n_floored += floor_spd(model.b_cov, "train_plda B init");

  for (int iter = 0; iter < opts.n_iter; ++iter) {
    SpdInfo w_info = invert_spd(model.w_cov, "train_plda W");
    SpdInfo b_info = invert_spd(model.b_cov, "train_plda B");

    // E-step: posterior over each speaker's latent offset. The posterior
    // precision depends only on the utterance count, so cache it.
    std::map<long long, std::pair<Matrix, double>> post_by_count;
    auto posterior = [&](double n) -> const std::pair<Matrix, double>& {
      long long key = static_cast<long long>(n);
      auto it = post_by_count.find(key);
      if (it == post_by_count.end()) {
        Matrix p = b_info.inv + n * w_info.inv;
        SpdInfo p_info = invert_spd(p, "train_plda posterior");
        it = post_by_count
                 .emplace(key, std::make_pair(p_info.inv, p_info.logdet))
                 .first;
      }
      return it->second;
    };

    double loglik = 0.0;
    Matrix b_acc = Matrix::Zero(dim, dim);
    Matrix w_acc = Matrix::Zero(dim, dim);
    for (const SpeakerStats& s : stats) {
      const auto& [p_inv, logdet_p] = posterior(s.n);
      Vector m = p_inv * (w_info.inv * s.f);
      Matrix eyy = p_inv + m * m.transpose();
      // log-likelihood of this speaker's utterances at current (B, W)
      double quad = (w_info.inv * s.t).trace() -
                    m.dot((b_info.inv + s.n * w_info.inv) * m);
      loglik += -0.5 * (s.n * static_cast<double>(dim) * kLog2Pi +
                        s.n * w_info.logdet + b_info.logdet + logdet_p +
                        quad);
      b_acc += eyy;
      w_acc += s.t - m * s.f.transpose() - s.f * m.transpose() + s.n * eyy;
    }
    result.loglik.push_back(loglik);

    model.b_cov = b_acc / n_spk;
    model.w_cov = w_acc / n_total;
    result.n_floored += floor_spd(model.b_cov, "train_plda B update");
    result.n_floored += floor_spd(model.w_cov, "train_plda W update");
  }
  return result;
}

void save_plda(const std::string& path, const PldaModel& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write PLDA file: " + path);
  os << "svplda 1\n";
  os << "params 3\n";
  write_tensor(os, "mu", model.mu);
  write_tensor(os, "b_cov", model.b_cov);
  write_tensor(os, "w_cov", model.w_cov);
  if (!os) throw DataError("failed writing PLDA file: " + path);
}

PldaModel load_plda(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open PLDA file: " + path);
  std::string line;
  if (!std::getline(is, line) || line != "svplda 1")
    throw DataError(path + ": expected 'svplda 1' header");
  if (!std::getline(is, line) || line.rfind("params ", 0) != 0)
    throw DataError(path + ": missing params line");
  PldaModel model;
  Matrix mu = read_tensor(is, path, "mu");
  if (mu.cols() != 1 || mu.rows() < 1)
    throw DataError(path + ": mu must be a column vector");
  model.mu = Vector(mu.col(0));
  model.b_cov = read_tensor(is, path, "b_cov");
  model.w_cov = read_tensor(is, path, "w_cov");
  const Eigen::Index d = model.mu.size();
  if (model.b_cov.rows() != d || model.b_cov.cols() != d ||
      model.w_cov.rows() != d || model.w_cov.cols() != d)
    throw DataError(path + ": covariance shape mismatch");
  return model;
}

PldaScorer::PldaScorer(const PldaModel& model) : mu_(model.mu) {
  const Eigen::Index d = model.mu.size();
  if (model.b_cov.rows() != d || model.b_cov.cols() != d ||
      model.w_cov.rows() != d || model.w_cov.cols() != d)
    throw DataError("PldaScorer: covariance shape mismatch");
  Matrix sum_cov = 4.0 * model.b_cov + 2.0 * model.w_cov;
  Matrix diff_cov = 2.0 * model.w_cov;
  Matrix tot_cov = 2.0 * model.b_cov + 2.0 * model.w_cov;
  SpdInfo sum_i = invert_spd(sum_cov, "PldaScorer 4B+2W");
  SpdInfo diff_i = invert_spd(diff_cov, "PldaScorer 2W");
  SpdInfo tot_i = invert_spd(tot_cov, "PldaScorer 2B+2W");
  q_sum_ = sum_i.inv - tot_i.inv;
  q_diff_ = diff_i.inv - tot_i.inv;
  logdet_term_ = sum_i.logdet + diff_i.logdet - 2.0 * tot_i.logdet;
}

double PldaScorer::score(const Vector& enroll, const Vector& test) const {
  if (enroll.size() != mu_.size() || test.size() != mu_.size())
    throw DataError("score_plda: embedding dim mismatch");
  Vector u = (enroll - mu_) + (test - mu_);
  Vector v = (enroll - mu_) - (test - mu_);
  return -0.5 * (u.dot(q_sum_ * u) + v.dot(q_diff_ * v) + logdet_term_);
}

double score_plda(const PldaModel& model, const Vector& enroll,
                  const Vector& test) {
  return PldaScorer(model).score(enroll, test);
}

double score_cosine(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DataError("score_cosine: dim mismatch");
  double na = a.norm();
  double nb = b.norm();
  if (na == 0.0 || nb == 0.0)
    throw DataError("score_cosine: zero-norm vector");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

Embedding eda_enroll(const Embedding& original,
                     const std::vector<Embedding>& augmented,
                     bool length_norm) {
  Vector acc = original.vec;
  for (const Embedding& e : augmented) {
    if (e.vec.size() != original.vec.size())
      throw DataError("eda_enroll: dim mismatch at " + e.utt_id);
    acc += e.vec;
  }
  acc /= static_cast<double>(1 + augmented.size());
  if (length_norm) {
    double norm = acc.norm();
    if (norm == 0.0)
      throw DataError("eda_enroll: zero vector at length normalization");
    acc /= norm;
  }
  return {original.utt_id, original.spk_id, std::move(acc)};
}

}  // namespace sv::backend

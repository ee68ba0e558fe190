// Copyright (c) the svkit authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

// End-to-end release gate. Each check prints one PASS/FAIL line; the binary
// exits nonzero if any check fails. Everything runs on synthetic data and
// compares against independent oracles (finite differences, quadrature,
// exhaustive threshold sweeps, hand-computed formulas).

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "svkit/augment.hpp"
#include "svkit/backend.hpp"
#include "svkit/demo.hpp"
#include "svkit/evalnorm.hpp"
#include "svkit/features.hpp"
#include "svkit/loss.hpp"
#include "svkit/nnet.hpp"
#include "svkit/rng.hpp"
#include "svkit/wav.hpp"

using sv::Rng;
using sv::Waveform;
namespace aug = sv::aug;
namespace be = sv::backend;
namespace ev = sv::evalnorm;
namespace nn = sv::nnet;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

nn::Matrix random_matrix(int r, int c, std::uint64_t seed) {
  Rng rng(seed);
  nn::Matrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.gaussian();
  return m;
}

be::Vector random_vector(int d, Rng& rng) {
  be::Vector v(d);
  for (int i = 0; i < d; ++i) v[i] = rng.gaussian();
  return v;
}

Waveform make_sine(double freq_hz, double amplitude, int n_samples,
                   int sample_rate = 16000) {
  Waveform wav;
  wav.sample_rate = sample_rate;
  wav.samples.resize(n_samples);
  for (int i = 0; i < n_samples; ++i)
    wav.samples[i] =
        amplitude * std::sin(2.0 * M_PI * freq_hz * i / sample_rate);
  return wav;
}

Waveform make_noise(std::uint64_t seed, double amplitude, int n_samples,
                    int sample_rate = 16000) {
  Rng rng(seed);
  Waveform wav;
  wav.sample_rate = sample_rate;
  wav.samples.resize(n_samples);
  for (int i = 0; i < n_samples; ++i) wav.samples[i] = amplitude * rng.gaussian();
  return wav;
}

// ---------------------------------------------------------------------------
// 1. analytic gradients vs central finite differences, every layer type and
//    both losses

double loss_fd_max_rel(const nn::Matrix& scores,
                       const std::function<sv::loss::LossValue(
                           const nn::Matrix&)>& fn) {
  const sv::loss::LossValue base = fn(scores);
  const double eps = 1e-6;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < scores.rows(); ++i)
    for (Eigen::Index j = 0; j < scores.cols(); ++j) {
      nn::Matrix p = scores, m = scores;
      p(i, j) += eps;
      m(i, j) -= eps;
      const double numeric = (fn(p).value - fn(m).value) / (2.0 * eps);
      const double analytic = base.grad(i, j);
      // same floor as the network gradient checker: entries far below 1e-4
      // are compared absolutely, where central differences bottom out
      const double rel = std::abs(analytic - numeric) /
                         std::max({std::abs(analytic), std::abs(numeric), 1e-4});
      worst = std::max(worst, rel);
    }
  return worst;
}

Outcome check_gradients() {
  const double t0 = now_s();
  struct Case {
    const char* label;
    std::string topo;
    int in_dim;
    std::uint64_t seed;  // seeds straddling a relu kink are skipped up front
  };
  const std::vector<Case> cases{
      {"tdnn",
       "svnet 1\ninput_dim 5\nembedding_layer 2\ntdnn out=6 offsets=-2,0,2\n"
       "stats_pool\ndense out=3\n",
       5, 1},
      {"res",
       "svnet 1\ninput_dim 6\nembedding_layer 3\nres kernel=3\nstats_pool\n"
       "dense out=4\ndense out=3\n",
       6, 1},
      {"res2 s=2 w=2",
       "svnet 1\ninput_dim 4\nembedding_layer 3\nres2 scale=2 width=2 "
       "kernel=3\nstats_pool\ndense out=4\ndense out=3\n",
       4, 1},
      {"res2 s=4 w=16",
       "svnet 1\ninput_dim 64\nembedding_layer 2\nres2 scale=4 width=16 "
       "kernel=3\nstats_pool\ndense out=8\n",
       64, 7},
      {"dense+factored",
       "svnet 1\ninput_dim 5\nembedding_layer 3\nstats_pool\ndense out=6\n"
       "factored_dense out=5 bottleneck=3\ndense out=3\n",
       5, 1},
      {"batchnorm+relu",
       "svnet 1\ninput_dim 5\nembedding_layer 4\nbatchnorm\ntdnn out=6 "
       "offsets=-1,0,1\nrelu\nstats_pool\ndense out=3\n",
       5, 3},
  };

  double worst = 0.0;
  std::string worst_label = "-";
  for (const auto& c : cases) {
    nn::Network net = nn::build_network(c.topo, c.seed);
    nn::Matrix x = random_matrix(7, c.in_dim, c.seed * 1000 + 1);
    nn::GradCheckReport rep =
        nn::check_gradients(net, x, 1e-4, c.seed * 1000 + 2);
    if (rep.max_rel_err > worst) {
      worst = rep.max_rel_err;
      worst_label = c.label;
    }
    if (!rep.pass(1e-4))
      return {false, fmt("%s max rel err %.3e >= 1e-4", c.label,
                         rep.max_rel_err)};
  }

  // both losses on random score matrices
  Rng rng(5);
  nn::Matrix cosines(6, 5), logits(6, 5);
  std::vector<int> labels(6);
  for (int i = 0; i < 6; ++i) {
    labels[i] = static_cast<int>(rng.uniform_int(5));
    for (int j = 0; j < 5; ++j) {
      cosines(i, j) = rng.uniform(-1.0, 1.0);
      logits(i, j) = rng.gaussian();
    }
  }
  const sv::loss::AmsConfig cfg{9.0, 0.2};
  const double ams_rel = loss_fd_max_rel(cosines, [&](const nn::Matrix& s) {
    return sv::loss::ams_loss(s, labels, cfg);
  });
  const double ce_rel = loss_fd_max_rel(logits, [&](const nn::Matrix& s) {
    return sv::loss::ce_loss(s, labels);
  });
  worst = std::max({worst, ams_rel, ce_rel});
  if (ams_rel >= 1e-4) return {false, fmt("ams loss rel err %.3e", ams_rel)};
  if (ce_rel >= 1e-4) return {false, fmt("ce loss rel err %.3e", ce_rel)};

  const double elapsed = now_s() - t0;
  if (elapsed >= 60.0) return {false, fmt("took %.1f s", elapsed)};
  return {true, fmt("max rel err %.1e (%s), %.1f s", worst,
                    worst_label.c_str(), elapsed)};
}

// ---------------------------------------------------------------------------
// 2. margin 0 / scale 1 collapses the margin softmax to plain cross-entropy

Outcome check_margin_softmax_reduction() {
  Rng rng(21);
  double worst = 0.0;
  for (int b = 0; b < 100; ++b) {
    const int n = 2 + b % 7;
    const int c = 2 + b % 9;
    nn::Matrix scores(n, c);
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) {
      labels[i] = static_cast<int>(rng.uniform_int(c));
      for (int j = 0; j < c; ++j) scores(i, j) = rng.uniform(-1.0, 1.0);
    }
    const auto a = sv::loss::ams_loss(scores, labels, {1.0, 0.0});
    const auto e = sv::loss::ce_loss(scores, labels);
    worst = std::max(worst, std::abs(a.value - e.value));
    worst = std::max(worst, (a.grad - e.grad).cwiseAbs().maxCoeff());
  }
  if (worst > 1e-12) return {false, fmt("max deviation %.3e > 1e-12", worst)};
  return {true, fmt("100 batches, max deviation %.1e", worst)};
}

// ---------------------------------------------------------------------------
// 3. a single-group multi-scale block is exactly the plain residual block

Outcome check_res2_scale1() {
  Rng rng(31);
  const int d = 5, kernel = 3, frames = 9;
  double worst = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    nn::Matrix w(d, d * kernel);
    nn::Vector b(d);
    for (int i = 0; i < d; ++i) {
      b[i] = 0.1 * rng.gaussian();
      for (int j = 0; j < d * kernel; ++j) w(i, j) = 0.5 * rng.gaussian();
    }
    nn::ResBlockLayer res;
    res.kernel = kernel;
    res.weight = w;
    res.bias = b;
    nn::Res2BlockLayer r2;
    r2.scale = 1;
    r2.width = d;
    r2.kernel = kernel;
    r2.weights = {w};
    r2.biases = {b};

    nn::Matrix x(frames, d);
    for (int i = 0; i < frames; ++i)
      for (int j = 0; j < d; ++j) x(i, j) = rng.gaussian();
    const nn::Matrix ya = nn::layer_forward(nn::Layer{res}, x);
    const nn::Matrix yb = nn::layer_forward(nn::Layer{r2}, x);
    worst = std::max(worst, (ya - yb).cwiseAbs().maxCoeff());
  }
  if (worst > 1e-12) return {false, fmt("max deviation %.3e > 1e-12", worst)};
  return {true, fmt("50 inputs, max deviation %.1e", worst)};
}

// ---------------------------------------------------------------------------
// 4. EM recovers known generating parameters from clustered 2-D data

be::Matrix chol2(double a, double b, double c) {
  be::Matrix l = be::Matrix::Zero(2, 2);
  l(0, 0) = std::sqrt(a);
  l(1, 0) = b / l(0, 0);
  l(1, 1) = std::sqrt(c - l(1, 0) * l(1, 0));
  return l;
}

Outcome check_plda_recovery() {
  const double t0 = now_s();
  const be::Vector mu = (be::Vector(2) << 1.0, -2.0).finished();
  const be::Matrix lb = chol2(2.0, 0.5, 1.0);
  const be::Matrix lw = chol2(0.5, 0.1, 0.3);
  Rng rng(11);
  std::vector<be::Embedding> train;
  for (int s = 0; s < 500; ++s) {
    const be::Vector y = mu + lb * random_vector(2, rng);
    for (int u = 0; u < 5; ++u) {
      be::Embedding e;
      e.utt_id = "s" + std::to_string(s) + "u" + std::to_string(u);
      e.spk_id = "s" + std::to_string(s);
      e.vec = y + lw * random_vector(2, rng);
      train.push_back(std::move(e));
    }
  }
  be::PldaTrainOptions opts;
  opts.n_iter = 50;
  const be::PldaTrainResult r = be::train_plda(train, opts);

  for (std::size_t i = 1; i < r.loglik.size(); ++i)
    if (r.loglik[i] < r.loglik[i - 1] - 1e-7)
      return {false, fmt("log-likelihood dropped at iteration %zu", i)};

  const be::Matrix b_true = lb * lb.transpose();
  const be::Matrix w_true = lw * lw.transpose();
  const double mu_rel = (r.model.mu - mu).norm() / mu.norm();
  const double b_rel = (r.model.b_cov - b_true).norm() / b_true.norm();
  const double w_rel = (r.model.w_cov - w_true).norm() / w_true.norm();
  const double elapsed = now_s() - t0;
  if (mu_rel >= 0.10 || b_rel >= 0.10 || w_rel >= 0.10)
    return {false, fmt("rel errors mu %.3f between %.3f within %.3f", mu_rel,
                       b_rel, w_rel)};
  if (elapsed >= 60.0) return {false, fmt("took %.1f s", elapsed)};
  return {true, fmt("rel err mu %.3f between %.3f within %.3f, %.1f s",
                    mu_rel, b_rel, w_rel, elapsed)};
}

// ---------------------------------------------------------------------------
// 5. closed-form verification LLR vs Simpson quadrature in one dimension

Outcome check_plda_quadrature() {
  be::PldaModel model;
  model.mu = (be::Vector(1) << 0.3).finished();
  model.b_cov = (be::Matrix(1, 1) << 1.21).finished();
  model.w_cov = (be::Matrix(1, 1) << 0.49).finished();
  const be::PldaScorer scorer(model);
  const double mu = 0.3, bv = 1.21, wv = 0.49;

  auto normal_pdf = [](double x, double mean, double var) {
    return std::exp(-(x - mean) * (x - mean) / (2 * var)) /
           std::sqrt(2 * M_PI * var);
  };
  auto quad_llr = [&](double e, double t) {
    const int n = 6000;  // even
    const double lo = mu - 12.0, hi = mu + 12.0, h = (hi - lo) / n;
    double same = 0.0, marg_e = 0.0, marg_t = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double y = lo + i * h;
      const double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
      const double prior = normal_pdf(y, mu, bv);
      same += w * prior * normal_pdf(e, y, wv) * normal_pdf(t, y, wv);
      marg_e += w * prior * normal_pdf(e, y, wv);
      marg_t += w * prior * normal_pdf(t, y, wv);
    }
    // each Simpson sum still needs a factor h/3; one survives the ratio
    return std::log(same) - std::log(marg_e) - std::log(marg_t) -
           std::log(h / 3.0);
  };

  double worst = 0.0;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) {
      const double e = mu - 2.0 + 4.0 * i / 9.0;
      const double t = mu - 2.0 + 4.0 * j / 9.0;
      const double got = scorer.score((be::Vector(1) << e).finished(),
                                      (be::Vector(1) << t).finished());
      worst = std::max(worst, std::abs(got - quad_llr(e, t)));
    }
  if (worst > 1e-6) return {false, fmt("max |closed - quad| %.3e", worst)};
  return {true, fmt("10x10 grid, max deviation %.1e", worst)};
}

// ---------------------------------------------------------------------------
// 6. rate metrics vs exhaustive threshold sweeps, plus monotone invariance

double brute_eer(const ev::TrialScores& scores) {
  std::vector<double> thresholds;
  for (const auto& s : scores) thresholds.push_back(s.score);
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());
  double n_tar = 0, n_non = 0;
  for (const auto& s : scores) (s.label == 1 ? n_tar : n_non) += 1;

  auto rates = [&](double thr) {
    double miss = 0, fa = 0;
    for (const auto& s : scores) {
      if (s.label == 1 && s.score < thr) miss += 1;
      if (s.label == 0 && s.score >= thr) fa += 1;
    }
    return std::make_pair(fa / n_non, miss / n_tar);
  };

  double prev_fa, prev_miss;
  std::tie(prev_fa, prev_miss) = rates(thresholds[0]);
  if (prev_fa == prev_miss) return prev_fa;
  for (std::size_t i = 1; i <= thresholds.size(); ++i) {
    double fa, miss;
    if (i < thresholds.size())
      std::tie(fa, miss) = rates(thresholds[i]);
    else
      std::tie(fa, miss) = std::make_pair(0.0, 1.0);  // reject everything
    if ((miss - fa) * (prev_miss - prev_fa) <= 0.0) {
      const double d0 = prev_miss - prev_fa;
      const double d1 = miss - fa;
      if (d0 == d1) return prev_fa;
      const double t = d0 / (d0 - d1);
      return 0.5 * (prev_fa + t * (fa - prev_fa) + prev_miss +
                    t * (miss - prev_miss));
    }
    prev_fa = fa;
    prev_miss = miss;
  }
  return 1.0;
}

double brute_min_dcf(const ev::TrialScores& scores, const ev::DcfParams& p) {
  std::vector<double> thresholds;
  for (const auto& s : scores) thresholds.push_back(s.score);
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());
  double n_tar = 0, n_non = 0;
  for (const auto& s : scores) (s.label == 1 ? n_tar : n_non) += 1;

  double best = std::min(p.c_miss * p.p_target,           // reject everything
                         p.c_fa * (1.0 - p.p_target));    // accept everything
  for (double thr : thresholds) {
    double miss = 0, fa = 0;
    for (const auto& s : scores) {
      if (s.label == 1 && s.score < thr) miss += 1;
      if (s.label == 0 && s.score >= thr) fa += 1;
    }
    best = std::min(best, p.c_miss * (miss / n_tar) * p.p_target +
                              p.c_fa * (fa / n_non) * (1.0 - p.p_target));
  }
  return best / std::min(p.c_miss * p.p_target, p.c_fa * (1.0 - p.p_target));
}

Outcome check_metric_oracles() {
  const ev::DcfParams dcf{0.01, 1.0, 1.0};
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(100 + seed);
    ev::TrialScores s;
    for (int i = 0; i < 100; ++i)
      s.push_back({"e" + std::to_string(i), "t" + std::to_string(i),
                   1.0 + rng.gaussian(), 1});
    for (int i = 0; i < 100; ++i)
      s.push_back({"e" + std::to_string(i), "x" + std::to_string(i),
                   rng.gaussian(), 0});

    const double eer = ev::compute_eer(s);
    const double dcf_v = ev::compute_min_dcf(s, dcf);
    worst = std::max(worst, std::abs(eer - brute_eer(s)));
    worst = std::max(worst, std::abs(dcf_v - brute_min_dcf(s, dcf)));
    if (worst > 1e-9)
      return {false, fmt("seed %llu deviates from sweep oracle by %.3e",
                         (unsigned long long)seed, worst)};

    // strictly increasing transforms must not move either metric
    ev::TrialScores warped = s, affine = s;
    for (auto& t : warped) t.score = std::tanh(t.score / 3.0);
    for (auto& t : affine) t.score = 3.0 * t.score + 2.0;
    for (const auto& w : {warped, affine}) {
      if (std::abs(ev::compute_eer(w) - eer) > 1e-9 ||
          std::abs(ev::compute_min_dcf(w, dcf) - dcf_v) > 1e-9)
        return {false, fmt("metrics moved under a monotone transform "
                           "(seed %llu)",
                           (unsigned long long)seed)};
    }
  }
  return {true, fmt("10 runs of 200 trials, max deviation %.1e", worst)};
}

// ---------------------------------------------------------------------------
// 7. adaptive score normalization: hand oracle, top-count rule, affine
//    invariance

Outcome check_score_normalization() {
  if (ev::top_cohort_count(2700, 0.05) != 135)
    return {false, fmt("top count for 2700 at 0.05 gave %zu, want 135",
                       ev::top_cohort_count(2700, 0.05))};

  // hand oracle: top halves are {4,3} and {1,0.5}
  {
    ev::TrialScores raw{{"E", "T", 2.0, -1}};
    std::map<std::string, std::vector<double>> ec{{"E", {4.0, 1.0, 3.0, 2.0}}};
    std::map<std::string, std::vector<double>> tc{{"T", {0.0, 1.0, -1.0, 0.5}}};
    const ev::TrialScores out = ev::asnorm(raw, ec, tc, 0.5, 0, 0);
    const double want =
        (2.0 - 3.5) / std::sqrt(0.5) + (2.0 - 0.75) / std::sqrt(0.125);
    if (std::abs(out[0].score - want) > 1e-12)
      return {false, fmt("hand cohort: got %.15f want %.15f", out[0].score,
                         want)};
  }

  // joint positive-affine transforms of scores and cohorts cancel out
  Rng rng(55);
  ev::TrialScores raw;
  std::map<std::string, std::vector<double>> ec, tc;
  for (int i = 0; i < 10; ++i) {
    const std::string e = "e" + std::to_string(i);
    const std::string t = "t" + std::to_string(i);
    for (int k = 0; k < 40; ++k) {
      ec[e].push_back(rng.gaussian());
      tc[t].push_back(rng.gaussian());
    }
  }
  for (int i = 0; i < 30; ++i)
    raw.push_back({"e" + std::to_string(i % 10), "t" + std::to_string(i / 3),
                   rng.gaussian(), -1});
  const ev::TrialScores base = ev::asnorm(raw, ec, tc, 0.1, 0, 0);

  double worst = 0.0;
  for (const auto& [a, b] : {std::pair{3.7, -1.2}, std::pair{0.25, 40.0}}) {
    ev::TrialScores raw2 = raw;
    for (auto& t : raw2) t.score = a * t.score + b;
    auto ec2 = ec, tc2 = tc;
    for (auto& [k, v] : ec2)
      for (double& x : v) x = a * x + b;
    for (auto& [k, v] : tc2)
      for (double& x : v) x = a * x + b;
    const ev::TrialScores out = ev::asnorm(raw2, ec2, tc2, 0.1, 0, 0);
    for (std::size_t i = 0; i < out.size(); ++i)
      worst = std::max(worst, std::abs(out[i].score - base[i].score));
  }
  if (worst > 1e-9) return {false, fmt("affine residual %.3e > 1e-9", worst)};
  return {true, fmt("hand oracle exact, affine residual %.1e", worst)};
}

// ---------------------------------------------------------------------------
// 8. speed perturbation: pitch/length law and manifest multiplication

double dft_peak_hz(const std::vector<double>& x, int sample_rate) {
  const int n = static_cast<int>(x.size());
  int best_k = 0;
  double best_mag = -1.0;
  for (int k = 0; k <= n / 2; ++k) {
    double re = 0.0, im = 0.0;
    for (int i = 0; i < n; ++i) {
      const double ph = 2.0 * M_PI * k * i / n;
      re += x[i] * std::cos(ph);
      im -= x[i] * std::sin(ph);
    }
    const double mag = re * re + im * im;
    if (mag > best_mag) {
      best_mag = mag;
      best_k = k;
    }
  }
  return static_cast<double>(best_k) * sample_rate / n;
}

Outcome check_speed_perturbation() {
  const int n = 4000;
  const Waveform wav = make_sine(100.0, 0.5, n);
  const Waveform out = aug::speed_perturb(wav, 1.1);
  if (static_cast<std::int64_t>(out.samples.size()) != std::llround(n / 1.1))
    return {false, fmt("length %zu, want %lld", out.samples.size(),
                       (long long)std::llround(n / 1.1))};
  const double bin_hz =
      static_cast<double>(wav.sample_rate) / out.samples.size();
  const double peak = dft_peak_hz(out.samples, wav.sample_rate);
  if (std::abs(peak - 110.0) > bin_hz + 1e-9)
    return {false, fmt("peak at %.2f Hz, want 110 +- %.2f", peak, bin_hz)};

  std::vector<aug::UtteranceRecord> manifest;
  for (int s = 0; s < 405; ++s)
    manifest.push_back({"utt" + std::to_string(s), "spk" + std::to_string(s),
                        "/none", "orig"});
  auto speakers = [](const std::vector<aug::UtteranceRecord>& m) {
    std::set<std::string> out;
    for (const auto& r : m) out.insert(r.spk_id);
    return out.size();
  };
  const std::vector<double> two{0.9, 1.1};
  const std::vector<double> three{0.9, 1.1, 0.8};
  const auto m3 = aug::expand_speed_manifest(manifest, two);
  const auto m4 = aug::expand_speed_manifest(manifest, three);
  if (m3.size() != 405 * 3 || speakers(m3) != 405 * 3)
    return {false, fmt("two factors: %zu records, %zu speakers", m3.size(),
                       speakers(m3))};
  if (m4.size() != 405 * 4 || speakers(m4) != 405 * 4)
    return {false, fmt("three factors: %zu records, %zu speakers", m4.size(),
                       speakers(m4))};
  return {true,
          fmt("peak %.1f Hz (bin %.1f), manifests 405->%zu/%zu", peak,
              bin_hz, m3.size(), m4.size())};
}

// ---------------------------------------------------------------------------
// 9. synthetic end-to-end run: accuracy, determinism, runtime
// 10. averaging an enrollment with augmented copies never hurts (majority)

fs::path g_scratch;
sv::demo::DemoReport g_report;
bool g_have_report = false;

const sv::demo::DemoReport& demo_report() {
  if (!g_have_report) {
    sv::demo::DemoOptions opts;
    opts.workdir = (g_scratch / "w1").string();
    opts.seed = 1;
    opts.run_speed_pass = false;
    opts.quiet = true;
    g_report = sv::demo::run_demo(opts);
    g_have_report = true;
  }
  return g_report;
}

bool files_equal(const fs::path& a, const fs::path& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  std::stringstream sa, sb;
  sa << fa.rdbuf();
  sb << fb.rdbuf();
  return fa && fb && sa.str() == sb.str();
}

Outcome check_demo() {
  const double t0 = now_s();
  const sv::demo::DemoReport& r1 = demo_report();

  sv::demo::DemoOptions opts;
  opts.workdir = (g_scratch / "w2").string();
  opts.seed = 1;
  opts.run_speed_pass = false;
  opts.quiet = true;
  const sv::demo::DemoReport r2 = sv::demo::run_demo(opts);
  const double elapsed = now_s() - t0;

  if (r1.base.eer_cosine >= 0.05 || r1.base.eer_plda >= 0.05)
    return {false, fmt("EER cosine %.4f plda %.4f, need both < 0.05",
                       r1.base.eer_cosine, r1.base.eer_plda)};
  if (r1.base.eer_cosine != r2.base.eer_cosine ||
      r1.base.min_dcf_cosine != r2.base.min_dcf_cosine ||
      r1.base.eer_plda != r2.base.eer_plda ||
      r1.base.min_dcf_plda != r2.base.min_dcf_plda)
    return {false, "two fresh runs with one seed disagree on metrics"};
  for (const char* f : {"scores/base_cosine.txt", "scores/base_plda.txt"})
    if (!files_equal(g_scratch / "w1" / f, g_scratch / "w2" / f))
      return {false, fmt("two fresh runs differ in %s", f)};
  if (elapsed >= 600.0) return {false, fmt("took %.0f s", elapsed)};
  return {true, fmt("EER cosine %.4f plda %.4f, deterministic, %.1f s",
                    r1.base.eer_cosine, r1.base.eer_plda, elapsed)};
}

Outcome check_enrollment_averaging() {
  const sv::demo::DemoReport& rep = demo_report();
  const nn::Network net = nn::load_network(rep.model_base_path);
  const be::PreprocessChain chain = be::load_chain(rep.chain_base_path);
  const std::vector<ev::Trial> trials = ev::read_trials(rep.trials_path);
  const std::vector<aug::UtteranceRecord> eval_manifest =
      aug::read_manifest(rep.eval_manifest_path);
  const sv::feat::FeatureConfig fc = sv::demo::demo_feature_config();

  auto embed = [&](const Waveform& wav) {
    return be::apply_preprocess(chain,
                                nn::forward_embedding(
                                    net, sv::feat::extract_mfb(wav, fc)));
  };

  std::map<std::string, be::Vector> clean;
  std::map<std::string, Waveform> wavs;
  for (const auto& rec : eval_manifest) {
    const Waveform wav = sv::read_wav(rec.wav_path);
    clean[rec.utt_id] = embed(wav);
    wavs[rec.utt_id] = wav;
  }
  std::set<std::string> enroll_ids;
  for (const auto& t : trials) enroll_ids.insert(t.enroll_id);

  int wins = 0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::map<std::string, be::Vector> noisy, averaged;
    for (const std::string& id : enroll_ids) {
      const Waveform& wav = wavs[id];
      be::Vector copies[2];
      for (int c = 0; c < 2; ++c) {
        const std::uint64_t sub = sv::fnv1a(id) ^ (seed * 2 + c);
        const Waveform noise =
            make_noise(sub, 1.0, static_cast<int>(wav.samples.size()),
                       wav.sample_rate);
        copies[c] = embed(aug::add_noise(wav, noise, 5.0, sub));
      }
      noisy[id] = copies[0];
      be::Embedding orig{id, "-", clean[id]};
      std::vector<be::Embedding> augmented{{id, "-", copies[0]},
                                           {id, "-", copies[1]}};
      averaged[id] = be::eda_enroll(orig, augmented, true).vec;
    }
    ev::TrialScores a, b;
    for (const auto& t : trials) {
      a.push_back({t.enroll_id, t.test_id,
                   be::score_cosine(noisy[t.enroll_id], clean[t.test_id]),
                   t.label});
      b.push_back({t.enroll_id, t.test_id,
                   be::score_cosine(averaged[t.enroll_id], clean[t.test_id]),
                   t.label});
    }
    const double eer_noisy = ev::compute_eer(a);
    const double eer_avg = ev::compute_eer(b);
    if (eer_avg <= eer_noisy + 1e-12) ++wins;
    per_seed += fmt(" %.3f->%.3f", eer_noisy, eer_avg);
  }
  if (wins < 4)
    return {false, fmt("averaging helped on %d/5 seeds (EER%s)", wins,
                       per_seed.c_str())};
  return {true, fmt("%d/5 seeds (EER noisy->averaged:%s)", wins,
                    per_seed.c_str())};
}

}  // namespace

int main() {
  g_scratch = fs::temp_directory_path() /
              ("svkit_accept_" + std::to_string(::getpid()));
  fs::remove_all(g_scratch);
  fs::create_directories(g_scratch);

  struct Check {
    const char* name;
    Outcome (*fn)();
  };
  const std::vector<Check> checks{
      {"layer and loss gradients vs finite differences", check_gradients},
      {"margin softmax reduces to cross-entropy", check_margin_softmax_reduction},
      {"single-group res2 equals plain residual block", check_res2_scale1},
      {"plda em recovers generating parameters", check_plda_recovery},
      {"plda llr matches quadrature", check_plda_quadrature},
      {"eer and mindcf match sweep oracles", check_metric_oracles},
      {"adaptive score normalization oracle", check_score_normalization},
      {"speed perturbation and manifest expansion", check_speed_perturbation},
      {"end-to-end synthetic run", check_demo},
      {"enrollment averaging never hurts", check_enrollment_averaging},
  };

  int failed = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    Outcome o;
    try {
      o = checks[i].fn();
    } catch (const std::exception& e) {
      o = {false, fmt("exception: %s", e.what())};
    }
    std::printf("%2zu %-48s %s  %s\n", i + 1, checks[i].name,
                o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  fs::remove_all(g_scratch);
  if (failed) std::printf("%d of %zu checks failed\n", failed, checks.size());
  return failed == 0 ? 0 : 1;
}

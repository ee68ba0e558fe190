// Copyright (c) the svkit authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

// Microbenchmarks for the hot paths: feature extraction, resampling,
// embedding forward passes, backend fitting/scoring, and metric sweeps.
// Run with e.g. --benchmark_filter=Plda or --benchmark_min_time=0.1s.

#include <benchmark/benchmark.h>

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "svkit/augment.hpp"
#include "svkit/backend.hpp"
#include "svkit/demo.hpp"
#include "svkit/evalnorm.hpp"
#include "svkit/features.hpp"
#include "svkit/nnet.hpp"
#include "svkit/rng.hpp"
#include "svkit/wav.hpp"

namespace {

using sv::Rng;
using sv::Waveform;
namespace be = sv::backend;
namespace ev = sv::evalnorm;
namespace nn = sv::nnet;

Waveform tone_with_noise(double seconds, std::uint64_t seed) {
  const int sr = 16000;
  const int n = static_cast<int>(seconds * sr);
  Rng rng(seed);
  Waveform wav;
  wav.sample_rate = sr;
  wav.samples.resize(n);
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sr;
    wav.samples[i] = 0.4 * std::sin(2.0 * M_PI * 160.0 * t) +
                     0.2 * std::sin(2.0 * M_PI * 320.0 * t) +
                     0.02 * rng.gaussian();
  }
  return wav;
}

std::vector<be::Embedding> clustered(int n_spk, int n_utt, int d,
                                     std::uint64_t seed) {
  Rng rng(seed);
  std::vector<be::Embedding> out;
  for (int s = 0; s < n_spk; ++s) {
    be::Vector mean(d);
    for (int i = 0; i < d; ++i) mean[i] = rng.gaussian();
    for (int u = 0; u < n_utt; ++u) {
      be::Embedding e;
      e.utt_id = "s" + std::to_string(s) + "u" + std::to_string(u);
      e.spk_id = "s" + std::to_string(s);
      e.vec = mean;
      for (int i = 0; i < d; ++i) e.vec[i] += 0.4 * rng.gaussian();
      out.push_back(std::move(e));
    }
  }
  return out;
}

void BM_LogMelFeatures(benchmark::State& state) {
  const Waveform wav = tone_with_noise(state.range(0), 1);
  const sv::feat::FeatureConfig cfg = sv::feat::FeatureConfig::mfb_defaults();
  for (auto _ : state)
    benchmark::DoNotOptimize(sv::feat::extract_mfb(wav, cfg));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_LogMelFeatures)->Arg(1)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_Mfcc(benchmark::State& state) {
  const Waveform wav = tone_with_noise(1.0, 2);
  const sv::feat::FeatureConfig cfg = sv::feat::FeatureConfig::mfcc_defaults();
  for (auto _ : state)
    benchmark::DoNotOptimize(sv::feat::extract_mfcc(wav, cfg));
}
BENCHMARK(BM_Mfcc)->Unit(benchmark::kMillisecond);

void BM_SpeedPerturb(benchmark::State& state) {
  const Waveform wav = tone_with_noise(1.0, 3);
  for (auto _ : state)
    benchmark::DoNotOptimize(sv::aug::speed_perturb(wav, 0.9));
}
BENCHMARK(BM_SpeedPerturb)->Unit(benchmark::kMillisecond);

void BM_EmbeddingForward(benchmark::State& state) {
  const sv::feat::FeatureConfig cfg = sv::demo::demo_feature_config();
  const nn::Network net =
      nn::build_network(sv::demo::demo_topology(cfg.n_mel), 1);
  Rng rng(4);
  nn::Matrix frames(state.range(0), cfg.n_mel);
  for (Eigen::Index i = 0; i < frames.rows(); ++i)
    for (int j = 0; j < cfg.n_mel; ++j) frames(i, j) = rng.gaussian();
  sv::feat::FeatureMatrix fm;
  fm.values = frames;
  for (auto _ : state) benchmark::DoNotOptimize(nn::forward_embedding(net, fm));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EmbeddingForward)->Arg(100)->Arg(300)->Unit(benchmark::kMillisecond);

void BM_PldaTrain(benchmark::State& state) {
  const auto train = clustered(static_cast<int>(state.range(0)), 5, 8, 5);
  be::PldaTrainOptions opts;
  opts.n_iter = 5;
  for (auto _ : state) benchmark::DoNotOptimize(be::train_plda(train, opts));
}
BENCHMARK(BM_PldaTrain)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_PldaScore(benchmark::State& state) {
  const int d = 16;
  Rng rng(6);
  be::PldaModel model;
  model.mu = be::Vector::Zero(d);
  be::Matrix a(d, d), b(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      a(i, j) = rng.gaussian();
      b(i, j) = rng.gaussian();
    }
  model.b_cov = a * a.transpose() + be::Matrix::Identity(d, d);
  model.w_cov = b * b.transpose() + be::Matrix::Identity(d, d);
  const be::PldaScorer scorer(model);
  be::Vector e(d), t(d);
  for (int i = 0; i < d; ++i) {
    e[i] = rng.gaussian();
    t[i] = rng.gaussian();
  }
  for (auto _ : state) benchmark::DoNotOptimize(scorer.score(e, t));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_PldaScore);

void BM_Eer(benchmark::State& state) {
  Rng rng(7);
  ev::TrialScores scores;
  const int n = static_cast<int>(state.range(0));
  for (int i = 0; i < n; ++i) {
    const bool target = (i % 10) == 0;
    scores.push_back({"e" + std::to_string(i % 50), "t" + std::to_string(i),
                      (target ? 1.0 : 0.0) + rng.gaussian(),
                      target ? 1 : 0});
  }
  for (auto _ : state) benchmark::DoNotOptimize(ev::compute_eer(scores));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_Eer)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_Asnorm(benchmark::State& state) {
  Rng rng(8);
  ev::TrialScores raw;
  std::map<std::string, std::vector<double>> ec, tc;
  for (int i = 0; i < 20; ++i) {
    const std::string e = "e" + std::to_string(i);
    const std::string t = "t" + std::to_string(i);
    for (int k = 0; k < 2700; ++k) {
      ec[e].push_back(rng.gaussian());
      tc[t].push_back(rng.gaussian());
    }
  }
  for (int i = 0; i < 500; ++i)
    raw.push_back({"e" + std::to_string(i % 20), "t" + std::to_string(i / 25),
                   rng.gaussian(), -1});
  for (auto _ : state)
    benchmark::DoNotOptimize(ev::asnorm(raw, ec, tc, 0.05, 0, 0));
  state.SetItemsProcessed(state.iterations() * raw.size());
}
BENCHMARK(BM_Asnorm)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

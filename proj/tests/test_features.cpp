// Copyright (c) the svkit authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#include "svkit/features.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>
#include <vector>

#include <doctest.h>

#include "svkit/error.hpp"
#include "svkit/rng.hpp"
#include "testutil.hpp"

using sv::DataError;
using sv::feat::FeatureConfig;
using sv::feat::FeatureMatrix;
using svtest::make_noise;
using svtest::make_sine;

namespace {

// Independent mel arithmetic for the filterbank-center oracle.
double oracle_hz_to_mel(double hz) { return 1127.0 * std::log(1.0 + hz / 700.0); }
double oracle_mel_to_hz(double mel) {
  return 700.0 * (std::exp(mel / 1127.0) - 1.0);
}

double oracle_center_hz(int band, int n_mel, double fmin, double fmax) {
  const double lo = oracle_hz_to_mel(fmin), hi = oracle_hz_to_mel(fmax);
  return oracle_mel_to_hz(lo + (hi - lo) * (band + 1) / (n_mel + 1));
}

Eigen::MatrixXd random_matrix(int r, int c, std::uint64_t seed) {
  sv::Rng rng(seed);
  Eigen::MatrixXd m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.gaussian();
  return m;
}

}  // namespace

TEST_CASE("one second at 16 kHz with 25/10 ms frames gives 98x64") {
  sv::Waveform wav = make_noise(1, 0.1, 16000);
  FeatureMatrix fm = sv::feat::extract_mfb(wav, FeatureConfig::mfb_defaults());
  CHECK(fm.n_frames() == 98);
  CHECK(fm.dim() == 64);
}

TEST_CASE("all-zero signal maps every cell to the log energy floor") {
  sv::Waveform wav;
  wav.samples.assign(16000, 0.0);
  FeatureMatrix fm = sv::feat::extract_mfb(wav, FeatureConfig::mfb_defaults());
  const double floor_log = std::log(1e-10);
  CHECK((fm.values.array() == floor_log).all());
}

TEST_CASE("pure tone peaks at the mel band whose center is nearest the tone") {
  const double tone_hz = 1000.0;
  sv::Waveform wav = make_sine(tone_hz, 0.5, 16000);
  const FeatureConfig cfg = FeatureConfig::mfb_defaults();
  FeatureMatrix fm = sv::feat::extract_mfb(wav, cfg);

  Eigen::VectorXd mean_le = fm.values.colwise().mean();
  int argmax = 0;
  mean_le.maxCoeff(&argmax);

  int oracle_band = 0;
  double best = 1e300;
  for (int m = 0; m < cfg.n_mel; ++m) {
    const double d =
        std::abs(oracle_center_hz(m, cfg.n_mel, cfg.fmin_hz, cfg.fmax_hz) -
                 tone_hz);
    if (d < best) {
      best = d;
      oracle_band = m;
    }
  }
  CHECK(argmax == oracle_band);
}

TEST_CASE("mfcc defaults: 98 frames x 30 over the 20-7600 Hz band") {
  const FeatureConfig cfg = FeatureConfig::mfcc_defaults();
  CHECK(cfg.fmin_hz == 20.0);
  CHECK(cfg.fmax_hz == 7600.0);
  CHECK(cfg.n_ceps == 30);
  sv::Waveform wav = make_noise(2, 0.1, 16000);
  FeatureMatrix fm = sv::feat::extract_mfcc(wav, cfg);
  CHECK(fm.n_frames() == 98);
  CHECK(fm.dim() == 30);
}

TEST_CASE("mfcc equals a naive orthonormal DCT-II of the log mel energies") {
  const FeatureConfig cfg = FeatureConfig::mfcc_defaults();
  sv::Waveform wav = make_noise(3, 0.2, 4000);
  FeatureMatrix mfb = sv::feat::extract_mfb(wav, cfg);
  FeatureMatrix mfcc = sv::feat::extract_mfcc(wav, cfg);
  REQUIRE(mfb.n_frames() == mfcc.n_frames());

  const int n = cfg.n_mel;
  for (Eigen::Index t = 0; t < mfb.n_frames(); ++t) {
    for (int k = 0; k < cfg.n_ceps; ++k) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j)
        acc += mfb.values(t, j) * std::cos(M_PI * k * (2 * j + 1) / (2.0 * n));
      acc *= std::sqrt(2.0 / n);
      if (k == 0) acc /= std::sqrt(2.0);
      CHECK(mfcc.values(t, k) == doctest::Approx(acc).epsilon(1e-9));
    }
  }
}

TEST_CASE("dct of a constant log-mel row puts everything in coefficient 0") {
  // Build a waveform whose log-mel rows are constant: impossible directly,
  // so exercise the DCT through the public API with a matched pair instead:
  // mfcc of any input where the mfb row is constant across bands would keep
  // only c0; verify on synthetic constant rows via the naive formula the
  // implementation must match.
  const int n = 8;
  Eigen::VectorXd row = Eigen::VectorXd::Constant(n, 3.25);
  for (int k = 1; k < n; ++k) {
    double acc = 0.0;
    for (int j = 0; j < n; ++j)
      acc += row[j] * std::cos(M_PI * k * (2 * j + 1) / (2.0 * n));
    CHECK(std::abs(acc * std::sqrt(2.0 / n)) < 1e-12);
  }
  // and the implementation agrees with the naive oracle on constant input —
  // covered by the oracle comparison above; here assert c0 carries the mass.
  double c0 = 0.0;
  for (int j = 0; j < n; ++j) c0 += row[j];
  c0 *= std::sqrt(2.0 / n) / std::sqrt(2.0);
  CHECK(c0 == doctest::Approx(3.25 * std::sqrt(static_cast<double>(n))));
}

TEST_CASE("n_ceps above n_mel is rejected") {
  FeatureConfig cfg = FeatureConfig::mfcc_defaults();
  cfg.n_ceps = cfg.n_mel + 1;
  sv::Waveform wav = make_noise(4, 0.1, 4000);
  CHECK_THROWS_AS(sv::feat::extract_mfcc(wav, cfg), DataError);
}

TEST_CASE("signals shorter than one frame are rejected") {
  sv::Waveform wav = make_noise(5, 0.1, 399);
  CHECK_THROWS_AS(
      sv::feat::extract_mfb(wav, FeatureConfig::mfb_defaults()), DataError);
  CHECK_THROWS_AS(sv::feat::num_frames(399, 400, 160), DataError);
}

TEST_CASE("fmax beyond Nyquist is rejected") {
  FeatureConfig cfg = FeatureConfig::mfb_defaults();
  cfg.fmax_hz = 8001.0;
  sv::Waveform wav = make_noise(6, 0.1, 4000);
  CHECK_THROWS_AS(sv::feat::extract_mfb(wav, cfg), DataError);
}

TEST_CASE("frame count formula holds across geometries") {
  for (auto [len, hop] : {std::pair{400, 160}, {400, 400}, {25, 10}, {7, 3}}) {
    for (std::size_t n :
         {static_cast<std::size_t>(len), static_cast<std::size_t>(len) + 1,
          static_cast<std::size_t>(len + hop - 1),
          static_cast<std::size_t>(len + hop), std::size_t{1000}}) {
      if (n < static_cast<std::size_t>(len)) continue;
      CHECK(sv::feat::num_frames(n, len, hop) ==
            1 + static_cast<int>((n - len) / hop));
    }
  }
  // and the extractor honors it
  sv::Waveform wav = make_noise(7, 0.1, 16123);
  FeatureMatrix fm = sv::feat::extract_mfb(wav, FeatureConfig::mfb_defaults());
  CHECK(fm.n_frames() == 1 + (16123 - 400) / 160);
}

TEST_CASE("filterbank rows are nonnegative and cover the interior band") {
  const int n_fft = 512, sr = 16000, n_mel = 64;
  const double fmin = 0.0, fmax = 8000.0;
  Eigen::MatrixXd fb = sv::feat::mel_filterbank(n_mel, n_fft, sr, fmin, fmax);
  REQUIRE(fb.rows() == n_mel);
  REQUIRE(fb.cols() == n_fft / 2 + 1);
  CHECK((fb.array() >= 0.0).all());
  for (int k = 0; k < fb.cols(); ++k) {
    const double freq = static_cast<double>(k) * sr / n_fft;
    if (freq > fmin && freq < fmax) CHECK(fb.col(k).sum() > 0.0);
  }
}

TEST_CASE("zero-width mask range leaves the features untouched") {
  sv::Waveform wav = make_noise(8, 0.3, 8000);
  FeatureMatrix fm = sv::feat::extract_mfb(wav, FeatureConfig::mfb_defaults());
  FeatureMatrix masked = sv::feat::mask_spectrum(fm, 0.0, 0.0, 42);
  CHECK(masked.values == fm.values);
}

TEST_CASE("mask fraction 5-10 percent of a 100x64 matrix") {
  FeatureMatrix fm;
  fm.values = random_matrix(100, 64, 9).array() + 10.0;  // keep cells nonzero
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    FeatureMatrix masked = sv::feat::mask_spectrum(fm, 0.05, 0.10, seed);
    const int n_masked = static_cast<int>((masked.values.array() == 0.0).count());
    CHECK(n_masked >= 320);
    CHECK(n_masked <= 640);
    // unmasked cells are never altered
    for (int i = 0; i < 100; ++i)
      for (int j = 0; j < 64; ++j)
        if (masked.values(i, j) != 0.0)
          CHECK(masked.values(i, j) == fm.values(i, j));
  }
}

TEST_CASE("masking is deterministic and reproduces the recorded run") {
  FeatureMatrix fm;
  fm.values = random_matrix(10, 8, 10).array() + 5.0;
  FeatureMatrix a = sv::feat::mask_spectrum(fm, 0.2, 0.4, 7);
  FeatureMatrix b = sv::feat::mask_spectrum(fm, 0.2, 0.4, 7);
  CHECK(a.values == b.values);

  std::set<std::pair<int, int>> masked;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 8; ++j)
      if (a.values(i, j) == 0.0) masked.insert({i, j});
  // recorded oracle run (seed 7, range [0.2, 0.4], 10x8 input)
  const std::set<std::pair<int, int>> golden = {
      {0, 1}, {0, 5}, {1, 1}, {1, 5}, {2, 1}, {2, 5}, {3, 1},
      {3, 5}, {4, 5}, {5, 5}, {6, 5}, {7, 5}, {8, 0}, {8, 1},
      {8, 2}, {8, 3}, {8, 4}, {8, 5}, {8, 6}, {8, 7}, {9, 0},
      {9, 1}, {9, 2}, {9, 3}, {9, 4}, {9, 5}, {9, 6}, {9, 7}};
  CHECK(masked == golden);
}

TEST_CASE("mask fraction bounds are validated") {
  FeatureMatrix fm;
  fm.values = random_matrix(4, 4, 11);
  CHECK_THROWS_AS(sv::feat::mask_spectrum(fm, -0.1, 0.5, 1), DataError);
  CHECK_THROWS_AS(sv::feat::mask_spectrum(fm, 0.6, 0.5, 1), DataError);
  CHECK_THROWS_AS(sv::feat::mask_spectrum(fm, 0.0, 1.0, 1), DataError);
}

TEST_CASE("extraction is bit-identical across runs") {
  sv::Waveform wav = make_noise(12, 0.2, 8000);
  const FeatureConfig cfg = FeatureConfig::mfb_defaults();
  FeatureMatrix a = sv::feat::extract_mfb(wav, cfg);
  FeatureMatrix b = sv::feat::extract_mfb(wav, cfg);
  CHECK(a.values == b.values);
}

TEST_CASE("feature files round-trip in text and binary") {
  svtest::TempDir dir("feat_io");
  FeatureMatrix fm;
  fm.values = random_matrix(5, 3, 13);
  fm.hop_s = 0.010;

  sv::feat::write_features_text(dir.file("t.feat"), "utt_a", fm);
  std::string utt;
  FeatureMatrix rt = sv::feat::read_features_text(dir.file("t.feat"), &utt);
  CHECK(utt == "utt_a");
  CHECK(rt.n_frames() == 5);
  CHECK(rt.dim() == 3);
  CHECK(rt.hop_s == doctest::Approx(0.010));
  CHECK((rt.values - fm.values).cwiseAbs().maxCoeff() < 1e-7);

  sv::feat::write_features_binary(dir.file("b.feat"), "utt_b", fm);
  FeatureMatrix rb = sv::feat::read_features_binary(dir.file("b.feat"), &utt);
  CHECK(utt == "utt_b");
  // binary stores 32-bit floats
  CHECK((rb.values - fm.values).cwiseAbs().maxCoeff() < 1e-6);
}

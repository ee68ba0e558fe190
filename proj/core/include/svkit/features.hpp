// Copyright (c) the svkit authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#ifndef SVKIT_FEATURES_HPP_
#define SVKIT_FEATURES_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "svkit/wav.hpp"

namespace sv::feat {

struct FeatureConfig {
  double frame_len_s = 0.025;
  double frame_hop_s = 0.010;
  int n_mel = 64;
  int n_ceps = 30;
  double fmin_hz = 0.0;
  double fmax_hz = 8000.0;
  double preemph = 0.97;

  // MFB recipe: 64 mel bands over 0-8000 Hz.
  static FeatureConfig mfb_defaults();
  // MFCC recipe: 30 cepstra over 20-7600 Hz.
  static FeatureConfig mfcc_defaults();

  void validate(int sample_rate) const;
  int frame_len_samples(int sample_rate) const;
  int frame_hop_samples(int sample_rate) const;
};

// One utterance's features, frames x dim.
struct FeatureMatrix {
  Eigen::MatrixXd values;
  double hop_s = 0.010;

  Eigen::Index n_frames() const { return values.rows(); }
  Eigen::Index dim() const { return values.cols(); }
};

// n_frames = 1 + floor((n_samples - frame_len) / hop); throws DataError if
// the signal is shorter than one frame.
int num_frames(std::size_t n_samples, int frame_len, int frame_hop);

// Log mel-filterbank energies: pre-emphasis, Hamming-windowed frames, power
// spectrum (FFT size = next power of two >= frame length), triangular mel
// filterbank over [fmin, fmax], natural log with floor 1e-10.
FeatureMatrix extract_mfb(const Waveform& wav, const FeatureConfig& cfg);

// MFCCs: orthonormal DCT-II of the log mel energies, first n_ceps kept.
FeatureMatrix extract_mfcc(const Waveform& wav, const FeatureConfig& cfg);

// Zeroes random contiguous time blocks and frequency bands until the masked
// cell count hits a target fraction drawn uniformly in [min_frac, max_frac].
// The final block is trimmed so the count lands exactly on the target;
// unmasked cells are never altered. Deterministic given the seed.
FeatureMatrix mask_spectrum(const FeatureMatrix& feat, double min_frac,
                            double max_frac, std::uint64_t seed);

// Triangular mel filterbank weights, n_mel x n_bins, where n_bins = n_fft/2+1.
// Exposed for tests and for building custom front ends.
Eigen::MatrixXd mel_filterbank(int n_mel, int n_fft, int sample_rate,
                               double fmin, double fmax);

// Feature files. Text: header line "utt_id n_frames dim hop_ms" followed by
// one row of space-separated decimals per frame. Binary: the same header
// line, then n_frames*dim row-major little-endian 32-bit floats.
void write_features_text(const std::string& path, const std::string& utt_id,
                         const FeatureMatrix& feat);
void write_features_binary(const std::string& path, const std::string& utt_id,
                           const FeatureMatrix& feat);
FeatureMatrix read_features_text(const std::string& path, std::string* utt_id);
FeatureMatrix read_features_binary(const std::string& path,
                                   std::string* utt_id);

}  // namespace sv::feat

#endif  // SVKIT_FEATURES_HPP_

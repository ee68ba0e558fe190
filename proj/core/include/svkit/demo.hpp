// Copyright (c) the svkit authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#ifndef SVKIT_DEMO_HPP_
#define SVKIT_DEMO_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "svkit/features.hpp"
#include "svkit/wav.hpp"

namespace sv::demo {

struct DemoOptions {
  std::string workdir;
  std::uint64_t seed = 0;
  int n_speakers = 20;
  int utts_per_speaker = 10;
  int held_out_per_speaker = 3;
  bool run_speed_pass = true;  // second pass with speed-multiplied speakers
  bool quiet = false;

  // trainer knobs
  int max_epochs = 15;
  int batch_size = 16;
  std::vector<double> lr_schedule{0.05, 0.01, 0.002};
  std::vector<double> ce_weight_schedule{1.0, 0.5, 0.1};
  double ams_margin = 0.2;
  double ams_scale = 12.0;

  // backend knobs
  int lda_dim = 16;
  int plda_iters = 8;
};

struct PassMetrics {
  double eer_cosine = 0.0;
  double min_dcf_cosine = 0.0;
  double eer_plda = 0.0;
  double min_dcf_plda = 0.0;
  int n_train_classes = 0;
};

struct DemoReport {
  PassMetrics base;
  PassMetrics speed;
  bool has_speed = false;
  std::string report_path;
  std::string trials_path;
  std::string eval_manifest_path;
  std::string model_base_path;
  std::string chain_base_path;
  std::string plda_base_path;
};

// A synthetic "speaker" is a harmonic tone complex: speaker identity sets
// the fundamental and the harmonic amplitude envelope; each utterance adds
// random phases, slight pitch jitter, vibrato, and background noise.
// Deterministic in (seed, speaker, utt).
Waveform synth_utterance(std::uint64_t seed, int speaker, int utt);

// Feature settings used by the demo (log mel filterbanks).
feat::FeatureConfig demo_feature_config();

// Network topology text used by the demo for the given feature dim.
std::string demo_topology(int input_dim);

// Synthesize, optionally speed-augment, extract features, train, embed, fit
// backends, score held-out trials with cosine and PLDA, and report EER and
// minDCF. Stages are hash-gated inside the workdir: re-running with the
// same settings reuses completed artifacts.
DemoReport run_demo(const DemoOptions& opts);

}  // namespace sv::demo

#endif  // SVKIT_DEMO_HPP_

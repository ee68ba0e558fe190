// Copyright (c) the svkit authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#ifndef SVKIT_AUGMENT_HPP_
#define SVKIT_AUGMENT_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "svkit/wav.hpp"

namespace sv::aug {

struct AugmentConfig {
  std::vector<double> speed_factors{0.8, 0.9, 1.1};
  std::vector<double> snr_db_choices;
  std::vector<double> rir;
};

// One manifest line: "utt_id spk_id wav_path augment_tag".
struct UtteranceRecord {
  std::string utt_id;
  std::string spk_id;
  std::string wav_path;
  std::string tag = "orig";
};

// Resamples so the signal plays `factor` times faster: output length is
// round(n / factor) at the same nominal rate, spectral content scaled by
// `factor`. Band-limited windowed-sinc interpolation (16-tap Kaiser).
Waveform speed_perturb(const Waveform& wav, double factor);

// "(spk)_sp(factor)" suffix used when perturbed copies become new speakers.
std::string speed_suffix(double factor);

// New records for one speed factor: speaker and utterance ids suffixed with
// speed_suffix(factor). The input manifest is left untouched; factor 1 is
// rejected (an unperturbed copy is not a new speaker).
std::vector<UtteranceRecord> relabel_speakers(
    const std::vector<UtteranceRecord>& manifest, double factor);

// Originals plus one relabeled copy per factor: k factors multiply both the
// utterance and the speaker count by k+1 (wav_path fields keep the original
// path until the perturbed audio is written).
std::vector<UtteranceRecord> expand_speed_manifest(
    const std::vector<UtteranceRecord>& manifest,
    std::span<const double> factors);

// Adds noise scaled to the requested SNR (dB, ratio of mean-square powers).
// The noise is tiled from a seeded random offset to cover the signal.
// A +inf snr_db is the no-noise sentinel and returns the input unchanged.
Waveform add_noise(const Waveform& wav, const Waveform& noise, double snr_db,
                   std::uint64_t seed);

// Full convolution with the impulse response, truncated to the input length
// and peak-normalized to the input's peak.
Waveform reverberate(const Waveform& wav, std::span<const double> rir);

std::vector<UtteranceRecord> read_manifest(const std::string& path);
void write_manifest(const std::string& path,
                    const std::vector<UtteranceRecord>& manifest);

}  // namespace sv::aug

#endif  // SVKIT_AUGMENT_HPP_

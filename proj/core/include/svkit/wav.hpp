// Copyright (c) the svkit authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#ifndef SVKIT_WAV_HPP_
#define SVKIT_WAV_HPP_

#include <string>
#include <vector>

namespace sv {

// Mono waveform, samples in [-1, 1].
struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;

  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

// Reads a RIFF/WAVE file. Only PCM signed 16-bit mono is accepted;
// anything else raises DataError. Returns samples scaled by 1/32768.
Waveform read_wav(const std::string& path);

// Writes PCM signed 16-bit mono, clipping samples outside [-1, 1].
void write_wav(const std::string& path, const Waveform& wav);

}  // namespace sv

#endif  // SVKIT_WAV_HPP_

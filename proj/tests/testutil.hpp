// Copyright (c) the svkit authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#ifndef SVKIT_TESTS_TESTUTIL_HPP_
#define SVKIT_TESTS_TESTUTIL_HPP_

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <string>

#include "svkit/rng.hpp"
#include "svkit/wav.hpp"

namespace svtest {

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = (std::filesystem::temp_directory_path() /
             ("svkit_" + tag + "_" + std::to_string(::getpid())))
                .string();
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::string& path() const { return path_; }
  std::string file(const std::string& name) const { return path_ + "/" + name; }

 private:
  std::string path_;
};

inline sv::Waveform make_sine(double freq_hz, double amplitude, int n_samples,
                              int sample_rate = 16000) {
  sv::Waveform wav;
  wav.sample_rate = sample_rate;
  wav.samples.resize(n_samples);
  for (int i = 0; i < n_samples; ++i)
    wav.samples[i] =
        amplitude * std::sin(2.0 * M_PI * freq_hz * i / sample_rate);
  return wav;
}

inline sv::Waveform make_noise(std::uint64_t seed, double amplitude,
                               int n_samples, int sample_rate = 16000) {
  sv::Rng rng(seed);
  sv::Waveform wav;
  wav.sample_rate = sample_rate;
  wav.samples.resize(n_samples);
  for (int i = 0; i < n_samples; ++i)
    wav.samples[i] = amplitude * rng.gaussian();
  return wav;
}

}  // namespace svtest

#endif  // SVKIT_TESTS_TESTUTIL_HPP_

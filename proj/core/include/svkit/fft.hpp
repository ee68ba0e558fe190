// Copyright (c) the svkit authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#ifndef SVKIT_FFT_HPP_
#define SVKIT_FFT_HPP_

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace sv {

// Real-to-complex FFT of a fixed size, backed by FFTW. Plan creation is
// serialized internally (FFTW planning is not thread-safe); transform() is
// safe to call concurrently on distinct instances.
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const { return n_; }
  std::size_t n_bins() const { return n_ / 2 + 1; }

  // Input shorter than size() is zero-padded. Output has n/2+1 bins.
  void transform(std::span<const double> in,
                 std::vector<std::complex<double>>& out) const;

  // |X_k|^2 for each bin.
  void power_spectrum(std::span<const double> in,
                      std::vector<double>& out) const;

 private:
  struct Impl;
  Impl* impl_;
  std::size_t n_;
};

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace sv

#endif  // SVKIT_FFT_HPP_

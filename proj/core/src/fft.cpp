// Copyright (c) the svkit authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#include "svkit/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cstring>
#include <mutex>

#include "svkit/error.hpp"

namespace sv {

namespace {
std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

struct RealFft::Impl {
  double* in = nullptr;
  fftw_complex* out = nullptr;
  fftw_plan plan = nullptr;
};

RealFft::RealFft(std::size_t n) : impl_(new Impl), n_(n) {
  if (n == 0) throw DataError("FFT size must be positive");
  std::lock_guard<std::mutex> lock(plan_mutex());
  impl_->in = fftw_alloc_real(n);
  impl_->out = fftw_alloc_complex(n / 2 + 1);
  impl_->plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), impl_->in,
                                     impl_->out, FFTW_ESTIMATE);
  if (!impl_->plan) throw NumericalError("FFTW plan creation failed");
}

RealFft::~RealFft() {
  std::lock_guard<std::mutex> lock(plan_mutex());
  fftw_destroy_plan(impl_->plan);
  fftw_free(impl_->in);
  fftw_free(impl_->out);
  delete impl_;
}

void RealFft::transform(std::span<const double> in,
                        std::vector<std::complex<double>>& out) const {
  if (in.size() > n_) throw DataError("FFT input longer than plan size");
  std::copy(in.begin(), in.end(), impl_->in);
  std::fill(impl_->in + in.size(), impl_->in + n_, 0.0);
  fftw_execute(impl_->plan);
  out.resize(n_bins());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = {impl_->out[k][0], impl_->out[k][1]};
  }
}

void RealFft::power_spectrum(std::span<const double> in,
                             std::vector<double>& out) const {
  if (in.size() > n_) throw DataError("FFT input longer than plan size");
  std::copy(in.begin(), in.end(), impl_->in);
  std::fill(impl_->in + in.size(), impl_->in + n_, 0.0);
  fftw_execute(impl_->plan);
  out.resize(n_bins());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double re = impl_->out[k][0];
    const double im = impl_->out[k][1];
    out[k] = re * re + im * im;
  }
}

}  // namespace sv

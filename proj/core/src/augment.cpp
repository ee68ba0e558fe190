// Copyright (c) the svkit authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#include "svkit/augment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "svkit/error.hpp"
#include "svkit/rng.hpp"

namespace sv::aug {

namespace {

constexpr int kSincHalfTaps = 8;  // 16-tap window
constexpr double kKaiserBeta = 9.0;

// Modified Bessel I0 by its power series; converges to machine precision
// for the argument range a Kaiser window uses.
double bessel_i0(double x) {
  const double q = 0.25 * x * x;
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 64; ++k) {
    term *= q / (static_cast<double>(k) * k);
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return sum;
}

double kaiser(double x) {
  // x in [-1, 1]
  static const double norm = bessel_i0(kKaiserBeta);
  const double t = 1.0 - x * x;
  if (t <= 0.0) return 0.0;
  return bessel_i0(kKaiserBeta * std::sqrt(t)) / norm;
}

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  return std::sin(M_PI * x) / (M_PI * x);
}

double mean_square(const std::vector<double>& v) {
  double acc = 0.0;
  for (double s : v) acc += s * s;
  return v.empty() ? 0.0 : acc / v.size();
}

}  // namespace

Waveform speed_perturb(const Waveform& wav, double factor) {
  if (!(factor > 0.0)) throw DataError("speed factor must be positive");
  if (factor == 1.0) return wav;

  const auto n_in = static_cast<std::int64_t>(wav.samples.size());
  const std::int64_t n_out = std::llround(n_in / factor);
  if (n_out < 1) throw DataError("perturbed signal shorter than one sample");

  // Anti-aliasing cutoff relative to Nyquist; only needed when speeding up.
  const double cutoff = std::min(1.0, 1.0 / factor);

  Waveform out;
  out.sample_rate = wav.sample_rate;
  out.samples.resize(n_out);
  for (std::int64_t i = 0; i < n_out; ++i) {
    const double t = i * factor;
    const auto center = static_cast<std::int64_t>(std::floor(t));
    double acc = 0.0;
    for (std::int64_t j = center - kSincHalfTaps + 1;
         j <= center + kSincHalfTaps; ++j) {
      if (j < 0 || j >= n_in) continue;
      const double d = t - static_cast<double>(j);
      acc += wav.samples[j] * cutoff * sinc(cutoff * d) *
             kaiser(d / kSincHalfTaps);
    }
    out.samples[i] = acc;
  }
  return out;
}

std::string speed_suffix(double factor) {
  std::ostringstream ss;
  ss << "_sp" << factor;
  return ss.str();
}

std::vector<UtteranceRecord> relabel_speakers(
    const std::vector<UtteranceRecord>& manifest, double factor) {
  if (!(factor > 0.0)) throw DataError("speed factor must be positive");
  if (factor == 1.0)
    throw DataError("factor 1 does not create new speakers; nothing to relabel");
  const std::string suffix = speed_suffix(factor);
  std::vector<UtteranceRecord> out;
  out.reserve(manifest.size());
  for (const auto& rec : manifest) {
    UtteranceRecord r = rec;
    r.utt_id += suffix;
    r.spk_id += suffix;
    r.tag = "sp" + suffix.substr(3);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<UtteranceRecord> expand_speed_manifest(
    const std::vector<UtteranceRecord>& manifest,
    std::span<const double> factors) {
  std::vector<UtteranceRecord> out = manifest;
  out.reserve(manifest.size() * (factors.size() + 1));
  for (double f : factors) {
    auto copies = relabel_speakers(manifest, f);
    out.insert(out.end(), std::make_move_iterator(copies.begin()),
               std::make_move_iterator(copies.end()));
  }
  return out;
}

Waveform add_noise(const Waveform& wav, const Waveform& noise, double snr_db,
                   std::uint64_t seed) {
  if (std::isinf(snr_db) && snr_db > 0.0) return wav;
  if (noise.samples.empty()) throw DataError("noise signal is empty");
  if (noise.sample_rate != wav.sample_rate)
    throw DataError("noise sample rate does not match signal");

  const double p_sig = mean_square(wav.samples);
  if (p_sig <= 0.0) throw NumericalError("zero-power signal; SNR undefined");

  Rng rng(seed);
  const std::size_t offset = rng.uniform_int(noise.samples.size());
  std::vector<double> tiled(wav.samples.size());
  for (std::size_t i = 0; i < tiled.size(); ++i) {
    tiled[i] = noise.samples[(offset + i) % noise.samples.size()];
  }
  const double p_noi = mean_square(tiled);
  if (p_noi <= 0.0) throw NumericalError("zero-power noise; SNR undefined");

  const double gain = std::sqrt(p_sig / (p_noi * std::pow(10.0, snr_db / 10.0)));
  Waveform out = wav;
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    out.samples[i] += gain * tiled[i];
  }
  return out;
}

Waveform reverberate(const Waveform& wav, std::span<const double> rir) {
  if (rir.empty()) throw DataError("impulse response is empty");
  bool all_zero = true;
  for (double h : rir) {
    if (!std::isfinite(h)) throw DataError("impulse response has non-finite taps");
    if (h != 0.0) all_zero = false;
  }
  if (all_zero) throw DataError("impulse response is all zero");

  const std::size_t n = wav.samples.size();
  Waveform out = wav;
  double peak_in = 0.0;
  for (double s : wav.samples) peak_in = std::max(peak_in, std::abs(s));

  for (std::size_t t = 0; t < n; ++t) {
    double acc = 0.0;
    const std::size_t kmax = std::min(rir.size() - 1, t);
    for (std::size_t k = 0; k <= kmax; ++k) {
      acc += rir[k] * wav.samples[t - k];
    }
    out.samples[t] = acc;
  }

  double peak_out = 0.0;
  for (double s : out.samples) peak_out = std::max(peak_out, std::abs(s));
  if (peak_in > 0.0 && peak_out > 0.0) {
    const double scale = peak_in / peak_out;
    for (double& s : out.samples) s *= scale;
  }
  return out;
}

std::vector<UtteranceRecord> read_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open manifest: " + path);
  std::vector<UtteranceRecord> manifest;
  std::set<std::pair<std::string, std::string>> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    UtteranceRecord rec;
    if (!(ls >> rec.utt_id >> rec.spk_id >> rec.wav_path >> rec.tag)) {
      throw DataError("bad manifest line " + std::to_string(lineno) + " in " +
                      path);
    }
    if (!seen.insert({rec.utt_id, rec.tag}).second) {
      throw DataError("duplicate (utt_id, tag) at manifest line " +
                      std::to_string(lineno) + " in " + path);
    }
    manifest.push_back(std::move(rec));
  }
  return manifest;
}

void write_manifest(const std::string& path,
                    const std::vector<UtteranceRecord>& manifest) {
  // refuse to write what read_manifest would refuse to load
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& rec : manifest) {
    if (!seen.insert({rec.utt_id, rec.tag}).second) {
      throw DataError("duplicate (utt_id, tag) in manifest: " + rec.utt_id +
                      " " + rec.tag);
    }
  }
  std::ofstream os(path);
  if (!os) throw DataError("cannot write manifest: " + path);
  for (const auto& rec : manifest) {
    os << rec.utt_id << ' ' << rec.spk_id << ' ' << rec.wav_path << ' '
       << rec.tag << '\n';
  }
  if (!os) throw DataError("short write on manifest: " + path);
}

}  // namespace sv::aug

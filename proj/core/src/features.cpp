// Copyright (c) the svkit authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#include "svkit/features.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

#include "svkit/error.hpp"
#include "svkit/fft.hpp"
#include "svkit/rng.hpp"

namespace sv::feat {

namespace {

constexpr double kLogFloor = 1e-10;

double hz_to_mel(double hz) { return 1127.0 * std::log1p(hz / 700.0); }

Eigen::MatrixXd log_mel_energies(const Waveform& wav,
                                 const FeatureConfig& cfg) {
  cfg.validate(wav.sample_rate);
  for (double s : wav.samples) {
    if (!std::isfinite(s)) throw DataError("waveform has non-finite samples");
  }

  const int flen = cfg.frame_len_samples(wav.sample_rate);
  const int fhop = cfg.frame_hop_samples(wav.sample_rate);
  const int nf = num_frames(wav.samples.size(), flen, fhop);
  const std::size_t n_fft = next_pow2(static_cast<std::size_t>(flen));

  std::vector<double> emph(wav.samples.size());
  emph[0] = wav.samples[0] - cfg.preemph * wav.samples[0];
  for (std::size_t t = 1; t < wav.samples.size(); ++t) {
    emph[t] = wav.samples[t] - cfg.preemph * wav.samples[t - 1];
  }

  std::vector<double> window(flen);
  for (int i = 0; i < flen; ++i) {
    window[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / (flen - 1));
  }

  const Eigen::MatrixXd fbank = mel_filterbank(
      cfg.n_mel, static_cast<int>(n_fft), wav.sample_rate, cfg.fmin_hz,
      cfg.fmax_hz);

  RealFft fft(n_fft);
  std::vector<double> frame(flen);
  std::vector<double> power;
  Eigen::MatrixXd out(nf, cfg.n_mel);
  for (int f = 0; f < nf; ++f) {
    const int off = f * fhop;
    for (int i = 0; i < flen; ++i) frame[i] = emph[off + i] * window[i];
    fft.power_spectrum(frame, power);
    for (int m = 0; m < cfg.n_mel; ++m) {
      double e = 0.0;
      for (std::size_t k = 0; k < power.size(); ++k) {
        e += fbank(m, static_cast<Eigen::Index>(k)) * power[k];
      }
      out(f, m) = std::log(std::max(e, kLogFloor));
    }
  }
  return out;
}

}  // namespace

FeatureConfig FeatureConfig::mfb_defaults() { return FeatureConfig{}; }

FeatureConfig FeatureConfig::mfcc_defaults() {
  FeatureConfig cfg;
  cfg.fmin_hz = 20.0;
  cfg.fmax_hz = 7600.0;
  return cfg;
}

void FeatureConfig::validate(int sample_rate) const {
  if (sample_rate <= 0) throw DataError("sample rate must be positive");
  if (!(frame_hop_s > 0.0) || frame_hop_s > frame_len_s)
    throw DataError("need 0 < frame_hop <= frame_len");
  if (fmin_hz < 0.0 || fmin_hz >= fmax_hz)
    throw DataError("need 0 <= fmin < fmax");
  if (fmax_hz > sample_rate / 2.0 + 1e-9)
    throw DataError("fmax exceeds Nyquist frequency");
  if (n_mel < 1) throw DataError("n_mel must be >= 1");
  if (preemph < 0.0 || preemph >= 1.0) throw DataError("preemph must be in [0,1)");
}

int FeatureConfig::frame_len_samples(int sample_rate) const {
  return static_cast<int>(std::lround(frame_len_s * sample_rate));
}

int FeatureConfig::frame_hop_samples(int sample_rate) const {
  return static_cast<int>(std::lround(frame_hop_s * sample_rate));
}

int num_frames(std::size_t n_samples, int frame_len, int frame_hop) {
  if (frame_len <= 0 || frame_hop <= 0) throw DataError("bad frame geometry");
  if (n_samples < static_cast<std::size_t>(frame_len))
    throw DataError("signal shorter than one frame");
  return 1 + static_cast<int>((n_samples - frame_len) / frame_hop);
}

Eigen::MatrixXd mel_filterbank(int n_mel, int n_fft, int sample_rate,
                               double fmin, double fmax) {
  const int n_bins = n_fft / 2 + 1;
  const double mel_lo = hz_to_mel(fmin);
  const double mel_hi = hz_to_mel(fmax);
  // n_mel triangles with peaks at equally spaced interior mel points.
  std::vector<double> centers(n_mel + 2);
  for (int i = 0; i < n_mel + 2; ++i) {
    centers[i] = mel_lo + (mel_hi - mel_lo) * i / (n_mel + 1);
  }

  Eigen::MatrixXd fbank = Eigen::MatrixXd::Zero(n_mel, n_bins);
  for (int k = 0; k < n_bins; ++k) {
    const double freq = static_cast<double>(k) * sample_rate / n_fft;
    const double mel = hz_to_mel(freq);
    if (mel <= mel_lo || mel >= mel_hi) continue;
    for (int m = 0; m < n_mel; ++m) {
      const double left = centers[m], center = centers[m + 1],
                   right = centers[m + 2];
      if (mel > left && mel < right) {
        fbank(m, k) = mel <= center ? (mel - left) / (center - left)
                                    : (right - mel) / (right - center);
      }
    }
  }
  return fbank;
}

FeatureMatrix extract_mfb(const Waveform& wav, const FeatureConfig& cfg) {
  FeatureMatrix fm;
  fm.values = log_mel_energies(wav, cfg);
  fm.hop_s = cfg.frame_hop_s;
  return fm;
}

FeatureMatrix extract_mfcc(const Waveform& wav, const FeatureConfig& cfg) {
  // only the cepstral path cares about n_ceps, so check it here
  if (cfg.n_ceps < 1 || cfg.n_ceps > cfg.n_mel)
    throw DataError("need 1 <= n_ceps <= n_mel");
  const Eigen::MatrixXd logmel = log_mel_energies(wav, cfg);
  const int n_mel = cfg.n_mel;

  // Orthonormal DCT-II basis, n_ceps x n_mel.
  Eigen::MatrixXd dct(cfg.n_ceps, n_mel);
  for (int k = 0; k < cfg.n_ceps; ++k) {
    const double norm =
        k == 0 ? std::sqrt(1.0 / n_mel) : std::sqrt(2.0 / n_mel);
    for (int n = 0; n < n_mel; ++n) {
      dct(k, n) = norm * std::cos(M_PI * k * (2.0 * n + 1.0) / (2.0 * n_mel));
    }
  }

  FeatureMatrix fm;
  fm.values = logmel * dct.transpose();
  fm.hop_s = cfg.frame_hop_s;
  return fm;
}

FeatureMatrix mask_spectrum(const FeatureMatrix& feat, double min_frac,
                            double max_frac, std::uint64_t seed) {
  if (min_frac < 0.0 || min_frac > max_frac || max_frac >= 1.0)
    throw DataError("mask fractions must satisfy 0 <= min <= max < 1");

  const Eigen::Index T = feat.n_frames();
  const Eigen::Index D = feat.dim();
  const std::int64_t total = static_cast<std::int64_t>(T) * D;

  Rng rng(seed);
  const double frac =
      min_frac == max_frac ? min_frac : rng.uniform(min_frac, max_frac);
  const auto lo = static_cast<std::int64_t>(std::ceil(min_frac * total - 1e-9));
  const auto hi = static_cast<std::int64_t>(std::floor(max_frac * total + 1e-9));
  const std::int64_t goal =
      std::clamp<std::int64_t>(std::llround(frac * total), lo, hi);

  FeatureMatrix out = feat;
  if (goal <= 0) return out;

  std::vector<char> masked(total, 0);
  auto idx = [D](Eigen::Index t, Eigen::Index d) { return t * D + d; };

  std::int64_t count = 0;
  // Masks the unmasked cells of a rectangle in row-major order, stopping at
  // the goal; a trimmed tail is still a contiguous run within one frame.
  auto mask_rect = [&](Eigen::Index t0, Eigen::Index t1, Eigen::Index d0,
                       Eigen::Index d1) {
    for (Eigen::Index t = t0; t < t1 && count < goal; ++t) {
      for (Eigen::Index d = d0; d < d1 && count < goal; ++d) {
        if (!masked[idx(t, d)]) {
          masked[idx(t, d)] = 1;
          out.values(t, d) = 0.0;
          ++count;
        }
      }
    }
  };

  bool time_turn = true;
  int stale = 0;
  while (count < goal) {
    const std::int64_t before = count;
    if (time_turn) {
      const auto wmax = std::max<Eigen::Index>(1, T / 8);
      const auto w = static_cast<Eigen::Index>(1 + rng.uniform_int(wmax));
      const auto s = static_cast<Eigen::Index>(rng.uniform_int(T - w + 1));
      mask_rect(s, s + w, 0, D);
    } else {
      const auto wmax = std::max<Eigen::Index>(1, D / 8);
      const auto w = static_cast<Eigen::Index>(1 + rng.uniform_int(wmax));
      const auto s = static_cast<Eigen::Index>(rng.uniform_int(D - w + 1));
      mask_rect(0, T, s, s + w);
    }
    time_turn = !time_turn;
    stale = count == before ? stale + 1 : 0;
    if (stale > 64) {
      mask_rect(0, T, 0, D);  // grid nearly full; finish deterministically
    }
  }
  return out;
}

void write_features_text(const std::string& path, const std::string& utt_id,
                         const FeatureMatrix& feat) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write feature file: " + path);
  os << utt_id << ' ' << feat.n_frames() << ' ' << feat.dim() << ' '
     << feat.hop_s * 1000.0 << '\n';
  os.precision(9);
  for (Eigen::Index t = 0; t < feat.n_frames(); ++t) {
    for (Eigen::Index d = 0; d < feat.dim(); ++d) {
      if (d) os << ' ';
      os << feat.values(t, d);
    }
    os << '\n';
  }
  if (!os) throw DataError("short write on feature file: " + path);
}

void write_features_binary(const std::string& path, const std::string& utt_id,
                           const FeatureMatrix& feat) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write feature file: " + path);
  os << utt_id << ' ' << feat.n_frames() << ' ' << feat.dim() << ' '
     << feat.hop_s * 1000.0 << '\n';
  std::vector<float> row(feat.dim());
  for (Eigen::Index t = 0; t < feat.n_frames(); ++t) {
    for (Eigen::Index d = 0; d < feat.dim(); ++d) {
      row[d] = static_cast<float>(feat.values(t, d));
    }
    os.write(reinterpret_cast<const char*>(row.data()),
             static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!os) throw DataError("short write on feature file: " + path);
}

namespace {

FeatureMatrix read_feature_header(std::istream& is, const std::string& path,
                                  std::string* utt_id, Eigen::Index* nf,
                                  Eigen::Index* dim) {
  std::string header;
  if (!std::getline(is, header))
    throw DataError("empty feature file: " + path);
  std::istringstream hs(header);
  std::string id;
  long long frames = 0, d = 0;
  double hop_ms = 0.0;
  if (!(hs >> id >> frames >> d >> hop_ms) || frames < 0 || d <= 0)
    throw DataError("bad feature header in " + path);
  if (utt_id) *utt_id = id;
  *nf = frames;
  *dim = d;
  FeatureMatrix fm;
  fm.hop_s = hop_ms / 1000.0;
  fm.values.resize(frames, d);
  return fm;
}

}  // namespace

FeatureMatrix read_features_text(const std::string& path,
                                 std::string* utt_id) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open feature file: " + path);
  Eigen::Index nf = 0, dim = 0;
  FeatureMatrix fm = read_feature_header(is, path, utt_id, &nf, &dim);
  for (Eigen::Index t = 0; t < nf; ++t) {
    for (Eigen::Index d = 0; d < dim; ++d) {
      if (!(is >> fm.values(t, d)))
        throw DataError("truncated feature file: " + path);
    }
  }
  return fm;
}

FeatureMatrix read_features_binary(const std::string& path,
                                   std::string* utt_id) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open feature file: " + path);
  Eigen::Index nf = 0, dim = 0;
  FeatureMatrix fm = read_feature_header(is, path, utt_id, &nf, &dim);
  std::vector<float> row(dim);
  for (Eigen::Index t = 0; t < nf; ++t) {
    is.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!is) throw DataError("truncated feature file: " + path);
    for (Eigen::Index d = 0; d < dim; ++d) fm.values(t, d) = row[d];
  }
  return fm;
}

}  // namespace sv::feat

// Copyright (c) the svkit authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#include "svkit/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "svkit/error.hpp"

namespace sv {

namespace {

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return b[0] | (b[1] << 8) | (b[2] << 16) | (std::uint32_t(b[3]) << 24);
}

std::uint16_t read_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  return b[0] | (b[1] << 8);
}

void write_u32(std::ostream& os, std::uint32_t v) {
  char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff),
               char((v >> 24) & 0xff)};
  os.write(b, 4);
}

void write_u16(std::ostream& os, std::uint16_t v) {
  char b[2] = {char(v & 0xff), char((v >> 8) & 0xff)};
  os.write(b, 2);
}

}  // namespace

Waveform read_wav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open wav file: " + path);

  char tag[4];
  is.read(tag, 4);
  if (!is || std::memcmp(tag, "RIFF", 4) != 0)
    throw DataError("not a RIFF file: " + path);
  read_u32(is);  // riff size, unused
  is.read(tag, 4);
  if (!is || std::memcmp(tag, "WAVE", 4) != 0)
    throw DataError("not a WAVE file: " + path);

  int sample_rate = 0;
  int channels = 0;
  int bits = 0;
  int format = 0;
  bool have_fmt = false;
  std::vector<std::int16_t> pcm;

  while (is.read(tag, 4)) {
    std::uint32_t chunk_size = read_u32(is);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      format = read_u16(is);
      channels = read_u16(is);
      sample_rate = static_cast<int>(read_u32(is));
      read_u32(is);  // byte rate
      read_u16(is);  // block align
      bits = read_u16(is);
      if (chunk_size > 16) is.seekg(chunk_size - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw DataError("wav data chunk before fmt: " + path);
      pcm.resize(chunk_size / 2);
      is.read(reinterpret_cast<char*>(pcm.data()), chunk_size & ~1u);
      if (!is) throw DataError("truncated wav data: " + path);
      break;
    } else {
      is.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
    }
  }

  if (!have_fmt) throw DataError("wav file has no fmt chunk: " + path);
  if (format != 1 || bits != 16)
    throw DataError("wav must be PCM signed 16-bit: " + path);
  if (channels != 1) throw DataError("wav must be mono: " + path);
  if (sample_rate <= 0) throw DataError("wav has bad sample rate: " + path);

  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.resize(pcm.size());
  for (std::size_t i = 0; i < pcm.size(); ++i) {
    w.samples[i] = pcm[i] / 32768.0;
  }
  return w;
}

void write_wav(const std::string& path, const Waveform& wav) {
  if (wav.sample_rate <= 0) throw DataError("waveform has bad sample rate");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write wav file: " + path);

  const std::uint32_t n = static_cast<std::uint32_t>(wav.samples.size());
  const std::uint32_t data_bytes = n * 2;
  os.write("RIFF", 4);
  write_u32(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  write_u32(os, 16);
  write_u16(os, 1);  // PCM
  write_u16(os, 1);  // mono
  write_u32(os, static_cast<std::uint32_t>(wav.sample_rate));
  write_u32(os, static_cast<std::uint32_t>(wav.sample_rate) * 2);
  write_u16(os, 2);
  write_u16(os, 16);
  os.write("data", 4);
  write_u32(os, data_bytes);
  for (double s : wav.samples) {
    double clipped = std::clamp(s, -1.0, 1.0);
    auto v = static_cast<std::int16_t>(std::lrint(clipped * 32767.0));
    write_u16(os, static_cast<std::uint16_t>(v));
  }
  if (!os) throw DataError("short write on wav file: " + path);
}

}  // namespace sv

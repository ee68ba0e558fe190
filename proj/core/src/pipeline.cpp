// Copyright (c) the svkit authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#include "svkit/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "svkit/error.hpp"
#include "svkit/rng.hpp"

namespace sv::pipeline {

namespace fs = std::filesystem;

std::uint64_t hash_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot hash missing file: " + path);
  std::uint64_t h = 14695981039346656037ULL;
  char buf[1 << 16];
  while (is) {
    is.read(buf, sizeof buf);
    h = fnv1a(buf, static_cast<std::size_t>(is.gcount()), h);
  }
  return h;
}

std::string tmp_path(const std::string& path) { return path + ".tmp"; }

void commit_file(const std::string& tmp, const std::string& path) {
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec)
    throw DataError("cannot move " + tmp + " into place: " + ec.message());
}

void atomic_write(const std::string& path, const std::string& contents) {
  std::string tmp = tmp_path(path);
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw DataError("cannot write " + tmp);
    os << contents;
    if (!os) throw DataError("failed writing " + tmp);
  }
  commit_file(tmp, path);
}

Workdir::Workdir(const std::string& root) : root_(root) {
  if (root_.empty()) throw DataError("workdir path is empty");
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) throw DataError("cannot create workdir " + root_ + ": " +
                          ec.message());
  lock_path_ = (fs::path(root_) / ".lock").string();
  lock_fd_ = ::open(lock_path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (lock_fd_ < 0)
    throw DataError("workdir " + root_ +
                    " is locked by another run (remove " + lock_path_ +
                    " if stale)");
  load_manifest();
}

Workdir::~Workdir() {
  if (lock_fd_ >= 0) {
    ::close(lock_fd_);
    ::unlink(lock_path_.c_str());
  }
}

std::string Workdir::stage_dir(const std::string& stage) const {
  fs::path dir = fs::path(root_) / stage;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create stage dir " + dir.string() + ": " +
                          ec.message());
  return dir.string();
}

std::string Workdir::file(const std::string& relative) const {
  return (fs::path(root_) / relative).string();
}

void Workdir::load_manifest() {
  std::ifstream is(file("run_manifest.txt"));
  if (!is) return;  // first run
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string head, stage, hash_hex;
    ss >> head >> stage >> hash_hex;
    if (head != "stage" || stage.empty() || hash_hex.empty())
      throw DataError(file("run_manifest.txt") + " line " +
                      std::to_string(line_no) + ": malformed record");
    completed_[stage] = std::stoull(hash_hex, nullptr, 16);
  }
}

bool Workdir::stage_fresh(const std::string& stage,
                          std::uint64_t input_hash) const {
  auto it = completed_.find(stage);
  return it != completed_.end() && it->second == input_hash;
}

void Workdir::record_stage(const std::string& stage, std::uint64_t input_hash,
                           const std::vector<std::string>& outputs,
                           double wall_s) {
  std::ofstream os(file("run_manifest.txt"), std::ios::app);
  if (!os) throw DataError("cannot append to run manifest");
  char hex[32];
  std::snprintf(hex, sizeof hex, "%016llx",
                static_cast<unsigned long long>(input_hash));
  os << "stage " << stage << " " << hex;
  char wall[32];
  std::snprintf(wall, sizeof wall, "%.3f", wall_s);
  os << " wall_s " << wall << " outputs";
  for (const std::string& o : outputs) os << " " << o;
  os << "\n";
  if (!os) throw DataError("failed appending to run manifest");
  completed_[stage] = input_hash;
}

}  // namespace sv::pipeline

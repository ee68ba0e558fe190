// Copyright (c) the svkit authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#ifndef SVKIT_PIPELINE_HPP_
#define SVKIT_PIPELINE_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace sv::pipeline {

std::uint64_t hash_file(const std::string& path);

// Writes to "<path>.tmp" then renames, so a failure never clobbers an
// existing artifact.
void atomic_write(const std::string& path, const std::string& contents);
std::string tmp_path(const std::string& path);
void commit_file(const std::string& tmp, const std::string& path);

// A pipeline working directory: per-stage subdirectories, a lock file that
// admits one process at a time, and an append-only record of completed
// stages keyed by input hash so unchanged stages are skipped on re-runs.
class Workdir {
 public:
  explicit Workdir(const std::string& root);
  ~Workdir();
  Workdir(const Workdir&) = delete;
  Workdir& operator=(const Workdir&) = delete;

  const std::string& root() const { return root_; }
  std::string stage_dir(const std::string& stage) const;
  std::string file(const std::string& relative) const;

  // True when the stage already completed with this input hash.
  bool stage_fresh(const std::string& stage, std::uint64_t input_hash) const;
  void record_stage(const std::string& stage, std::uint64_t input_hash,
                    const std::vector<std::string>& outputs, double wall_s);

 private:
  std::string root_;
  std::string lock_path_;
  int lock_fd_ = -1;
  std::map<std::string, std::uint64_t> completed_;

  void load_manifest();
};

}  // namespace sv::pipeline

#endif  // SVKIT_PIPELINE_HPP_

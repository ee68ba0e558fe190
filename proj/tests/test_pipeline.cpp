// Copyright (c) the svkit authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#include "svkit/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "svkit/config.hpp"
#include "svkit/error.hpp"
#include "svkit/rng.hpp"
#include "svkit/wav.hpp"
#include "testutil.hpp"

using sv::DataError;
namespace fs = std::filesystem;
namespace pl = sv::pipeline;

TEST_CASE("config parses sections, comments and blank lines") {
  const char* text =
      "# a comment\n"
      "demo.seed = 42\n"
      "\n"
      "trainer.lr = 0.05, 0.01\n"
      "trainer.quiet = true\n"
      "backend.name = plda backend\n";
  sv::config::Config cfg = sv::config::Config::parse_string(text, "t");
  CHECK(cfg.has("demo.seed"));
  CHECK_FALSE(cfg.has("demo.missing"));
  CHECK(cfg.get_int("demo.seed", 0) == 42);
  CHECK(cfg.get_uint64("demo.seed", 0) == 42);
  CHECK(cfg.get_double("demo.seed", 0.0) == 42.0);
  CHECK(cfg.get_bool("trainer.quiet", false) == true);
  CHECK(cfg.get_string("backend.name", "") == "plda backend");
  auto lr = cfg.get_double_list("trainer.lr", {});
  REQUIRE(lr.size() == 2);
  CHECK(lr[0] == 0.05);
  CHECK(lr[1] == 0.01);
  // defaults pass through for absent keys
  CHECK(cfg.get_int("demo.missing", -7) == -7);
  CHECK(cfg.get_double_list("missing.list", {1.0}).size() == 1);
}

TEST_CASE("config rejects malformed lines with their line number") {
  CHECK_THROWS_WITH_AS(
      sv::config::Config::parse_string("demo.seed = 1\nnot_an_assignment\n",
                                       "bad"),
      doctest::Contains("line 2"), DataError);
  CHECK_THROWS_WITH_AS(
      sv::config::Config::parse_string("demo.seed = 1\ndemo.seed = 2\n",
                                       "dup"),
      doctest::Contains("line 2"), DataError);
}

TEST_CASE("config type errors name the key") {
  sv::config::Config cfg =
      sv::config::Config::parse_string("demo.seed = banana\n", "t");
  CHECK_THROWS_WITH_AS(cfg.get_int("demo.seed", 0),
                       doctest::Contains("demo.seed"), DataError);
  CHECK_THROWS_AS(cfg.get_bool("demo.seed", false), DataError);
  CHECK_THROWS_AS(cfg.get_double("demo.seed", 0.0), DataError);
}

TEST_CASE("config file parsing") {
  svtest::TempDir dir("cfg");
  {
    std::ofstream os(dir.file("a.cfg"));
    os << "demo.n_speakers = 12\n";
  }
  sv::config::Config cfg = sv::config::Config::parse_file(dir.file("a.cfg"));
  CHECK(cfg.get_int("demo.n_speakers", 0) == 12);
  CHECK_THROWS_AS(sv::config::Config::parse_file(dir.file("missing.cfg")),
                  DataError);
}

TEST_CASE("fnv1a hashing is stable and chainable") {
  // reference value for "hello" under 64-bit FNV-1a
  const std::string hello = "hello", world = "world";
  CHECK(sv::fnv1a(hello) == 0xa430d84680aabd0bULL);
  CHECK(sv::fnv1a(std::string()) == 0xcbf29ce484222325ULL);
  // hashing in two chained steps equals hashing the concatenation
  CHECK(sv::fnv1a(world, sv::fnv1a(hello)) ==
        sv::fnv1a(std::string("helloworld")));
}

TEST_CASE("hash_file reflects content changes") {
  svtest::TempDir dir("hash");
  pl::atomic_write(dir.file("x.txt"), "contents A");
  const std::uint64_t h1 = pl::hash_file(dir.file("x.txt"));
  CHECK(h1 == pl::hash_file(dir.file("x.txt")));
  pl::atomic_write(dir.file("x.txt"), "contents B");
  CHECK(h1 != pl::hash_file(dir.file("x.txt")));
  CHECK_THROWS_AS(pl::hash_file(dir.file("missing.txt")), DataError);
}

TEST_CASE("atomic_write leaves no temp file behind") {
  svtest::TempDir dir("atomic");
  pl::atomic_write(dir.file("out.txt"), "payload");
  std::ifstream is(dir.file("out.txt"));
  std::string line;
  std::getline(is, line);
  CHECK(line == "payload");
  CHECK_FALSE(fs::exists(pl::tmp_path(dir.file("out.txt"))));
}

TEST_CASE("tmp then commit moves the file into place") {
  svtest::TempDir dir("commit");
  const std::string target = dir.file("artifact.bin");
  const std::string tmp = pl::tmp_path(target);
  {
    std::ofstream os(tmp, std::ios::binary);
    os << "data";
  }
  pl::commit_file(tmp, target);
  CHECK(fs::exists(target));
  CHECK_FALSE(fs::exists(tmp));
}

TEST_CASE("workdir records stages and skips repeats") {
  svtest::TempDir dir("wdir");
  const std::string root = dir.file("run");
  {
    pl::Workdir wd(root);
    CHECK(fs::exists(root));
    CHECK_FALSE(wd.stage_fresh("features", 111));
    pl::atomic_write(wd.stage_dir("features") + "/feats.txt", "f");
    wd.record_stage("features", 111, {"features/feats.txt"}, 0.25);
    CHECK(wd.stage_fresh("features", 111));
    CHECK_FALSE(wd.stage_fresh("features", 222));  // inputs changed
    CHECK_FALSE(wd.stage_fresh("train", 111));     // other stage
  }
  // a new process sees the same manifest state
  {
    pl::Workdir wd(root);
    CHECK(wd.stage_fresh("features", 111));
    CHECK_FALSE(wd.stage_fresh("features", 222));
  }
  // rerunning a stage with a new hash replaces the record
  {
    pl::Workdir wd(root);
    wd.record_stage("features", 222, {"features/feats.txt"}, 0.1);
    CHECK(wd.stage_fresh("features", 222));
    CHECK_FALSE(wd.stage_fresh("features", 111));
  }
}

TEST_CASE("workdir lock admits one process at a time") {
  svtest::TempDir dir("lock");
  const std::string root = dir.file("run");
  pl::Workdir first(root);
  CHECK_THROWS_AS(pl::Workdir{root}, DataError);
  // the manifest is released with the Workdir
}

TEST_CASE("workdir lock is released on destruction") {
  svtest::TempDir dir("relock");
  const std::string root = dir.file("run");
  { pl::Workdir wd(root); }
  pl::Workdir again(root);  // must not throw
  CHECK(fs::exists(root));
}

TEST_CASE("wav files round-trip pcm16 mono") {
  svtest::TempDir dir("wavio");
  sv::Waveform wav = svtest::make_sine(440.0, 0.5, 1600, 16000);
  sv::write_wav(dir.file("a.wav"), wav);
  sv::Waveform back = sv::read_wav(dir.file("a.wav"));
  REQUIRE(back.samples.size() == wav.samples.size());
  CHECK(back.sample_rate == 16000);
  // 16-bit quantization: half a step of headroom
  for (std::size_t i = 0; i < wav.samples.size(); ++i)
    CHECK(std::abs(back.samples[i] - wav.samples[i]) <= 1.0 / 32767.0);

  CHECK_THROWS_AS(sv::read_wav(dir.file("missing.wav")), DataError);
}

TEST_CASE("wav reader rejects non-wav bytes") {
  svtest::TempDir dir("wavbad");
  pl::atomic_write(dir.file("fake.wav"), "this is not RIFF data at all");
  CHECK_THROWS_AS(sv::read_wav(dir.file("fake.wav")), DataError);
}

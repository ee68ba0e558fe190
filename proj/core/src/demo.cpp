// Copyright (c) the svkit authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#include "svkit/demo.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "svkit/augment.hpp"
#include "svkit/backend.hpp"
#include "svkit/error.hpp"
#include "svkit/evalnorm.hpp"
#include "svkit/loss.hpp"
#include "svkit/nnet.hpp"
#include "svkit/pipeline.hpp"
#include "svkit/rng.hpp"

namespace sv::demo {

namespace {

constexpr int kSampleRate = 16000;
constexpr double kUttSeconds = 0.5;
constexpr int kHarmonics = 8;

std::string utt_name(int speaker, int utt) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "spk%03d_utt%03d", speaker, utt);
  return buf;
}

std::string spk_name(int speaker) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "spk%03d", speaker);
  return buf;
}

double rms(const std::vector<double>& x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / std::max<std::size_t>(1, x.size()));
}

// Chained stage hashes: each stage folds its own settings into its parent's
// hash, so changing anything upstream invalidates everything downstream.
std::uint64_t chain_hash(const std::string& desc, std::uint64_t parent) {
  return fnv1a(desc, parent);
}

struct StageRunner {
  pipeline::Workdir& wd;
  bool quiet;

  // Runs `body` unless the stage already completed with this hash. The body
  // returns the list of artifact paths it committed.
  template <typename Body>
  void operator()(const std::string& name, std::uint64_t hash, Body&& body) {
    if (wd.stage_fresh(name, hash)) {
      if (!quiet) std::printf("demo: stage %-12s cached\n", name.c_str());
      return;
    }
    auto t0 = std::chrono::steady_clock::now();
    std::vector<std::string> outputs = body();
    double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    wd.record_stage(name, hash, outputs, wall);
    if (!quiet)
      std::printf("demo: stage %-12s done in %.2fs\n", name.c_str(), wall);
  }
};

std::vector<loss::TrainSample> load_train_samples(
    const std::vector<aug::UtteranceRecord>& manifest,
    const pipeline::Workdir& wd, const std::map<std::string, int>& labels) {
  std::vector<loss::TrainSample> samples;
  samples.reserve(manifest.size());
  for (const auto& rec : manifest) {
    std::string utt;
    feat::FeatureMatrix fm =
        feat::read_features_binary(wd.file("feat/" + rec.utt_id + ".feat"), &utt);
    samples.push_back({fm.values, labels.at(rec.spk_id)});
  }
  return samples;
}

std::map<std::string, int> label_map(
    const std::vector<aug::UtteranceRecord>& manifest) {
  std::map<std::string, int> labels;
  for (const auto& rec : manifest) labels.emplace(rec.spk_id, 0);
  int next = 0;
  for (auto& [spk, idx] : labels) idx = next++;
  return labels;
}

std::vector<backend::Embedding> embed_manifest(
    const nnet::Network& net, const std::vector<aug::UtteranceRecord>& manifest,
    const pipeline::Workdir& wd) {
  std::vector<backend::Embedding> embs;
  embs.reserve(manifest.size());
  for (const auto& rec : manifest) {
    std::string utt;
    feat::FeatureMatrix fm =
        feat::read_features_binary(wd.file("feat/" + rec.utt_id + ".feat"), &utt);
    embs.push_back({rec.utt_id, rec.spk_id, nnet::forward_embedding(net, fm)});
  }
  return embs;
}

struct PassPaths {
  std::string model;
  std::string emb_train;
  std::string emb_eval;
  std::string chain;
  std::string plda;
  std::string scores_cosine;
  std::string scores_plda;
};

PassPaths pass_paths(const pipeline::Workdir& wd, const std::string& tag) {
  PassPaths p;
  p.model = wd.file("model/" + tag + ".svnet");
  p.emb_train = wd.file("emb/" + tag + "_train.txt");
  p.emb_eval = wd.file("emb/" + tag + "_eval.txt");
  p.chain = wd.file("backend/" + tag + ".chain");
  p.plda = wd.file("backend/" + tag + ".plda");
  p.scores_cosine = wd.file("scores/" + tag + "_cosine.txt");
  p.scores_plda = wd.file("scores/" + tag + "_plda.txt");
  return p;
}

}  // namespace

Waveform synth_utterance(std::uint64_t seed, int speaker, int utt) {
  const int n = static_cast<int>(kSampleRate * kUttSeconds);
  Waveform out;
  out.sample_rate = kSampleRate;
  out.samples.assign(n, 0.0);

  // Speaker template: fundamental spaced geometrically so neighbours differ
  // by ~4.4%, harmonic amplitudes drawn once per speaker.
  Rng spk_rng(fnv1a("demo-speaker " + std::to_string(speaker), seed));
  const double f0 = 110.0 * std::pow(2.0, speaker / 16.0);
  double amps[kHarmonics];
  for (int k = 0; k < kHarmonics; ++k)
    amps[k] = spk_rng.uniform(0.15, 1.0) * std::exp(-0.18 * k);

  // Utterance variation: phases, slight pitch offset, vibrato, noise.
  Rng utt_rng(fnv1a("demo-utt " + std::to_string(speaker) + " " +
                        std::to_string(utt),
                    seed));
  const double jitter = 1.0 + utt_rng.uniform(-0.015, 0.015);
  const double vib_rate = utt_rng.uniform(4.0, 6.0);
  const double vib_depth = 0.01;
  double phases[kHarmonics];
  for (int k = 0; k < kHarmonics; ++k)
    phases[k] = utt_rng.uniform(0.0, 2.0 * std::numbers::pi);

  const double base = f0 * jitter;
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / kSampleRate;
    const double vib =
        1.0 + vib_depth * std::sin(2.0 * std::numbers::pi * vib_rate * t);
    double s = 0.0;
    for (int k = 0; k < kHarmonics; ++k) {
      const double f = base * vib * (k + 1);
      s += amps[k] * std::sin(2.0 * std::numbers::pi * f * t + phases[k]);
    }
    out.samples[i] = s;
  }

  // Attack/release ramps so utterances are not perfectly stationary.
  const int attack = kSampleRate / 50;   // 20 ms
  const int release = kSampleRate / 20;  // 50 ms
  for (int i = 0; i < attack && i < n; ++i)
    out.samples[i] *= static_cast<double>(i) / attack;
  for (int i = 0; i < release && i < n; ++i)
    out.samples[n - 1 - i] *= static_cast<double>(i) / release;

  // Background noise at 25 dB SNR.
  const double sig_rms = rms(out.samples);
  const double noise_rms = sig_rms / std::pow(10.0, 25.0 / 20.0);
  for (int i = 0; i < n; ++i)
    out.samples[i] += noise_rms * utt_rng.gaussian();

  // Peak-normalize to leave headroom for PCM16.
  double peak = 0.0;
  for (double v : out.samples) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    const double g = 0.6 / peak;
    for (double& v : out.samples) v *= g;
  }
  return out;
}

feat::FeatureConfig demo_feature_config() {
  return feat::FeatureConfig::mfb_defaults();
}

std::string demo_topology(int input_dim) {
  std::ostringstream os;
  os << "svnet 1\n";
  os << "input_dim " << input_dim << "\n";
  os << "embedding_layer 4\n";
  os << "tdnn out=48 offsets=-2,-1,0,1,2\n";
  os << "batchnorm\n";
  os << "res2 scale=2 width=24 kernel=3\n";
  os << "stats_pool\n";
  os << "dense out=24\n";
  return os.str();
}

DemoReport run_demo(const DemoOptions& opts) {
  if (opts.n_speakers < 4)
    throw DataError("demo: need at least 4 speakers, got " +
                    std::to_string(opts.n_speakers));
  if (opts.utts_per_speaker < 4)
    throw DataError("demo: need at least 4 utterances per speaker, got " +
                    std::to_string(opts.utts_per_speaker));
  if (opts.held_out_per_speaker < 2 ||
      opts.utts_per_speaker - opts.held_out_per_speaker < 2)
    throw DataError(
        "demo: need at least 2 train and 2 held-out utterances per speaker");
  if (opts.workdir.empty()) throw DataError("demo: workdir is required");

  pipeline::Workdir wd(opts.workdir);
  StageRunner stage{wd, opts.quiet};

  const int n_train = opts.utts_per_speaker - opts.held_out_per_speaker;
  const std::vector<double> speed_factors{0.9, 1.1};

  // ---- synth: waveforms and manifests -----------------------------------
  std::ostringstream synth_desc;
  synth_desc << "synth v1 seed=" << opts.seed << " spk=" << opts.n_speakers
             << " utts=" << opts.utts_per_speaker << " held="
             << opts.held_out_per_speaker;
  const std::uint64_t h_synth = fnv1a(synth_desc.str());

  std::vector<aug::UtteranceRecord> train_manifest, eval_manifest;
  for (int s = 0; s < opts.n_speakers; ++s) {
    for (int u = 0; u < opts.utts_per_speaker; ++u) {
      aug::UtteranceRecord rec;
      rec.utt_id = utt_name(s, u);
      rec.spk_id = spk_name(s);
      rec.wav_path = wd.file("wav/" + rec.utt_id + ".wav");
      (u < n_train ? train_manifest : eval_manifest).push_back(rec);
    }
  }

  stage("synth", h_synth, [&] {
    wd.stage_dir("wav");
    std::vector<std::string> outs;
    for (int s = 0; s < opts.n_speakers; ++s) {
      for (int u = 0; u < opts.utts_per_speaker; ++u) {
        const std::string path = wd.file("wav/" + utt_name(s, u) + ".wav");
        const std::string tmp = pipeline::tmp_path(path);
        write_wav(tmp, synth_utterance(opts.seed, s, u));
        pipeline::commit_file(tmp, path);
        outs.push_back(path);
      }
    }
    wd.stage_dir("manifests");
    aug::write_manifest(wd.file("manifests/train.txt"), train_manifest);
    aug::write_manifest(wd.file("manifests/eval.txt"), eval_manifest);
    outs.push_back(wd.file("manifests/train.txt"));
    outs.push_back(wd.file("manifests/eval.txt"));
    return outs;
  });

  // ---- speed: perturbed copies of the training set as new speakers ------
  std::vector<aug::UtteranceRecord> train_sp;
  std::uint64_t h_speed = h_synth;
  if (opts.run_speed_pass) {
    train_sp = aug::expand_speed_manifest(train_manifest, speed_factors);
    std::ostringstream sd;
    sd << "speed v1 factors=";
    for (double f : speed_factors) sd << f << ",";
    h_speed = chain_hash(sd.str(), h_synth);

    stage("speed", h_speed, [&] {
      wd.stage_dir("wav");
      std::vector<std::string> outs;
      for (auto& rec : train_sp) {
        if (rec.tag == "orig") continue;
        // tag is "sp<factor>"
        const double factor = std::stod(rec.tag.substr(2));
        Waveform src = read_wav(rec.wav_path);
        const std::string path = wd.file("wav/" + rec.utt_id + ".wav");
        const std::string tmp = pipeline::tmp_path(path);
        write_wav(tmp, aug::speed_perturb(src, factor));
        pipeline::commit_file(tmp, path);
        outs.push_back(path);
      }
      aug::write_manifest(wd.file("manifests/train_sp.txt"), train_sp);
      outs.push_back(wd.file("manifests/train_sp.txt"));
      return outs;
    });
    // Point the expanded records at the files the stage wrote.
    for (auto& rec : train_sp)
      if (rec.tag != "orig")
        rec.wav_path = wd.file("wav/" + rec.utt_id + ".wav");
  }

  // ---- features: binary MFB for every utterance --------------------------
  const feat::FeatureConfig fcfg = demo_feature_config();
  std::ostringstream fd;
  fd << "features v1 mfb n_mel=" << fcfg.n_mel << " frame=" << fcfg.frame_len_s
     << " hop=" << fcfg.frame_hop_s;
  const std::uint64_t h_feat = chain_hash(fd.str(), h_speed);

  std::vector<aug::UtteranceRecord> all_utts;
  all_utts.insert(all_utts.end(), train_manifest.begin(), train_manifest.end());
  all_utts.insert(all_utts.end(), eval_manifest.begin(), eval_manifest.end());
  for (const auto& rec : train_sp)
    if (rec.tag != "orig") all_utts.push_back(rec);

  stage("features", h_feat, [&] {
    wd.stage_dir("feat");
    std::vector<std::string> outs;
    for (const auto& rec : all_utts) {
      Waveform wav = read_wav(wd.file("wav/" + rec.utt_id + ".wav"));
      feat::FeatureMatrix fm = feat::extract_mfb(wav, fcfg);
      const std::string path = wd.file("feat/" + rec.utt_id + ".feat");
      const std::string tmp = pipeline::tmp_path(path);
      feat::write_features_binary(tmp, rec.utt_id, fm);
      pipeline::commit_file(tmp, path);
      outs.push_back(path);
    }
    return outs;
  });

  // ---- trials: all held-out pairs ----------------------------------------
  const std::uint64_t h_trials = chain_hash("trials v1 all-pairs", h_synth);
  std::vector<evalnorm::Trial> trials;
  for (std::size_t i = 0; i < eval_manifest.size(); ++i) {
    for (std::size_t j = i + 1; j < eval_manifest.size(); ++j) {
      evalnorm::Trial t;
      t.enroll_id = eval_manifest[i].utt_id;
      t.test_id = eval_manifest[j].utt_id;
      t.label = eval_manifest[i].spk_id == eval_manifest[j].spk_id ? 1 : 0;
      trials.push_back(t);
    }
  }
  stage("trials", h_trials, [&] {
    std::ostringstream os;
    for (const auto& t : trials)
      os << t.enroll_id << " " << t.test_id << " "
         << (t.label == 1 ? "target" : "nontarget") << "\n";
    pipeline::atomic_write(wd.file("trials.txt"), os.str());
    return std::vector<std::string>{wd.file("trials.txt")};
  });

  // ---- per-pass: train, embed, backend, score ----------------------------
  std::ostringstream td;
  td << "train v1 epochs=" << opts.max_epochs << " batch=" << opts.batch_size
     << " margin=" << opts.ams_margin << " scale=" << opts.ams_scale
     << " lr=";
  for (double v : opts.lr_schedule) td << v << ",";
  td << " cew=";
  for (double v : opts.ce_weight_schedule) td << v << ",";
  const std::string train_desc = td.str();

  auto run_pass = [&](const std::string& tag,
                      const std::vector<aug::UtteranceRecord>& manifest,
                      std::uint64_t h_parent) {
    const PassPaths paths = pass_paths(wd, tag);
    const std::map<std::string, int> labels = label_map(manifest);

    const std::uint64_t h_train =
        chain_hash(train_desc + " pass=" + tag, h_parent);
    stage("train_" + tag, h_train, [&] {
      wd.stage_dir("model");
      std::vector<loss::TrainSample> samples =
          load_train_samples(manifest, wd, labels);
      loss::TrainOptions topt;
      topt.lr_schedule = opts.lr_schedule;
      topt.ce_weight_schedule = opts.ce_weight_schedule;
      topt.max_epochs = opts.max_epochs;
      topt.batch_size = opts.batch_size;
      topt.seed = opts.seed;
      topt.ams.margin = opts.ams_margin;
      topt.ams.scale = opts.ams_scale;
      nnet::Network init =
          nnet::build_network(demo_topology(fcfg.n_mel), opts.seed);
      loss::TrainResult result = loss::train_toy(init, samples, topt);
      const std::string tmp = pipeline::tmp_path(paths.model);
      nnet::save_network(tmp, result.net);
      pipeline::commit_file(tmp, paths.model);
      if (!opts.quiet)
        std::printf("demo: pass %-5s trained %zu epochs, final loss %.4f\n",
                    tag.c_str(), result.trace.size(),
                    result.trace.empty() ? 0.0 : result.trace.back().mean_loss);
      return std::vector<std::string>{paths.model};
    });

    const std::uint64_t h_embed = chain_hash("embed v1 pass=" + tag, h_train);
    stage("embed_" + tag, h_embed, [&] {
      wd.stage_dir("emb");
      nnet::Network net = nnet::load_network(paths.model);
      // Backends are fitted on the original training utterances only.
      auto train_embs = embed_manifest(net, train_manifest, wd);
      auto eval_embs = embed_manifest(net, eval_manifest, wd);
      const std::string t1 = pipeline::tmp_path(paths.emb_train);
      backend::write_embeddings(t1, train_embs, false);
      pipeline::commit_file(t1, paths.emb_train);
      const std::string t2 = pipeline::tmp_path(paths.emb_eval);
      backend::write_embeddings(t2, eval_embs, false);
      pipeline::commit_file(t2, paths.emb_eval);
      return std::vector<std::string>{paths.emb_train, paths.emb_eval};
    });

    // LDA can keep at most n_speakers-1 directions.
    const int lda_dim =
        opts.lda_dim <= 0 ? 0 : std::min(opts.lda_dim, opts.n_speakers - 1);
    std::ostringstream bd;
    bd << "backend v1 lda=" << lda_dim << " plda_iters=" << opts.plda_iters
       << " pass=" << tag;
    const std::uint64_t h_backend = chain_hash(bd.str(), h_embed);
    stage("backend_" + tag, h_backend, [&] {
      wd.stage_dir("backend");
      auto train_embs = backend::read_embeddings(paths.emb_train, false);
      backend::PreprocessOptions popt;
      popt.lda_dim = lda_dim;
      backend::PreprocessChain chain = backend::fit_preprocess(train_embs, popt);
      auto train_pp = backend::apply_preprocess(chain, train_embs);
      backend::PldaTrainOptions plda_opt;
      plda_opt.n_iter = opts.plda_iters;
      backend::PldaTrainResult plda = backend::train_plda(train_pp, plda_opt);
      const std::string t1 = pipeline::tmp_path(paths.chain);
      backend::save_chain(t1, chain);
      pipeline::commit_file(t1, paths.chain);
      const std::string t2 = pipeline::tmp_path(paths.plda);
      backend::save_plda(t2, plda.model);
      pipeline::commit_file(t2, paths.plda);
      return std::vector<std::string>{paths.chain, paths.plda};
    });

    const std::uint64_t h_score = chain_hash("score v1", h_backend ^ h_trials);
    stage("score_" + tag, h_score, [&] {
      wd.stage_dir("scores");
      auto eval_embs = backend::read_embeddings(paths.emb_eval, false);
      backend::PreprocessChain chain = backend::load_chain(paths.chain);
      backend::PldaScorer scorer(backend::load_plda(paths.plda));
      std::map<std::string, backend::Vector> raw, pp;
      for (const auto& e : eval_embs) {
        raw.emplace(e.utt_id, e.vec);
        pp.emplace(e.utt_id, backend::apply_preprocess(chain, e.vec));
      }
      evalnorm::TrialScores cos_scores, plda_scores;
      for (const auto& t : trials) {
        evalnorm::ScoredTrial st;
        st.enroll_id = t.enroll_id;
        st.test_id = t.test_id;
        st.score = backend::score_cosine(raw.at(t.enroll_id), raw.at(t.test_id));
        cos_scores.push_back(st);
        st.score = scorer.score(pp.at(t.enroll_id), pp.at(t.test_id));
        plda_scores.push_back(st);
      }
      const std::string t1 = pipeline::tmp_path(paths.scores_cosine);
      evalnorm::write_scores(t1, cos_scores);
      pipeline::commit_file(t1, paths.scores_cosine);
      const std::string t2 = pipeline::tmp_path(paths.scores_plda);
      evalnorm::write_scores(t2, plda_scores);
      pipeline::commit_file(t2, paths.scores_plda);
      return std::vector<std::string>{paths.scores_cosine, paths.scores_plda};
    });

    // Metrics are cheap; recompute every run from the score files.
    PassMetrics m;
    m.n_train_classes = static_cast<int>(labels.size());
    auto measure = [&](const std::string& path, double* eer, double* dcf) {
      evalnorm::TrialScores scores = evalnorm::read_scores(path);
      evalnorm::attach_labels(scores, trials);
      *eer = evalnorm::compute_eer(scores);
      *dcf = evalnorm::compute_min_dcf(scores, evalnorm::DcfParams{});
    };
    measure(paths.scores_cosine, &m.eer_cosine, &m.min_dcf_cosine);
    measure(paths.scores_plda, &m.eer_plda, &m.min_dcf_plda);
    return m;
  };

  DemoReport report;
  report.trials_path = wd.file("trials.txt");
  report.eval_manifest_path = wd.file("manifests/eval.txt");
  const PassPaths base_paths = pass_paths(wd, "base");
  report.model_base_path = base_paths.model;
  report.chain_base_path = base_paths.chain;
  report.plda_base_path = base_paths.plda;

  report.base = run_pass("base", train_manifest, h_feat);
  if (opts.run_speed_pass) {
    report.speed = run_pass("speed", train_sp, h_feat ^ h_speed);
    report.has_speed = true;
  }

  // ---- report -------------------------------------------------------------
  std::ostringstream os;
  os << "svkit demo report\n";
  os << "seed " << opts.seed << " speakers " << opts.n_speakers << " utts "
     << opts.utts_per_speaker << " held_out " << opts.held_out_per_speaker
     << "\n";
  char line[160];
  auto emit = [&](const char* tag, const PassMetrics& m) {
    std::snprintf(line, sizeof(line),
                  "%s classes %d cosine EER %.4f minDCF %.4f plda EER %.4f "
                  "minDCF %.4f\n",
                  tag, m.n_train_classes, m.eer_cosine, m.min_dcf_cosine,
                  m.eer_plda, m.min_dcf_plda);
    os << line;
  };
  emit("base ", report.base);
  if (report.has_speed) emit("speed", report.speed);
  report.report_path = wd.file("report.txt");
  pipeline::atomic_write(report.report_path, os.str());
  if (!opts.quiet) std::fputs(os.str().c_str(), stdout);
  return report;
}

}  // namespace sv::demo

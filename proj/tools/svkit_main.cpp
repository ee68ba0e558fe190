// Copyright (c) the svkit authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

// svkit command line: each verb is a thin wrapper over the library. Exit
// codes: 0 success, 1 usage error, 2 bad data, 3 numerical failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "svkit/augment.hpp"
#include "svkit/backend.hpp"
#include "svkit/config.hpp"
#include "svkit/demo.hpp"
#include "svkit/error.hpp"
#include "svkit/evalnorm.hpp"
#include "svkit/features.hpp"
#include "svkit/loss.hpp"
#include "svkit/nnet.hpp"
#include "svkit/rng.hpp"
#include "svkit/wav.hpp"

namespace {

using sv::DataError;
using sv::NumericalError;

std::vector<std::string> list_wavs(const std::string& dir) {
  std::vector<std::string> files;
  if (!std::filesystem::is_directory(dir))
    throw DataError("not a directory: " + dir);
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".wav")
      files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no .wav files in " + dir);
  return files;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::map<std::string, int> label_map(
    const std::vector<sv::aug::UtteranceRecord>& manifest) {
  std::map<std::string, int> labels;
  for (const auto& rec : manifest) labels.emplace(rec.spk_id, 0);
  int next = 0;
  for (auto& [spk, idx] : labels) idx = next++;
  return labels;
}

sv::feat::FeatureMatrix read_features(const std::string& path, bool binary,
                                      std::string* utt_id) {
  return binary ? sv::feat::read_features_binary(path, utt_id)
                : sv::feat::read_features_text(path, utt_id);
}

// Flags shared by `features mfb` and `features mfcc`.
struct FeatureArgs {
  std::string wav_path;
  std::string out_path;
  std::string utt_id;
  bool binary = false;
  double frame_len_s = -1.0;
  double frame_hop_s = -1.0;
  int n_mel = -1;
  int n_ceps = -1;
  double fmin_hz = -1.0;
  double fmax_hz = -1.0;
  double preemph = -1.0;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--wav", wav_path, "input wav file")->required();
    cmd->add_option("--out", out_path, "output feature file")->required();
    cmd->add_option("--utt-id", utt_id, "utterance id for the file header");
    cmd->add_flag("--binary", binary, "write the binary feature format");
    cmd->add_option("--frame-len", frame_len_s, "frame length in seconds");
    cmd->add_option("--frame-hop", frame_hop_s, "frame hop in seconds");
    cmd->add_option("--n-mel", n_mel, "number of mel bands");
    cmd->add_option("--fmin", fmin_hz, "lowest filterbank edge in Hz");
    cmd->add_option("--fmax", fmax_hz, "highest filterbank edge in Hz");
    cmd->add_option("--preemph", preemph, "pre-emphasis coefficient");
  }

  sv::feat::FeatureConfig fill(sv::feat::FeatureConfig cfg) const {
    if (frame_len_s >= 0) cfg.frame_len_s = frame_len_s;
    if (frame_hop_s >= 0) cfg.frame_hop_s = frame_hop_s;
    if (n_mel >= 0) cfg.n_mel = n_mel;
    if (n_ceps >= 0) cfg.n_ceps = n_ceps;
    if (fmin_hz >= 0) cfg.fmin_hz = fmin_hz;
    if (fmax_hz >= 0) cfg.fmax_hz = fmax_hz;
    if (preemph >= 0) cfg.preemph = preemph;
    return cfg;
  }

  void run(bool mfcc) const {
    sv::Waveform wav = sv::read_wav(wav_path);
    sv::feat::FeatureConfig cfg =
        fill(mfcc ? sv::feat::FeatureConfig::mfcc_defaults()
                  : sv::feat::FeatureConfig::mfb_defaults());
    sv::feat::FeatureMatrix fm =
        mfcc ? sv::feat::extract_mfcc(wav, cfg) : sv::feat::extract_mfb(wav, cfg);
    const std::string id = utt_id.empty() ? "utt" : utt_id;
    if (binary)
      sv::feat::write_features_binary(out_path, id, fm);
    else
      sv::feat::write_features_text(out_path, id, fm);
    std::printf("features %s: wrote %s (%ld frames x %ld dims)\n",
                mfcc ? "mfcc" : "mfb", out_path.c_str(),
                static_cast<long>(fm.n_frames()), static_cast<long>(fm.dim()));
  }
};

int dispatch(int argc, char** argv) {
  CLI::App app{"svkit: a toy speaker-verification pipeline"};
  app.require_subcommand(1);

  // ---- augment ----------------------------------------------------------
  // Batch verbs over a manifest: originals are kept, augmented copies are
  // appended with their new wav paths.
  auto* augment = app.add_subcommand("augment", "waveform augmentation");
  augment->require_subcommand(1);

  auto* aug_speed = augment->add_subcommand(
      "speed", "speed-perturbed copies relabeled as new speakers");
  struct {
    std::string manifest, out_dir, out_manifest;
    std::vector<double> factors{0.8, 0.9, 1.1};
  } sp;
  aug_speed->add_option("--manifest", sp.manifest, "input manifest")->required();
  aug_speed->add_option("--factors", sp.factors, "speed factors")
      ->delimiter(',');
  aug_speed->add_option("--out-dir", sp.out_dir, "directory for perturbed wavs")
      ->required();
  aug_speed->add_option("--out-manifest", sp.out_manifest,
                        "expanded output manifest")
      ->required();
  aug_speed->callback([&] {
    auto manifest = sv::aug::read_manifest(sp.manifest);
    auto expanded = sv::aug::expand_speed_manifest(manifest, sp.factors);
    std::filesystem::create_directories(sp.out_dir);
    std::size_t n_written = 0;
    for (auto& rec : expanded) {
      if (rec.tag == "orig") continue;
      const double factor = std::stod(rec.tag.substr(2));
      sv::Waveform wav = sv::read_wav(rec.wav_path);
      rec.wav_path = sp.out_dir + "/" + rec.utt_id + ".wav";
      sv::write_wav(rec.wav_path, sv::aug::speed_perturb(wav, factor));
      ++n_written;
    }
    sv::aug::write_manifest(sp.out_manifest, expanded);
    std::printf("augment speed: wrote %zu wavs, manifest %s (%zu records)\n",
                n_written, sp.out_manifest.c_str(), expanded.size());
  });

  auto* aug_noise = augment->add_subcommand(
      "noise", "noisy copies at an SNR drawn from a list");
  struct {
    std::string manifest, noise_dir, out_dir, out_manifest;
    std::vector<double> snr{0, 5, 10, 15};
    std::uint64_t seed = 0;
  } no;
  aug_noise->add_option("--manifest", no.manifest, "input manifest")->required();
  aug_noise->add_option("--noise-dir", no.noise_dir, "directory of noise wavs")
      ->required();
  aug_noise->add_option("--snr", no.snr, "SNR choices in dB")->delimiter(',');
  aug_noise->add_option("--out-dir", no.out_dir, "directory for noisy wavs")
      ->required();
  aug_noise->add_option("--out-manifest", no.out_manifest,
                        "expanded output manifest")
      ->required();
  aug_noise->add_option("--seed", no.seed, "noise/SNR selection seed");
  aug_noise->callback([&] {
    auto manifest = sv::aug::read_manifest(no.manifest);
    std::vector<std::string> noise_files = list_wavs(no.noise_dir);
    if (no.snr.empty()) throw DataError("augment noise: empty --snr list");
    std::filesystem::create_directories(no.out_dir);
    auto expanded = manifest;
    for (const auto& rec : manifest) {
      // Per-utterance choices keyed by id, so order never matters.
      sv::Rng rng(sv::fnv1a(rec.utt_id, no.seed));
      const auto& noise_path =
          noise_files[rng.uniform_int(noise_files.size())];
      const double snr_db = no.snr[rng.uniform_int(no.snr.size())];
      sv::Waveform wav = sv::read_wav(rec.wav_path);
      sv::Waveform noise = sv::read_wav(noise_path);
      sv::aug::UtteranceRecord out = rec;
      out.utt_id = rec.utt_id + "_noise";
      out.tag = "noise";
      out.wav_path = no.out_dir + "/" + out.utt_id + ".wav";
      sv::write_wav(out.wav_path,
                    sv::aug::add_noise(wav, noise, snr_db, rng.raw()));
      expanded.push_back(out);
    }
    sv::aug::write_manifest(no.out_manifest, expanded);
    std::printf("augment noise: wrote %zu wavs, manifest %s (%zu records)\n",
                manifest.size(), no.out_manifest.c_str(), expanded.size());
  });

  auto* aug_reverb = augment->add_subcommand(
      "reverb", "convolve each utterance with an impulse response");
  struct {
    std::string manifest, rir_dir, out_dir, out_manifest;
    std::uint64_t seed = 0;
  } rv;
  aug_reverb->add_option("--manifest", rv.manifest, "input manifest")->required();
  aug_reverb->add_option("--rir-dir", rv.rir_dir,
                         "directory of impulse-response wavs")
      ->required();
  aug_reverb->add_option("--out-dir", rv.out_dir, "directory for reverberant wavs")
      ->required();
  aug_reverb->add_option("--out-manifest", rv.out_manifest,
                         "expanded output manifest")
      ->required();
  aug_reverb->add_option("--seed", rv.seed, "impulse-response selection seed");
  aug_reverb->callback([&] {
    auto manifest = sv::aug::read_manifest(rv.manifest);
    std::vector<std::string> rir_files = list_wavs(rv.rir_dir);
    std::filesystem::create_directories(rv.out_dir);
    auto expanded = manifest;
    for (const auto& rec : manifest) {
      sv::Rng rng(sv::fnv1a(rec.utt_id, rv.seed));
      const auto& rir_path = rir_files[rng.uniform_int(rir_files.size())];
      sv::Waveform wav = sv::read_wav(rec.wav_path);
      sv::Waveform rir = sv::read_wav(rir_path);
      sv::aug::UtteranceRecord out = rec;
      out.utt_id = rec.utt_id + "_reverb";
      out.tag = "reverb";
      out.wav_path = rv.out_dir + "/" + out.utt_id + ".wav";
      sv::write_wav(out.wav_path, sv::aug::reverberate(wav, rir.samples));
      expanded.push_back(out);
    }
    sv::aug::write_manifest(rv.out_manifest, expanded);
    std::printf("augment reverb: wrote %zu wavs, manifest %s (%zu records)\n",
                manifest.size(), rv.out_manifest.c_str(), expanded.size());
  });

  // ---- features ---------------------------------------------------------
  auto* features = app.add_subcommand("features", "acoustic feature extraction");
  features->require_subcommand(1);
  auto* feat_mfb = features->add_subcommand("mfb", "log mel filterbanks");
  auto* feat_mfcc = features->add_subcommand("mfcc", "mel-frequency cepstra");
  static FeatureArgs mfb_args, mfcc_args;
  mfb_args.add_to(feat_mfb);
  mfcc_args.add_to(feat_mfcc);
  feat_mfcc->add_option("--n-ceps", mfcc_args.n_ceps, "number of cepstra kept");
  feat_mfb->callback([&] { mfb_args.run(false); });
  feat_mfcc->callback([&] { mfcc_args.run(true); });

  // ---- train ------------------------------------------------------------
  auto* train = app.add_subcommand("train", "train the toy embedding network");
  struct {
    std::string manifest, feat_dir, topology, out;
    bool binary_features = false;
    int epochs = 30;
    int batch = 16;
    std::vector<double> lr;
    std::vector<double> ce_weights;
    double margin = 0.1;
    double scale = 30.0;
    std::uint64_t seed = 0;
    bool no_ce_branch = false;
  } tr;
  train->add_option("--manifest", tr.manifest, "training manifest")->required();
  train->add_option("--feat-dir", tr.feat_dir, "directory of <utt_id>.feat files")
      ->required();
  train->add_option("--topology", tr.topology, "network topology file")
      ->required();
  train->add_option("--out", tr.out, "output model file")->required();
  train->add_flag("--binary-features", tr.binary_features,
                  "feature files are in the binary format");
  train->add_option("--epochs", tr.epochs, "max training epochs");
  train->add_option("--batch", tr.batch, "batch size");
  train->add_option("--lr", tr.lr, "learning-rate schedule")->delimiter(',');
  train->add_option("--ce-weights", tr.ce_weights,
                    "cross-entropy branch weight schedule")
      ->delimiter(',');
  train->add_option("--margin", tr.margin, "additive margin");
  train->add_option("--scale", tr.scale, "cosine scale");
  train->add_option("--seed", tr.seed, "training seed");
  train->add_flag("--no-ce-branch", tr.no_ce_branch,
                  "train without the auxiliary cross-entropy branch");
  train->callback([&] {
    auto manifest = sv::aug::read_manifest(tr.manifest);
    auto labels = label_map(manifest);
    std::vector<sv::loss::TrainSample> samples;
    samples.reserve(manifest.size());
    for (const auto& rec : manifest) {
      std::string utt;
      auto fm = read_features(tr.feat_dir + "/" + rec.utt_id + ".feat",
                              tr.binary_features, &utt);
      samples.push_back({fm.values, labels.at(rec.spk_id)});
    }
    sv::loss::TrainOptions opts;
    opts.max_epochs = tr.epochs;
    opts.batch_size = tr.batch;
    if (!tr.lr.empty()) opts.lr_schedule = tr.lr;
    if (!tr.ce_weights.empty()) opts.ce_weight_schedule = tr.ce_weights;
    opts.ams.margin = tr.margin;
    opts.ams.scale = tr.scale;
    opts.seed = tr.seed;
    opts.use_ce_branch = !tr.no_ce_branch;
    sv::nnet::Network init =
        sv::nnet::build_network(read_text_file(tr.topology), tr.seed);
    sv::loss::TrainResult result = sv::loss::train_toy(init, samples, opts);
    sv::nnet::save_network(tr.out, result.net);
    std::printf(
        "train: wrote %s (%zu classes, %zu samples, %zu epochs, final loss "
        "%.4f)\n",
        tr.out.c_str(), labels.size(), samples.size(), result.trace.size(),
        result.trace.empty() ? 0.0 : result.trace.back().mean_loss);
  });

  // ---- embed ------------------------------------------------------------
  auto* embed = app.add_subcommand("embed", "extract embeddings with a model");
  struct {
    std::string model, manifest, feat_dir, out;
    bool binary_features = false;
    bool binary_out = false;
  } em;
  embed->add_option("--model", em.model, "trained model file")->required();
  embed->add_option("--manifest", em.manifest, "utterance manifest")->required();
  embed->add_option("--feat-dir", em.feat_dir, "directory of <utt_id>.feat files")
      ->required();
  embed->add_option("--out", em.out, "output embedding file")->required();
  embed->add_flag("--binary-features", em.binary_features,
                  "feature files are in the binary format");
  embed->add_flag("--binary", em.binary_out, "write binary embeddings");
  embed->callback([&] {
    sv::nnet::Network net = sv::nnet::load_network(em.model);
    auto manifest = sv::aug::read_manifest(em.manifest);
    std::vector<sv::backend::Embedding> embs;
    embs.reserve(manifest.size());
    for (const auto& rec : manifest) {
      std::string utt;
      auto fm = read_features(em.feat_dir + "/" + rec.utt_id + ".feat",
                              em.binary_features, &utt);
      embs.push_back(
          {rec.utt_id, rec.spk_id, sv::nnet::forward_embedding(net, fm)});
    }
    sv::backend::write_embeddings(em.out, embs, em.binary_out);
    std::printf("embed: wrote %s (%zu embeddings, dim %ld)\n", em.out.c_str(),
                embs.size(),
                embs.empty() ? 0L : static_cast<long>(embs.front().vec.size()));
  });

  // ---- backend ----------------------------------------------------------
  auto* backend = app.add_subcommand("backend", "embedding preprocessing and PLDA");
  backend->require_subcommand(1);

  auto* b_fit = backend->add_subcommand("fit", "fit the preprocessing chain");
  struct {
    std::string embeddings, out;
    bool binary = false;
    int lda_dim = 0;
    bool no_whiten = false, no_lda = false, no_length_norm = false;
  } bf;
  b_fit->add_option("--embeddings", bf.embeddings, "labeled training embeddings")
      ->required();
  b_fit->add_option("--out", bf.out, "output chain file")->required();
  b_fit->add_flag("--binary", bf.binary, "embeddings are in the binary format");
  b_fit->add_option("--lda-dim", bf.lda_dim, "LDA output dim (0 keeps full dim)");
  b_fit->add_flag("--no-whiten", bf.no_whiten, "skip whitening");
  b_fit->add_flag("--no-lda", bf.no_lda, "skip LDA");
  b_fit->add_flag("--no-length-norm", bf.no_length_norm, "skip length norm");
  b_fit->callback([&] {
    auto embs = sv::backend::read_embeddings(bf.embeddings, bf.binary);
    sv::backend::PreprocessOptions opts;
    opts.lda_dim = bf.lda_dim;
    opts.whiten = !bf.no_whiten;
    opts.lda = !bf.no_lda;
    opts.length_norm = !bf.no_length_norm;
    sv::backend::PreprocessChain chain = sv::backend::fit_preprocess(embs, opts);
    sv::backend::save_chain(bf.out, chain);
    std::printf("backend fit: wrote %s (%d -> %d dims)\n", bf.out.c_str(),
                chain.input_dim(), chain.output_dim());
  });

  auto* b_apply = backend->add_subcommand("apply", "apply a fitted chain");
  struct {
    std::string chain, embeddings, out;
    bool binary = false, binary_out = false;
  } ba;
  b_apply->add_option("--chain", ba.chain, "fitted chain file")->required();
  b_apply->add_option("--embeddings", ba.embeddings, "input embeddings")
      ->required();
  b_apply->add_option("--out", ba.out, "output embeddings")->required();
  b_apply->add_flag("--binary", ba.binary, "inputs are in the binary format");
  b_apply->add_flag("--binary-out", ba.binary_out, "write binary embeddings");
  b_apply->callback([&] {
    auto chain = sv::backend::load_chain(ba.chain);
    auto embs = sv::backend::read_embeddings(ba.embeddings, ba.binary);
    auto out = sv::backend::apply_preprocess(chain, embs);
    sv::backend::write_embeddings(ba.out, out, ba.binary_out);
    std::printf("backend apply: wrote %s (%zu embeddings, dim %d)\n",
                ba.out.c_str(), out.size(), chain.output_dim());
  });

  auto* b_plda = backend->add_subcommand("plda", "train the PLDA model");
  struct {
    std::string embeddings, out;
    bool binary = false;
    int iters = 10;
  } bp;
  b_plda->add_option("--embeddings", bp.embeddings,
                     "labeled, preprocessed training embeddings")
      ->required();
  b_plda->add_option("--out", bp.out, "output model file")->required();
  b_plda->add_flag("--binary", bp.binary, "embeddings are in the binary format");
  b_plda->add_option("--iters", bp.iters, "EM iterations");
  b_plda->callback([&] {
    auto embs = sv::backend::read_embeddings(bp.embeddings, bp.binary);
    sv::backend::PldaTrainOptions opts;
    opts.n_iter = bp.iters;
    auto result = sv::backend::train_plda(embs, opts);
    sv::backend::save_plda(bp.out, result.model);
    std::printf(
        "backend plda: wrote %s (dim %d, %d iters, loglik %.4f, floored "
        "%d)\n",
        bp.out.c_str(), result.model.dim(), bp.iters,
        result.loglik.empty() ? 0.0 : result.loglik.back(), result.n_floored);
  });

  // ---- score ------------------------------------------------------------
  auto* score = app.add_subcommand("score", "score verification trials");
  score->require_subcommand(1);

  auto* s_cos = score->add_subcommand("cosine", "cosine similarity");
  struct {
    std::string embeddings, trials, out;
    bool binary = false;
  } sc;
  s_cos->add_option("--embeddings", sc.embeddings, "embeddings covering all trial sides")
      ->required();
  s_cos->add_option("--trials", sc.trials, "trial list")->required();
  s_cos->add_option("--out", sc.out, "output score file")->required();
  s_cos->add_flag("--binary", sc.binary, "embeddings are in the binary format");
  s_cos->callback([&] {
    auto embs = sv::backend::read_embeddings(sc.embeddings, sc.binary);
    std::map<std::string, sv::backend::Vector> by_utt;
    for (const auto& e : embs) by_utt.emplace(e.utt_id, e.vec);
    auto trials = sv::evalnorm::read_trials(sc.trials);
    sv::evalnorm::TrialScores scores;
    for (const auto& t : trials) {
      auto ei = by_utt.find(t.enroll_id);
      auto ti = by_utt.find(t.test_id);
      if (ei == by_utt.end() || ti == by_utt.end())
        throw DataError("score: no embedding for trial " + t.enroll_id + " " +
                        t.test_id);
      scores.push_back({t.enroll_id, t.test_id,
                        sv::backend::score_cosine(ei->second, ti->second), -1});
    }
    sv::evalnorm::write_scores(sc.out, scores);
    std::printf("score cosine: wrote %s (%zu trials)\n", sc.out.c_str(),
                scores.size());
  });

  auto* s_plda = score->add_subcommand("plda", "PLDA log-likelihood ratio");
  struct {
    std::string plda, embeddings, trials, out, chain;
    bool binary = false;
  } sl;
  s_plda->add_option("--plda", sl.plda, "trained PLDA model")->required();
  s_plda->add_option("--embeddings", sl.embeddings, "embeddings covering all trial sides")
      ->required();
  s_plda->add_option("--trials", sl.trials, "trial list")->required();
  s_plda->add_option("--out", sl.out, "output score file")->required();
  s_plda->add_option("--chain", sl.chain,
                     "preprocessing chain applied before scoring");
  s_plda->add_flag("--binary", sl.binary, "embeddings are in the binary format");
  s_plda->callback([&] {
    auto embs = sv::backend::read_embeddings(sl.embeddings, sl.binary);
    if (!sl.chain.empty()) {
      auto chain = sv::backend::load_chain(sl.chain);
      embs = sv::backend::apply_preprocess(chain, embs);
    }
    sv::backend::PldaScorer scorer(sv::backend::load_plda(sl.plda));
    std::map<std::string, sv::backend::Vector> by_utt;
    for (const auto& e : embs) by_utt.emplace(e.utt_id, e.vec);
    auto trials = sv::evalnorm::read_trials(sl.trials);
    sv::evalnorm::TrialScores scores;
    for (const auto& t : trials) {
      auto ei = by_utt.find(t.enroll_id);
      auto ti = by_utt.find(t.test_id);
      if (ei == by_utt.end() || ti == by_utt.end())
        throw DataError("score: no embedding for trial " + t.enroll_id + " " +
                        t.test_id);
      scores.push_back(
          {t.enroll_id, t.test_id, scorer.score(ei->second, ti->second), -1});
    }
    sv::evalnorm::write_scores(sl.out, scores);
    std::printf("score plda: wrote %s (%zu trials)\n", sl.out.c_str(),
                scores.size());
  });

  // ---- asnorm -----------------------------------------------------------
  auto* asn = app.add_subcommand("asnorm", "adaptive symmetric score normalization");
  struct {
    std::string scores, enroll_cohort, test_cohort, out;
    double top_frac = 0.05;
    std::size_t cohort_size = 0;
    std::uint64_t seed = 0;
  } an;
  asn->add_option("--scores", an.scores, "raw score file")->required();
  asn->add_option("--enroll-cohort", an.enroll_cohort,
                  "cohort scores keyed by enroll id")
      ->required();
  asn->add_option("--test-cohort", an.test_cohort,
                  "cohort scores keyed by test id")
      ->required();
  asn->add_option("--out", an.out, "output score file")->required();
  asn->add_option("--top-frac", an.top_frac, "fraction of best cohort scores");
  asn->add_option("--cohort-size", an.cohort_size,
                  "subsample each cohort to this many entries (0 keeps all)");
  asn->add_option("--seed", an.seed, "cohort subsampling seed");
  asn->callback([&] {
    auto raw = sv::evalnorm::read_scores(an.scores);
    auto ec = sv::evalnorm::read_cohort_scores(an.enroll_cohort);
    auto tc = sv::evalnorm::read_cohort_scores(an.test_cohort);
    auto out = sv::evalnorm::asnorm(raw, ec, tc, an.top_frac, an.cohort_size,
                                    an.seed);
    sv::evalnorm::write_scores(an.out, out);
    std::printf("asnorm: wrote %s (%zu trials, top-frac %g)\n", an.out.c_str(),
                out.size(), an.top_frac);
  });

  // ---- fuse -------------------------------------------------------------
  auto* fuse = app.add_subcommand("fuse", "standardize and combine score files");
  struct {
    std::vector<std::string> scores;
    std::vector<double> weights;
    std::string out;
  } fu;
  fuse->add_option("--scores", fu.scores, "score files to fuse")
      ->required()
      ->delimiter(',');
  fuse->add_option("--weights", fu.weights, "one weight per system")
      ->delimiter(',');
  fuse->add_option("--out", fu.out, "output score file")->required();
  fuse->callback([&] {
    std::vector<sv::evalnorm::TrialScores> systems;
    systems.reserve(fu.scores.size());
    for (const auto& path : fu.scores)
      systems.push_back(sv::evalnorm::read_scores(path));
    auto out = sv::evalnorm::fuse(systems, fu.weights);
    sv::evalnorm::write_scores(fu.out, out);
    std::printf("fuse: wrote %s (%zu trials, %zu systems)\n", fu.out.c_str(),
                out.size(), systems.size());
  });

  // ---- eval -------------------------------------------------------------
  auto* ev = app.add_subcommand("eval", "EER and minimum detection cost");
  struct {
    std::string scores, trials;
    double p_target = 0.01, c_miss = 1.0, c_fa = 1.0;
  } ea;
  ev->add_option("--scores", ea.scores, "score file")->required();
  ev->add_option("--trials", ea.trials, "labeled trial list")->required();
  ev->add_option("--p-target", ea.p_target, "target prior");
  ev->add_option("--c-miss", ea.c_miss, "miss cost");
  ev->add_option("--c-fa", ea.c_fa, "false-alarm cost");
  ev->callback([&] {
    auto scores = sv::evalnorm::read_scores(ea.scores);
    auto trials = sv::evalnorm::read_trials(ea.trials);
    sv::evalnorm::attach_labels(scores, trials);
    sv::evalnorm::DcfParams params{ea.p_target, ea.c_miss, ea.c_fa};
    std::printf("EER %.4f minDCF %.4f\n", sv::evalnorm::compute_eer(scores),
                sv::evalnorm::compute_min_dcf(scores, params));
  });

  // ---- demo -------------------------------------------------------------
  auto* demo = app.add_subcommand("demo", "synthetic end-to-end pipeline");
  struct {
    std::string workdir;
    std::string config;
    std::uint64_t seed = 0;
    int n_speakers = 20;
    int utts = 10;
    int held_out = 3;
    bool no_speed = false;
    bool quiet = false;
  } de;
  demo->add_option("--workdir", de.workdir, "pipeline working directory")
      ->required();
  demo->add_option("--config", de.config,
                   "optional 'section.key = value' config file");
  demo->add_option("--seed", de.seed, "master seed");
  demo->add_option("--n-speakers", de.n_speakers, "number of synthetic speakers");
  demo->add_option("--utts-per-speaker", de.utts, "utterances per speaker");
  demo->add_option("--held-out", de.held_out, "held-out utterances per speaker");
  demo->add_flag("--no-speed", de.no_speed, "skip the speed-augmented pass");
  demo->add_flag("--quiet", de.quiet, "suppress per-stage progress");
  demo->callback([&] {
    sv::demo::DemoOptions opts;
    opts.workdir = de.workdir;
    opts.seed = de.seed;
    opts.n_speakers = de.n_speakers;
    opts.utts_per_speaker = de.utts;
    opts.held_out_per_speaker = de.held_out;
    opts.run_speed_pass = !de.no_speed;
    opts.quiet = de.quiet;
    if (!de.config.empty()) {
      sv::config::Config cfg = sv::config::Config::parse_file(de.config);
      opts.seed = cfg.get_uint64("demo.seed", opts.seed);
      opts.n_speakers = cfg.get_int("demo.n_speakers", opts.n_speakers);
      opts.utts_per_speaker =
          cfg.get_int("demo.utts_per_speaker", opts.utts_per_speaker);
      opts.held_out_per_speaker =
          cfg.get_int("demo.held_out_per_speaker", opts.held_out_per_speaker);
      opts.run_speed_pass = cfg.get_bool("demo.speed_pass", opts.run_speed_pass);
      opts.max_epochs = cfg.get_int("trainer.max_epochs", opts.max_epochs);
      opts.batch_size = cfg.get_int("trainer.batch_size", opts.batch_size);
      opts.lr_schedule = cfg.get_double_list("trainer.lr", opts.lr_schedule);
      opts.ce_weight_schedule =
          cfg.get_double_list("trainer.ce_weights", opts.ce_weight_schedule);
      opts.ams_margin = cfg.get_double("loss.margin", opts.ams_margin);
      opts.ams_scale = cfg.get_double("loss.scale", opts.ams_scale);
      opts.lda_dim = cfg.get_int("backend.lda_dim", opts.lda_dim);
      opts.plda_iters = cfg.get_int("backend.plda_iters", opts.plda_iters);
    }
    sv::demo::DemoReport report = sv::demo::run_demo(opts);
    std::printf("demo: report at %s\n", report.report_path.c_str());
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "svkit: %s\n", e.what());
    return 3;
  } catch (const DataError& e) {
    std::fprintf(stderr, "svkit: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "svkit: %s\n", e.what());
    return 2;
  }
}

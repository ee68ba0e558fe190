// Copyright (c) the svkit authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#include "svkit/evalnorm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include "svkit/error.hpp"
#include "svkit/rng.hpp"

namespace sv::evalnorm {

namespace {

double parse_score(const std::string& tok, const std::string& where) {
  try {
    std::size_t pos = 0;
    double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    if (!std::isfinite(v)) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw DataError(where + ": bad score '" + tok + "'");
  }
}

int parse_label(const std::string& tok, const std::string& where) {
  if (tok == "target") return 1;
  if (tok == "nontarget") return 0;
  throw DataError(where + ": label must be 'target' or 'nontarget', got '" +
                  tok + "'");
}

void split_by_label(const TrialScores& scores, std::vector<double>* targets,
                    std::vector<double>* nontargets) {
  for (const ScoredTrial& t : scores) {
    if (!std::isfinite(t.score))
      throw DataError("metrics: non-finite score for " + t.enroll_id + " " +
                      t.test_id);
    if (t.label == 1)
      targets->push_back(t.score);
    else if (t.label == 0)
      nontargets->push_back(t.score);
    else
      throw DataError("metrics: unlabeled trial " + t.enroll_id + " " +
                      t.test_id);
  }
  if (targets->empty()) throw DataError("metrics: no target trials");
  if (nontargets->empty()) throw DataError("metrics: no nontarget trials");
}

// (P_fa, P_miss) at "accept iff score >= s" for each distinct s ascending.
std::vector<std::pair<double, double>> staircase(
    std::vector<double> targets, std::vector<double> nontargets) {
  std::vector<double> thresholds;
  thresholds.reserve(targets.size() + nontargets.size());
  thresholds.insert(thresholds.end(), targets.begin(), targets.end());
  thresholds.insert(thresholds.end(), nontargets.begin(), nontargets.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());
  std::sort(targets.begin(), targets.end());
  std::sort(nontargets.begin(), nontargets.end());
  const double nt = static_cast<double>(targets.size());
  const double nn = static_cast<double>(nontargets.size());
  std::vector<std::pair<double, double>> points;
  points.reserve(thresholds.size());
  for (double s : thresholds) {
    auto non_ge = nontargets.end() -
                  std::lower_bound(nontargets.begin(), nontargets.end(), s);
    auto tgt_lt = std::lower_bound(targets.begin(), targets.end(), s) -
                  targets.begin();
    points.emplace_back(static_cast<double>(non_ge) / nn,
                        static_cast<double>(tgt_lt) / nt);
  }
  return points;
}

}  // namespace

std::vector<Trial> read_trials(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open trial file: " + path);
  std::vector<Trial> out;
  std::set<std::pair<std::string, std::string>> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::string where = path + " line " + std::to_string(line_no);
    std::istringstream ss(line);
    Trial t;
    std::string label, extra;
    ss >> t.enroll_id >> t.test_id;
    if (t.enroll_id.empty() || t.test_id.empty())
      throw DataError(where + ": expected 'enroll_id test_id [label]'");
    if (ss >> label) t.label = parse_label(label, where);
    if (ss >> extra) throw DataError(where + ": trailing tokens");
    if (!seen.insert({t.enroll_id, t.test_id}).second)
      throw DataError(where + ": duplicate trial " + t.enroll_id + " " +
                      t.test_id);
    out.push_back(std::move(t));
  }
  if (out.empty()) throw DataError("empty trial file: " + path);
  return out;
}

TrialScores read_scores(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open score file: " + path);
  TrialScores out;
  std::set<std::pair<std::string, std::string>> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::string where = path + " line " + std::to_string(line_no);
    std::istringstream ss(line);
    ScoredTrial t;
    std::string score, extra;
    ss >> t.enroll_id >> t.test_id >> score;
    if (t.enroll_id.empty() || t.test_id.empty() || score.empty())
      throw DataError(where + ": expected 'enroll_id test_id score'");
    if (ss >> extra) throw DataError(where + ": trailing tokens");
    t.score = parse_score(score, where);
    if (!seen.insert({t.enroll_id, t.test_id}).second)
      throw DataError(where + ": duplicate trial " + t.enroll_id + " " +
                      t.test_id);
    out.push_back(std::move(t));
  }
  if (out.empty()) throw DataError("empty score file: " + path);
  return out;
}

void write_scores(const std::string& path, const TrialScores& scores) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write score file: " + path);
  char buf[64];
  for (const ScoredTrial& t : scores) {
    if (!std::isfinite(t.score))
      throw DataError("write_scores: non-finite score for " + t.enroll_id +
                      " " + t.test_id);
    std::snprintf(buf, sizeof buf, "%.6f", t.score);
    os << t.enroll_id << " " << t.test_id << " " << buf << "\n";
  }
  if (!os) throw DataError("failed writing score file: " + path);
}

std::map<std::string, std::vector<double>> read_cohort_scores(
    const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open cohort score file: " + path);
  std::map<std::string, std::vector<double>> out;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::string where = path + " line " + std::to_string(line_no);
    std::istringstream ss(line);
    std::string key, cohort_id, score, extra;
    ss >> key >> cohort_id >> score;
    if (key.empty() || cohort_id.empty() || score.empty())
      throw DataError(where + ": expected 'key cohort_id score'");
    if (ss >> extra) throw DataError(where + ": trailing tokens");
    out[key].push_back(parse_score(score, where));
  }
  if (out.empty()) throw DataError("empty cohort score file: " + path);
  return out;
}

void attach_labels(TrialScores& scores, const std::vector<Trial>& trials) {
  std::map<std::pair<std::string, std::string>, int> labels;
  for (const Trial& t : trials)
    labels[{t.enroll_id, t.test_id}] = t.label;
  for (ScoredTrial& s : scores) {
    auto it = labels.find({s.enroll_id, s.test_id});
    if (it == labels.end())
      throw DataError("attach_labels: no trial for " + s.enroll_id + " " +
                      s.test_id);
    if (it->second < 0)
      throw DataError("attach_labels: trial " + s.enroll_id + " " +
                      s.test_id + " has no label");
    s.label = it->second;
  }
}

std::size_t top_cohort_count(std::size_t cohort_size, double top_frac) {
  if (!(top_frac > 0.0) || top_frac > 1.0)
    throw DataError("asnorm: top_frac must be in (0, 1]");
  if (cohort_size == 0) throw DataError("asnorm: empty cohort");
  // guard against products like 2700 * 0.05 landing a hair above the
  // intended integer
  double raw = top_frac * static_cast<double>(cohort_size);
  auto n = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::min(std::max<std::size_t>(n, 1), cohort_size);
}

void top_cohort_mean_std(const std::vector<double>& scores, double top_frac,
                         double* mu, double* sigma, std::size_t* n_best) {
  std::size_t n = top_cohort_count(scores.size(), top_frac);
  if (n < 2)
    throw DataError("asnorm: fewer than 2 best cohort scores (cohort " +
                    std::to_string(scores.size()) + ", top_frac gives " +
                    std::to_string(n) + ")");
  std::vector<double> sorted = scores;
  for (double s : sorted)
    if (!std::isfinite(s)) throw DataError("asnorm: non-finite cohort score");
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += sorted[i];
  double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    ss += (sorted[i] - mean) * (sorted[i] - mean);
  double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (sd == 0.0) throw DataError("asnorm: constant cohort scores");
  *mu = mean;
  *sigma = sd;
  *n_best = n;
}

namespace {

std::vector<double> subsample_cohort(const std::vector<double>& scores,
                                     std::size_t n_keep,
                                     const std::string& key,
                                     std::uint64_t seed) {
  if (n_keep == 0 || scores.size() <= n_keep) return scores;
  // per-key stream so results do not depend on trial or map order
  std::uint64_t h = fnv1a(key, seed ^ 0x5bd1e99562bd9fd5ULL);
  Rng rng(h);
  std::vector<std::size_t> idx(scores.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  // partial Fisher-Yates: first n_keep slots
  for (std::size_t i = 0; i < n_keep; ++i) {
    std::size_t j = i + static_cast<std::size_t>(
                            rng.uniform_int(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  std::vector<double> out(n_keep);
  for (std::size_t i = 0; i < n_keep; ++i) out[i] = scores[idx[i]];
  return out;
}

}  // namespace

TrialScores asnorm(const TrialScores& raw,
                   const std::map<std::string, std::vector<double>>&
                       enroll_cohort_scores,
                   const std::map<std::string, std::vector<double>>&
                       test_cohort_scores,
                   double top_frac, std::size_t cohort_subsample,
                   std::uint64_t seed) {
  if (raw.empty()) throw DataError("asnorm: no trials");
  struct SideStats {
    double mu = 0.0, sigma = 1.0;
  };
  std::map<std::string, SideStats> enroll_stats, test_stats;
  auto side = [&](const std::map<std::string, std::vector<double>>& cohort,
                  std::map<std::string, SideStats>& cache,
                  const std::string& id,
                  const std::string& side_name) -> const SideStats& {
    auto it = cache.find(id);
    if (it != cache.end()) return it->second;
    auto ct = cohort.find(id);
    if (ct == cohort.end())
      throw DataError("asnorm: no " + side_name + " cohort scores for '" +
                      id + "'");
    std::vector<double> pool =
        subsample_cohort(ct->second, cohort_subsample, id, seed);
    SideStats st;
    std::size_t n_best = 0;
    top_cohort_mean_std(pool, top_frac, &st.mu, &st.sigma, &n_best);
    return cache.emplace(id, st).first->second;
  };

  TrialScores out;
  out.reserve(raw.size());
  for (const ScoredTrial& t : raw) {
    if (!std::isfinite(t.score))
      throw DataError("asnorm: non-finite score for " + t.enroll_id + " " +
                      t.test_id);
    const SideStats& e = side(enroll_cohort_scores, enroll_stats,
                              t.enroll_id, "enroll");
    const SideStats& s = side(test_cohort_scores, test_stats, t.test_id,
                              "test");
    ScoredTrial n = t;
    n.score = (t.score - e.mu) / e.sigma + (t.score - s.mu) / s.sigma;
    out.push_back(std::move(n));
  }
  return out;
}

TrialScores fuse(const std::vector<TrialScores>& systems,
                 const std::vector<double>& weights) {
  if (systems.empty()) throw DataError("fuse: no systems");
  std::vector<double> w = weights;
  if (w.empty()) w.assign(systems.size(), 1.0);
  if (w.size() != systems.size())
    throw DataError("fuse: weight count " + std::to_string(w.size()) +
                    " != system count " + std::to_string(systems.size()));
  double wsum = 0.0;
  for (double x : w) {
    if (x < 0.0 || !std::isfinite(x))
      throw DataError("fuse: weights must be nonnegative");
    wsum += x;
  }
  if (wsum == 0.0) throw DataError("fuse: all weights are zero");

  const TrialScores& base = systems.front();
  if (base.empty()) throw DataError("fuse: empty trial set");

  TrialScores out = base;
  for (ScoredTrial& t : out) t.score = 0.0;

  std::map<std::pair<std::string, std::string>, std::size_t> index;
  for (std::size_t i = 0; i < base.size(); ++i)
    index[{base[i].enroll_id, base[i].test_id}] = i;
  if (index.size() != base.size())
    throw DataError("fuse: duplicate trials in first system");

  for (std::size_t s = 0; s < systems.size(); ++s) {
    const TrialScores& sys = systems[s];
    if (sys.size() != base.size())
      throw DataError("fuse: system " + std::to_string(s + 1) +
                      " trial count differs");
    double mean = 0.0;
    for (const ScoredTrial& t : sys) {
      if (!std::isfinite(t.score))
        throw DataError("fuse: non-finite score in system " +
                        std::to_string(s + 1));
      mean += t.score;
    }
    mean /= static_cast<double>(sys.size());
    double ss = 0.0;
    for (const ScoredTrial& t : sys)
      ss += (t.score - mean) * (t.score - mean);
    double sd = sys.size() > 1
                    ? std::sqrt(ss / static_cast<double>(sys.size() - 1))
                    : 0.0;
    if (sd == 0.0)
      throw DataError("fuse: constant scores in system " +
                      std::to_string(s + 1));
    for (const ScoredTrial& t : sys) {
      auto it = index.find({t.enroll_id, t.test_id});
      if (it == index.end())
        throw DataError("fuse: system " + std::to_string(s + 1) +
                        " has unknown trial " + t.enroll_id + " " +
                        t.test_id);
      out[it->second].score += w[s] * (t.score - mean) / sd;
      if (t.label >= 0) {
        int prev = out[it->second].label;
        if (prev >= 0 && prev != t.label)
          throw DataError("fuse: conflicting labels for " + t.enroll_id +
                          " " + t.test_id);
        out[it->second].label = t.label;
      }
    }
  }
  return out;
}

std::vector<std::pair<double, double>> det_points(const TrialScores& scores) {
  std::vector<double> targets, nontargets;
  split_by_label(scores, &targets, &nontargets);
  return staircase(std::move(targets), std::move(nontargets));
}

double compute_eer(const TrialScores& scores) {
  std::vector<double> targets, nontargets;
  split_by_label(scores, &targets, &nontargets);
  auto points = staircase(std::move(targets), std::move(nontargets));
  // (FAR, FRR) sweep from accept-everything to reject-everything
  std::vector<std::pair<double, double>> sweep;
  sweep.reserve(points.size() + 2);
  sweep.emplace_back(1.0, 0.0);
  sweep.insert(sweep.end(), points.begin(), points.end());
  sweep.emplace_back(0.0, 1.0);
  for (std::size_t k = 1; k < sweep.size(); ++k) {
    double d_prev = sweep[k - 1].first - sweep[k - 1].second;
    double d_here = sweep[k].first - sweep[k].second;
    if (d_here <= 0.0) {
      if (d_prev <= 0.0)  // crossing at the very first point
        return 0.5 * (sweep[k - 1].first + sweep[k - 1].second);
      double alpha = d_prev / (d_prev - d_here);
      double far = sweep[k - 1].first +
                   alpha * (sweep[k].first - sweep[k - 1].first);
      double frr = sweep[k - 1].second +
                   alpha * (sweep[k].second - sweep[k - 1].second);
      return 0.5 * (far + frr);  // equal up to rounding
    }
  }
  throw NumericalError("compute_eer: no FAR/FRR crossing found");
}

double compute_min_dcf(const TrialScores& scores, const DcfParams& params) {
  if (!(params.p_target > 0.0) || !(params.p_target < 1.0))
    throw DataError("min_dcf: p_target must be in (0,1)");
  if (!(params.c_miss > 0.0) || !(params.c_fa > 0.0))
    throw DataError("min_dcf: costs must be positive");
  std::vector<double> targets, nontargets;
  split_by_label(scores, &targets, &nontargets);
  auto points = staircase(std::move(targets), std::move(nontargets));
  points.emplace_back(0.0, 1.0);  // reject everything
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [p_fa, p_miss] : points) {
    double cost = params.c_miss * p_miss * params.p_target +
                  params.c_fa * p_fa * (1.0 - params.p_target);
    best = std::min(best, cost);
  }
  double norm = std::min(params.c_miss * params.p_target,
                         params.c_fa * (1.0 - params.p_target));
  return best / norm;
}

}  // namespace sv::evalnorm

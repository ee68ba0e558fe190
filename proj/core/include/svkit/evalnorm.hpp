// Copyright (c) the svkit authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#ifndef SVKIT_EVALNORM_HPP_
#define SVKIT_EVALNORM_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace sv::evalnorm {

// label: 1 target, 0 nontarget, -1 unknown
struct ScoredTrial {
  std::string enroll_id;
  std::string test_id;
  double score = 0.0;
  int label = -1;
};
using TrialScores = std::vector<ScoredTrial>;

struct Trial {
  std::string enroll_id;
  std::string test_id;
  int label = -1;
};

// Trial file: "enroll_id test_id [target|nontarget]" per line.
std::vector<Trial> read_trials(const std::string& path);
// Score file: "enroll_id test_id score"; written at 6 decimal places.
TrialScores read_scores(const std::string& path);
void write_scores(const std::string& path, const TrialScores& scores);
// Cohort score file: "key cohort_id score", grouped by key in file order.
std::map<std::string, std::vector<double>> read_cohort_scores(
    const std::string& path);

// Copies labels from `trials` onto matching score entries; every score line
// must have a labeled trial.
void attach_labels(TrialScores& scores, const std::vector<Trial>& trials);

// Number of best-scoring cohort entries used per side:
// ceil(top_frac * cohort_size), computed with a small guard against
// floating-point overshoot.
std::size_t top_cohort_count(std::size_t cohort_size, double top_frac);

struct CohortStats {
  double mu1 = 0.0, sigma1 = 1.0;  // enroll side
  double mu2 = 0.0, sigma2 = 1.0;  // test side
  std::size_t n_best = 0;
};

// Mean and sample standard deviation of the top-fraction best scores of one
// cohort list (descending by score).
void top_cohort_mean_std(const std::vector<double>& scores, double top_frac,
                         double* mu, double* sigma, std::size_t* n_best);

// Adaptive symmetric score normalization:
//   S_hat = (S - mu1)/sigma1 + (S - mu2)/sigma2
// with (mu_k, sigma_k) from the top-fraction best scores of the trial's
// enroll-side and test-side cohort lists. cohort_subsample > 0 first
// subsamples each list to that many entries, seeded per key so results do
// not depend on trial order.
TrialScores asnorm(const TrialScores& raw,
                   const std::map<std::string, std::vector<double>>&
                       enroll_cohort_scores,
                   const std::map<std::string, std::vector<double>>&
                       test_cohort_scores,
                   double top_frac, std::size_t cohort_subsample,
                   std::uint64_t seed);

// Per-system z-standardization (sample std) then weighted sum. Weights
// default to 1 for every system; all systems must cover the same trials.
TrialScores fuse(const std::vector<TrialScores>& systems,
                 const std::vector<double>& weights = {});

// Operating points of "accept iff score >= threshold", one per distinct
// threshold, ascending: (P_fa, P_miss).
std::vector<std::pair<double, double>> det_points(const TrialScores& scores);

// Equal error rate with linear interpolation at the FAR/FRR crossing.
double compute_eer(const TrialScores& scores);

struct DcfParams {
  double p_target = 0.01;
  double c_miss = 1.0;
  double c_fa = 1.0;
};

// min over thresholds of c_miss*P_miss*p + c_fa*P_fa*(1-p), normalized by
// min(c_miss*p, c_fa*(1-p)).
double compute_min_dcf(const TrialScores& scores, const DcfParams& params);

}  // namespace sv::evalnorm

#endif  // SVKIT_EVALNORM_HPP_

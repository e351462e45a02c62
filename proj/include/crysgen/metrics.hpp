#pragma once

#include <string>
#include <vector>

#include "crysgen/crystal.hpp"

namespace crysgen {

// Structure-matcher thresholds (site, angle, fractional length).
struct MatchTolerances {
  double stol = 0.5;
  double angle_tol = 10.0;
  double ltol = 0.3;
};

struct MatchResult {
  bool matched = false;
  double rmse = std::numeric_limits<double>::quiet_NaN();
};

struct CoverageResult {
  double recall_pct = 0.0;
  double precision_pct = 0.0;
};

enum class EvalMode { Gen, Csp };

struct EvalThresholds {
  double fingerprint_threshold = 2.5;  // calibrated on the bundled desk corpus
  double validity_min_dist = 0.5;      // angstrom
};

struct MetricsReport {
  double structural_validity_pct = 0.0;
  double compositional_validity_pct = 0.0;
  double cov_recall_pct = 0.0;
  double cov_precision_pct = 0.0;
  double emd_density = 0.0;
  double emd_nelem = 0.0;
  double match_rate_pct = 0.0;
  double rmse_mean = std::numeric_limits<double>::quiet_NaN();  // NaN when no match
  double composition_match_pct = std::numeric_limits<double>::quiet_NaN();  // CSP only
  int n_generated = 0;
  int n_reference = 0;
  double fingerprint_threshold = 0.0;
};

// All periodic interatomic distances exceed `min_dist` (self images count for
// single-atom cells).
bool structural_validity(const Crystal& c, double min_dist = 0.5);

// True when some assignment of one common oxidation state per element species
// balances the total charge; single-species crystals pass via the neutral
// state.
bool compositional_validity(const Crystal& c);

// Normalized element-count histogram (whitelist width) concatenated with a
// 32-bin density-normalized radial distribution histogram up to 8 angstrom.
Eigen::VectorXd fingerprint(const Crystal& c);

// COV-R: share of `ref` with a generated fingerprint within the threshold;
// COV-P: share of `gen` near some reference. Throws EmptySet.
CoverageResult coverage(const std::vector<Eigen::VectorXd>& gen,
                        const std::vector<Eigen::VectorXd>& ref, double d_threshold);

// 1-Wasserstein distance between empirical samples. Throws EmptySet.
double emd_1d(std::vector<double> a, std::vector<double> b);

// Species-respecting periodic alignment: fast composition/cell screens, then
// bipartite assignment over a translation search. Matched when the largest
// site displacement, normalized by the mean cbrt(V/N), stays within stol.
MatchResult structure_match(const Crystal& a, const Crystal& b,
                            const MatchTolerances& tol = {});

// Share of index-paired entries whose reduced formulas agree. Throws
// LengthMismatch.
double composition_match_rate(const std::vector<Crystal>& gen,
                              const std::vector<Crystal>& targets);
double composition_match_rate(const std::vector<Crystal>& gen,
                              const std::vector<std::string>& target_formulas);

// Full evaluation. Gen mode matches every reference against the generated
// set; CSP mode pairs the files one-to-one (LengthMismatch on ragged input).
MetricsReport evaluate(const std::vector<Crystal>& gen, const std::vector<Crystal>& ref,
                       const MatchTolerances& tol = {}, const EvalThresholds& thresholds = {},
                       EvalMode mode = EvalMode::Gen, int jobs = 1);

// Aligned-column text rendering of a report.
std::string report_table(const MetricsReport& r);

// Minimum-cost assignment for a square cost matrix; returns column of each row.
std::vector<int> hungarian_assignment(const Eigen::MatrixXd& cost);

}  // namespace crysgen

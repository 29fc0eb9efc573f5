#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dmmmen/data.hpp"
#include "dmmmen/explain.hpp"
#include "dmmmen/target.hpp"

namespace dmmmen {

enum class ExperimentKind { nullify_positive, replace_negative, craft_cases, keep_top_k };

std::string experiment_kind_name(ExperimentKind kind);

/// Positive-classification-rate curves for the insight and random arms, with
/// percentile-bootstrap 95% intervals over replicates. `raw_*` holds the
/// per-replicate values backing each count so intervals can be recomputed.
struct EvalReport {
  std::vector<int> feature_counts;
  std::vector<double> pcr_insight, pcr_insight_lo, pcr_insight_hi;
  std::vector<double> pcr_random, pcr_random_lo, pcr_random_hi;
  std::vector<std::vector<double>> raw_insight, raw_random;  // per count
  int replicates = 0;
  ExperimentKind experiment = ExperimentKind::nullify_positive;
  std::uint64_t seed = 0;
  // keep-top-k extras
  double mean_probability = 0.0, probability_lo = 0.0, probability_hi = 0.0;
  std::string grid_spec;

  std::string to_json() const;
  void write_raw_csv(const std::string& path) const;
};
EvalReport eval_report_from_json(const std::string& json_text);

/// Summary statistics of replicate values: mean plus percentile 2.5/97.5
/// bounds (clamped to contain the mean).
void percentile_ci(const std::vector<double>& values, double& mean, double& lo,
                   double& hi);

/// Sets the listed feature columns to zero in the listed rows.
void nullify_features(Matrix& X, const std::vector<Eigen::Index>& rows,
                      const std::vector<int>& features);

/// Sets the listed feature columns to given per-feature values in the rows.
void fill_features(Matrix& X, const std::vector<Eigen::Index>& rows,
                   const std::vector<int>& features, const Vector& values);

/// Ranks all features by descending importance (ties to lower index).
std::vector<int> importance_ranking(const InsightMap& insights);

/// Bootstraps a fraction of cases per replicate, nullifies the top-count
/// features in model-positive cases and replaces the same features in
/// negative cases with their mean among the positive cases, then measures
/// the positive classification rate through the model. The random arm runs
/// identical machinery on uniformly drawn feature sets. `arm` selects which
/// perturbed pool the report's PCR tracks.
EvalReport nullify_experiment(const DatasetMatrix& data, const BlackBoxModel& model,
                              const InsightMap& insights,
                              const std::vector<int>& counts, int replicates,
                              double fraction, std::uint64_t seed,
                              ExperimentKind arm = ExperimentKind::nullify_positive);

enum class PositiveFill { positive_mean, max_value };

/// Crafts synthetic cases that register positive properties on the top-count
/// features (per-feature mean or max among model-positive training cases)
/// and draw the remaining features uniformly inside their observed ranges.
/// The random arm fills `count` uniformly chosen features instead. The
/// confidence intervals are a percentile bootstrap over per-case outcomes.
EvalReport craft_cases_experiment(const DatasetMatrix& data, const BlackBoxModel& model,
                                  const InsightMap& insights,
                                  const std::vector<int>& counts, int n_cases,
                                  PositiveFill positive_fill, std::uint64_t seed);

/// Exact-tiling grid segmentation of a width x height image.
struct GridSpec {
  int width = 0, height = 0;   // image size in pixels
  int patch_w = 0, patch_h = 0;

  int segments() const { return (width / patch_w) * (height / patch_h); }
  void validate(Eigen::Index p) const;
  /// Pixel indices of one segment.
  std::vector<int> segment_pixels(int segment) const;
  std::string describe() const;
};

/// Keeps each instance's k top-ranked segments intact, zeroes the rest, and
/// re-queries the model. Reports the fraction of instances retaining their
/// original predicted class (insight arm of the report) plus the mean
/// retained-class probability with bootstrap intervals.
EvalReport keep_topk_experiment(const DatasetMatrix& data, const BlackBoxModel& model,
                                const std::vector<Explanation>& rankings, int k,
                                const GridSpec& grid, std::uint64_t seed);

/// Aligns several reports over shared feature counts, flags counts whose
/// insight/random 95% intervals do not overlap, and writes JSON plus a
/// plaintext table (path + ".txt").
struct ComparisonResult {
  std::vector<int> feature_counts;
  std::vector<std::vector<bool>> flagged;  // per report, per count
};
ComparisonResult compare_report(const std::vector<EvalReport>& reports,
                                const std::string& path);

}  // namespace dmmmen

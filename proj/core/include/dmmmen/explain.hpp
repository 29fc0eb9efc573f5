#pragma once

#include <string>
#include <vector>

#include "dmmmen/relabel.hpp"

namespace dmmmen {

/// Global per-feature importance distilled from the dominant components.
struct InsightMap {
  std::string class_tag;
  Vector importance;            // length p, nonnegative
  std::vector<int> top_k;       // descending importance, ties to lower index
  Vector component_weights;     // posterior-mean pi
  std::string source;

  std::string to_json() const;
};
InsightMap insight_map_from_json(const std::string& json_text);

/// Surrogate explanation of a single prediction.
struct Explanation {
  Eigen::Index instance_index = 0;
  int assigned_component = 0;   // 0-based internally; serialized 1-based
  Vector coefficients;          // posterior-mean beta of the assigned component
  std::vector<int> top_segments;
  double responsibility = 0.0;

  std::string to_json() const;
};

/// Posterior means over a relabeled chain.
struct PosteriorSummary {
  Vector pi;      // J
  Matrix beta;    // J x p
  Vector sigma2;  // J
};
PosteriorSummary posterior_summary(const RelabeledChain& chain);

/// importance_l = sum over dominant components of pi_j |beta_jl|; components
/// enter when their posterior-mean weight reaches `dominance`.
InsightMap global_insights(const RelabeledChain& chain, int k,
                           double dominance = 0.05);

enum class ContributionRanking { beta_times_x, beta_only };

/// Assigns the instance to the component maximizing pi_j N(y | x b_j, s2_j)
/// and ranks features by contribution magnitude within that component.
Explanation explain_instance(const RelabeledChain& chain,
                             const Eigen::Ref<const Vector>& x, double y, int k,
                             ContributionRanking ranking =
                                 ContributionRanking::beta_times_x);

/// Responsibilities r_j over components for one instance (sums to 1).
Vector instance_responsibilities(const PosteriorSummary& summary,
                                 const Eigen::Ref<const Vector>& x, double y);

/// Mode-level assignment (blending several components per instance) is out
/// of scope; always throws NotImplementedError.
Explanation explain_instance_mode_level(const RelabeledChain& chain,
                                        const Eigen::Ref<const Vector>& x, double y,
                                        int k);

/// 8-bit binary PGM with importance min-max scaled to [0,255]; a constant
/// vector produces an all-zero image.
void emit_heatmap(const Vector& importance, int width, int height,
                  const std::string& path);

}  // namespace dmmmen

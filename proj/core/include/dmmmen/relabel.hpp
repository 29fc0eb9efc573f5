#pragma once

#include <vector>

#include "dmmmen/sampler.hpp"

namespace dmmmen {

/// A chain with component labels aligned across draws.
///
/// `permutations[t][j]` is the new index of draw t's original component j.
/// Stick fractions u are left untouched (the stick-breaking construction is
/// order-specific), so the pi/u consistency invariant holds only for
/// unrelabeled chains; every other component-indexed array is permuted.
struct RelabeledChain {
  PosteriorChain chain;
  std::vector<std::vector<int>> permutations;
  std::vector<int> reference_z;
  int iterations_run = 0;
};

/// Maximum-agreement assignment between a draw's components and a reference
/// allocation. `agreement(j, r)` counts observations with z = j and ref = r;
/// returns the permutation maximizing total agreement, ties broken by the
/// lexicographically smallest permutation.
std::vector<int> best_permutation(const Matrix& agreement);

/// Iterative allocation-matching relabeling: start from the highest
/// log-likelihood draw, alternate optimal per-draw assignment against the
/// reference with a majority-vote reference update, until the permutations
/// reach a fixed point (cap 100 iterations).
RelabeledChain relabel(const PosteriorChain& chain);

/// Applies a permutation to every component-indexed array of a draw.
MixtureState permute_state(const MixtureState& state, const std::vector<int>& perm);

}  // namespace dmmmen

#include "dmmmen/relabel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace dmmmen {

namespace {

/// O(n^3) Hungarian algorithm; returns the maximum total agreement
/// achievable on the given square matrix.
double assignment_max_value(const Matrix& score) {
  const int n = static_cast<int>(score.rows());
  const double big = score.maxCoeff() + 1.0;
  // Convert to min-cost.
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0),
      v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> p(static_cast<std::size_t>(n) + 1, 0),
      way(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n) + 1,
                             std::numeric_limits<double>::infinity());
    std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      double delta = std::numeric_limits<double>::infinity();
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = (big - score(i0 - 1, j - 1)) -
                           u[static_cast<std::size_t>(i0)] -
                           v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0);
  }
  double total = 0.0;
  for (int j = 1; j <= n; ++j)
    if (p[static_cast<std::size_t>(j)] > 0)
      total += score(p[static_cast<std::size_t>(j)] - 1, j - 1);
  return total;
}

}  // namespace

std::vector<int> best_permutation(const Matrix& agreement) {
  const int J = static_cast<int>(agreement.rows());
  if (agreement.cols() != J) throw DimensionError("agreement matrix must be square");
  if (J == 1) return {0};

  const double opt = assignment_max_value(agreement);
  // Lexicographically smallest optimal assignment: fix rows in order, always
  // trying the smallest unused column whose forced completion stays optimal.
  std::vector<int> perm(static_cast<std::size_t>(J), -1);
  std::vector<int> free_cols(static_cast<std::size_t>(J));
  std::iota(free_cols.begin(), free_cols.end(), 0);
  std::vector<int> free_rows(static_cast<std::size_t>(J));
  std::iota(free_rows.begin(), free_rows.end(), 0);
  double fixed_value = 0.0;
  const double tol = 1e-9;

  for (int row = 0; row < J; ++row) {
    free_rows.erase(free_rows.begin());
    for (std::size_t ci = 0; ci < free_cols.size(); ++ci) {
      const int col = free_cols[ci];
      double completion = 0.0;
      if (!free_rows.empty()) {
        Matrix sub(static_cast<Eigen::Index>(free_rows.size()),
                   static_cast<Eigen::Index>(free_rows.size()));
        for (std::size_t r = 0; r < free_rows.size(); ++r) {
          std::size_t cc = 0;
          for (std::size_t c = 0; c < free_cols.size(); ++c) {
            if (free_cols[c] == col) continue;
            sub(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(cc++)) =
                agreement(free_rows[r], free_cols[c]);
          }
        }
        completion = assignment_max_value(sub);
      }
      if (fixed_value + agreement(row, col) + completion >= opt - tol) {
        perm[static_cast<std::size_t>(row)] = col;
        fixed_value += agreement(row, col);
        free_cols.erase(free_cols.begin() + static_cast<std::ptrdiff_t>(ci));
        break;
      }
    }
    if (perm[static_cast<std::size_t>(row)] < 0)
      throw NumericalError("assignment completion failed");  // unreachable
  }
  return perm;
}

MixtureState permute_state(const MixtureState& state, const std::vector<int>& perm) {
  const Eigen::Index J = state.J();
  if (static_cast<Eigen::Index>(perm.size()) != J)
    throw DimensionError("permutation length must equal J");
  MixtureState out = state;
  for (Eigen::Index j = 0; j < J; ++j) {
    const auto nj = static_cast<Eigen::Index>(perm[static_cast<std::size_t>(j)]);
    out.beta.row(nj) = state.beta.row(j);
    out.tau.row(nj) = state.tau.row(j);
    out.sigma2[nj] = state.sigma2[j];
    out.pi[nj] = state.pi[j];
    out.c[nj] = state.c[j];
  }
  for (Eigen::Index i = 0; i < state.z.size(); ++i)
    out.z[i] = perm[static_cast<std::size_t>(state.z[i])];
  return out;
}

namespace {

Matrix agreement_matrix(const MixtureState& draw, const std::vector<int>& ref,
                        Eigen::Index J) {
  Matrix M = Matrix::Zero(J, J);
  for (Eigen::Index i = 0; i < draw.z.size(); ++i)
    M(draw.z[i], ref[static_cast<std::size_t>(i)]) += 1.0;
  return M;
}

}  // namespace

RelabeledChain relabel(const PosteriorChain& chain) {
  if (chain.draws.empty()) throw ValueError("relabel requires a nonempty chain");
  const Eigen::Index J = chain.draws.front().J();
  const Eigen::Index n = chain.draws.front().z.size();
  const std::size_t T = chain.draws.size();

  // Reference allocation from the highest log-likelihood draw.
  const std::size_t best =
      static_cast<std::size_t>(std::max_element(chain.loglik.begin(),
                                                chain.loglik.end()) -
                               chain.loglik.begin());
  std::vector<int> ref(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    ref[static_cast<std::size_t>(i)] = chain.draws[best].z[i];

  std::vector<std::vector<int>> perms(T);
  {
    std::vector<int> identity(static_cast<std::size_t>(J));
    std::iota(identity.begin(), identity.end(), 0);
    for (auto& p : perms) p = identity;
  }

  int iterations = 0;
  for (int iter = 1; iter <= 100; ++iter) {
    iterations = iter;
    bool changed = false;
    for (std::size_t t = 0; t < T; ++t) {
      const std::vector<int> p = best_permutation(agreement_matrix(chain.draws[t], ref, J));
      if (p != perms[t]) {
        perms[t] = p;
        changed = true;
      }
    }
    if (!changed) break;
    // Majority-vote reference from the relabeled allocations.
    std::vector<std::vector<int>> votes(static_cast<std::size_t>(n),
                                        std::vector<int>(static_cast<std::size_t>(J), 0));
    for (std::size_t t = 0; t < T; ++t)
      for (Eigen::Index i = 0; i < n; ++i)
        ++votes[static_cast<std::size_t>(i)]
               [static_cast<std::size_t>(perms[t][static_cast<std::size_t>(
                   chain.draws[t].z[i])])];
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& vi = votes[static_cast<std::size_t>(i)];
      ref[static_cast<std::size_t>(i)] = static_cast<int>(
          std::max_element(vi.begin(), vi.end()) - vi.begin());
    }
  }

  RelabeledChain out;
  out.chain = chain;
  for (std::size_t t = 0; t < T; ++t)
    out.chain.draws[t] = permute_state(chain.draws[t], perms[t]);
  out.permutations = std::move(perms);
  out.reference_z = std::move(ref);
  out.iterations_run = iterations;
  return out;
}

}  // namespace dmmmen

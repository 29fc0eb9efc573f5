#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "dmmmen/errors.hpp"

namespace dmmmen {

/// Counter-free xoshiro256++ generator with hash-derived substreams.
///
/// The whole generator state is four 64-bit words, so chains can be
/// checkpointed and resumed bit-exactly on any platform. Substreams are
/// derived by hashing (seed, stream) through splitmix64, which keeps
/// replicate- and chain-level draws independent of scheduling.
class Rng {
 public:
  using state_type = std::array<std::uint64_t, 4>;

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::uint64_t x = seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
    for (auto& w : s_) w = splitmix64(x);
    // All-zero state is the one invalid xoshiro state.
    if (s_[0] == 0 && s_[1] == 0 && s_[2] == 0 && s_[3] == 0) s_[0] = 1;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform draw strictly inside (0,1); safe under log().
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform draw on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    // Rejection-free bounded draw with negligible modulo bias for n << 2^64.
    return next_u64() % n;
  }

  /// Standard normal via Box-Muller (cosine branch only, no cached spare).
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

  /// Gamma(shape, rate) by Marsaglia-Tsang, with the shape<1 boost.
  double gamma(double shape, double rate) {
    if (!(shape > 0.0) || !(rate > 0.0))
      throw ValueError("gamma draw requires positive shape and rate");
    if (shape < 1.0) {
      const double g = gamma(shape + 1.0, 1.0);
      return g * std::pow(uniform(), 1.0 / shape) / rate;
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
    }
  }

  /// Inverse-gamma(shape, scale): 1/X with X ~ Gamma(shape, rate=scale).
  double inverse_gamma(double shape, double scale) {
    return 1.0 / gamma(shape, scale);
  }

  double beta(double a, double b) {
    const double x = gamma(a, 1.0);
    const double y = gamma(b, 1.0);
    const double s = x + y;
    if (s <= 0.0) return 0.5;  // both gammas underflowed; unreachable in practice
    return x / s;
  }

  double chi_squared(double dof) { return gamma(0.5 * dof, 0.5); }

  /// Inverse-Gaussian(mu, lambda) by the Michael-Schucany-Haas transform.
  double inverse_gaussian(double mu, double lambda) {
    if (!(mu > 0.0) || !(lambda > 0.0))
      throw ValueError("inverse_gaussian draw requires positive parameters");
    const double nu = normal();
    const double y = nu * nu;
    double x = mu + mu * mu * y / (2.0 * lambda) -
               mu / (2.0 * lambda) * std::sqrt(4.0 * mu * lambda * y + mu * mu * y * y);
    if (!(x > 0.0)) x = std::numeric_limits<double>::min();
    if (uniform() <= mu / (mu + x)) return x;
    return mu * mu / x;
  }

  /// Standard normal conditioned on X > a (a >= 0), Robert's method for deep tails.
  double truncated_normal_tail(double a) {
    if (a < 1.0) {
      for (;;) {
        const double x = normal();
        if (x > a) return x;
      }
    }
    const double alpha = 0.5 * (a + std::sqrt(a * a + 4.0));
    for (;;) {
      const double x = a + exponential(alpha);
      const double d = x - alpha;
      if (std::log(uniform()) <= -0.5 * d * d) return x;
    }
  }

  /// Inverse-gamma(1/2, eta) truncated to (0,1).
  ///
  /// Uses tau = eta / v with v ~ Gamma(1/2, 1) restricted to (eta, inf),
  /// realized as v = W^2/2 with |W| a normal tail draw beyond sqrt(2 eta).
  double truncated_inverse_gamma_01(double eta) {
    if (!(eta > 0.0)) throw ValueError("truncated_inverse_gamma_01 requires eta > 0");
    const double w = truncated_normal_tail(std::sqrt(2.0 * eta));
    const double v = 0.5 * w * w;
    double tau = eta / v;
    if (tau >= 1.0) tau = 1.0 - 1e-16;  // FP guard at the open boundary
    if (tau <= 0.0) tau = 1e-300;
    return tau;
  }

  /// Dirichlet draw on the simplex; alphas strictly positive.
  std::vector<double> dirichlet(const std::vector<double>& alphas) {
    std::vector<double> g(alphas.size());
    double total = 0.0;
    for (std::size_t k = 0; k < alphas.size(); ++k) {
      g[k] = gamma(alphas[k], 1.0);
      if (g[k] < 1e-300) g[k] = 1e-300;
      total += g[k];
    }
    for (auto& v : g) v /= total;
    return g;
  }

  /// Index draw from unnormalized log-weights (max-subtracted).
  int categorical_from_logs(const std::vector<double>& logw);

  const state_type& state() const { return s_; }
  void set_state(const state_type& s) { s_ = s; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  static std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  state_type s_{};
};

/// Normalized probabilities from unnormalized log-weights.
/// Throws NumericalError when every weight is -inf.
std::vector<double> responsibilities_from_logs(const std::vector<double>& logw);

inline int Rng::categorical_from_logs(const std::vector<double>& logw) {
  const std::vector<double> p = responsibilities_from_logs(logw);
  const double u = uniform();
  double acc = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    acc += p[k];
    if (u <= acc) return static_cast<int>(k);
  }
  return static_cast<int>(p.size()) - 1;
}

}  // namespace dmmmen

#pragma once

#include <cmath>
#include <vector>

namespace dmmmen {

inline constexpr double kLogTwoPi = 1.8378770664093454835606594728112;
inline constexpr double kLogPi = 1.1447298858494001741434273513531;
inline constexpr double kLogTwo = 0.6931471805599453094172321214582;

inline double sigmoid(double t) {
  if (t >= 0.0) {
    const double e = std::exp(-t);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

/// log(erfc(z)), stable for large positive z where erfc underflows.
inline double log_erfc(double z) {
  if (z < 15.0) return std::log(std::erfc(z));
  // Asymptotic series: erfc(z) = exp(-z^2)/(z sqrt(pi)) (1 - 1/(2z^2) + 3/(4z^4) - 15/(8z^6))
  const double z2 = z * z;
  const double series = 1.0 - 0.5 / z2 + 0.75 / (z2 * z2) - 1.875 / (z2 * z2 * z2);
  return -z2 - std::log(z) - 0.5 * kLogPi + std::log(series);
}

/// log Phi(x) for the standard normal CDF, stable in both tails.
inline double log_norm_cdf(double x) {
  return -kLogTwo + log_erfc(-x / 1.4142135623730950488016887242097);
}

inline double log_normal_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (kLogTwoPi + std::log(var)) - 0.5 * d * d / var;
}

/// Gamma(shape, rate) log-density.
inline double log_gamma_pdf(double x, double shape, double rate) {
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) -
         rate * x;
}

/// Inverse-Gamma(shape, scale) log-density.
inline double log_inverse_gamma_pdf(double x, double shape, double scale) {
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) -
         scale / x;
}

inline double log_beta_pdf(double u, double a, double b) {
  return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
         (a - 1.0) * std::log(u) + (b - 1.0) * std::log1p(-u);
}

/// Symmetric Dirichlet(alpha,...,alpha) log-density on a K-simplex.
inline double log_dirichlet_pdf(const std::vector<double>& w, double alpha) {
  const double K = static_cast<double>(w.size());
  double lp = std::lgamma(alpha * K) - K * std::lgamma(alpha);
  for (double v : w) lp += (alpha - 1.0) * std::log(v);
  return lp;
}

/// Normalizer of Inv-Gamma(1/2, eta) truncated to (0,1):
/// integral_0^1 t^{-3/2} exp(-eta/t) dt = eta^{-1/2} sqrt(pi) erfc(sqrt(eta)).
inline double log_trunc_invgamma_normalizer(double eta) {
  return -0.5 * std::log(eta) + 0.5 * kLogPi + log_erfc(std::sqrt(eta));
}

/// Inv-Gamma(1/2, eta) truncated to (0,1), normalized log-density.
inline double log_trunc_invgamma_01_pdf(double tau, double eta) {
  return -log_trunc_invgamma_normalizer(eta) - 1.5 * std::log(tau) - eta / tau;
}

}  // namespace dmmmen

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dmmmen/data.hpp"
#include "dmmmen/errors.hpp"

namespace dmmmen {

/// Priors and run lengths for the truncated mixture with multiple
/// elastic-net regimes.
///
/// Component weights follow a truncated stick-breaking construction with
/// concentration alpha ~ Gamma(e, f); per-component variances follow
/// Inv-Gamma(a, b); regularization strengths follow lambda1 ~ Gamma(R, V/2)
/// and lambda2 ~ Gamma(L, V/2) per regime; regime weights follow a symmetric
/// Dirichlet with mass 1/K. All gamma distributions use shape/rate.
struct Hyperparameters {
  int J = 20;  // truncation level (mixture components)
  int K = 3;   // number of elastic-net regimes
  double a = 1.0, b = 1.0;
  double e = 1.0, f = 1.0;
  double R = 1.0, L = 1.0, V = 2.0;
  int burn_in = 2000;
  int n_samples = 2000;
  int thin = 2;
  std::uint64_t seed = 0;

  double dirichlet_mass() const { return 1.0 / static_cast<double>(K); }
  void validate() const;
};

/// Parses a JSON object with any subset of the hyperparameter fields;
/// unknown keys are rejected.
Hyperparameters hyperparameters_from_json(const std::string& json_text);
Hyperparameters hyperparameters_from_json_file(const std::string& path);
std::string hyperparameters_to_json(const Hyperparameters& hp);

/// One full draw of all latent variables and parameters.
struct MixtureState {
  Vector u;        // J-1 stick fractions in (0,1)
  Vector pi;       // J component weights (simplex)
  double alpha = 1.0;
  Matrix beta;     // J x p regression coefficients
  Vector sigma2;   // J component noise variances
  Eigen::VectorXi z;  // n component indicators in [0, J)
  std::vector<double> w;   // K regime weights (simplex)
  Eigen::VectorXi c;       // J regime indicators in [0, K)
  std::vector<double> lambda1, lambda2;  // K lasso / ridge strengths
  Matrix tau;      // J x p latent scales in (0,1)

  Eigen::Index J() const { return beta.rows(); }
  Eigen::Index p() const { return beta.cols(); }
  Eigen::Index K() const { return static_cast<Eigen::Index>(w.size()); }
};

/// Throws when any MixtureState invariant is violated (simplex sums,
/// open-interval supports, strict positivity, index ranges).
void validate_state(const MixtureState& state);

/// Lasso/ridge strength pair of one elastic-net regime.
struct OrthantNetPrior {
  double lambda1 = 1.0;
  double lambda2 = 1.0;
};

/// log N(y | x.beta, sigma2).
double loglik_point(const Eigen::Ref<const Vector>& x, double y,
                    const Eigen::Ref<const Vector>& beta_j, double sigma2_j);

/// Weights from stick fractions: pi_1 = u_1, pi_j = u_j prod_{l<j}(1-u_l),
/// last entry by subtraction.
Vector stick_breaking(const Vector& u);

/// Normalized log-density of the orthant-Gaussian elastic-net prior.
///
/// Per coordinate this is an equal mixture of two truncated normals with
/// means -+ lambda1/(2 lambda2) and variance sigma2/lambda2, which makes the
/// whole density proportional to exp(-(lambda1 |b|_1 + lambda2 |b|^2) / (2 sigma2)).
/// Coordinates at exactly zero take the positive orthant. lambda1 = 0 is
/// admitted and reduces to an exact ridge Gaussian.
double orthant_logdensity(const Eigen::Ref<const Vector>& beta_j,
                          const OrthantNetPrior& prior, double sigma2_j);

/// Conditional coefficient prior given latent scales:
/// log N(beta_j | 0, (sigma2/lambda2) diag(1 - tau_jl)).
double scale_mixture_beta_logpdf(const Eigen::Ref<const Vector>& beta_j,
                                 const Eigen::Ref<const Vector>& tau_j,
                                 double sigma2_j, double lambda2);

/// Latent-scale prior: product of Inv-Gamma(1/2, eta) truncated to (0,1)
/// with eta = lambda1^2 / (8 lambda2 sigma2).
double scale_mixture_tau_logpdf(const Eigen::Ref<const Vector>& tau_j,
                                double sigma2_j, double lambda1, double lambda2);

inline double scale_mixture_eta(double sigma2_j, double lambda1, double lambda2) {
  const double r = lambda1 / (2.0 * std::sqrt(sigma2_j * lambda2));
  return 0.5 * r * r;
}

/// Observed-data mixture log-likelihood sum_i log sum_j pi_j N(y_i | x_i b_j, s2_j).
double mixture_loglik(const MixtureState& state, const DatasetMatrix& data);

/// Log-density of (state, data) under the full hierarchical model. With
/// `flat_prior` the coefficient block (c, w, lambda, tau and the beta prior)
/// is excluded, matching the ablation chain.
double joint_logdensity(const MixtureState& state, const DatasetMatrix& data,
                        const Hyperparameters& hp, bool flat_prior = false);

}  // namespace dmmmen

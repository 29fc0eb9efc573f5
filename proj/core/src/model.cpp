#include "dmmmen/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "dmmmen/mathutil.hpp"

namespace dmmmen {

void Hyperparameters::validate() const {
  if (J < 1) throw InvalidConfig("J must be >= 1");
  if (K < 1) throw InvalidConfig("K must be >= 1");
  for (double v : {a, b, e, f, R, L, V})
    if (!(v > 0.0)) throw InvalidConfig("scale/shape hyperparameters must be positive");
  if (burn_in < 0) throw InvalidConfig("burn_in must be >= 0");
  if (n_samples < 1) throw InvalidConfig("n_samples must be >= 1");
  if (thin < 1) throw InvalidConfig("thin must be >= 1");
}

Hyperparameters hyperparameters_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("config root must be a JSON object");
  Hyperparameters hp;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "J") hp.J = value.get<int>();
      else if (key == "K") hp.K = value.get<int>();
      else if (key == "a") hp.a = value.get<double>();
      else if (key == "b") hp.b = value.get<double>();
      else if (key == "e") hp.e = value.get<double>();
      else if (key == "f") hp.f = value.get<double>();
      else if (key == "R") hp.R = value.get<double>();
      else if (key == "L") hp.L = value.get<double>();
      else if (key == "V") hp.V = value.get<double>();
      else if (key == "burn_in") hp.burn_in = value.get<int>();
      else if (key == "n_samples") hp.n_samples = value.get<int>();
      else if (key == "thin") hp.thin = value.get<int>();
      else if (key == "seed") hp.seed = value.get<std::uint64_t>();
      else throw SchemaError("unknown config key: " + key);
    } catch (const nlohmann::json::type_error&) {
      throw SchemaError("config key '" + key + "' has the wrong type");
    }
  }
  hp.validate();
  return hp;
}

Hyperparameters hyperparameters_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return hyperparameters_from_json(ss.str());
}

std::string hyperparameters_to_json(const Hyperparameters& hp) {
  nlohmann::json j{{"J", hp.J},        {"K", hp.K},
                   {"a", hp.a},        {"b", hp.b},
                   {"e", hp.e},        {"f", hp.f},
                   {"R", hp.R},        {"L", hp.L},
                   {"V", hp.V},        {"burn_in", hp.burn_in},
                   {"n_samples", hp.n_samples}, {"thin", hp.thin},
                   {"seed", hp.seed}};
  return j.dump();
}

void validate_state(const MixtureState& state) {
  const Eigen::Index J = state.J();
  const Eigen::Index p = state.p();
  const Eigen::Index K = state.K();
  if (state.u.size() != J - 1) throw DimensionError("u must have length J-1");
  if (state.pi.size() != J) throw DimensionError("pi must have length J");
  if (state.sigma2.size() != J) throw DimensionError("sigma2 must have length J");
  if (state.c.size() != J) throw DimensionError("c must have length J");
  if (state.tau.rows() != J || state.tau.cols() != p)
    throw DimensionError("tau must be J x p");
  if (static_cast<Eigen::Index>(state.lambda1.size()) != K ||
      static_cast<Eigen::Index>(state.lambda2.size()) != K)
    throw DimensionError("lambda vectors must have length K");

  for (Eigen::Index l = 0; l < state.u.size(); ++l)
    if (!(state.u[l] > 0.0 && state.u[l] < 1.0))
      throw ValueError("stick fraction outside (0,1)");
  if ((state.pi.array() < 0.0).any()) throw ValueError("negative mixture weight");
  if (std::abs(state.pi.sum() - 1.0) > 1e-10)
    throw ValueError("pi does not sum to 1 within 1e-10");
  // pi must agree with its stick-breaking construction.
  const Vector pi_check = stick_breaking(state.u);
  if ((state.pi - pi_check).cwiseAbs().maxCoeff() > 1e-10)
    throw ValueError("pi inconsistent with stick fractions");

  double wsum = 0.0;
  for (double v : state.w) {
    if (v < 0.0) throw ValueError("negative regime weight");
    wsum += v;
  }
  if (std::abs(wsum - 1.0) > 1e-10) throw ValueError("w does not sum to 1 within 1e-10");

  if (!(state.alpha > 0.0)) throw ValueError("alpha must be positive");
  for (Eigen::Index j = 0; j < J; ++j) {
    if (!(state.sigma2[j] > 0.0)) throw ValueError("sigma2 must be positive");
    if (state.c[j] < 0 || state.c[j] >= K) throw ValueError("regime indicator out of range");
    for (Eigen::Index l = 0; l < p; ++l)
      if (!(state.tau(j, l) > 0.0 && state.tau(j, l) < 1.0))
        throw ValueError("tau entry outside (0,1)");
  }
  for (Eigen::Index k = 0; k < K; ++k)
    if (!(state.lambda1[static_cast<std::size_t>(k)] > 0.0) ||
        !(state.lambda2[static_cast<std::size_t>(k)] > 0.0))
      throw ValueError("lambda values must be positive");
  for (Eigen::Index i = 0; i < state.z.size(); ++i)
    if (state.z[i] < 0 || state.z[i] >= J)
      throw ValueError("component indicator out of range");
  if (!state.beta.allFinite()) throw ValueError("beta contains non-finite values");
}

double loglik_point(const Eigen::Ref<const Vector>& x, double y,
                    const Eigen::Ref<const Vector>& beta_j, double sigma2_j) {
  if (!(sigma2_j > 0.0)) throw ValueError("sigma2 must be positive");
  if (x.size() != beta_j.size()) throw DimensionError("x and beta size mismatch");
  return log_normal_pdf(y, x.dot(beta_j), sigma2_j);
}

Vector stick_breaking(const Vector& u) {
  const Eigen::Index J = u.size() + 1;
  Vector pi(J);
  double acc = 0.0;   // sum of assigned weights
  double prod = 1.0;  // prod_{l<j} (1-u_l)
  for (Eigen::Index j = 0; j + 1 < J; ++j) {
    if (!(u[j] > 0.0 && u[j] < 1.0)) throw ValueError("stick fraction outside (0,1)");
    pi[j] = u[j] * prod;
    acc += pi[j];
    prod *= 1.0 - u[j];
  }
  pi[J - 1] = std::max(0.0, 1.0 - acc);
  return pi;
}

double orthant_logdensity(const Eigen::Ref<const Vector>& beta_j,
                          const OrthantNetPrior& prior, double sigma2_j) {
  const double l1 = prior.lambda1;
  const double l2 = prior.lambda2;
  if (l1 < 0.0 || !(l2 > 0.0) || !(sigma2_j > 0.0))
    throw ValueError("orthant prior requires lambda1 >= 0, lambda2 > 0, sigma2 > 0");
  if (!beta_j.allFinite()) throw ValueError("beta contains non-finite values");
  const auto p = static_cast<double>(beta_j.size());
  const double sigma = std::sqrt(sigma2_j);
  const double var = sigma2_j / l2;
  const double mean_mag = l1 / (2.0 * l2);
  const double log_phi = log_norm_cdf(-l1 / (2.0 * sigma * std::sqrt(l2)));
  double lp = -p * kLogTwo - p * log_phi;
  for (Eigen::Index l = 0; l < beta_j.size(); ++l) {
    const double sign = beta_j[l] < 0.0 ? -1.0 : 1.0;  // sign(0) = +1
    lp += log_normal_pdf(beta_j[l], -mean_mag * sign, var);
  }
  return lp;
}

double scale_mixture_beta_logpdf(const Eigen::Ref<const Vector>& beta_j,
                                 const Eigen::Ref<const Vector>& tau_j,
                                 double sigma2_j, double lambda2) {
  if (!(sigma2_j > 0.0) || !(lambda2 > 0.0))
    throw ValueError("scale_mixture_beta_logpdf requires positive sigma2 and lambda2");
  if (beta_j.size() != tau_j.size()) throw DimensionError("beta/tau size mismatch");
  double lp = 0.0;
  for (Eigen::Index l = 0; l < beta_j.size(); ++l)
    lp += log_normal_pdf(beta_j[l], 0.0, sigma2_j * (1.0 - tau_j[l]) / lambda2);
  return lp;
}

double scale_mixture_tau_logpdf(const Eigen::Ref<const Vector>& tau_j,
                                double sigma2_j, double lambda1, double lambda2) {
  if (!(lambda1 > 0.0)) throw ValueError("scale mixture requires lambda1 > 0");
  const double eta = scale_mixture_eta(sigma2_j, lambda1, lambda2);
  double lp = 0.0;
  for (Eigen::Index l = 0; l < tau_j.size(); ++l)
    lp += log_trunc_invgamma_01_pdf(tau_j[l], eta);
  return lp;
}

double mixture_loglik(const MixtureState& state, const DatasetMatrix& data) {
  const Eigen::Index J = state.J();
  const Matrix fits = data.X * state.beta.transpose();  // n x J
  Vector logpi(J), logvar(J);
  for (Eigen::Index j = 0; j < J; ++j) {
    logpi[j] = state.pi[j] > 0.0 ? std::log(state.pi[j])
                                 : -std::numeric_limits<double>::infinity();
    logvar[j] = std::log(state.sigma2[j]);
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    double best = -std::numeric_limits<double>::infinity();
    Vector lp(J);
    for (Eigen::Index j = 0; j < J; ++j) {
      const double d = data.y[i] - fits(i, j);
      lp[j] = logpi[j] - 0.5 * (kLogTwoPi + logvar[j]) - 0.5 * d * d / state.sigma2[j];
      best = std::max(best, lp[j]);
    }
    double s = 0.0;
    for (Eigen::Index j = 0; j < J; ++j) s += std::exp(lp[j] - best);
    total += best + std::log(s);
  }
  return total;
}

double joint_logdensity(const MixtureState& state, const DatasetMatrix& data,
                        const Hyperparameters& hp, bool flat_prior) {
  const Eigen::Index J = state.J();
  double lp = 0.0;

  // Likelihood with indicators: sum_i log pi_{z_i} + log N(y_i | x_i b_{z_i}, s2).
  const Matrix fits = data.X * state.beta.transpose();
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const int j = state.z[i];
    if (!(state.pi[j] > 0.0)) return -std::numeric_limits<double>::infinity();
    lp += std::log(state.pi[j]) +
          log_normal_pdf(data.y[i], fits(i, j), state.sigma2[j]);
  }

  // Stick fractions and concentration.
  for (Eigen::Index l = 0; l < state.u.size(); ++l)
    lp += log_beta_pdf(state.u[l], 1.0, state.alpha);
  lp += log_gamma_pdf(state.alpha, hp.e, hp.f);

  // Component variances.
  for (Eigen::Index j = 0; j < J; ++j)
    lp += log_inverse_gamma_pdf(state.sigma2[j], hp.a, hp.b);

  if (!flat_prior) {
    // Coefficients, latent scales, regime indicators and strengths.
    for (Eigen::Index j = 0; j < J; ++j) {
      const auto k = static_cast<std::size_t>(state.c[j]);
      lp += scale_mixture_beta_logpdf(state.beta.row(j), state.tau.row(j),
                                      state.sigma2[j], state.lambda2[k]);
      lp += scale_mixture_tau_logpdf(state.tau.row(j), state.sigma2[j],
                                     state.lambda1[k], state.lambda2[k]);
      if (!(state.w[k] > 0.0)) return -std::numeric_limits<double>::infinity();
      lp += std::log(state.w[k]);
    }
    lp += log_dirichlet_pdf(state.w, hp.dirichlet_mass());
    for (std::size_t k = 0; k < state.w.size(); ++k) {
      lp += log_gamma_pdf(state.lambda1[k], hp.R, hp.V / 2.0);
      lp += log_gamma_pdf(state.lambda2[k], hp.L, hp.V / 2.0);
    }
  }
  return lp;
}

}  // namespace dmmmen

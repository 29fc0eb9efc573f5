#include "dmmmen/sampler.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include "dmmmen/io.hpp"
#include "dmmmen/mathutil.hpp"

namespace dmmmen {

namespace {

std::vector<int> component_counts(const MixtureState& state) {
  std::vector<int> n_j(static_cast<std::size_t>(state.J()), 0);
  for (Eigen::Index i = 0; i < state.z.size(); ++i)
    ++n_j[static_cast<std::size_t>(state.z[i])];
  return n_j;
}

std::vector<std::vector<Eigen::Index>> component_members(const MixtureState& state) {
  std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(state.J()));
  for (Eigen::Index i = 0; i < state.z.size(); ++i)
    members[static_cast<std::size_t>(state.z[i])].push_back(i);
  return members;
}

/// SPD solve with diagonal jitter escalation 1e-10 .. 1e-6.
Eigen::LLT<Matrix> robust_llt(Matrix A) {
  Eigen::LLT<Matrix> llt(A);
  double jitter = 1e-10;
  while (llt.info() != Eigen::Success && jitter <= 1e-6 + 1e-18) {
    Matrix Aj = A + jitter * Matrix::Identity(A.rows(), A.cols());
    llt.compute(Aj);
    jitter *= 10.0;
  }
  if (llt.info() != Eigen::Success)
    throw LinearAlgebraError("coefficient precision matrix not positive definite");
  return llt;
}

}  // namespace

std::vector<double> z_logprobs(const MixtureState& state, const DatasetMatrix& data,
                               Eigen::Index i) {
  const Eigen::Index J = state.J();
  std::vector<double> lp(static_cast<std::size_t>(J));
  const Vector fit = state.beta * data.X.row(i).transpose();
  for (Eigen::Index j = 0; j < J; ++j) {
    const double pj = state.pi[j];
    lp[static_cast<std::size_t>(j)] =
        (pj > 0.0 ? std::log(pj) : -std::numeric_limits<double>::infinity()) +
        log_normal_pdf(data.y[i], fit[j], state.sigma2[j]);
  }
  return lp;
}

void sample_z(MixtureState& state, const DatasetMatrix& data, Rng& rng) {
  const Eigen::Index J = state.J();
  const Matrix fits = data.X * state.beta.transpose();  // n x J
  Vector logpi(J), logs2(J);
  for (Eigen::Index j = 0; j < J; ++j) {
    logpi[j] = state.pi[j] > 0.0 ? std::log(state.pi[j])
                                 : -std::numeric_limits<double>::infinity();
    logs2[j] = std::log(state.sigma2[j]);
  }
  std::vector<double> lp(static_cast<std::size_t>(J));
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    for (Eigen::Index j = 0; j < J; ++j) {
      const double d = data.y[i] - fits(i, j);
      lp[static_cast<std::size_t>(j)] =
          logpi[j] - 0.5 * (kLogTwoPi + logs2[j]) - 0.5 * d * d / state.sigma2[j];
    }
    try {
      state.z[i] = rng.categorical_from_logs(lp);
    } catch (const NumericalError&) {
      throw NumericalError("all component log-probabilities are -inf for row " +
                           std::to_string(i));
    }
  }
}

void sticks_beta_params(const MixtureState& state, Eigen::Index j, double& shape1,
                        double& shape2) {
  const auto n_j = component_counts(state);
  shape1 = 1.0 + n_j[static_cast<std::size_t>(j)];
  double tail = 0.0;
  for (Eigen::Index l = j + 1; l < state.J(); ++l)
    tail += n_j[static_cast<std::size_t>(l)];
  shape2 = state.alpha + tail;
}

void alpha_gamma_params(const MixtureState& state, const Hyperparameters& hp,
                        double& shape, double& rate) {
  shape = hp.e + static_cast<double>(state.J() - 1);
  double s = 0.0;
  for (Eigen::Index l = 0; l < state.u.size(); ++l) s += std::log1p(-state.u[l]);
  rate = hp.f - s;
}

void sample_sticks_alpha(MixtureState& state, const Hyperparameters& hp, Rng& rng) {
  const Eigen::Index J = state.J();
  const auto n_j = component_counts(state);
  std::vector<double> tail(static_cast<std::size_t>(J) + 1, 0.0);
  for (Eigen::Index j = J - 1; j >= 0; --j)
    tail[static_cast<std::size_t>(j)] =
        tail[static_cast<std::size_t>(j) + 1] + n_j[static_cast<std::size_t>(j)];
  for (Eigen::Index j = 0; j + 1 < J; ++j) {
    double u = rng.beta(1.0 + n_j[static_cast<std::size_t>(j)],
                        state.alpha + tail[static_cast<std::size_t>(j) + 1]);
    u = std::min(std::max(u, 1e-12), 1.0 - 1e-12);
    state.u[j] = u;
  }
  state.pi = stick_breaking(state.u);
  double shape, rate;
  alpha_gamma_params(state, hp, shape, rate);
  state.alpha = rng.gamma(shape, rate);
}

std::vector<double> c_logprobs(const MixtureState& state, Eigen::Index j) {
  const Eigen::Index K = state.K();
  std::vector<double> lp(static_cast<std::size_t>(K));
  for (Eigen::Index k = 0; k < K; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    const double wk = state.w[ks];
    lp[ks] = (wk > 0.0 ? std::log(wk) : -std::numeric_limits<double>::infinity()) +
             orthant_logdensity(state.beta.row(j),
                                OrthantNetPrior{state.lambda1[ks], state.lambda2[ks]},
                                state.sigma2[j]);
  }
  return lp;
}

void sample_c(MixtureState& state, Rng& rng) {
  for (Eigen::Index j = 0; j < state.J(); ++j) {
    try {
      state.c[j] = rng.categorical_from_logs(c_logprobs(state, j));
    } catch (const NumericalError&) {
      throw NumericalError("all regime log-probabilities are -inf for component " +
                           std::to_string(j));
    }
  }
}

std::vector<double> w_dirichlet_params(const MixtureState& state,
                                       const Hyperparameters& hp) {
  std::vector<double> alphas(static_cast<std::size_t>(state.K()),
                             hp.dirichlet_mass());
  for (Eigen::Index j = 0; j < state.J(); ++j)
    alphas[static_cast<std::size_t>(state.c[j])] += 1.0;
  return alphas;
}

void sample_w(MixtureState& state, const Hyperparameters& hp, Rng& rng) {
  state.w = rng.dirichlet(w_dirichlet_params(state, hp));
}

double sample_tau_one(double beta_jl, double sigma2_j, double lambda1, double lambda2,
                      Rng& rng) {
  if (!(lambda1 > 0.0) || !(lambda2 > 0.0) || !(sigma2_j > 0.0))
    throw ValueError("sample_tau_one requires positive lambda1, lambda2, sigma2");
  const double eta = scale_mixture_eta(sigma2_j, lambda1, lambda2);
  const double q = lambda2 * beta_jl * beta_jl / (2.0 * sigma2_j);
  double tau;
  if (q > 0.0) {
    // x = tau/(1-tau) ~ GIG(-1/2, 2q, 2eta) = Inverse-Gaussian(sqrt(eta/q), 2eta).
    const double x = rng.inverse_gaussian(std::sqrt(eta / q), 2.0 * eta);
    tau = x / (1.0 + x);
  } else {
    // beta = 0: x ~ Inv-Gamma(1/2, eta), tau = x/(1+x).
    const double x = eta / rng.gamma(0.5, 1.0);
    tau = x / (1.0 + x);
  }
  if (!(tau > 0.0)) tau = 1e-300;
  if (!(tau < 1.0)) tau = 1.0 - 1e-16;
  return tau;
}

void sample_tau(MixtureState& state, Rng& rng) {
  for (Eigen::Index j = 0; j < state.J(); ++j) {
    const auto k = static_cast<std::size_t>(state.c[j]);
    for (Eigen::Index l = 0; l < state.p(); ++l)
      state.tau(j, l) = sample_tau_one(state.beta(j, l), state.sigma2[j],
                                       state.lambda1[k], state.lambda2[k], rng);
  }
}

namespace {

/// Log target of (lambda1_k, lambda2_k) given regime members, in lambda space.
double lambda_pair_logtarget(const MixtureState& state, const Hyperparameters& hp,
                             Eigen::Index k, double l1, double l2) {
  double lp = log_gamma_pdf(l1, hp.R, hp.V / 2.0) + log_gamma_pdf(l2, hp.L, hp.V / 2.0);
  for (Eigen::Index j = 0; j < state.J(); ++j) {
    if (state.c[j] != static_cast<int>(k)) continue;
    lp += scale_mixture_beta_logpdf(state.beta.row(j), state.tau.row(j),
                                    state.sigma2[j], l2);
    lp += scale_mixture_tau_logpdf(state.tau.row(j), state.sigma2[j], l1, l2);
  }
  return lp;
}

}  // namespace

void sample_lambdas(MixtureState& state, const Hyperparameters& hp, Rng& rng,
                    StepAdaptation& adapt, bool adapting,
                    std::vector<AcceptCounter>* counters) {
  for (Eigen::Index k = 0; k < state.K(); ++k) {
    const auto ks = static_cast<std::size_t>(k);
    const double l1 = state.lambda1[ks];
    const double l2 = state.lambda2[ks];
    const double step = adapt.lambda_log_step[ks];
    const double p1 = std::exp(std::log(l1) + step * rng.normal());
    const double p2 = std::exp(std::log(l2) + step * rng.normal());
    // Log-scale walk: Jacobian contributes log(l1') + log(l2') - log(l1) - log(l2).
    const double log_ratio = lambda_pair_logtarget(state, hp, k, p1, p2) -
                             lambda_pair_logtarget(state, hp, k, l1, l2) +
                             std::log(p1) + std::log(p2) - std::log(l1) - std::log(l2);
    const bool accept = std::isfinite(log_ratio) && std::log(rng.uniform()) < log_ratio;
    if (accept) {
      state.lambda1[ks] = p1;
      state.lambda2[ks] = p2;
    }
    if (counters) {
      ++(*counters)[ks].proposed;
      if (accept) ++(*counters)[ks].accepted;
    }
    if (adapting) adapt.nudge(adapt.lambda_log_step[ks], accept ? 1.0 : 0.0);
  }
}

void sample_beta(MixtureState& state, const DatasetMatrix& data, Rng& rng,
                 bool flat_prior) {
  const Eigen::Index p = state.p();
  const auto members = component_members(state);
  for (Eigen::Index j = 0; j < state.J(); ++j) {
    const auto& rows = members[static_cast<std::size_t>(j)];
    const double s2 = state.sigma2[j];
    const auto k = static_cast<std::size_t>(state.c[j]);
    if (rows.empty()) {
      if (flat_prior) {
        // No conditional exists under the improper flat prior; draw from a
        // wide proper surrogate so empty components stay out of the way.
        for (Eigen::Index l = 0; l < p; ++l) state.beta(j, l) = rng.normal(0.0, 10.0);
      } else {
        const double l2 = state.lambda2[k];
        for (Eigen::Index l = 0; l < p; ++l)
          state.beta(j, l) =
              rng.normal(0.0, std::sqrt(s2 * (1.0 - state.tau(j, l)) / l2));
      }
      continue;
    }
    Matrix Xj(static_cast<Eigen::Index>(rows.size()), p);
    Vector yj(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      Xj.row(static_cast<Eigen::Index>(r)) = data.X.row(rows[r]);
      yj[static_cast<Eigen::Index>(r)] = data.y[rows[r]];
    }
    Matrix A = Xj.transpose() * Xj;
    if (!flat_prior) {
      const double l2 = state.lambda2[k];
      for (Eigen::Index l = 0; l < p; ++l) A(l, l) += l2 / (1.0 - state.tau(j, l));
    }
    const Eigen::LLT<Matrix> llt = robust_llt(std::move(A));
    const Vector mean = llt.solve(Xj.transpose() * yj);
    Vector zeta(p);
    for (Eigen::Index l = 0; l < p; ++l) zeta[l] = rng.normal();
    // beta = mean + sigma L^{-T} zeta gives covariance sigma2 A^{-1}.
    const Vector noise =
        llt.matrixU().solve(zeta);
    state.beta.row(j) = (mean + std::sqrt(s2) * noise).transpose();
  }
}

void sigma2_invgamma_params(const MixtureState& state, const DatasetMatrix& data,
                            Eigen::Index j, bool flat_prior, double& shape,
                            double& rate) {
  // Conjugate part of the conditional; under the elastic-net prior the full
  // conditional additionally carries Z(eta(sigma2))^{-p} from the truncated
  // latent-scale normalizer.
  const auto p = static_cast<double>(state.p());
  double rss = 0.0;
  int n_j = 0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (state.z[i] != static_cast<int>(j)) continue;
    const double d = data.y[i] - data.X.row(i).dot(state.beta.row(j));
    rss += d * d;
    ++n_j;
  }
  shape = 0.0;
  rate = 0.0;
  if (flat_prior) {
    shape = n_j / 2.0;
    rate = rss / 2.0;
    return;
  }
  const auto k = static_cast<std::size_t>(state.c[j]);
  const double l1 = state.lambda1[k];
  const double l2 = state.lambda2[k];
  double quad = 0.0, inv_tau_sum = 0.0;
  for (Eigen::Index l = 0; l < state.p(); ++l) {
    quad += state.beta(j, l) * state.beta(j, l) / (1.0 - state.tau(j, l));
    inv_tau_sum += 1.0 / state.tau(j, l);
  }
  shape = n_j / 2.0 + p / 2.0;
  rate = rss / 2.0 + 0.5 * l2 * quad + l1 * l1 * inv_tau_sum / (8.0 * l2);
}

namespace {

double sigma2_logtarget(double s2, double prior_a, double prior_b, double shape_add,
                        double rate_add, double p, double l1, double l2) {
  // Inverse-gamma kernel in sigma2 plus the truncation normalizer correction.
  double lp = -(prior_a + shape_add + 1.0) * std::log(s2) - (prior_b + rate_add) / s2;
  if (l1 > 0.0) {
    const double eta = scale_mixture_eta(s2, l1, l2);
    lp -= p * log_trunc_invgamma_normalizer(eta);
  }
  return lp;
}

}  // namespace

void sample_sigma2(MixtureState& state, const DatasetMatrix& data,
                   const Hyperparameters& hp, Rng& rng, StepAdaptation& adapt,
                   bool adapting, bool flat_prior, AcceptCounter* counter) {
  const auto p = static_cast<double>(state.p());
  for (Eigen::Index j = 0; j < state.J(); ++j) {
    double shape_add, rate_add;
    sigma2_invgamma_params(state, data, j, flat_prior, shape_add, rate_add);
    const auto k = static_cast<std::size_t>(state.c[j]);
    const double l1 = flat_prior ? 0.0 : state.lambda1[k];
    const double l2 = flat_prior ? 1.0 : state.lambda2[k];
    if (flat_prior || !(l1 > 0.0)) {
      state.sigma2[j] = rng.inverse_gamma(hp.a + shape_add, hp.b + rate_add);
      continue;
    }
    // 1-D MH on log sigma2 against the exact conditional.
    const double x = std::log(state.sigma2[j]);
    const double xp = x + adapt.sigma2_log_step * rng.normal();
    const double cur = sigma2_logtarget(std::exp(x), hp.a, hp.b, shape_add, rate_add,
                                        p, l1, l2) +
                       x;  // Jacobian of the log transform
    const double prop = sigma2_logtarget(std::exp(xp), hp.a, hp.b, shape_add, rate_add,
                                         p, l1, l2) +
                        xp;
    const bool accept = std::isfinite(prop) && std::log(rng.uniform()) < prop - cur;
    if (accept) state.sigma2[j] = std::exp(xp);
    if (counter) {
      ++counter->proposed;
      if (accept) ++counter->accepted;
    }
    if (adapting) adapt.nudge(adapt.sigma2_log_step, accept ? 1.0 : 0.0);
  }
}

void gibbs_sweep(MixtureState& state, const DatasetMatrix& data,
                 const Hyperparameters& hp, Rng& rng, StepAdaptation& adapt,
                 bool adapting, bool flat_prior,
                 std::vector<AcceptCounter>* lambda_counters,
                 AcceptCounter* sigma2_counter) {
  sample_z(state, data, rng);
  sample_sticks_alpha(state, hp, rng);
  if (!flat_prior) {
    // The regime update marginalizes the latent scales, so tau is refreshed
    // from its conditional before any tau-dependent block runs.
    sample_c(state, rng);
    sample_w(state, hp, rng);
    sample_tau(state, rng);
    sample_lambdas(state, hp, rng, adapt, adapting, lambda_counters);
  }
  sample_beta(state, data, rng, flat_prior);
  sample_sigma2(state, data, hp, rng, adapt, adapting, flat_prior, sigma2_counter);
}

namespace {

Eigen::VectorXi kmeans_assign(const DatasetMatrix& data, int J, Rng& rng) {
  const Eigen::Index n = data.n();
  const Eigen::Index d = data.p() + 1;
  Matrix V(n, d);
  V.leftCols(data.p()) = data.X;
  V.col(data.p()) = data.y;
  Matrix centers(J, d);
  for (int j = 0; j < J; ++j)
    centers.row(j) = V.row(static_cast<Eigen::Index>(rng.uniform_index(
        static_cast<std::uint64_t>(n))));
  Eigen::VectorXi assign = Eigen::VectorXi::Zero(n);
  for (int iter = 0; iter < 20; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int j = 0; j < J; ++j) {
        const double dist = (V.row(i) - centers.row(j)).squaredNorm();
        if (dist < best_d) {
          best_d = dist;
          best = j;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    Matrix sums = Matrix::Zero(J, d);
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(J);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[i]) += V.row(i);
      ++counts[assign[i]];
    }
    for (int j = 0; j < J; ++j)
      if (counts[j] > 0) centers.row(j) = sums.row(j) / counts[j];
    if (!changed) break;
  }
  return assign;
}

}  // namespace

MixtureState initial_state(const DatasetMatrix& data, const Hyperparameters& hp,
                           Rng& rng, bool kmeans_init) {
  const Eigen::Index p = data.p();
  const int J = hp.J;
  const int K = hp.K;
  MixtureState s;
  s.u = Vector::Constant(J - 1, 0.5);
  s.pi = stick_breaking(s.u);
  s.alpha = 1.0;
  s.beta = Matrix::Zero(J, p);
  s.sigma2 = Vector::Ones(J);
  s.w.assign(static_cast<std::size_t>(K), 1.0 / K);
  s.c = Eigen::VectorXi::Zero(J);
  for (int j = 0; j < J; ++j) s.c[j] = static_cast<int>(rng.uniform_index(K));
  s.lambda1.assign(static_cast<std::size_t>(K), 1.0);
  s.lambda2.assign(static_cast<std::size_t>(K), 1.0);
  s.tau = Matrix::Constant(J, p, 0.5);

  if (kmeans_init)
    s.z = kmeans_assign(data, J, rng);
  else {
    s.z = Eigen::VectorXi::Zero(data.n());
    for (Eigen::Index i = 0; i < data.n(); ++i)
      s.z[i] = static_cast<int>(rng.uniform_index(J));
  }

  // Per-cluster ridge least squares for beta; residual variance for sigma2.
  const auto members = component_members(s);
  for (int j = 0; j < J; ++j) {
    const auto& rows = members[static_cast<std::size_t>(j)];
    if (rows.empty()) continue;
    Matrix Xj(static_cast<Eigen::Index>(rows.size()), p);
    Vector yj(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      Xj.row(static_cast<Eigen::Index>(r)) = data.X.row(rows[r]);
      yj[static_cast<Eigen::Index>(r)] = data.y[rows[r]];
    }
    Matrix A = Xj.transpose() * Xj + 1e-3 * Matrix::Identity(p, p);
    const Vector bj = robust_llt(std::move(A)).solve(Xj.transpose() * yj);
    s.beta.row(j) = bj.transpose();
    const double rss = (yj - Xj * bj).squaredNorm();
    s.sigma2[j] = std::max(rss / static_cast<double>(rows.size()), 1e-4);
  }
  return s;
}

namespace {

[[noreturn]] void rethrow_with_sweep(const std::exception& e, std::uint64_t sweep) {
  const std::string msg = "sweep " + std::to_string(sweep) + ": " + e.what();
  if (dynamic_cast<const LinearAlgebraError*>(&e)) throw LinearAlgebraError(msg);
  if (dynamic_cast<const NumericalError*>(&e)) throw NumericalError(msg);
  if (dynamic_cast<const ValueError*>(&e)) throw ValueError(msg);
  if (dynamic_cast<const DimensionError*>(&e)) throw DimensionError(msg);
  throw Error(msg);
}

void advance_chain(Checkpoint::ChainState& cs, const DatasetMatrix& data,
                   const Hyperparameters& hp, bool flat_prior,
                   std::uint64_t target_draws) {
  Rng rng(0);
  rng.set_state(cs.rng_state);
  const auto burn = static_cast<std::uint64_t>(hp.burn_in);
  while (cs.draws.size() < target_draws) {
    const bool adapting = cs.sweep_index < burn;
    try {
      gibbs_sweep(cs.current, data, hp, rng, cs.adapt, adapting, flat_prior,
                  adapting ? nullptr : &cs.lambda_counters,
                  adapting ? nullptr : &cs.sigma2_counter);
    } catch (const std::exception& e) {
      rethrow_with_sweep(e, cs.sweep_index);
    }
    ++cs.sweep_index;
    if (cs.sweep_index > burn &&
        (cs.sweep_index - burn) % static_cast<std::uint64_t>(hp.thin) == 0) {
      validate_state(cs.current);
      const double ll = mixture_loglik(cs.current, data);
      const double joint = joint_logdensity(cs.current, data, hp, flat_prior);
      if (!std::isfinite(ll) || !std::isfinite(joint))
        throw NumericalError("non-finite log-density at sweep " +
                             std::to_string(cs.sweep_index));
      cs.draws.push_back(cs.current);
      cs.loglik.push_back(ll);
    }
  }
  cs.rng_state = rng.state();
}

}  // namespace

Checkpoint run_chain_checkpoint(const DatasetMatrix& data, const Hyperparameters& hp,
                                const RunOptions& options) {
  hp.validate();
  if (data.n() < 1) throw DimensionError("empty dataset");
  if (options.chains < 1) throw InvalidConfig("chains must be >= 1");

  Checkpoint ckpt;
  ckpt.hp = hp;
  ckpt.options = options;
  ckpt.chains.resize(static_cast<std::size_t>(options.chains));

  auto run_one = [&](int chain_idx) {
    auto& cs = ckpt.chains[static_cast<std::size_t>(chain_idx)];
    Rng rng(hp.seed, static_cast<std::uint64_t>(chain_idx));
    cs.current = initial_state(data, hp, rng, options.kmeans_init);
    cs.adapt = StepAdaptation::make(hp.K);
    cs.lambda_counters.assign(static_cast<std::size_t>(hp.K), AcceptCounter{});
    cs.rng_state = rng.state();
    advance_chain(cs, data, hp, options.flat_prior,
                  static_cast<std::uint64_t>(hp.n_samples));
  };

  if (options.chains == 1) {
    run_one(0);
  } else {
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(options.chains));
    for (int ci = 0; ci < options.chains; ++ci)
      threads.emplace_back([&, ci] {
        try {
          run_one(ci);
        } catch (...) {
          errors[static_cast<std::size_t>(ci)] = std::current_exception();
        }
      });
    for (auto& t : threads) t.join();
    for (auto& err : errors)
      if (err) std::rethrow_exception(err);
  }
  return ckpt;
}

void resume_chain(Checkpoint& ckpt, const DatasetMatrix& data, int extra_samples) {
  if (extra_samples < 1) throw InvalidConfig("extra_samples must be >= 1");
  for (auto& cs : ckpt.chains)
    advance_chain(cs, data, ckpt.hp, ckpt.options.flat_prior,
                  cs.draws.size() + static_cast<std::uint64_t>(extra_samples));
  ckpt.hp.n_samples += extra_samples;
}

PosteriorChain Checkpoint::to_posterior() const {
  PosteriorChain post;
  post.hp = hp;
  post.seed = hp.seed;
  post.flat_prior = options.flat_prior;
  std::vector<double> lam_acc(static_cast<std::size_t>(hp.K), 0.0);
  double s2_acc = 0.0, s2_prop = 0.0;
  std::vector<double> lam_prop(static_cast<std::size_t>(hp.K), 0.0);
  for (const auto& cs : chains) {
    post.draws.insert(post.draws.end(), cs.draws.begin(), cs.draws.end());
    post.loglik.insert(post.loglik.end(), cs.loglik.begin(), cs.loglik.end());
    for (std::size_t k = 0; k < cs.lambda_counters.size(); ++k) {
      lam_acc[k] += static_cast<double>(cs.lambda_counters[k].accepted);
      lam_prop[k] += static_cast<double>(cs.lambda_counters[k].proposed);
    }
    s2_acc += static_cast<double>(cs.sigma2_counter.accepted);
    s2_prop += static_cast<double>(cs.sigma2_counter.proposed);
  }
  post.accept_rates.resize(lam_acc.size());
  for (std::size_t k = 0; k < lam_acc.size(); ++k)
    post.accept_rates[k] = lam_prop[k] > 0 ? lam_acc[k] / lam_prop[k] : 0.0;
  post.sigma2_accept_rates = {s2_prop > 0 ? s2_acc / s2_prop : 0.0};
  if (post.draws.empty()) throw NumericalError("chain produced no draws");
  return post;
}

PosteriorChain run_chain(const DatasetMatrix& data, const Hyperparameters& hp,
                         const RunOptions& options) {
  return run_chain_checkpoint(data, hp, options).to_posterior();
}

// --- Checkpoint serialization ------------------------------------------------

namespace {

constexpr char kMagic[8] = {'D', 'M', 'M', 'X', 'C', 'K', 'P', '1'};

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw ParseError("checkpoint truncated");
  return v;
}

void put_vec(std::ostream& out, const std::vector<double>& v) {
  put<std::uint64_t>(out, v.size());
  if (!v.empty())
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> get_vec(std::istream& in) {
  const auto n = get<std::uint64_t>(in);
  std::vector<double> v(n);
  if (n && !in.read(reinterpret_cast<char*>(v.data()),
                    static_cast<std::streamsize>(n * sizeof(double))))
    throw ParseError("checkpoint truncated");
  return v;
}

void put_eigen(std::ostream& out, const Matrix& m) {
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) put(out, m(i, j));
}

Matrix get_eigen(std::istream& in) {
  const auto r = static_cast<Eigen::Index>(get<std::uint64_t>(in));
  const auto c = static_cast<Eigen::Index>(get<std::uint64_t>(in));
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = get<double>(in);
  return m;
}

void put_state(std::ostream& out, const MixtureState& s) {
  put_vec(out, std::vector<double>(s.u.data(), s.u.data() + s.u.size()));
  put_vec(out, std::vector<double>(s.pi.data(), s.pi.data() + s.pi.size()));
  put(out, s.alpha);
  put_eigen(out, s.beta);
  put_vec(out, std::vector<double>(s.sigma2.data(), s.sigma2.data() + s.sigma2.size()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(s.z.size()));
  for (Eigen::Index i = 0; i < s.z.size(); ++i) put<std::int32_t>(out, s.z[i]);
  put_vec(out, s.w);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(s.c.size()));
  for (Eigen::Index i = 0; i < s.c.size(); ++i) put<std::int32_t>(out, s.c[i]);
  put_vec(out, s.lambda1);
  put_vec(out, s.lambda2);
  put_eigen(out, s.tau);
}

MixtureState get_state(std::istream& in) {
  MixtureState s;
  const auto u = get_vec(in);
  s.u = Eigen::Map<const Vector>(u.data(), static_cast<Eigen::Index>(u.size()));
  const auto pi = get_vec(in);
  s.pi = Eigen::Map<const Vector>(pi.data(), static_cast<Eigen::Index>(pi.size()));
  s.alpha = get<double>(in);
  s.beta = get_eigen(in);
  const auto s2 = get_vec(in);
  s.sigma2 = Eigen::Map<const Vector>(s2.data(), static_cast<Eigen::Index>(s2.size()));
  const auto nz = get<std::uint64_t>(in);
  s.z.resize(static_cast<Eigen::Index>(nz));
  for (std::uint64_t i = 0; i < nz; ++i)
    s.z[static_cast<Eigen::Index>(i)] = get<std::int32_t>(in);
  s.w = get_vec(in);
  const auto nc = get<std::uint64_t>(in);
  s.c.resize(static_cast<Eigen::Index>(nc));
  for (std::uint64_t i = 0; i < nc; ++i)
    s.c[static_cast<Eigen::Index>(i)] = get<std::int32_t>(in);
  s.lambda1 = get_vec(in);
  s.lambda2 = get_vec(in);
  s.tau = get_eigen(in);
  return s;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ostringstream out(std::ios::binary);
  out.write(kMagic, sizeof(kMagic));
  const std::string hp_json = hyperparameters_to_json(ckpt.hp);
  put<std::uint64_t>(out, hp_json.size());
  out.write(hp_json.data(), static_cast<std::streamsize>(hp_json.size()));
  put<std::uint8_t>(out, ckpt.options.flat_prior ? 1 : 0);
  put<std::int32_t>(out, ckpt.options.chains);
  put<std::uint8_t>(out, ckpt.options.kmeans_init ? 1 : 0);
  put<std::uint64_t>(out, ckpt.chains.size());
  for (const auto& cs : ckpt.chains) {
    put(out, cs.sweep_index);
    for (auto wstate : cs.rng_state) put(out, wstate);
    put_vec(out, cs.adapt.lambda_log_step);
    put(out, cs.adapt.sigma2_log_step);
    put(out, cs.adapt.target_accept);
    put(out, cs.adapt.iteration);
    put_state(out, cs.current);
    put<std::uint64_t>(out, cs.lambda_counters.size());
    for (const auto& ac : cs.lambda_counters) {
      put(out, ac.proposed);
      put(out, ac.accepted);
    }
    put(out, cs.sigma2_counter.proposed);
    put(out, cs.sigma2_counter.accepted);
    put<std::uint64_t>(out, cs.draws.size());
    for (std::size_t d = 0; d < cs.draws.size(); ++d) {
      put_state(out, cs.draws[d]);
      put(out, cs.loglik[d]);
    }
  }
  write_file_atomic(path, out.str());
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint: " + path);
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw ParseError("not a chain checkpoint: " + path);
  Checkpoint ckpt;
  const auto hp_len = get<std::uint64_t>(in);
  std::string hp_json(hp_len, '\0');
  if (!in.read(hp_json.data(), static_cast<std::streamsize>(hp_len)))
    throw ParseError("checkpoint truncated");
  ckpt.hp = hyperparameters_from_json(hp_json);
  ckpt.options.flat_prior = get<std::uint8_t>(in) != 0;
  ckpt.options.chains = get<std::int32_t>(in);
  ckpt.options.kmeans_init = get<std::uint8_t>(in) != 0;
  const auto n_chains = get<std::uint64_t>(in);
  ckpt.chains.resize(n_chains);
  for (auto& cs : ckpt.chains) {
    cs.sweep_index = get<std::uint64_t>(in);
    for (auto& wstate : cs.rng_state) wstate = get<std::uint64_t>(in);
    cs.adapt.lambda_log_step = get_vec(in);
    cs.adapt.sigma2_log_step = get<double>(in);
    cs.adapt.target_accept = get<double>(in);
    cs.adapt.iteration = get<std::uint64_t>(in);
    cs.current = get_state(in);
    const auto n_lam = get<std::uint64_t>(in);
    cs.lambda_counters.resize(n_lam);
    for (auto& ac : cs.lambda_counters) {
      ac.proposed = get<std::uint64_t>(in);
      ac.accepted = get<std::uint64_t>(in);
    }
    cs.sigma2_counter.proposed = get<std::uint64_t>(in);
    cs.sigma2_counter.accepted = get<std::uint64_t>(in);
    const auto n_draws = get<std::uint64_t>(in);
    cs.draws.resize(n_draws);
    cs.loglik.resize(n_draws);
    for (std::uint64_t d = 0; d < n_draws; ++d) {
      cs.draws[d] = get_state(in);
      cs.loglik[d] = get<double>(in);
    }
  }
  return ckpt;
}

}  // namespace dmmmen

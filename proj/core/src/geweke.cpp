#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "dmmmen/mathutil.hpp"
#include "dmmmen/sampler.hpp"

namespace dmmmen {

namespace {

/// Draw a full parameter state from the prior.
MixtureState prior_draw(const Hyperparameters& hp, Eigen::Index n, Eigen::Index p,
                        Rng& rng) {
  MixtureState s;
  const int J = hp.J;
  const int K = hp.K;
  s.alpha = rng.gamma(hp.e, hp.f);
  s.u.resize(J - 1);
  for (int l = 0; l + 1 < J; ++l)
    s.u[l] = std::min(std::max(rng.beta(1.0, s.alpha), 1e-12), 1.0 - 1e-12);
  s.pi = stick_breaking(s.u);
  s.sigma2.resize(J);
  for (int j = 0; j < J; ++j) s.sigma2[j] = rng.inverse_gamma(hp.a, hp.b);
  s.lambda1.resize(static_cast<std::size_t>(K));
  s.lambda2.resize(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    s.lambda1[static_cast<std::size_t>(k)] = rng.gamma(hp.R, hp.V / 2.0);
    s.lambda2[static_cast<std::size_t>(k)] = rng.gamma(hp.L, hp.V / 2.0);
  }
  s.w = rng.dirichlet(std::vector<double>(static_cast<std::size_t>(K),
                                          hp.dirichlet_mass()));
  s.c.resize(J);
  s.tau.resize(J, p);
  s.beta.resize(J, p);
  for (int j = 0; j < J; ++j) {
    std::vector<double> logw(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k)
      logw[static_cast<std::size_t>(k)] =
          std::log(std::max(s.w[static_cast<std::size_t>(k)], 1e-300));
    s.c[j] = rng.categorical_from_logs(logw);
    const auto k = static_cast<std::size_t>(s.c[j]);
    const double eta = scale_mixture_eta(s.sigma2[j], s.lambda1[k], s.lambda2[k]);
    for (Eigen::Index l = 0; l < p; ++l) {
      const double tau = rng.truncated_inverse_gamma_01(eta);
      s.tau(j, l) = tau;
      s.beta(j, l) =
          rng.normal(0.0, std::sqrt(s.sigma2[j] * (1.0 - tau) / s.lambda2[k]));
    }
  }
  s.z.resize(n);
  std::vector<double> logpi(static_cast<std::size_t>(J));
  for (int j = 0; j < J; ++j)
    logpi[static_cast<std::size_t>(j)] =
        s.pi[j] > 0.0 ? std::log(s.pi[j]) : -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) s.z[i] = rng.categorical_from_logs(logpi);
  return s;
}

/// Regenerate responses from the current parameters (X held fixed).
void regenerate_y(DatasetMatrix& data, const MixtureState& s, Rng& rng) {
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const int j = s.z[i];
    data.y[i] = data.X.row(i).dot(s.beta.row(j)) +
                std::sqrt(s.sigma2[j]) * rng.normal();
  }
}

struct StatAccumulator {
  std::vector<std::string> names;
  std::vector<std::vector<double>> samples;

  void init(const std::vector<std::string>& n, int iters) {
    names = n;
    samples.assign(n.size(), {});
    for (auto& s : samples) s.reserve(static_cast<std::size_t>(iters));
  }
  void record(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) samples[i].push_back(values[i]);
  }
};

std::vector<double> collect_stats(const MixtureState& s, const DatasetMatrix& data) {
  const auto J = static_cast<double>(s.J());
  const auto p = static_cast<double>(s.p());
  const auto K = static_cast<double>(s.K());
  const auto n = static_cast<double>(data.n());

  double beta_m = s.beta.mean();
  double beta_sq = s.beta.array().square().mean();
  double s2_m = s.sigma2.mean();
  double log_s2 = s.sigma2.array().log().mean();
  double tau_m = s.tau.mean();
  double inv_tau = s.tau.array().inverse().mean();
  double l1 = std::accumulate(s.lambda1.begin(), s.lambda1.end(), 0.0) / K;
  double l2 = std::accumulate(s.lambda2.begin(), s.lambda2.end(), 0.0) / K;
  double u_m = s.u.size() ? s.u.mean() : 0.5;
  double frac1 = 0.0;
  for (Eigen::Index i = 0; i < s.z.size(); ++i) frac1 += s.z[i] == 0 ? 1.0 : 0.0;
  frac1 /= n;
  (void)J;
  (void)p;
  return {beta_m,  beta_sq, s2_m,        log_s2,         tau_m,
          inv_tau, l1,      l2,          s.alpha,        u_m,
          s.pi[0], frac1,   data.y.mean(), data.y.array().square().mean()};
}

const std::vector<std::string> kStatNames = {
    "mean(beta)", "mean(beta^2)", "mean(sigma2)", "mean(log sigma2)",
    "mean(tau)",  "mean(1/tau)",  "mean(lambda1)", "mean(lambda2)",
    "alpha",      "mean(u)",      "pi[0]",         "frac(z=0)",
    "mean(y)",    "mean(y^2)"};

double iid_se(const std::vector<double>& x) {
  const double m = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  double v = 0.0;
  for (double xi : x) v += (xi - m) * (xi - m);
  v /= static_cast<double>(x.size() - 1);
  return std::sqrt(v / static_cast<double>(x.size()));
}

/// Batch-means standard error for autocorrelated chains.
double batch_se(const std::vector<double>& x, int n_batches = 100) {
  const std::size_t B = static_cast<std::size_t>(n_batches);
  const std::size_t len = x.size() / B;
  std::vector<double> means(B);
  for (std::size_t b = 0; b < B; ++b) {
    double s = 0.0;
    for (std::size_t i = b * len; i < (b + 1) * len; ++i) s += x[i];
    means[b] = s / static_cast<double>(len);
  }
  return iid_se(means);
}

double mean_of(const std::vector<double>& x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Deliberately broken sigma2 refresh: inverse-gamma shape off by one and the
/// truncation normalizer dropped. Used only to calibrate the test's power.
void mutated_sample_sigma2(MixtureState& state, const DatasetMatrix& data,
                           const Hyperparameters& hp, Rng& rng) {
  for (Eigen::Index j = 0; j < state.J(); ++j) {
    double shape_add, rate_add;
    sigma2_invgamma_params(state, data, j, false, shape_add, rate_add);
    state.sigma2[j] = rng.inverse_gamma(hp.a + shape_add + 1.0, hp.b + rate_add);
  }
}

}  // namespace

std::string GewekeReport::table() const {
  std::ostringstream out;
  out << std::left << std::setw(18) << "statistic" << std::right << std::setw(12)
      << "mc_mean" << std::setw(12) << "sc_mean" << std::setw(9) << "z"
      << "\n";
  for (const auto& s : stats) {
    out << std::left << std::setw(18) << s.name << std::right << std::fixed
        << std::setprecision(4) << std::setw(12) << s.mc_mean << std::setw(12)
        << s.sc_mean << std::setprecision(2) << std::setw(9) << s.z << "\n";
  }
  out << (pass ? "PASS" : "FAIL") << " (max |z| = " << std::setprecision(2)
      << max_abs_z << ")\n";
  return out.str();
}

GewekeReport geweke_joint_test(const Hyperparameters& hp_in, int n_synth, int iters,
                               SweepMutation mutation, std::uint64_t seed) {
  if (iters < 1) throw InvalidConfig("geweke iterations must be >= 1");
  if (n_synth < 1) throw InvalidConfig("geweke synthetic size must be >= 1");
  Hyperparameters hp = hp_in;
  hp.validate();

  const Eigen::Index p = 3;
  Rng x_rng(seed, 999);
  Matrix X(n_synth, p);
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < p; ++j) X(i, j) = x_rng.normal();

  DatasetMatrix data{X, Vector::Zero(n_synth), "geweke", {}};

  // Marginal-conditional simulator: iid draws from the joint.
  StatAccumulator mc;
  mc.init(kStatNames, iters);
  {
    Rng rng(seed, 1);
    for (int t = 0; t < iters; ++t) {
      MixtureState s = prior_draw(hp, data.n(), p, rng);
      regenerate_y(data, s, rng);
      mc.record(collect_stats(s, data));
    }
  }

  // Successive-conditional simulator: alternate the transition kernel with
  // data regeneration. Step sizes stay fixed so the kernel is Markovian.
  StatAccumulator sc;
  sc.init(kStatNames, iters);
  {
    Rng rng(seed, 2);
    MixtureState s = prior_draw(hp, data.n(), p, rng);
    regenerate_y(data, s, rng);
    StepAdaptation adapt = StepAdaptation::make(hp.K);
    for (int t = 0; t < iters; ++t) {
      gibbs_sweep(s, data, hp, rng, adapt, /*adapting=*/false);
      if (mutation == SweepMutation::sigma2_shape_bug)
        mutated_sample_sigma2(s, data, hp, rng);
      regenerate_y(data, s, rng);
      sc.record(collect_stats(s, data));
    }
  }

  GewekeReport report;
  for (std::size_t i = 0; i < kStatNames.size(); ++i) {
    GewekeReport::Stat st;
    st.name = kStatNames[i];
    st.mc_mean = mean_of(mc.samples[i]);
    st.mc_se = iid_se(mc.samples[i]);
    st.sc_mean = mean_of(sc.samples[i]);
    st.sc_se = iters >= 1000 ? batch_se(sc.samples[i]) : iid_se(sc.samples[i]);
    const double denom = std::sqrt(st.mc_se * st.mc_se + st.sc_se * st.sc_se);
    st.z = denom > 0.0 ? (st.mc_mean - st.sc_mean) / denom : 0.0;
    report.max_abs_z = std::max(report.max_abs_z, std::abs(st.z));
    report.stats.push_back(st);
  }
  report.pass = report.max_abs_z <= 4.0;
  return report;
}

}  // namespace dmmmen

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dmmmen/data.hpp"
#include "dmmmen/model.hpp"
#include "dmmmen/rng.hpp"

namespace dmmmen {

/// Thinned post-burn-in draws of one or more chains over the same dataset.
struct PosteriorChain {
  std::vector<MixtureState> draws;
  std::vector<double> loglik;        // observed-data mixture log-likelihood per draw
  std::vector<double> accept_rates;  // per-regime lambda MH acceptance (post burn-in)
  std::vector<double> sigma2_accept_rates;  // pooled across components
  std::uint64_t seed = 0;
  Hyperparameters hp;
  bool flat_prior = false;

  Eigen::Index size() const { return static_cast<Eigen::Index>(draws.size()); }
};

/// Random-walk step sizes for the MH blocks, Robbins-Monro adapted during
/// burn-in and frozen afterwards.
struct StepAdaptation {
  std::vector<double> lambda_log_step;  // per regime k
  double sigma2_log_step = 0.25;
  double target_accept = 0.30;
  std::uint64_t iteration = 0;

  static StepAdaptation make(int K) {
    StepAdaptation s;
    s.lambda_log_step.assign(static_cast<std::size_t>(K), 0.25);
    return s;
  }
  void nudge(double& step, double accepted) {
    ++iteration;
    const double gain =
        1.0 / std::pow(static_cast<double>(iteration) / 10.0 + 1.0, 0.6);
    step *= std::exp(gain * (accepted - target_accept));
    step = std::min(std::max(step, 1e-3), 10.0);
  }
};

struct AcceptCounter {
  std::uint64_t proposed = 0;
  std::uint64_t accepted = 0;
  double rate() const {
    return proposed ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0;
  }
};

// --- Individual full-conditional updates -----------------------------------
//
// Each update draws its block from the exact conditional given the rest of
// the state. sample_c marginalizes the latent scales, so a sweep must refresh
// tau before any later block conditions on it.

/// Log-probabilities (unnormalized) of z_i = j for one observation.
std::vector<double> z_logprobs(const MixtureState& state, const DatasetMatrix& data,
                               Eigen::Index i);

void sample_z(MixtureState& state, const DatasetMatrix& data, Rng& rng);

/// Conjugate Beta parameters for stick fraction j given the z counts.
void sticks_beta_params(const MixtureState& state, Eigen::Index j, double& shape1,
                        double& shape2);
/// Conjugate Gamma parameters for the concentration alpha given the sticks.
void alpha_gamma_params(const MixtureState& state, const Hyperparameters& hp,
                        double& shape, double& rate);
void sample_sticks_alpha(MixtureState& state, const Hyperparameters& hp, Rng& rng);

/// Regime responsibilities P(c_j = k | beta_j, sigma2_j, w), latent scales
/// marginalized out (orthant form).
std::vector<double> c_logprobs(const MixtureState& state, Eigen::Index j);
void sample_c(MixtureState& state, Rng& rng);

/// Dirichlet parameters for the regime weights given c.
std::vector<double> w_dirichlet_params(const MixtureState& state,
                                       const Hyperparameters& hp);
void sample_w(MixtureState& state, const Hyperparameters& hp, Rng& rng);

/// Exact conditional draw of one latent scale: with q = lambda2 b^2/(2 s2)
/// and eta = lambda1^2/(8 lambda2 s2), tau/(1-tau) is Inverse-Gaussian
/// (sqrt(eta/q), 2 eta) for q > 0 and Inv-Gamma(1/2, eta) for q = 0.
double sample_tau_one(double beta_jl, double sigma2_j, double lambda1, double lambda2,
                      Rng& rng);
void sample_tau(MixtureState& state, Rng& rng);

/// Joint random-walk MH on (log lambda1_k, log lambda2_k).
void sample_lambdas(MixtureState& state, const Hyperparameters& hp, Rng& rng,
                    StepAdaptation& adapt, bool adapting,
                    std::vector<AcceptCounter>* counters = nullptr);

/// Gaussian full conditional N(A^{-1} Xj' yj, sigma2 A^{-1}) with
/// A = Xj'Xj + lambda2 S_tau^{-1}; empty components draw from the prior.
void sample_beta(MixtureState& state, const DatasetMatrix& data, Rng& rng,
                 bool flat_prior = false);

/// Inverse-gamma conditional when lambda1 = 0 (or flat prior), otherwise a
/// 1-D MH step on log sigma2 against the exact conditional, which carries the
/// non-conjugate truncation normalizer of the latent-scale prior.
void sample_sigma2(MixtureState& state, const DatasetMatrix& data,
                   const Hyperparameters& hp, Rng& rng, StepAdaptation& adapt,
                   bool adapting, bool flat_prior = false,
                   AcceptCounter* counter = nullptr);

/// Parameters of the conjugate inverse-gamma part of the sigma2 conditional.
void sigma2_invgamma_params(const MixtureState& state, const DatasetMatrix& data,
                            Eigen::Index j, bool flat_prior, double& shape,
                            double& rate);

// --- Chain orchestration ----------------------------------------------------

struct RunOptions {
  bool flat_prior = false;   // ablation: flat coefficient prior, no shrinkage
  int chains = 1;
  bool kmeans_init = true;
};

MixtureState initial_state(const DatasetMatrix& data, const Hyperparameters& hp,
                           Rng& rng, bool kmeans_init = true);

/// One full sweep in the fixed order
/// z -> sticks/alpha -> c -> w -> tau -> lambda -> beta -> sigma2.
void gibbs_sweep(MixtureState& state, const DatasetMatrix& data,
                 const Hyperparameters& hp, Rng& rng, StepAdaptation& adapt,
                 bool adapting, bool flat_prior = false,
                 std::vector<AcceptCounter>* lambda_counters = nullptr,
                 AcceptCounter* sigma2_counter = nullptr);

/// Runs burn-in plus thinned sampling; deterministic given hp.seed.
/// With options.chains > 1 the chains run in parallel on derived seed
/// streams and their draws are concatenated in chain order.
PosteriorChain run_chain(const DatasetMatrix& data, const Hyperparameters& hp,
                         const RunOptions& options = {});

// --- Checkpointing ----------------------------------------------------------

/// Self-describing binary checkpoint: hyperparameters, seeds, all stored
/// draws, and the exact sampler state (RNG words, adapted steps, sweep index)
/// needed to resume bit-exactly.
struct Checkpoint {
  Hyperparameters hp;
  RunOptions options;
  struct ChainState {
    std::uint64_t sweep_index = 0;  // completed sweeps
    Rng::state_type rng_state{};
    StepAdaptation adapt;
    MixtureState current;
    std::vector<AcceptCounter> lambda_counters;
    AcceptCounter sigma2_counter;
    std::vector<MixtureState> draws;
    std::vector<double> loglik;
  };
  std::vector<ChainState> chains;

  PosteriorChain to_posterior() const;
};

Checkpoint run_chain_checkpoint(const DatasetMatrix& data, const Hyperparameters& hp,
                                const RunOptions& options = {});

/// Continues every chain for `extra_samples` more stored draws. The
/// continuation is bitwise identical to a single longer run.
void resume_chain(Checkpoint& ckpt, const DatasetMatrix& data, int extra_samples);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// --- Sampler correctness (joint-distribution test) ---------------------------

enum class SweepMutation {
  none,
  sigma2_shape_bug,  // deliberately mis-specified sigma2 update, for calibration
};

struct GewekeReport {
  struct Stat {
    std::string name;
    double mc_mean = 0, mc_se = 0;   // marginal-conditional simulator
    double sc_mean = 0, sc_se = 0;   // successive-conditional simulator
    double z = 0;
  };
  std::vector<Stat> stats;
  bool pass = false;
  double max_abs_z = 0.0;

  std::string table() const;
};

/// Compares the marginal-conditional and successive-conditional simulators
/// of the joint (parameters, data) distribution on a small synthetic shape.
/// Passes when every statistic's |z| <= 4.
GewekeReport geweke_joint_test(const Hyperparameters& hp, int n_synth, int iters,
                               SweepMutation mutation = SweepMutation::none,
                               std::uint64_t seed = 17);

}  // namespace dmmmen

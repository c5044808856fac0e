#ifndef BSM_MCMC_HPP
#define BSM_MCMC_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "bsm/model.hpp"

namespace bsm {

struct McmcConfig {
  int n_chains = 3;
  int n_burnin = 5000;
  int n_samples = 3000;
  int thinning = 1;
  double step_psi = 0.1;    // log-scale random-walk SD
  double step_sigma = 0.1;  // log-scale random-walk SD
  std::uint64_t seed = 0;
  bool init_z_one = false;
  // When set, a source whose indicator is 1 refreshes its own ("tilde")
  // parameters from this pool of previously sampled source-only draws
  // instead of from the prior. pool[n-1] belongs to source n.
  const std::vector<std::vector<ParticipantParams>>* warm_pool = nullptr;

  void validate() const;
};

// Full sampler state at one iteration. params[0] is the new participant;
// params[n] for n >= 1 holds source n's own ("tilde") parameter set -- the
// matched view is params[0] whenever z[n-1] is 1.
struct ChainState {
  std::vector<ParticipantParams> params;
  MatchVector match;
  Rng rng;
  long iteration = 0;
};

struct Draw {
  ParticipantParams p0;
  std::vector<int> z;              // N indicators
  std::vector<double> nuisance;    // tilde scalars, see ChainTrace names
};

struct AcceptCounter {
  long accepted = 0;
  long proposed = 0;
};

struct ChainTrace {
  std::vector<Draw> draws;
  std::vector<std::string> nuisance_names;
  AcceptCounter accept_psi, accept_sigma;
  int n_sources = 0;
  int n_channels = 0;
  int n_times = 0;
  int level1 = 0;  // basis truncation levels, for (de)serialization checks
  int level0 = 0;
};

// Conjugate posterior of one coefficient block given pooled sufficient
// statistics: column precision psi^2 m Psi R_t^-1 Psi^T + diag(lambda)^-1,
// mean psi SX R_t^-1 Psi^T Lambda. Zero data returns the prior moments.
void coeff_posterior_moments(const GroupStats& stats, double psi,
                             const MatrixXd& r_t, const EigenBasis& basis,
                             MatrixXd& mean, MatrixXd& col_cov);

// Draw from MN(mean, sigma_s, col_cov) for the moments above.
MatrixXd draw_coeff_posterior(Rng& rng, const GroupStats& stats, double psi,
                              const MatrixXd& sigma_s, const MatrixXd& r_t,
                              const EigenBasis& basis);

// P(Z_n = 1 | rest): pi L0 / (pi L0 + (1 - pi) Ln) evaluated in log space,
// with L0 the pooled target likelihood of source n under the new
// participant's parameters and Ln under its own.
double match_probability(const GroupStats& stats_n,
                         const ParticipantParams& p0,
                         const ParticipantParams& pn,
                         const EigenBasis& basis1, double pi);

// One Gibbs chain: sweeps A -> psi -> sigma -> (rho, eta) -> Z, discards
// burn-in, retains thinned draws. Deterministic given chain_seed.
ChainTrace run_chain(const McmcConfig& mcmc, const Dataset& data,
                     const ModelConfig& model, const EigenBasis& basis1,
                     const EigenBasis& basis0, std::uint64_t chain_seed);

// n_chains independent chains, seeded seed, seed+1, ... Runs them in
// parallel (capped by BSM_THREADS); the result does not depend on
// scheduling.
std::vector<ChainTrace> run_chains(const McmcConfig& mcmc, const Dataset& data,
                                   const ModelConfig& model,
                                   const EigenBasis& basis1,
                                   const EigenBasis& basis0);

// Single-chain stepper for joint-consistency (Geweke-style) checks: run one
// sweep at a time, inspect/override the state, swap in regenerated data.
class GibbsDriver {
 public:
  GibbsDriver(const McmcConfig& mcmc, const Dataset& data,
              const ModelConfig& model, const EigenBasis& basis1,
              const EigenBasis& basis0, std::uint64_t seed);
  ~GibbsDriver();
  GibbsDriver(GibbsDriver&&) noexcept;
  GibbsDriver& operator=(GibbsDriver&&) noexcept;

  void sweep();
  ChainState& state();
  void replace_data(const Dataset& data);  // keeps the current state and RNG

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Potential scale reduction factor for one scalar across chains.
// Throws NumericalError when the within-chain variance is zero.
double psrf(const std::vector<std::vector<double>>& chains);

// Named scalar series of one chain: new-participant scalars first, then
// the tilde nuisance scalars.
std::vector<std::pair<std::string, std::vector<double>>> scalar_series(
    const ChainTrace& trace);

// PSRF per scalar parameter across >= 2 equal-length chains.
std::map<std::string, double> gelman_rubin(
    const std::vector<ChainTrace>& traces);

}  // namespace bsm

#endif

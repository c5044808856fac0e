#include "bsm/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>

namespace bsm {

namespace {

int sample_categorical_log(Rng& rng, const std::vector<double>& logw) {
  const double mx = *std::max_element(logw.begin(), logw.end());
  double total = 0.0;
  for (double lw : logw) total += std::exp(lw - mx);
  double u = draw_uniform(rng) * total;
  for (std::size_t i = 0; i < logw.size(); ++i) {
    u -= std::exp(logw[i] - mx);
    if (u <= 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(logw.size()) - 1;
}

MatrixXd standard_normal_matrix(Rng& rng, int rows, int cols) {
  MatrixXd g(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) g(i, j) = draw_normal(rng);
  return g;
}

// Draw from MN(mean, row_cov, col_cov).
MatrixXd draw_matnorm(Rng& rng, const MatrixXd& mean, const MatrixXd& row_cov,
                      const MatrixXd& col_cov) {
  Eigen::LLT<MatrixXd> llt_r(row_cov);
  Eigen::LLT<MatrixXd> llt_c(col_cov);
  if (llt_r.info() != Eigen::Success || llt_c.info() != Eigen::Success)
    throw NumericalError("draw_matnorm: covariance is not PD");
  const MatrixXd g =
      standard_normal_matrix(rng, static_cast<int>(mean.rows()),
                             static_cast<int>(mean.cols()));
  return mean + llt_r.matrixL() * g * llt_c.matrixU();
}

}  // namespace

void coeff_posterior_moments(const GroupStats& stats, double psi,
                             const MatrixXd& r_t, const EigenBasis& basis,
                             MatrixXd& mean, MatrixXd& col_cov) {
  const int level = basis.level;
  const int n_e = static_cast<int>(stats.sum_x.rows());
  Eigen::LLT<MatrixXd> llt_t(r_t);
  if (llt_t.info() != Eigen::Success)
    throw NumericalError("coeff posterior: temporal correlation is not PD");

  if (stats.count == 0) {
    // empty-data conjugacy: the posterior is the prior
    mean = MatrixXd::Zero(n_e, level);
    col_cov = basis.lambda.asDiagonal();
    return;
  }

  const MatrixXd rti_psit = llt_t.solve(basis.psi.transpose());  // T0 x L
  MatrixXd prec = psi * psi * static_cast<double>(stats.count) *
                  (basis.psi * rti_psit);
  prec += basis.lambda.cwiseInverse().asDiagonal();
  Eigen::LLT<MatrixXd> llt_p(prec);
  if (llt_p.info() != Eigen::Success)
    throw NumericalError("coeff posterior: precision is not PD");
  col_cov = llt_p.solve(MatrixXd::Identity(level, level));
  col_cov = 0.5 * (col_cov + col_cov.transpose()).eval();
  mean = psi * stats.sum_x * rti_psit * col_cov;
}

MatrixXd draw_coeff_posterior(Rng& rng, const GroupStats& stats, double psi,
                              const MatrixXd& sigma_s, const MatrixXd& r_t,
                              const EigenBasis& basis) {
  MatrixXd mean, col_cov;
  coeff_posterior_moments(stats, psi, r_t, basis, mean, col_cov);
  return draw_matnorm(rng, mean, sigma_s, col_cov);
}

double match_probability(const GroupStats& stats_n,
                         const ParticipantParams& p0,
                         const ParticipantParams& pn,
                         const EigenBasis& basis1, double pi) {
  if (pi <= 0.0) return 0.0;
  if (pi >= 1.0) return 1.0;
  const int t0 = stats_n.n_times;
  const double l_match = group_loglik(stats_n, p0.psi1 * p0.a1 * basis1.psi,
                                      p0.cov().spatial_cov(),
                                      p0.cov().temporal_corr(t0));
  const double l_own = group_loglik(stats_n, pn.psi1 * pn.a1 * basis1.psi,
                                    pn.cov().spatial_cov(),
                                    pn.cov().temporal_corr(t0));
  const double logit =
      std::log(pi) - std::log1p(-pi) + l_match - l_own;
  return 1.0 / (1.0 + std::exp(-logit));
}

namespace {

struct Sampler {
  const Dataset& data;
  const ModelConfig& cfg;
  const McmcConfig& mcmc;
  const EigenBasis& b1;
  const EigenBasis& b0;
  int n_e, n_t, n_src, l1, l0;

  std::vector<GroupStats> target_stats;  // per participant 0..N
  GroupStats nontarget_stats;            // participant 0 only
  GroupStats pooled;                     // refreshed each sweep

  ChainState st;
  ChainTrace trace;

  Sampler(const McmcConfig& mcmc_, const Dataset& data_,
          const ModelConfig& cfg_, const EigenBasis& b1_,
          const EigenBasis& b0_, std::uint64_t chain_seed)
      : data(data_), cfg(cfg_), mcmc(mcmc_), b1(b1_), b0(b0_) {
    n_e = data.n_channels;
    n_t = data.n_times;
    n_src = data.n_sources();
    l1 = b1.level;
    l0 = b0.level;

    for (int n = 0; n <= n_src; ++n)
      target_stats.push_back(
          collect_stats(data.participants[n], 1, n_e, n_t));
    nontarget_stats = collect_stats(data.participants[0], 0, n_e, n_t);

    st.rng.seed(chain_seed);
    st.match.pi = cfg.pi;
    st.match.z.assign(n_src, mcmc.init_z_one ? 1 : 0);

    const int mid_rho = static_cast<int>(cfg.rho_grid.size()) / 2;
    const int mid_eta = static_cast<int>(cfg.eta_grid.size()) / 2;
    for (int n = 0; n <= n_src; ++n) {
      ParticipantParams p;
      p.a1 = MatrixXd::Zero(n_e, l1);
      p.psi1 = 1.0;
      p.sigma = channel_rms(n);
      p.rho = cfg.rho_grid[mid_rho];
      p.eta = cfg.eta_grid[mid_eta];
      if (n == 0) {
        p.a0 = MatrixXd::Zero(n_e, l0);
        p.psi0 = 1.0;
      }
      st.params.push_back(std::move(p));
    }

    trace.n_sources = n_src;
    trace.n_channels = n_e;
    trace.n_times = n_t;
    trace.level1 = l1;
    trace.level0 = l0;
    for (int n = 1; n <= n_src; ++n) {
      trace.nuisance_names.push_back("psi1_tilde_" + std::to_string(n));
      for (int e = 0; e < n_e; ++e)
        trace.nuisance_names.push_back("sigma_tilde_" + std::to_string(n) +
                                       "_" + std::to_string(e + 1));
      trace.nuisance_names.push_back("rho_tilde_" + std::to_string(n));
      trace.nuisance_names.push_back("eta_tilde_" + std::to_string(n));
    }
  }

  VectorXd channel_rms(int n) const {
    VectorXd s = VectorXd::Ones(n_e);
    const auto& epochs = data.participants[n];
    if (epochs.empty()) return s;
    VectorXd acc = VectorXd::Zero(n_e);
    long count = 0;
    for (const Epoch& ep : epochs) {
      acc += ep.x.array().square().rowwise().sum().matrix();
      count += n_t;
    }
    for (int e = 0; e < n_e; ++e)
      s[e] = std::max(1e-3, std::sqrt(acc[e] / static_cast<double>(count)));
    return s;
  }

  void refresh_pooled() {
    pooled = target_stats[0];
    for (int n = 1; n <= n_src; ++n)
      if (st.match.z[n - 1] == 1) pooled.merge(target_stats[n]);
  }

  MatrixXd spatial_cov(const ParticipantParams& p) const {
    return p.cov().spatial_cov();
  }
  MatrixXd temporal_corr(const ParticipantParams& p) const {
    return ar1_corr(p.rho, n_t);
  }

  MatrixXd draw_coeff(const GroupStats& stats, double psi,
                      const MatrixXd& sigma_s, const MatrixXd& r_t,
                      const EigenBasis& basis) {
    return draw_coeff_posterior(st.rng, stats, psi, sigma_s, r_t, basis);
  }

  void update_a() {
    ParticipantParams& p0 = st.params[0];
    const MatrixXd sigma_s0 = spatial_cov(p0);
    const MatrixXd r_t0 = temporal_corr(p0);
    p0.a1 = draw_coeff(pooled, p0.psi1, sigma_s0, r_t0, b1);
    p0.a0 = draw_coeff(nontarget_stats, *p0.psi0, sigma_s0, r_t0, b0);

    for (int n = 1; n <= n_src; ++n) {
      ParticipantParams& pn = st.params[n];
      if (st.match.z[n - 1] == 1) {
        if (mcmc.warm_pool) {
          const auto& pool = (*mcmc.warm_pool)[n - 1];
          const ParticipantParams& s =
              pool[draw_index(st.rng, static_cast<int>(pool.size()))];
          pn.a1 = s.a1;
          pn.psi1 = s.psi1;
          pn.sigma = s.sigma;
          pn.rho = s.rho;
          pn.eta = s.eta;
        } else {
          // refresh the whole tilde block from its prior in one joint draw:
          // the coefficient prior's row covariance is this participant's
          // spatial covariance, so sigma and eta must be drawn first
          pn.psi1 = draw_lognormal(st.rng);
          for (int e = 0; e < n_e; ++e)
            pn.sigma[e] = draw_half_cauchy(st.rng, 5.0);
          pn.rho = cfg.rho_grid[draw_index(
              st.rng, static_cast<int>(cfg.rho_grid.size()))];
          pn.eta = cfg.eta_grid[draw_index(
              st.rng, static_cast<int>(cfg.eta_grid.size()))];
          pn.a1 = draw_matnorm(st.rng, MatrixXd::Zero(n_e, l1),
                               spatial_cov(pn),
                               MatrixXd(b1.lambda.asDiagonal()));
        }
      } else {
        pn.a1 = draw_coeff(target_stats[n], pn.psi1, spatial_cov(pn),
                           temporal_corr(pn), b1);
      }
    }
  }

  // log-scale random-walk MH step on a positive scalar
  template <typename LogTarget>
  double mh_log_scale(double current, double step, LogTarget&& logtarget,
                      AcceptCounter& counter) {
    const double proposal = current * std::exp(step * draw_normal(st.rng));
    // the log-scale proposal contributes a log(x) Jacobian on each side
    const double log_ratio = logtarget(proposal) + std::log(proposal) -
                             logtarget(current) - std::log(current);
    ++counter.proposed;
    if (std::log(draw_uniform(st.rng)) < log_ratio) {
      ++counter.accepted;
      return proposal;
    }
    return current;
  }

  void update_psi() {
    ParticipantParams& p0 = st.params[0];
    const MatrixXd sigma_s0 = spatial_cov(p0);
    const MatrixXd r_t0 = temporal_corr(p0);
    {
      const MatrixXd c1 = p0.a1 * b1.psi;
      p0.psi1 = mh_log_scale(
          p0.psi1, mcmc.step_psi,
          [&](double psi) {
            return group_loglik(pooled, psi * c1, sigma_s0, r_t0) +
                   lognormal_logpdf(psi);
          },
          trace.accept_psi);
    }
    {
      const MatrixXd c0 = *p0.a0 * b0.psi;
      p0.psi0 = mh_log_scale(
          *p0.psi0, mcmc.step_psi,
          [&](double psi) {
            return group_loglik(nontarget_stats, psi * c0, sigma_s0, r_t0) +
                   lognormal_logpdf(psi);
          },
          trace.accept_psi);
    }
    for (int n = 1; n <= n_src; ++n) {
      ParticipantParams& pn = st.params[n];
      if (st.match.z[n - 1] == 1) continue;  // refreshed in update_a
      const MatrixXd sigma_s = spatial_cov(pn);
      const MatrixXd r_t = temporal_corr(pn);
      const MatrixXd c1 = pn.a1 * b1.psi;
      pn.psi1 = mh_log_scale(
          pn.psi1, mcmc.step_psi,
          [&](double psi) {
            return group_loglik(target_stats[n], psi * c1, sigma_s, r_t) +
                   lognormal_logpdf(psi);
          },
          trace.accept_psi);
    }
  }

  // sigma and eta enter both the likelihood and, through the spatial
  // covariance, the coefficient priors; their conditionals carry the
  // MN(A; 0, Sigma_s, Lambda) terms as well
  double coeff_prior_terms(const ParticipantParams& p,
                           const MatrixXd& sigma_s) const {
    double lp = matnorm_logpdf(p.a1, MatrixXd::Zero(n_e, l1), sigma_s,
                               MatrixXd(b1.lambda.asDiagonal()));
    if (p.a0)
      lp += matnorm_logpdf(*p.a0, MatrixXd::Zero(n_e, l0), sigma_s,
                           MatrixXd(b0.lambda.asDiagonal()));
    return lp;
  }

  void update_sigma() {
    ParticipantParams& p0 = st.params[0];
    {
      const MatrixXd b01 = p0.psi1 * p0.a1 * b1.psi;
      const MatrixXd b00 = *p0.psi0 * *p0.a0 * b0.psi;
      const MatrixXd r_t0 = temporal_corr(p0);
      const MatrixXd r_s0 = cs_corr(p0.eta, n_e);
      for (int e = 0; e < n_e; ++e) {
        VectorXd sig = p0.sigma;
        p0.sigma[e] = mh_log_scale(
            p0.sigma[e], mcmc.step_sigma,
            [&](double s) {
              sig[e] = s;
              const MatrixXd sigma_s =
                  sig.asDiagonal() * r_s0 * sig.asDiagonal();
              return group_loglik(pooled, b01, sigma_s, r_t0) +
                     group_loglik(nontarget_stats, b00, sigma_s, r_t0) +
                     coeff_prior_terms(p0, sigma_s) +
                     half_cauchy_logpdf(s, 5.0);
            },
            trace.accept_sigma);
      }
    }
    for (int n = 1; n <= n_src; ++n) {
      ParticipantParams& pn = st.params[n];
      if (st.match.z[n - 1] == 1) continue;  // refreshed in update_a
      const MatrixXd bn1 = pn.psi1 * pn.a1 * b1.psi;
      const MatrixXd r_t = temporal_corr(pn);
      const MatrixXd r_s = cs_corr(pn.eta, n_e);
      for (int e = 0; e < n_e; ++e) {
        VectorXd sig = pn.sigma;
        pn.sigma[e] = mh_log_scale(
            pn.sigma[e], mcmc.step_sigma,
            [&](double s) {
              sig[e] = s;
              const MatrixXd sigma_s =
                  sig.asDiagonal() * r_s * sig.asDiagonal();
              return group_loglik(target_stats[n], bn1, sigma_s, r_t) +
                     coeff_prior_terms(pn, sigma_s) +
                     half_cauchy_logpdf(s, 5.0);
            },
            trace.accept_sigma);
      }
    }
  }

  // exact discrete Gibbs draw on a grid; the prior is uniform so only the
  // conditional log likelihood enters
  template <typename LogLik>
  double grid_gibbs(const std::vector<double>& grid, LogLik&& loglik) {
    if (grid.size() == 1) return grid[0];
    std::vector<double> lw(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) lw[i] = loglik(grid[i]);
    return grid[sample_categorical_log(st.rng, lw)];
  }

  void update_corr() {
    ParticipantParams& p0 = st.params[0];
    {
      const MatrixXd b01 = p0.psi1 * p0.a1 * b1.psi;
      const MatrixXd b00 = *p0.psi0 * *p0.a0 * b0.psi;
      const MatrixXd sigma_s0 = spatial_cov(p0);
      p0.rho = grid_gibbs(cfg.rho_grid, [&](double rho) {
        const MatrixXd r_t = ar1_corr(rho, n_t);
        return group_loglik(pooled, b01, sigma_s0, r_t) +
               group_loglik(nontarget_stats, b00, sigma_s0, r_t);
      });
      const MatrixXd r_t0 = temporal_corr(p0);
      p0.eta = grid_gibbs(cfg.eta_grid, [&](double eta) {
        const MatrixXd sigma_s =
            p0.sigma.asDiagonal() * cs_corr(eta, n_e) * p0.sigma.asDiagonal();
        return group_loglik(pooled, b01, sigma_s, r_t0) +
               group_loglik(nontarget_stats, b00, sigma_s, r_t0) +
               coeff_prior_terms(p0, sigma_s);
      });
    }
    for (int n = 1; n <= n_src; ++n) {
      ParticipantParams& pn = st.params[n];
      if (st.match.z[n - 1] == 1) continue;  // refreshed in update_a
      const MatrixXd bn1 = pn.psi1 * pn.a1 * b1.psi;
      const MatrixXd sigma_s = spatial_cov(pn);
      pn.rho = grid_gibbs(cfg.rho_grid, [&](double rho) {
        return group_loglik(target_stats[n], bn1, sigma_s, ar1_corr(rho, n_t));
      });
      const MatrixXd r_t = temporal_corr(pn);
      pn.eta = grid_gibbs(cfg.eta_grid, [&](double eta) {
        const MatrixXd s =
            pn.sigma.asDiagonal() * cs_corr(eta, n_e) * pn.sigma.asDiagonal();
        return group_loglik(target_stats[n], bn1, s, r_t) +
               coeff_prior_terms(pn, s);
      });
    }
  }

  void update_z() {
    for (int n = 1; n <= n_src; ++n) {
      const double p = match_probability(target_stats[n], st.params[0],
                                         st.params[n], b1, st.match.pi);
      st.match.z[n - 1] = draw_bernoulli(st.rng, p) ? 1 : 0;
    }
  }

  void sweep() {
    refresh_pooled();
    update_a();
    update_psi();
    update_sigma();
    update_corr();
    update_z();
    ++st.iteration;
  }

  void record() {
    Draw d;
    d.p0 = st.params[0];
    d.z = st.match.z;
    d.nuisance.reserve(static_cast<std::size_t>(n_src) * (n_e + 3));
    for (int n = 1; n <= n_src; ++n) {
      const ParticipantParams& pn = st.params[n];
      d.nuisance.push_back(pn.psi1);
      for (int e = 0; e < n_e; ++e) d.nuisance.push_back(pn.sigma[e]);
      d.nuisance.push_back(pn.rho);
      d.nuisance.push_back(pn.eta);
    }
    trace.draws.push_back(std::move(d));
  }

  ChainTrace run() {
    const long total = static_cast<long>(mcmc.n_burnin) +
                       static_cast<long>(mcmc.n_samples) * mcmc.thinning;
    try {
      for (long it = 0; it < total; ++it) {
        sweep();
        if (it >= mcmc.n_burnin &&
            (it - mcmc.n_burnin) % mcmc.thinning == mcmc.thinning - 1)
          record();
      }
    } catch (const NumericalError& err) {
      throw NumericalError("iteration " + std::to_string(st.iteration) + ": " +
                           err.what());
    }
    return std::move(trace);
  }
};

}  // namespace

void McmcConfig::validate() const {
  if (n_chains < 1 || n_burnin < 0 || n_samples < 1 || thinning < 1)
    throw ParameterError("McmcConfig: counts out of range");
  if (!(step_psi > 0.0) || !(step_sigma > 0.0))
    throw ParameterError("McmcConfig: MH step sizes must be positive");
}

ChainTrace run_chain(const McmcConfig& mcmc, const Dataset& data,
                     const ModelConfig& model, const EigenBasis& basis1,
                     const EigenBasis& basis0, std::uint64_t chain_seed) {
  mcmc.validate();
  model.validate();
  data.validate();
  Sampler sampler(mcmc, data, model, basis1, basis0, chain_seed);
  return sampler.run();
}

std::vector<ChainTrace> run_chains(const McmcConfig& mcmc, const Dataset& data,
                                   const ModelConfig& model,
                                   const EigenBasis& basis1,
                                   const EigenBasis& basis0) {
  int max_threads = mcmc.n_chains;
  if (const char* env = std::getenv("BSM_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) max_threads = std::min(max_threads, cap);
  }

  std::vector<ChainTrace> traces(mcmc.n_chains);
  std::vector<std::exception_ptr> failures(mcmc.n_chains);
  std::vector<std::uint64_t> seeds(mcmc.n_chains);
  for (int k = 0; k < mcmc.n_chains; ++k) seeds[k] = mix_seed(mcmc.seed, k);

  int next = 0;
  while (next < mcmc.n_chains) {
    const int batch = std::min(max_threads, mcmc.n_chains - next);
    std::vector<std::thread> workers;
    for (int i = 0; i < batch; ++i) {
      const int k = next + i;
      workers.emplace_back([&, k] {
        try {
          traces[k] = run_chain(mcmc, data, model, basis1, basis0, seeds[k]);
        } catch (...) {
          failures[k] = std::current_exception();
        }
      });
    }
    for (auto& w : workers) w.join();
    next += batch;
  }
  for (auto& f : failures)
    if (f) std::rethrow_exception(f);
  return traces;
}

struct GibbsDriver::Impl {
  McmcConfig mcmc;
  ModelConfig model;
  EigenBasis b1, b0;
  Dataset data;
  std::unique_ptr<Sampler> sampler;

  Impl(const McmcConfig& mcmc_, const Dataset& data_,
       const ModelConfig& model_, const EigenBasis& b1_,
       const EigenBasis& b0_, std::uint64_t seed)
      : mcmc(mcmc_), model(model_), b1(b1_), b0(b0_), data(data_) {
    sampler = std::make_unique<Sampler>(mcmc, data, model, b1, b0, seed);
  }
};

GibbsDriver::GibbsDriver(const McmcConfig& mcmc, const Dataset& data,
                         const ModelConfig& model, const EigenBasis& basis1,
                         const EigenBasis& basis0, std::uint64_t seed)
    : impl_(std::make_unique<Impl>(mcmc, data, model, basis1, basis0, seed)) {}

GibbsDriver::~GibbsDriver() = default;
GibbsDriver::GibbsDriver(GibbsDriver&&) noexcept = default;
GibbsDriver& GibbsDriver::operator=(GibbsDriver&&) noexcept = default;

void GibbsDriver::sweep() { impl_->sampler->sweep(); }

ChainState& GibbsDriver::state() { return impl_->sampler->st; }

void GibbsDriver::replace_data(const Dataset& data) {
  ChainState saved = std::move(impl_->sampler->st);
  impl_->data = data;
  impl_->sampler = std::make_unique<Sampler>(impl_->mcmc, impl_->data,
                                             impl_->model, impl_->b1,
                                             impl_->b0, 0);
  impl_->sampler->st = std::move(saved);
}

double psrf(const std::vector<std::vector<double>>& chains) {
  const std::size_t m = chains.size();
  if (m < 2) throw ParameterError("psrf: need at least 2 chains");
  const std::size_t n = chains[0].size();
  if (n < 10) throw ParameterError("psrf: need at least 10 draws per chain");
  for (const auto& c : chains)
    if (c.size() != n) throw ParameterError("psrf: unequal chain lengths");

  std::vector<double> means(m);
  double w = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    double mean = 0.0;
    for (double v : chains[k]) mean += v;
    mean /= static_cast<double>(n);
    means[k] = mean;
    double var = 0.0;
    for (double v : chains[k]) var += (v - mean) * (v - mean);
    w += var / static_cast<double>(n - 1);
  }
  w /= static_cast<double>(m);
  if (w <= 0.0)
    throw NumericalError("psrf: zero within-chain variance (degenerate chain)");

  double grand = 0.0;
  for (double mu : means) grand += mu;
  grand /= static_cast<double>(m);
  double b = 0.0;
  for (double mu : means) b += (mu - grand) * (mu - grand);
  b *= static_cast<double>(n) / static_cast<double>(m - 1);

  const double nn = static_cast<double>(n);
  const double v_hat = (nn - 1.0) / nn * w + b / nn;
  return std::sqrt(v_hat / w);
}

std::vector<std::pair<std::string, std::vector<double>>> scalar_series(
    const ChainTrace& trace) {
  std::vector<std::pair<std::string, std::vector<double>>> series;
  auto add = [&](const std::string& name) -> std::vector<double>& {
    series.emplace_back(name, std::vector<double>());
    series.back().second.reserve(trace.draws.size());
    return series.back().second;
  };

  {
    auto& v = add("psi1_0");
    for (const Draw& d : trace.draws) v.push_back(d.p0.psi1);
  }
  if (!trace.draws.empty() && trace.draws.front().p0.psi0) {
    auto& v = add("psi0_0");
    for (const Draw& d : trace.draws) v.push_back(*d.p0.psi0);
  }
  for (int e = 0; e < trace.n_channels; ++e) {
    auto& v = add("sigma_0_" + std::to_string(e + 1));
    for (const Draw& d : trace.draws) v.push_back(d.p0.sigma[e]);
  }
  {
    auto& v = add("rho_0");
    for (const Draw& d : trace.draws) v.push_back(d.p0.rho);
  }
  {
    auto& v = add("eta_0");
    for (const Draw& d : trace.draws) v.push_back(d.p0.eta);
  }
  for (std::size_t i = 0; i < trace.nuisance_names.size(); ++i) {
    auto& v = add(trace.nuisance_names[i]);
    for (const Draw& d : trace.draws) v.push_back(d.nuisance[i]);
  }
  return series;
}

std::map<std::string, double> gelman_rubin(
    const std::vector<ChainTrace>& traces) {
  if (traces.size() < 2)
    throw ParameterError("gelman_rubin: need at least 2 chains");
  std::vector<std::vector<std::pair<std::string, std::vector<double>>>> all;
  for (const ChainTrace& t : traces) all.push_back(scalar_series(t));

  std::map<std::string, double> out;
  for (std::size_t p = 0; p < all[0].size(); ++p) {
    std::vector<std::vector<double>> chains;
    for (const auto& series : all) chains.push_back(series[p].second);
    out[all[0][p].first] = psrf(chains);
  }
  return out;
}

}  // namespace bsm

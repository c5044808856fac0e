// Microbenchmarks for the hot paths: the matrix-normal density, the
// pooled-statistics likelihood, one full Gibbs sweep, and per-draw
// character scoring.

#include <benchmark/benchmark.h>

#include "bsm/mcmc.hpp"
#include "bsm/predict.hpp"
#include "bsm/simgen.hpp"

namespace {

using namespace bsm;

MatrixXd random_matrix(Rng& rng, int r, int c) {
  MatrixXd a(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) a(i, j) = draw_normal(rng);
  return a;
}

void bm_matnorm_logpdf(benchmark::State& state) {
  const int e = static_cast<int>(state.range(0));
  const int t = 35;
  Rng rng(1);
  const MatrixXd x = random_matrix(rng, e, t);
  const MatrixXd m = random_matrix(rng, e, t);
  const StructuredCov cov{VectorXd::Constant(e, 2.0), 0.4, 0.6};
  const MatrixXd u = cov.spatial_cov();
  const MatrixXd v = cov.temporal_corr(t);
  for (auto _ : state)
    benchmark::DoNotOptimize(matnorm_logpdf(x, m, u, v));
}
BENCHMARK(bm_matnorm_logpdf)->Arg(1)->Arg(2)->Arg(4);

void bm_group_loglik(benchmark::State& state) {
  const int e = 2, t = 35;
  const int n_epochs = static_cast<int>(state.range(0));
  Rng rng(2);
  GroupStats stats = GroupStats::empty(e, t);
  for (int i = 0; i < n_epochs; ++i)
    stats.add_epoch(random_matrix(rng, e, t));
  const MatrixXd mean = random_matrix(rng, e, t);
  const StructuredCov cov{VectorXd::Constant(e, 2.0), 0.4, 0.6};
  const MatrixXd u = cov.spatial_cov();
  const MatrixXd v = cov.temporal_corr(t);
  for (auto _ : state)
    benchmark::DoNotOptimize(group_loglik(stats, mean, u, v));
}
BENCHMARK(bm_group_loglik)->Arg(12)->Arg(120)->Arg(1200);

void bm_gibbs_sweep(benchmark::State& state) {
  Preset p = make_preset("multi_case_2", 3);
  p.scenario.train_seqs_new = static_cast<int>(state.range(0));
  p.scenario.train_seqs_source = static_cast<int>(state.range(0));
  p.scenario.test_seqs = 0;
  const SimOutput sim = gen_dataset(p.scenario, p.groups);
  const EigenBasis b1 = make_basis(p.model.kernel_target, p.model.n_times,
                                   p.model.truncation_threshold);
  const EigenBasis b0 = make_basis(p.model.kernel_nontarget, p.model.n_times,
                                   p.model.truncation_threshold);
  GibbsDriver drv(McmcConfig{}, sim.train, p.model, b1, b0, 4);
  for (auto _ : state) drv.sweep();
}
BENCHMARK(bm_gibbs_sweep)->Arg(3)->Arg(10);

void bm_char_scoring(benchmark::State& state) {
  const int e = 2, t = 35;
  Rng rng(5);
  const EigenBasis b1 = make_basis(KernelSpec{0.2, 1.2, 1.0}, t, 0.95);
  const EigenBasis b0 = make_basis(KernelSpec{0.3, 1.2, 1.0}, t, 0.95);
  std::vector<Draw> draws;
  for (int i = 0; i < static_cast<int>(state.range(0)); ++i) {
    Draw d;
    d.p0.a1 = random_matrix(rng, e, b1.level);
    d.p0.a0 = random_matrix(rng, e, b0.level);
    d.p0.psi1 = 1.0;
    d.p0.psi0 = 1.0;
    d.p0.sigma = VectorXd::Constant(e, 2.0);
    d.p0.rho = 0.5;
    d.p0.eta = 0.4;
    draws.push_back(std::move(d));
  }
  TestCharacter tc;
  tc.truth = 'T';
  for (int s = 0; s < 5; ++s) {
    TestSequence seq;
    seq.w = rcp::random_sequence(rng);
    for (int j = 0; j < 12; ++j) seq.x.push_back(random_matrix(rng, e, t));
    tc.sequences.push_back(std::move(seq));
  }
  for (auto _ : state)
    benchmark::DoNotOptimize(char_log_posterior(tc.sequences, draws, b1, b0));
}
BENCHMARK(bm_char_scoring)->Arg(30)->Arg(300);

}  // namespace

BENCHMARK_MAIN();

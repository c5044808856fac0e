#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "bsm/numkernel.hpp"
#include "bsm/rng.hpp"

using namespace bsm;

namespace {

// Independent oracle: MVN log density of vec(X) (column stacking) with
// covariance Vt (x) U, assembled explicitly.
double vec_mvn_logpdf(const MatrixXd& x, const MatrixXd& m, const MatrixXd& u,
                      const MatrixXd& v) {
  const int e = static_cast<int>(x.rows());
  const int t = static_cast<int>(x.cols());
  const int d = e * t;
  MatrixXd cov(d, d);
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < t; ++j)
      cov.block(i * e, j * e, e, e) = v(i, j) * u;

  VectorXd r(d);
  for (int j = 0; j < t; ++j)
    for (int i = 0; i < e; ++i) r[j * e + i] = x(i, j) - m(i, j);

  Eigen::LLT<MatrixXd> llt(cov);
  REQUIRE(llt.info() == Eigen::Success);
  const double logdet =
      2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const VectorXd z = llt.matrixL().solve(r);
  return -0.5 * (d * std::log(2.0 * std::numbers::pi) + logdet +
                 z.squaredNorm());
}

MatrixXd random_spd(Rng& rng, int n) {
  MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = draw_normal(rng);
  return a * a.transpose() + n * MatrixXd::Identity(n, n);
}

MatrixXd random_matrix(Rng& rng, int r, int c) {
  MatrixXd a(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) a(i, j) = draw_normal(rng);
  return a;
}

}  // namespace

TEST_CASE("uniform time grid spans the unit interval") {
  const TimeGrid g = TimeGrid::uniform(35);
  CHECK(g.size() == 35);
  CHECK(g.points[0] == doctest::Approx(0.0));
  CHECK(g.points[34] == doctest::Approx(1.0));
  CHECK(g.points[1] - g.points[0] ==
        doctest::Approx(g.points[20] - g.points[19]));
  CHECK_THROWS_AS(TimeGrid::uniform(1), ParameterError);
}

TEST_CASE("kernel spec domain") {
  CHECK_THROWS_AS((KernelSpec{-0.1, 1.2, 1.0}).validate(), ParameterError);
  CHECK_THROWS_AS((KernelSpec{0.2, 2.0, 1.0}).validate(), ParameterError);
  CHECK_THROWS_AS((KernelSpec{0.2, 1.2, 0.0}).validate(), ParameterError);
  CHECK_NOTHROW((KernelSpec{0.2, 0.0, 1.0}).validate());
}

TEST_CASE("gamma-exponential kernel values") {
  const TimeGrid g = TimeGrid::uniform(5);
  const MatrixXd k = gamma_exp_kernel(g, KernelSpec{0.2, 1.2, 2.5});
  for (int i = 0; i < 5; ++i) CHECK(k(i, i) == doctest::Approx(2.5));
  CHECK((k - k.transpose()).cwiseAbs().maxCoeff() == 0.0);

  // |d|^2 = 1 at s0 = 1, gamma0 = 1: exp(-1)
  TimeGrid two;
  two.points = VectorXd(2);
  two.points << 0.0, 1.0;
  const MatrixXd k2 = gamma_exp_kernel(two, KernelSpec{1.0, 1.0, 1.0});
  CHECK(k2(0, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("default kernel spectrum: negative tail is small relative") {
  // the literal squared-distance kernel is mildly indefinite for gamma0 > 1;
  // the contract is that the negative part stays within 5% of the top
  // eigenvalue, which eigen_truncate clamps away
  const MatrixXd k =
      gamma_exp_kernel(TimeGrid::uniform(35), KernelSpec{0.2, 1.2, 1.0});
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(k);
  const double lmax = es.eigenvalues().maxCoeff();
  CHECK(es.eigenvalues().minCoeff() >= -0.05 * lmax);
  CHECK_NOTHROW(eigen_truncate(k, 0.95));
}

TEST_CASE("eigen_truncate level rule") {
  MatrixXd k = MatrixXd::Zero(4, 4);
  k.diagonal() << 0.9, 0.05, 0.03, 0.02;
  const EigenBasis b = eigen_truncate(k, 0.95);
  CHECK(b.level == 2);
  CHECK(b.lambda[0] == doctest::Approx(0.9));
  CHECK(b.lambda[1] == doctest::Approx(0.05));
  CHECK(b.energy_fraction >= 0.95);

  const EigenBasis id = eigen_truncate(MatrixXd::Identity(4, 4), 0.95);
  CHECK(id.level == 4);
}

TEST_CASE("eigen_truncate basis properties") {
  const MatrixXd k =
      gamma_exp_kernel(TimeGrid::uniform(25), KernelSpec{0.2, 1.2, 1.0});
  const EigenBasis b = eigen_truncate(k, 0.95);

  // orthonormal rows
  const MatrixXd gram = b.psi * b.psi.transpose();
  CHECK((gram - MatrixXd::Identity(b.level, b.level)).cwiseAbs().maxCoeff() <=
        1e-8);
  // non-increasing positive eigenvalues
  for (int l = 0; l < b.level; ++l) {
    CHECK(b.lambda[l] > 0.0);
    if (l > 0) CHECK(b.lambda[l] <= b.lambda[l - 1]);
  }
  // reconstruction quality at the retained level
  const MatrixXd rec =
      b.psi.transpose() * b.lambda.asDiagonal() * b.psi;
  CHECK((k - rec).norm() / k.norm() <= 0.05);
  // minimality: dropping the last eigenfunction falls below the threshold
  if (b.level > 1) {
    const double total_est = b.lambda.sum() / b.energy_fraction;
    const double without_last = b.lambda.head(b.level - 1).sum() / total_est;
    CHECK(without_last < 0.95);
  }
  CHECK_THROWS_AS(eigen_truncate(k, 0.0), ParameterError);
  CHECK_THROWS_AS(eigen_truncate(-MatrixXd::Identity(3, 3), 0.95),
                  NumericalError);
}

TEST_CASE("ar1 correlation") {
  CHECK(ar1_corr(0.0, 3).isIdentity(0.0));
  const MatrixXd r = ar1_corr(0.5, 3);
  CHECK(r(0, 1) == doctest::Approx(0.5));
  CHECK(r(0, 2) == doctest::Approx(0.25));
  CHECK(r(1, 0) == doctest::Approx(0.5));

  // det R = (1 - rho^2)^(T-1)
  const double det = ar1_corr(0.7, 5).determinant();
  CHECK(det == doctest::Approx(std::pow(1.0 - 0.49, 4)).epsilon(1e-10));
  CHECK_THROWS_AS(ar1_corr(1.0, 3), ParameterError);
  CHECK_THROWS_AS(ar1_corr(-0.1, 3), ParameterError);
}

TEST_CASE("compound symmetry correlation") {
  CHECK(cs_corr(0.5, 1)(0, 0) == doctest::Approx(1.0));
  const MatrixXd r = cs_corr(0.5, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(r(i, j) == doctest::Approx(i == j ? 1.0 : 0.5));

  // spectrum is {1 + (E-1) eta, 1 - eta}
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(cs_corr(0.9, 4));
  CHECK(es.eigenvalues().minCoeff() == doctest::Approx(0.1).epsilon(1e-10));
  CHECK(es.eigenvalues().maxCoeff() ==
        doctest::Approx(1.0 + 3 * 0.9).epsilon(1e-10));
  CHECK_THROWS_AS(cs_corr(1.0, 2), ParameterError);
}

TEST_CASE("structured covariance assembly") {
  VectorXd sigma(2);
  sigma << 2.0, 3.0;
  const StructuredCov cov{sigma, 0.4, 0.6};
  const MatrixXd s = cov.spatial_cov();
  CHECK(s(0, 0) == doctest::Approx(4.0));
  CHECK(s(1, 1) == doctest::Approx(9.0));
  CHECK(s(0, 1) == doctest::Approx(2.0 * 3.0 * 0.4));
  CHECK(cov.temporal_corr(4)(0, 3) == doctest::Approx(std::pow(0.6, 3)));
}

TEST_CASE("matrix-normal log density equals the vec-MVN oracle") {
  Rng rng(1234);
  for (int rep = 0; rep < 50; ++rep) {
    const int e = 1 + draw_index(rng, 3);
    const int t = 1 + draw_index(rng, 5);
    const MatrixXd u = random_spd(rng, e);
    const MatrixXd v = random_spd(rng, t);
    const MatrixXd m = random_matrix(rng, e, t);
    const MatrixXd x = random_matrix(rng, e, t);
    const double got = matnorm_logpdf(x, m, u, v);
    const double want = vec_mvn_logpdf(x, m, u, v);
    CHECK(std::abs(got - want) <= 1e-9);
    // transposition with swapped covariances
    const double tr = matnorm_logpdf(x.transpose(), m.transpose(), v, u);
    CHECK(std::abs(got - tr) <= 1e-9);
  }
}

TEST_CASE("matrix-normal closed forms and errors") {
  Rng rng(7);
  const MatrixXd u = random_spd(rng, 2);
  const MatrixXd v = random_spd(rng, 3);
  const MatrixXd m = random_matrix(rng, 2, 3);
  // X = M: -(1/2)(ET log 2pi + T log|U| + E log|V|)
  const double want =
      -0.5 * (6.0 * std::log(2.0 * std::numbers::pi) +
              3.0 * std::log(u.determinant()) +
              2.0 * std::log(v.determinant()));
  CHECK(matnorm_logpdf(m, m, u, v) == doctest::Approx(want).epsilon(1e-10));

  // scalar case: normal log density
  MatrixXd s(1, 1), one(1, 1), x(1, 1), mu(1, 1);
  s << 4.0;
  one << 1.0;
  x << 1.7;
  mu << 0.5;
  const double scalar =
      -0.5 * std::log(2.0 * std::numbers::pi * 4.0) -
      0.5 * (1.7 - 0.5) * (1.7 - 0.5) / 4.0;
  CHECK(matnorm_logpdf(x, mu, s, one) ==
        doctest::Approx(scalar).epsilon(1e-12));

  CHECK_THROWS_AS(matnorm_logpdf(m, m.transpose(), u, v), ParameterError);
  CHECK_THROWS_AS(matnorm_logpdf(m, m, -u, v), NumericalError);
}

TEST_CASE("make_basis composes grid, kernel and truncation") {
  const EigenBasis b = make_basis(KernelSpec{0.2, 1.2, 1.0}, 35, 0.95);
  CHECK(b.t0() == 35);
  CHECK(b.level >= 1);
  CHECK(b.energy_fraction >= 0.95);
}

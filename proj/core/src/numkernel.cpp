#include "bsm/numkernel.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace bsm {

TimeGrid TimeGrid::uniform(int t0) {
  if (t0 < 2) throw ParameterError("TimeGrid: need at least 2 points");
  TimeGrid g;
  g.points = VectorXd::LinSpaced(t0, 0.0, 1.0);
  return g;
}

void KernelSpec::validate() const {
  if (!(s0 > 0.0)) throw ParameterError("KernelSpec: s0 must be positive");
  if (!(gamma0 >= 0.0 && gamma0 < 2.0))
    throw ParameterError("KernelSpec: gamma0 must lie in [0, 2)");
  if (!(psi0 > 0.0)) throw ParameterError("KernelSpec: psi0 must be positive");
}

MatrixXd gamma_exp_kernel(const TimeGrid& grid, const KernelSpec& spec) {
  spec.validate();
  const int t0 = grid.size();
  MatrixXd k(t0, t0);
  for (int i = 0; i < t0; ++i) {
    k(i, i) = spec.psi0;
    for (int j = 0; j < i; ++j) {
      const double d = grid.points[i] - grid.points[j];
      const double v =
          spec.psi0 * std::exp(-std::pow(d * d / spec.s0, spec.gamma0));
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

EigenBasis eigen_truncate(const MatrixXd& k, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw ParameterError("eigen_truncate: threshold must be in (0, 1]");
  if (k.rows() != k.cols())
    throw ParameterError("eigen_truncate: matrix must be square");

  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (k + k.transpose()));
  if (es.info() != Eigen::Success)
    throw NumericalError("eigen_truncate: eigendecomposition failed");

  const int t0 = static_cast<int>(k.rows());
  VectorXd ev = es.eigenvalues();  // ascending
  // The gamma-exponential kernel with the squared distance inside the power
  // is mildly indefinite for gamma0 > 1; the Mercer construction keeps the
  // positive spectrum only. A small negative tail (relative to the top
  // eigenvalue) is dropped; a large one means the input is not a kernel.
  const double tol = 0.05 * std::max(1e-8, ev[t0 - 1]);
  for (int i = 0; i < t0; ++i) {
    if (ev[i] < -tol)
      throw NumericalError("eigen_truncate: matrix is not PSD (eigenvalue " +
                           std::to_string(ev[i]) + ")");
    if (ev[i] < 0.0) ev[i] = 0.0;
  }

  const double total = ev.sum();
  if (!(total > 0.0))
    throw NumericalError("eigen_truncate: zero total eigenvalue mass");

  // walk from the largest eigenvalue down until the mass rule is met
  int level = 0;
  double cum = 0.0;
  for (int i = t0 - 1; i >= 0; --i) {
    cum += ev[i];
    ++level;
    if (cum / total >= threshold) break;
  }

  EigenBasis basis;
  basis.level = level;
  basis.energy_fraction = cum / total;
  basis.lambda.resize(level);
  basis.psi.resize(level, t0);
  for (int l = 0; l < level; ++l) {
    basis.lambda[l] = ev[t0 - 1 - l];
    basis.psi.row(l) = es.eigenvectors().col(t0 - 1 - l).transpose();
  }
  return basis;
}

EigenBasis make_basis(const KernelSpec& spec, int t0, double threshold) {
  return eigen_truncate(gamma_exp_kernel(TimeGrid::uniform(t0), spec),
                        threshold);
}

MatrixXd ar1_corr(double rho, int t) {
  if (!(rho >= 0.0 && rho < 1.0))
    throw ParameterError("ar1_corr: rho must lie in [0, 1)");
  if (t < 1) throw ParameterError("ar1_corr: size must be positive");
  MatrixXd r(t, t);
  for (int i = 0; i < t; ++i)
    for (int j = 0; j <= i; ++j) {
      const double v = std::pow(rho, i - j);
      r(i, j) = v;
      r(j, i) = v;
    }
  return r;
}

MatrixXd cs_corr(double eta, int e) {
  if (!(eta >= 0.0 && eta < 1.0))
    throw ParameterError("cs_corr: eta must lie in [0, 1)");
  if (e < 1) throw ParameterError("cs_corr: size must be positive");
  MatrixXd r = MatrixXd::Constant(e, e, eta);
  r.diagonal().setOnes();
  return r;
}

MatrixXd StructuredCov::spatial_cov() const {
  const int e = static_cast<int>(sigma.size());
  for (int i = 0; i < e; ++i)
    if (!(sigma[i] > 0.0))
      throw ParameterError("StructuredCov: sigma must be positive");
  return sigma.asDiagonal() * cs_corr(eta, e) * sigma.asDiagonal();
}

MatrixXd StructuredCov::temporal_corr(int t) const { return ar1_corr(rho, t); }

double matnorm_logpdf(const MatrixXd& x, const MatrixXd& m, const MatrixXd& u,
                      const MatrixXd& v) {
  const auto e = x.rows();
  const auto t = x.cols();
  if (m.rows() != e || m.cols() != t || u.rows() != e || u.cols() != e ||
      v.rows() != t || v.cols() != t)
    throw ParameterError("matnorm_logpdf: dimension mismatch");

  Eigen::LLT<MatrixXd> llt_u(u);
  if (llt_u.info() != Eigen::Success)
    throw NumericalError("matnorm_logpdf: row covariance is not PD");
  Eigen::LLT<MatrixXd> llt_v(v);
  if (llt_v.info() != Eigen::Success)
    throw NumericalError("matnorm_logpdf: column covariance is not PD");

  const double logdet_u =
      2.0 * llt_u.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double logdet_v =
      2.0 * llt_v.matrixL().toDenseMatrix().diagonal().array().log().sum();

  // tr(V^-1 (X-M)^T U^-1 (X-M)) = || L_u^-1 (X-M) L_v^-T ||_F^2
  const MatrixXd r = llt_u.matrixL().solve(x - m);
  const MatrixXd q = llt_v.matrixL().solve(r.transpose());
  const double quad = q.squaredNorm();

  const double d = static_cast<double>(e * t);
  return -0.5 * (d * std::log(2.0 * std::numbers::pi) +
                 static_cast<double>(t) * logdet_u +
                 static_cast<double>(e) * logdet_v + quad);
}

}  // namespace bsm

#ifndef BSM_NUMKERNEL_HPP
#define BSM_NUMKERNEL_HPP

#include <Eigen/Dense>

#include "bsm/errors.hpp"

namespace bsm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Equally spaced time indices on [0, 1]. Normalizing to the unit interval
// keeps kernel length-scales comparable across window lengths.
struct TimeGrid {
  VectorXd points;

  static TimeGrid uniform(int t0);
  int size() const { return static_cast<int>(points.size()); }
};

// gamma-exponential kernel hyper-parameters.
struct KernelSpec {
  double s0 = 0.2;      // length scale, > 0
  double gamma0 = 1.2;  // exponent, in [0, 2)
  double psi0 = 1.0;    // variance scale, > 0 (1 for basis construction)

  void validate() const;
};

// Truncated eigendecomposition of a kernel Gram matrix. Rows of psi are
// orthonormal eigenvectors; lambda is descending.
struct EigenBasis {
  MatrixXd psi;     // L x T0
  VectorXd lambda;  // L, positive, non-increasing
  int level = 0;    // L
  double energy_fraction = 0.0;

  int t0() const { return static_cast<int>(psi.cols()); }
};

// Channel noise scales plus the spatial / temporal correlation parameters.
struct StructuredCov {
  VectorXd sigma;  // per-channel standard deviations, > 0
  double eta = 0.5;  // compound-symmetry parameter, (0, 1)
  double rho = 0.5;  // AR(1) parameter, (0, 1)

  MatrixXd spatial_cov() const;        // V R^s V
  MatrixXd temporal_corr(int t) const;  // R^t on t time points
};

// k(s_i, s_j) = psi0 * exp(-(|s_i - s_j|^2 / s0)^gamma0)
MatrixXd gamma_exp_kernel(const TimeGrid& grid, const KernelSpec& spec);

// Smallest L whose eigenvalue mass reaches `threshold` (inclusive).
// Negative eigenvalues within 5% of the largest are clamped to zero (the
// kernel is mildly indefinite for gamma0 > 1); anything more negative is a
// numerical-domain error.
EigenBasis eigen_truncate(const MatrixXd& k, double threshold);

// Gram matrix of `spec` on a uniform grid of t0 points, truncated.
EigenBasis make_basis(const KernelSpec& spec, int t0, double threshold);

// AR(1) / exponential-decay correlation: entry (i,j) = rho^|i-j|.
MatrixXd ar1_corr(double rho, int t);

// Compound symmetry: unit diagonal, constant off-diagonal eta.
MatrixXd cs_corr(double eta, int e);

// log density of MN(M, U, V) at X; equals the MVN log density of vec(X)
// (column stacking) with covariance V (x) U.
double matnorm_logpdf(const MatrixXd& x, const MatrixXd& m, const MatrixXd& u,
                      const MatrixXd& v);

}  // namespace bsm

#endif

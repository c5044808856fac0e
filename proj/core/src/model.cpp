#include "bsm/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace bsm {

namespace {

bool on_grid(double v, const std::vector<double>& grid) {
  return std::any_of(grid.begin(), grid.end(),
                     [v](double g) { return std::abs(g - v) < 1e-9; });
}

}  // namespace

void Dataset::validate() const {
  if (participants.empty())
    throw ValidationError("Dataset: no participants");
  for (std::size_t n = 0; n < participants.size(); ++n) {
    for (const Epoch& ep : participants[n]) {
      if (ep.x.rows() != n_channels || ep.x.cols() != n_times)
        throw ValidationError("Dataset: epoch dimensions inconsistent for participant " +
                              std::to_string(n));
      if (ep.y != 0 && ep.y != 1)
        throw ValidationError("Dataset: stimulus type must be 0 or 1");
      if (ep.stim_code < 1 || ep.stim_code > rcp::kCodes)
        throw ValidationError("Dataset: stimulus code out of range");
    }
  }
}

void ParticipantParams::validate() const {
  if (!(psi1 > 0.0)) throw ParameterError("psi1 must be positive");
  for (int e = 0; e < sigma.size(); ++e)
    if (!(sigma[e] > 0.0)) throw ParameterError("sigma must be positive");
  if (!(rho > 0.0 && rho < 1.0)) throw ParameterError("rho must be in (0,1)");
  if (!(eta > 0.0 && eta < 1.0)) throw ParameterError("eta must be in (0,1)");
  if (a0.has_value() != psi0.has_value())
    throw ContractError("a0 and psi0 must be set together");
  if (psi0 && !(*psi0 > 0.0)) throw ParameterError("psi0 must be positive");
}

std::vector<double> ModelConfig::default_grid() {
  std::vector<double> g;
  for (int i = 1; i <= 19; ++i) g.push_back(0.05 * i);
  return g;
}

void ModelConfig::validate() const {
  kernel_target.validate();
  kernel_nontarget.validate();
  if (!(truncation_threshold > 0.0 && truncation_threshold <= 1.0))
    throw ParameterError("truncation threshold must be in (0, 1]");
  if (rho_grid.empty() || eta_grid.empty())
    throw ParameterError("rho/eta grids must be non-empty");
  for (double v : rho_grid)
    if (!(v > 0.0 && v < 1.0)) throw ParameterError("rho grid values must be in (0,1)");
  for (double v : eta_grid)
    if (!(v > 0.0 && v < 1.0)) throw ParameterError("eta grid values must be in (0,1)");
  if (!(pi > 0.0 && pi < 1.0)) throw ParameterError("pi must be in (0,1)");
  if (!(delta_z > 0.0 && delta_z < 1.0))
    throw ParameterError("delta_z must be in (0,1)");
  if (n_channels < 1 || n_times < 2)
    throw ParameterError("bad data dimensions");
}

MatrixXd assemble_mean(const ParticipantParams& params, int y,
                       const EigenBasis& basis1, const EigenBasis& basis0) {
  if (y == 1) {
    if (params.a1.cols() != basis1.level)
      throw ParameterError("assemble_mean: A1 / basis level mismatch");
    return params.psi1 * params.a1 * basis1.psi;
  }
  if (!params.a0 || !params.psi0)
    throw ContractError(
        "assemble_mean: non-target mean requested for a participant without "
        "non-target parameters");
  if (params.a0->cols() != basis0.level)
    throw ParameterError("assemble_mean: A0 / basis level mismatch");
  return *params.psi0 * *params.a0 * basis0.psi;
}

double epoch_loglik(const MatrixXd& x, const MatrixXd& mean,
                    const StructuredCov& cov) {
  return matnorm_logpdf(x, mean, cov.spatial_cov(),
                        cov.temporal_corr(static_cast<int>(x.cols())));
}

double source_target_loglik(const std::vector<Epoch>& epochs,
                            const ParticipantParams& params,
                            const EigenBasis& basis1) {
  bool any = false;
  MatrixXd mean;
  double total = 0.0;
  for (const Epoch& ep : epochs) {
    if (ep.y != 1) continue;
    if (!any) {
      mean = params.psi1 * params.a1 * basis1.psi;
      any = true;
    }
    total += epoch_loglik(ep.x, mean, params.cov());
  }
  return total;
}

double lognormal_logpdf(double x) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  const double lx = std::log(x);
  return -lx - 0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * lx * lx;
}

double half_cauchy_logpdf(double x, double scale) {
  if (x < 0.0) return -std::numeric_limits<double>::infinity();
  return std::log(2.0 / (std::numbers::pi * scale)) -
         std::log1p((x / scale) * (x / scale));
}

double log_priors(const ParticipantParams& params, const EigenBasis& basis1,
                  const EigenBasis& basis0, const ModelConfig& config) {
  params.validate();
  if (!on_grid(params.rho, config.rho_grid))
    throw ParameterError("log_priors: rho is not on the candidate grid");
  if (!on_grid(params.eta, config.eta_grid))
    throw ParameterError("log_priors: eta is not on the candidate grid");

  double lp = lognormal_logpdf(params.psi1);
  for (int e = 0; e < params.sigma.size(); ++e)
    lp += half_cauchy_logpdf(params.sigma[e], 5.0);
  lp -= std::log(static_cast<double>(config.rho_grid.size()));
  lp -= std::log(static_cast<double>(config.eta_grid.size()));

  const MatrixXd sigma_s = params.cov().spatial_cov();
  lp += matnorm_logpdf(params.a1, MatrixXd::Zero(params.a1.rows(), basis1.level),
                       sigma_s, MatrixXd(basis1.lambda.asDiagonal()));
  if (params.a0) {
    lp += lognormal_logpdf(*params.psi0);
    lp += matnorm_logpdf(*params.a0,
                         MatrixXd::Zero(params.a0->rows(), basis0.level),
                         sigma_s, MatrixXd(basis0.lambda.asDiagonal()));
  }
  return lp;
}

GroupStats GroupStats::empty(int e, int t0) {
  GroupStats s;
  s.n_channels = e;
  s.n_times = t0;
  s.sum_x = MatrixXd::Zero(e, t0);
  s.cross.assign(static_cast<std::size_t>(e) * e, MatrixXd::Zero(t0, t0));
  return s;
}

void GroupStats::add_epoch(const MatrixXd& x) {
  ++count;
  sum_x += x;
  for (int e1 = 0; e1 < n_channels; ++e1)
    for (int e2 = 0; e2 <= e1; ++e2) {
      cross[e1 * n_channels + e2].noalias() +=
          x.row(e1).transpose() * x.row(e2);
      if (e2 != e1)
        cross[e2 * n_channels + e1] = cross[e1 * n_channels + e2].transpose();
    }
}

void GroupStats::merge(const GroupStats& other) {
  count += other.count;
  sum_x += other.sum_x;
  for (std::size_t i = 0; i < cross.size(); ++i) cross[i] += other.cross[i];
}

GroupStats collect_stats(const std::vector<Epoch>& epochs, int y_filter,
                         int e, int t0) {
  GroupStats s = GroupStats::empty(e, t0);
  for (const Epoch& ep : epochs)
    if (ep.y == y_filter) s.add_epoch(ep.x);
  return s;
}

double group_loglik(const GroupStats& stats, const MatrixXd& b,
                    const MatrixXd& sigma_s, const MatrixXd& r_t) {
  if (stats.count == 0) return 0.0;
  const int e = stats.n_channels;
  const int t0 = stats.n_times;
  const double m = static_cast<double>(stats.count);

  Eigen::LLT<MatrixXd> llt_s(sigma_s);
  if (llt_s.info() != Eigen::Success)
    throw NumericalError("group_loglik: spatial covariance is not PD");
  Eigen::LLT<MatrixXd> llt_t(r_t);
  if (llt_t.info() != Eigen::Success)
    throw NumericalError("group_loglik: temporal correlation is not PD");

  const MatrixXd w = llt_s.solve(MatrixXd::Identity(e, e));
  const double logdet_s =
      2.0 * llt_s.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double logdet_t =
      2.0 * llt_t.matrixL().toDenseMatrix().diagonal().array().log().sum();

  // sum_i (X_i - B)^T W (X_i - B), assembled from the cached cross products
  MatrixXd m2 = MatrixXd::Zero(t0, t0);
  for (int e1 = 0; e1 < e; ++e1)
    for (int e2 = 0; e2 < e; ++e2)
      if (w(e1, e2) != 0.0) m2 += w(e1, e2) * stats.cross[e1 * e + e2];
  const MatrixXd wb = w * b;                       // E x T0
  const MatrixXd cross_term = stats.sum_x.transpose() * wb;  // T0 x T0
  m2 -= cross_term;
  m2 -= cross_term.transpose();
  m2.noalias() += m * b.transpose() * wb;

  const double quad = llt_t.solve(m2).trace();
  return -0.5 * (m * e * t0 * std::log(2.0 * std::numbers::pi) +
                 m * t0 * logdet_s + m * e * logdet_t + quad);
}

}  // namespace bsm

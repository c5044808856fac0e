#ifndef BSM_MODEL_HPP
#define BSM_MODEL_HPP

#include <optional>
#include <vector>

#include "bsm/numkernel.hpp"
#include "bsm/rcp.hpp"

namespace bsm {

// One extracted stimulus response: channels x time feature matrix plus the
// flash bookkeeping it came from.
struct Epoch {
  MatrixXd x;         // E x T0
  int y = 0;          // 1 = target flash
  int char_idx = 0;   // which spelled character
  int seq_idx = 0;    // which sequence within that character
  int stim_code = 0;  // 1..12
};

struct Dataset {
  int n_channels = 0;
  int n_times = 0;
  // participants[0] is the new participant; 1..N are sources.
  std::vector<std::vector<Epoch>> participants;

  int n_sources() const {
    return participants.empty() ? 0
                                : static_cast<int>(participants.size()) - 1;
  }
  void validate() const;
};

// Per-participant parameter block. Sources carry only the target-side
// parameters; the non-target pair (a0, psi0) exists for the new participant.
struct ParticipantParams {
  MatrixXd a1;     // E x L1 target coefficients
  double psi1 = 1.0;
  VectorXd sigma;  // E channel noise scales
  double rho = 0.5;
  double eta = 0.5;
  std::optional<MatrixXd> a0;  // E x L0, new participant only
  std::optional<double> psi0;

  StructuredCov cov() const { return StructuredCov{sigma, eta, rho}; }
  void validate() const;
};

struct MatchVector {
  std::vector<int> z;  // N indicators
  double pi = 0.5;     // shared prior match probability
};

struct ModelConfig {
  KernelSpec kernel_target{0.2, 1.2, 1.0};
  KernelSpec kernel_nontarget{0.3, 1.2, 1.0};
  double truncation_threshold = 0.95;
  std::vector<double> rho_grid = default_grid();
  std::vector<double> eta_grid = default_grid();
  double pi = 0.5;
  double delta_z = 0.5;
  int n_channels = 2;
  int n_times = 35;

  static std::vector<double> default_grid();  // {0.05, 0.10, ..., 0.95}
  void validate() const;
};

// psi1 * A1 * Psi1 for target flashes, psi0 * A0 * Psi0 for non-target.
// Requesting the non-target mean without (a0, psi0) is a contract error:
// source non-target data are never modeled.
MatrixXd assemble_mean(const ParticipantParams& params, int y,
                       const EigenBasis& basis1, const EigenBasis& basis0);

// Matrix-normal log likelihood of one epoch.
double epoch_loglik(const MatrixXd& x, const MatrixXd& mean,
                    const StructuredCov& cov);

// Sum of target-epoch log likelihoods for a source participant.
double source_target_loglik(const std::vector<Epoch>& epochs,
                            const ParticipantParams& params,
                            const EigenBasis& basis1);

// Joint log prior: LN(0,1) on the psi's, HC(0,5) per sigma, discrete
// uniform on the rho/eta grids, matrix-normal on the coefficient blocks.
double log_priors(const ParticipantParams& params, const EigenBasis& basis1,
                  const EigenBasis& basis0, const ModelConfig& config);

double lognormal_logpdf(double x);           // LN(0, 1)
double half_cauchy_logpdf(double x, double scale);

// --- pooled-likelihood sufficient statistics ---------------------------
//
// For a group of epochs sharing one mean and covariance,
//   sum_i log MN(X_i; B, Sigma_s, R_t)
// depends on the data only through the epoch count, sum_i X_i, and the
// channel-pair cross products sum_i X_i(e,:)^T X_i(e',:). Those are cached
// here once; every sampler conditional then evaluates in O(E^2 T^2).
struct GroupStats {
  int count = 0;
  MatrixXd sum_x;                  // E x T0
  std::vector<MatrixXd> cross;     // E*E matrices of size T0 x T0
  int n_channels = 0;
  int n_times = 0;

  static GroupStats empty(int e, int t0);
  void add_epoch(const MatrixXd& x);
  void merge(const GroupStats& other);
};

GroupStats collect_stats(const std::vector<Epoch>& epochs, int y_filter,
                         int e, int t0);

// Pooled log likelihood of the whole group under mean B and the given
// covariance pair.
double group_loglik(const GroupStats& stats, const MatrixXd& b,
                    const MatrixXd& sigma_s, const MatrixXd& r_t);

}  // namespace bsm

#endif

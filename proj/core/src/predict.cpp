#include "bsm/predict.hpp"

#include <algorithm>
#include <cmath>

namespace bsm {

namespace {

void check_sequence(const TestSequence& seq, int n_channels) {
  if (seq.x.size() != rcp::kCodes)
    throw ValidationError("test sequence must contain exactly 12 epochs");
  rcp::validate_code_seq(seq.w);
  for (const MatrixXd& x : seq.x)
    if (x.rows() != n_channels || x.cols() < 1)
      throw ValidationError("test sequence: epoch dimensions inconsistent");
}

// Per-draw evaluation context. The log-likelihood ratio of target vs
// non-target mean is linear in the epoch:
//   l1(X) - l0(X) = <D, X> - c0,  D = Sigma_s^{-1} (M1 - M0) R_t^{-1},
// so after this setup each epoch costs one E*T0 dot product.
struct DrawContext {
  MatrixXd d;      // E x T0
  double c0 = 0.0;

  DrawContext(const Draw& draw, const EigenBasis& basis1,
              const EigenBasis& basis0, int t0) {
    const MatrixXd m1 = assemble_mean(draw.p0, 1, basis1, basis0);
    const MatrixXd m0 = assemble_mean(draw.p0, 0, basis1, basis0);
    const StructuredCov cov = draw.p0.cov();
    Eigen::LLT<MatrixXd> llt_s(cov.spatial_cov());
    Eigen::LLT<MatrixXd> llt_t(cov.temporal_corr(t0));
    if (llt_s.info() != Eigen::Success || llt_t.info() != Eigen::Success)
      throw NumericalError("char posterior: covariance is not PD");
    const MatrixXd w1 = llt_t.solve(llt_s.solve(m1).transpose()).transpose();
    const MatrixXd w0 = llt_t.solve(llt_s.solve(m0).transpose()).transpose();
    d = w1 - w0;
    c0 = 0.5 * (w1.cwiseProduct(m1).sum() - w0.cwiseProduct(m0).sum());
  }

  double delta(const MatrixXd& x) const {
    return d.cwiseProduct(x).sum() - c0;
  }
};

// Position of each code within a sequence's permutation.
std::array<int, rcp::kCodes> code_positions(const rcp::CodeSeq& w) {
  std::array<int, rcp::kCodes> pos{};
  for (int j = 0; j < rcp::kCodes; ++j) pos[w[j] - 1] = j;
  return pos;
}

// Row and column codes (0-based) per candidate character, fixed table.
struct CodeTable {
  std::array<std::pair<int, int>, rcp::kChars> codes;
  CodeTable() {
    for (int c = 0; c < rcp::kChars; ++c) {
      const auto [row_code, col_code] = rcp::target_codes(rcp::char_at(c));
      codes[c] = {row_code - 1, col_code - 1};
    }
  }
};
const CodeTable kCodeTable;

void add_normalized(const std::array<double, rcp::kChars>& score,
                    std::array<double, rcp::kChars>& probs_acc) {
  const double mx = *std::max_element(score.begin(), score.end());
  double total = 0.0;
  std::array<double, rcp::kChars> w;
  for (int c = 0; c < rcp::kChars; ++c) {
    w[c] = std::exp(score[c] - mx);
    total += w[c];
  }
  for (int c = 0; c < rcp::kChars; ++c) probs_acc[c] += w[c] / total;
}

}  // namespace

void CharPosterior::validate() const {
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw ValidationError("CharPosterior: negative entry");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw ValidationError("CharPosterior: probabilities do not sum to 1");
}

SelectionDecision select_model(const ChainTrace& trace_bsm, double delta_z) {
  if (trace_bsm.draws.empty())
    throw ContractError("select_model: empty trace");
  SelectionDecision d;
  d.delta_z = delta_z;
  d.match_means.assign(trace_bsm.n_sources, 0.0);
  for (const Draw& draw : trace_bsm.draws)
    for (int n = 0; n < trace_bsm.n_sources; ++n)
      d.match_means[n] += draw.z[n];
  const double inv = 1.0 / static_cast<double>(trace_bsm.draws.size());
  bool any = false;
  for (double& m : d.match_means) {
    m *= inv;
    any = any || m >= delta_z;
  }
  d.mode = any ? "BSM" : "BSM-Reference";
  return d;
}

CharPosterior char_log_posterior(const std::vector<TestSequence>& sequences,
                                 const std::vector<Draw>& draws,
                                 const EigenBasis& basis1,
                                 const EigenBasis& basis0) {
  if (draws.empty()) throw ContractError("char_log_posterior: no draws");
  if (sequences.empty())
    throw ValidationError("char_log_posterior: no test sequences");
  const int n_e = static_cast<int>(draws.front().p0.a1.rows());
  const int t0 = basis1.t0();
  for (const TestSequence& seq : sequences) check_sequence(seq, n_e);

  std::vector<std::array<int, rcp::kCodes>> pos;
  pos.reserve(sequences.size());
  for (const TestSequence& seq : sequences)
    pos.push_back(code_positions(seq.w));

  std::array<double, rcp::kChars> probs_acc{};
  for (const Draw& draw : draws) {
    const DrawContext ctx(draw, basis1, basis0, t0);
    std::array<double, rcp::kChars> score{};
    for (std::size_t q = 0; q < sequences.size(); ++q) {
      std::array<double, rcp::kCodes> delta;
      for (int j = 0; j < rcp::kCodes; ++j)
        delta[j] = ctx.delta(sequences[q].x[j]);
      for (int c = 0; c < rcp::kChars; ++c)
        // the uniform 1/36 prior and non-target baseline cancel in the
        // normalization, leaving the two target-position deltas
        score[c] += delta[pos[q][kCodeTable.codes[c].first]] +
                    delta[pos[q][kCodeTable.codes[c].second]];
    }
    add_normalized(score, probs_acc);
  }

  CharPosterior post;
  const double inv = 1.0 / static_cast<double>(draws.size());
  for (int c = 0; c < rcp::kChars; ++c) post.probs[c] = probs_acc[c] * inv;
  return post;
}

char classify(const CharPosterior& post) {
  int best = 0;
  for (int c = 1; c < rcp::kChars; ++c)
    if (post.probs[c] > post.probs[best]) best = c;
  return rcp::char_at(best);
}

std::vector<double> accuracy_curve(const std::vector<TestCharacter>& testset,
                                   const std::vector<Draw>& draws,
                                   const EigenBasis& basis1,
                                   const EigenBasis& basis0, int max_seqs) {
  if (draws.empty()) throw ContractError("accuracy_curve: no draws");
  if (max_seqs < 1) throw ParameterError("accuracy_curve: max_seqs < 1");
  const int n_chars = static_cast<int>(testset.size());
  const int t0 = basis1.t0();
  int n_e = 0;
  for (const TestCharacter& tc : testset)
    for (const TestSequence& seq : tc.sequences) {
      if (n_e == 0 && !seq.x.empty()) n_e = static_cast<int>(seq.x[0].rows());
      check_sequence(seq, n_e);
    }

  // probs_acc[char][s] accumulates the normalized per-draw posterior after
  // the first s+1 sequences; draws are the outer loop so the per-draw
  // covariance work happens once, not once per (char, s).
  std::vector<std::vector<std::array<double, rcp::kChars>>> probs_acc(n_chars);
  for (int i = 0; i < n_chars; ++i)
    probs_acc[i].assign(
        std::min<std::size_t>(max_seqs, testset[i].sequences.size()),
        std::array<double, rcp::kChars>{});

  for (const Draw& draw : draws) {
    const DrawContext ctx(draw, basis1, basis0, t0);
    for (int i = 0; i < n_chars; ++i) {
      std::array<double, rcp::kChars> cum{};
      const int usable = static_cast<int>(probs_acc[i].size());
      for (int s = 0; s < usable; ++s) {
        const TestSequence& seq = testset[i].sequences[s];
        const auto pos = code_positions(seq.w);
        std::array<double, rcp::kCodes> delta;
        for (int j = 0; j < rcp::kCodes; ++j) delta[j] = ctx.delta(seq.x[j]);
        for (int c = 0; c < rcp::kChars; ++c)
          cum[c] += delta[pos[kCodeTable.codes[c].first]] +
                    delta[pos[kCodeTable.codes[c].second]];
        add_normalized(cum, probs_acc[i][s]);
      }
    }
  }

  const double inv = 1.0 / static_cast<double>(draws.size());
  std::vector<double> acc(max_seqs, 0.0);
  if (n_chars == 0) return acc;
  std::vector<long> correct(max_seqs, 0);
  for (int i = 0; i < n_chars; ++i) {
    for (std::size_t s = 0; s < probs_acc[i].size(); ++s) {
      CharPosterior post;
      for (int c = 0; c < rcp::kChars; ++c)
        post.probs[c] = probs_acc[i][s][c] * inv;
      if (classify(post) == testset[i].truth) ++correct[s];
    }
  }
  for (int s = 0; s < max_seqs; ++s)
    acc[s] = static_cast<double>(correct[s]) / static_cast<double>(n_chars);
  return acc;
}

}  // namespace bsm

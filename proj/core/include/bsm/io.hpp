#ifndef BSM_IO_HPP
#define BSM_IO_HPP

#include <map>
#include <string>
#include <vector>

#include "bsm/predict.hpp"

namespace bsm {

// --- dataset CSV --------------------------------------------------------
// Long format, one row per (epoch, channel, time point):
//   participant,char_idx,seq_idx,stim_idx,stim_code,stim_type,channel,t,value
// participant 0 is the new participant; channel and stim_code are 1-based,
// t and the indices 0-based. Violations are reported with the offending row
// number and the rule that failed.
Dataset read_dataset(const std::string& path);
void write_dataset(const std::string& path, const Dataset& data);

// Regroup one participant's epochs into labeled test characters; the truth
// is recovered from the two target codes of each sequence.
std::vector<TestCharacter> to_test_set(const Dataset& data,
                                       int participant = 0);

// --- trace JSON ---------------------------------------------------------
void write_traces(const std::string& path,
                  const std::vector<ChainTrace>& traces);
std::vector<ChainTrace> read_traces(const std::string& path);

// --- result bundle ------------------------------------------------------
struct ScalarSummary {
  double mean = 0.0, sd = 0.0, lo = 0.0, hi = 0.0;  // lo/hi: 2.5%/97.5%
};

// Pointwise posterior band of one ERP curve set (target or non-target).
struct ErpBand {
  MatrixXd mean, lo, hi;  // each E x T0
};

struct AccuracyCurve {
  std::string method;  // e.g. "BSM-Mixture", "BSM-Reference"
  std::string config;
  std::vector<double> accuracy;  // index s-1 = accuracy with s sequences
};

struct ResultBundle {
  std::map<std::string, ScalarSummary> summaries;
  std::vector<double> match_means;
  std::map<std::string, double> psrf;
  SelectionDecision decision;
  ErpBand erp_target, erp_nontarget;
  std::vector<AccuracyCurve> curves;
};

// Draws of all chains concatenated in chain order.
std::vector<Draw> pool_draws(const std::vector<ChainTrace>& traces);

std::map<std::string, ScalarSummary> compute_summaries(
    const std::vector<ChainTrace>& traces);

// Posterior band of psi * A * Psi over pooled draws.
ErpBand erp_band(const std::vector<Draw>& draws, const EigenBasis& basis1,
                 const EigenBasis& basis0, int y);

// Writes results.json, curves.csv, and erp_estimates.csv into dir.
void write_results(const ResultBundle& bundle, const std::string& dir);

}  // namespace bsm

#endif

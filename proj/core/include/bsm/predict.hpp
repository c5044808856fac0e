#ifndef BSM_PREDICT_HPP
#define BSM_PREDICT_HPP

#include <array>
#include <string>
#include <vector>

#include "bsm/mcmc.hpp"

namespace bsm {

// Posterior probability of each keyboard cell being the attended character.
struct CharPosterior {
  std::array<double, rcp::kChars> probs;

  void validate() const;  // entries >= 0, sum within 1e-9 of 1
};

struct SelectionDecision {
  std::string mode;  // "BSM" or "BSM-Reference"
  std::vector<double> match_means;
  double delta_z = 0.5;
};

// One test sequence: the 12 flashed epochs in presentation order and the
// code permutation that produced them.
struct TestSequence {
  std::vector<MatrixXd> x;  // 12 epochs, each E x T0
  rcp::CodeSeq w;
};

// A labeled spelled character: every recorded sequence plus the truth.
struct TestCharacter {
  char truth = 'A';
  std::vector<TestSequence> sequences;
};

// BSM iff any posterior mean E[Z_n] reaches delta_z (inclusive).
SelectionDecision select_model(const ChainTrace& trace_bsm, double delta_z);

// Character posterior over the grid given one spelled character's sequences,
// Monte-Carlo averaged over posterior draws of the new participant.
CharPosterior char_log_posterior(const std::vector<TestSequence>& sequences,
                                 const std::vector<Draw>& draws,
                                 const EigenBasis& basis1,
                                 const EigenBasis& basis0);

// Argmax cell; ties resolved in row-major grid order.
char classify(const CharPosterior& post);

// accuracy[s-1] = fraction of test characters classified correctly using
// their first s sequences, for s = 1..max_seqs.
std::vector<double> accuracy_curve(const std::vector<TestCharacter>& testset,
                                   const std::vector<Draw>& draws,
                                   const EigenBasis& basis1,
                                   const EigenBasis& basis0, int max_seqs);

}  // namespace bsm

#endif

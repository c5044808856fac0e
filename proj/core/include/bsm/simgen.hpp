#ifndef BSM_SIMGEN_HPP
#define BSM_SIMGEN_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "bsm/predict.hpp"

namespace bsm {

// Generating-process description of one participant group: mean ERP curves
// per channel plus the noise covariance parameters.
struct GroupSpec {
  MatrixXd target_shape;     // E x T0
  MatrixXd nontarget_shape;  // E x T0
  VectorXd sigma;            // E
  double rho = 0.5;
  double eta = 0.5;
  enum class Noise { kNormal, kStudentT } noise = Noise::kNormal;
  int df = 5;  // student-t only, > 2

  void validate() const;
};

struct ScenarioSpec {
  // group label per participant; labels[0] is the new participant
  std::vector<int> labels;
  std::string train_text = "TTT";
  int train_seqs_new = 10;     // sequences per training character
  int train_seqs_source = 10;
  std::string test_text = "THE_QUICK_BROWN_FOX";
  int test_seqs = 10;
  std::uint64_t seed = 0;

  void validate(int n_groups) const;
};

struct SimOutput {
  Dataset train;                   // participants[0] = new, 1..N = sources
  std::vector<TestCharacter> test; // new participant's labeled test spelling
};

// Deterministic parametric ERP bumps for the built-in scenarios
// ("single" with E=1, "naive_multi" with E=2).
std::vector<GroupSpec> canonical_groups(const std::string& scenario_id,
                                        int t0, int e);

// Bitwise deterministic given scenario.seed; per-participant RNG streams.
SimOutput gen_dataset(const ScenarioSpec& scenario,
                      const std::vector<GroupSpec>& groups);

// JSON group-parameter files; errors name the offending field path.
std::vector<GroupSpec> load_param_file(const std::string& path);
void write_param_file(const std::string& path,
                      const std::vector<GroupSpec>& groups);

// A fully assembled built-in configuration: groups, scenario, and the model
// settings (kernels, delta_z) that go with it.
struct Preset {
  std::vector<GroupSpec> groups;
  ScenarioSpec scenario;
  ModelConfig model;
};

// name in {single_case_s1, single_case_s2, multi_case_1, multi_case_2,
//          real_style_normal, real_style_t}
Preset make_preset(const std::string& name, std::uint64_t seed);

const std::vector<std::string>& preset_names();

}  // namespace bsm

#endif

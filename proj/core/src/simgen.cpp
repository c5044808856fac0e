#include "bsm/simgen.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace bsm {

namespace {

using nlohmann::json;

VectorXd bump(int t0, double amp, double peak, double width) {
  // positions scaled so the canonical constants keep their meaning when the
  // window is not 35 samples long
  const double scale = static_cast<double>(t0) / 35.0;
  const double p = peak * scale;
  const double w = std::max(1.0, width * scale);
  VectorXd v(t0);
  for (int t = 0; t < t0; ++t) {
    const double d = (static_cast<double>(t) - p) / w;
    v[t] = amp * std::exp(-0.5 * d * d);
  }
  return v;
}

constexpr double kTargetAmp = 6.0;
constexpr double kNontargetAmp = 1.0;
constexpr double kBumpWidth = 3.0;
constexpr double kTargetPeak = 10.0;
constexpr double kNontargetPeak = 12.0;
constexpr double kLatePeak = 25.0;

std::vector<GroupSpec> single_groups(int t0) {
  const VectorXd tgt = bump(t0, kTargetAmp, kTargetPeak, kBumpWidth);
  const VectorXd ntg = bump(t0, kNontargetAmp, kNontargetPeak, kBumpWidth);
  std::vector<GroupSpec> g(3);
  for (GroupSpec& s : g) {
    s.sigma = VectorXd::Ones(1);
    s.eta = 0.5;  // unused when E = 1
  }
  g[0].target_shape = tgt.transpose();
  g[0].nontarget_shape = ntg.transpose();
  g[0].rho = 0.6;
  g[0].sigma[0] = 3.0;

  g[1].target_shape = (-tgt).transpose();
  g[1].nontarget_shape = (-ntg).transpose();
  g[1].rho = 0.6;
  g[1].sigma[0] = 4.0;

  g[2].target_shape = bump(t0, kTargetAmp, kLatePeak, kBumpWidth).transpose();
  g[2].nontarget_shape = ntg.transpose();
  g[2].rho = 0.7;
  g[2].sigma[0] = 3.0;
  return g;
}

std::vector<GroupSpec> multi_groups(int t0) {
  const VectorXd tgt = bump(t0, kTargetAmp, kTargetPeak, kBumpWidth);
  const VectorXd ntg = bump(t0, kNontargetAmp, kNontargetPeak, kBumpWidth);
  std::vector<GroupSpec> g(3);
  for (GroupSpec& s : g) {
    s.target_shape = MatrixXd(2, t0);
    s.nontarget_shape = MatrixXd(2, t0);
    s.sigma = VectorXd(2);
  }
  // group 0: canonical P300 on channel 1, sign reversed on channel 2
  g[0].target_shape.row(0) = tgt.transpose();
  g[0].target_shape.row(1) = -tgt.transpose();
  g[0].nontarget_shape.row(0) = ntg.transpose();
  g[0].nontarget_shape.row(1) = -ntg.transpose();
  g[0].rho = 0.7;
  g[0].eta = 0.6;
  g[0].sigma << 8.0, 8.0;

  // group 1: channel 1 as group 0, channel 2 at half peak magnitude
  g[1].target_shape.row(0) = tgt.transpose();
  g[1].target_shape.row(1) = -0.5 * tgt.transpose();
  g[1].nontarget_shape.row(0) = ntg.transpose();
  g[1].nontarget_shape.row(1) = -0.5 * ntg.transpose();
  g[1].rho = 0.7;
  g[1].eta = 0.4;
  g[1].sigma << 8.0, 6.0;

  // group 2: channel 1 at half magnitude, channel 2 as group 1
  g[2].target_shape.row(0) = 0.5 * tgt.transpose();
  g[2].target_shape.row(1) = -0.5 * tgt.transpose();
  g[2].nontarget_shape.row(0) = 0.5 * ntg.transpose();
  g[2].nontarget_shape.row(1) = -0.5 * ntg.transpose();
  g[2].rho = 0.5;
  g[2].eta = 0.4;
  g[2].sigma << 2.0, 2.0;
  return g;
}

MatrixXd draw_noise(Rng& rng, const GroupSpec& g,
                    const Eigen::LLT<MatrixXd>& llt_s,
                    const Eigen::LLT<MatrixXd>& llt_t) {
  const int e = static_cast<int>(g.sigma.size());
  const int t0 = static_cast<int>(g.target_shape.cols());
  MatrixXd z(e, t0);
  for (int i = 0; i < e; ++i)
    for (int j = 0; j < t0; ++j) z(i, j) = draw_normal(rng);
  MatrixXd noise = llt_s.matrixL() * z * llt_t.matrixU();
  if (g.noise == GroupSpec::Noise::kStudentT) {
    // scale matrix pre-divided by df/(df-2) so the covariance matches the
    // normal case exactly
    const double df = static_cast<double>(g.df);
    const double u = draw_chi_squared(rng, g.df);
    noise *= std::sqrt((df - 2.0) / df) * std::sqrt(df / u);
  }
  return noise;
}

// one participant's spelling of `text`, seqs sequences per character
std::vector<Epoch> gen_participant(Rng& rng, const GroupSpec& g,
                                   const std::string& text, int seqs) {
  const StructuredCov cov{g.sigma, g.eta, g.rho};
  const Eigen::LLT<MatrixXd> llt_s(cov.spatial_cov());
  const Eigen::LLT<MatrixXd> llt_t(
      cov.temporal_corr(static_cast<int>(g.target_shape.cols())));

  std::vector<Epoch> epochs;
  epochs.reserve(text.size() * static_cast<std::size_t>(seqs) * rcp::kCodes);
  for (std::size_t ci = 0; ci < text.size(); ++ci) {
    for (int s = 0; s < seqs; ++s) {
      const rcp::CodeSeq w = rcp::random_sequence(rng);
      const rcp::TypeSeq y = rcp::stimulus_type(w, text[ci]);
      for (int j = 0; j < rcp::kCodes; ++j) {
        Epoch ep;
        ep.y = y[j];
        ep.char_idx = static_cast<int>(ci);
        ep.seq_idx = s;
        ep.stim_code = w[j];
        ep.x = (y[j] == 1 ? g.target_shape : g.nontarget_shape) +
               draw_noise(rng, g, llt_s, llt_t);
        epochs.push_back(std::move(ep));
      }
    }
  }
  return epochs;
}

json matrix_to_json(const MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw IoError("param file: " + path + " must be a matrix (array of rows)");
  const std::size_t cols = j[0].size();
  MatrixXd m(j.size(), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols)
      throw IoError("param file: " + path + " rows have unequal lengths");
    for (std::size_t c = 0; c < cols; ++c) m(static_cast<int>(i),
                                             static_cast<int>(c)) = j[i][c];
  }
  return m;
}

const json& require(const json& obj, const std::string& key,
                    const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end())
    throw IoError("param file: missing field \"" + path + key + "\"");
  return *it;
}

}  // namespace

void GroupSpec::validate() const {
  const int e = static_cast<int>(sigma.size());
  if (e < 1) throw ValidationError("GroupSpec: empty sigma");
  if (target_shape.rows() != e || nontarget_shape.rows() != e ||
      target_shape.cols() != nontarget_shape.cols() || target_shape.cols() < 2)
    throw ValidationError("GroupSpec: shape dimensions inconsistent");
  if (!target_shape.allFinite() || !nontarget_shape.allFinite())
    throw ValidationError("GroupSpec: shapes must be finite");
  for (int i = 0; i < e; ++i)
    if (!(sigma[i] > 0.0)) throw ValidationError("GroupSpec: sigma must be positive");
  if (!(rho > 0.0 && rho < 1.0) || !(eta > 0.0 && eta < 1.0))
    throw ValidationError("GroupSpec: rho/eta must be in (0,1)");
  if (noise == Noise::kStudentT && df <= 2)
    throw ValidationError("GroupSpec: student-t df must exceed 2");
}

void ScenarioSpec::validate(int n_groups) const {
  if (labels.empty()) throw ValidationError("ScenarioSpec: no participants");
  for (int l : labels)
    if (l < 0 || l >= n_groups)
      throw ValidationError("ScenarioSpec: label references undefined group");
  if (train_text.empty() || train_seqs_new < 1 || train_seqs_source < 1)
    throw ValidationError("ScenarioSpec: empty training design");
  if (test_seqs < 0) throw ValidationError("ScenarioSpec: negative test size");
  for (char c : train_text) rcp::char_index(c);
  for (char c : test_text) rcp::char_index(c);
}

std::vector<GroupSpec> canonical_groups(const std::string& scenario_id,
                                        int t0, int e) {
  if (t0 < 2) throw ParameterError("canonical_groups: t0 too small");
  if (scenario_id == "single") {
    if (e != 1) throw ParameterError("single scenario is one channel");
    return single_groups(t0);
  }
  if (scenario_id == "naive_multi") {
    if (e != 2) throw ParameterError("naive_multi scenario is two channels");
    return multi_groups(t0);
  }
  throw ParameterError("canonical_groups: unknown scenario \"" + scenario_id +
                       "\"");
}

SimOutput gen_dataset(const ScenarioSpec& scenario,
                      const std::vector<GroupSpec>& groups) {
  for (const GroupSpec& g : groups) g.validate();
  scenario.validate(static_cast<int>(groups.size()));

  SimOutput out;
  out.train.n_channels = static_cast<int>(groups[0].sigma.size());
  out.train.n_times = static_cast<int>(groups[0].target_shape.cols());

  for (std::size_t n = 0; n < scenario.labels.size(); ++n) {
    Rng rng(mix_seed(scenario.seed, n));
    const int seqs =
        n == 0 ? scenario.train_seqs_new : scenario.train_seqs_source;
    out.train.participants.push_back(gen_participant(
        rng, groups[scenario.labels[n]], scenario.train_text, seqs));
  }

  // test data: the new participant's generator, its own stream
  Rng test_rng(mix_seed(scenario.seed, scenario.labels.size() + 1000));
  const GroupSpec& g0 = groups[scenario.labels[0]];
  for (char c : scenario.test_text) {
    TestCharacter tc;
    tc.truth = c;
    const std::string one(1, c);
    const std::vector<Epoch> eps =
        gen_participant(test_rng, g0, one, scenario.test_seqs);
    for (int s = 0; s < scenario.test_seqs; ++s) {
      TestSequence seq;
      seq.x.resize(rcp::kCodes);
      for (int j = 0; j < rcp::kCodes; ++j) {
        const Epoch& ep = eps[static_cast<std::size_t>(s) * rcp::kCodes + j];
        seq.w[j] = ep.stim_code;
        seq.x[j] = ep.x;
      }
      tc.sequences.push_back(std::move(seq));
    }
    out.test.push_back(std::move(tc));
  }
  return out;
}

std::vector<GroupSpec> load_param_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open param file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw IoError("param file " + path + ": " + e.what());
  }

  double var_mult = 1.0;
  if (doc.contains("variance_multiplier")) {
    var_mult = doc["variance_multiplier"].get<double>();
    if (!(var_mult > 0.0))
      throw IoError("param file: \"variance_multiplier\" must be positive");
  }

  const json& jgroups = require(doc, "groups", "");
  if (!jgroups.is_array() || jgroups.empty())
    throw IoError("param file: \"groups\" must be a non-empty array");

  std::vector<GroupSpec> groups;
  for (std::size_t i = 0; i < jgroups.size(); ++i) {
    const std::string p = "groups[" + std::to_string(i) + "].";
    const json& jg = jgroups[i];
    GroupSpec g;
    g.target_shape = matrix_from_json(require(jg, "target_shape", p),
                                      p + "target_shape");
    g.nontarget_shape = matrix_from_json(require(jg, "nontarget_shape", p),
                                         p + "nontarget_shape");
    const json& jsig = require(jg, "sigma", p);
    if (!jsig.is_array() || jsig.empty())
      throw IoError("param file: \"" + p + "sigma\" must be a non-empty array");
    g.sigma = VectorXd(jsig.size());
    for (std::size_t k = 0; k < jsig.size(); ++k)
      g.sigma[static_cast<int>(k)] =
          jsig[k].get<double>() * std::sqrt(var_mult);
    g.rho = require(jg, "rho", p).get<double>();
    g.eta = require(jg, "eta", p).get<double>();
    if (jg.contains("noise")) {
      const std::string kind = jg["noise"].get<std::string>();
      if (kind == "normal") {
        g.noise = GroupSpec::Noise::kNormal;
      } else if (kind == "student_t") {
        g.noise = GroupSpec::Noise::kStudentT;
        g.df = jg.value("df", 5);
      } else {
        throw IoError("param file: \"" + p + "noise\" must be normal or student_t");
      }
    }
    try {
      g.validate();
    } catch (const std::exception& e) {
      throw IoError("param file: groups[" + std::to_string(i) + "]: " +
                    e.what());
    }
    groups.push_back(std::move(g));
  }
  return groups;
}

void write_param_file(const std::string& path,
                      const std::vector<GroupSpec>& groups) {
  json doc;
  doc["groups"] = json::array();
  for (const GroupSpec& g : groups) {
    json jg;
    jg["target_shape"] = matrix_to_json(g.target_shape);
    jg["nontarget_shape"] = matrix_to_json(g.nontarget_shape);
    jg["sigma"] = json::array();
    for (int i = 0; i < g.sigma.size(); ++i) jg["sigma"].push_back(g.sigma[i]);
    jg["rho"] = g.rho;
    jg["eta"] = g.eta;
    jg["noise"] =
        g.noise == GroupSpec::Noise::kStudentT ? "student_t" : "normal";
    if (g.noise == GroupSpec::Noise::kStudentT) jg["df"] = g.df;
    doc["groups"].push_back(std::move(jg));
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write param file: " + path);
  out << doc.dump(2) << "\n";
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {
      "single_case_s1", "single_case_s2",   "multi_case_1",
      "multi_case_2",   "real_style_normal", "real_style_t"};
  return names;
}

Preset make_preset(const std::string& name, std::uint64_t seed) {
  Preset p;
  p.scenario.seed = seed;

  const bool single = name.rfind("single", 0) == 0;
  const int e = single ? 1 : 2;
  const int t0 = 35;

  if (single) {
    p.groups = canonical_groups("single", t0, 1);
    p.model.kernel_target = KernelSpec{0.3, 1.2, 1.0};
    p.model.kernel_nontarget = KernelSpec{0.4, 1.2, 1.0};
  } else {
    p.groups = canonical_groups("naive_multi", t0, 2);
    p.model.kernel_target = KernelSpec{0.2, 1.2, 1.0};
    p.model.kernel_nontarget = KernelSpec{0.3, 1.2, 1.0};
  }
  p.model.n_channels = e;
  p.model.n_times = t0;

  if (name == "single_case_s1" || name == "multi_case_1") {
    // no matched sources
    p.scenario.labels = {0, 1, 1, 1, 2, 2, 2};
  } else if (name == "single_case_s2" || name == "multi_case_2") {
    // sources 1-2 share the new participant's group
    p.scenario.labels = {0, 0, 0, 1, 1, 2, 2};
  } else if (name == "real_style_normal" || name == "real_style_t") {
    p.scenario.labels = {0, 0, 0, 1, 1, 2, 2};
    p.model.delta_z = 0.1;
    p.model.pi = 2.0 / 24.0;
    if (name == "real_style_t") {
      for (GroupSpec& g : p.groups) {
        g.noise = GroupSpec::Noise::kStudentT;
        g.df = 5;
      }
    }
  } else {
    throw ParameterError("unknown preset \"" + name + "\"");
  }
  return p;
}

}  // namespace bsm

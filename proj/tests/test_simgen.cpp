#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "bsm/simgen.hpp"

using namespace bsm;

namespace {

int argmax_time(const Eigen::RowVectorXd& row) {
  int best = 0;
  for (int t = 1; t < row.size(); ++t)
    if (row[t] > row[best]) best = t;
  return best;
}

std::filesystem::path tmp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

// empirical covariance of vec(noise) across epochs, column stacking
MatrixXd noise_covariance(const std::vector<Epoch>& epochs,
                          const GroupSpec& g) {
  const int e = static_cast<int>(g.sigma.size());
  const int t0 = static_cast<int>(g.target_shape.cols());
  const int d = e * t0;
  MatrixXd acc = MatrixXd::Zero(d, d);
  for (const Epoch& ep : epochs) {
    const MatrixXd noise =
        ep.x - (ep.y == 1 ? g.target_shape : g.nontarget_shape);
    VectorXd v(d);
    for (int j = 0; j < t0; ++j)
      for (int i = 0; i < e; ++i) v[j * e + i] = noise(i, j);
    acc.noalias() += v * v.transpose();
  }
  return acc / static_cast<double>(epochs.size());
}

MatrixXd kron(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd k(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return k;
}

}  // namespace

TEST_CASE("single-channel canonical groups") {
  const auto g = canonical_groups("single", 35, 1);
  REQUIRE(g.size() == 3);
  for (const GroupSpec& s : g) CHECK_NOTHROW(s.validate());

  // group 0: target bump peaks at sample 10, amplitude 6
  CHECK(argmax_time(g[0].target_shape.row(0)) == 10);
  CHECK(g[0].target_shape(0, 10) == doctest::Approx(6.0));
  CHECK(argmax_time(g[0].nontarget_shape.row(0)) == 12);
  CHECK(g[0].nontarget_shape(0, 12) == doctest::Approx(1.0));
  // group 1 is the sign flip of group 0
  CHECK((g[1].target_shape + g[0].target_shape).cwiseAbs().maxCoeff() <=
        1e-12);
  // group 2 peaks late
  CHECK(argmax_time(g[2].target_shape.row(0)) == 25);

  CHECK(g[0].rho == doctest::Approx(0.6));
  CHECK(g[1].rho == doctest::Approx(0.6));
  CHECK(g[2].rho == doctest::Approx(0.7));
  CHECK(g[0].sigma[0] == doctest::Approx(3.0));
  CHECK(g[1].sigma[0] == doctest::Approx(4.0));
  CHECK(g[2].sigma[0] == doctest::Approx(3.0));
}

TEST_CASE("two-channel canonical groups") {
  const auto g = canonical_groups("naive_multi", 35, 2);
  REQUIRE(g.size() == 3);
  for (const GroupSpec& s : g) CHECK_NOTHROW(s.validate());

  CHECK(g[0].rho == doctest::Approx(0.7));
  CHECK(g[0].eta == doctest::Approx(0.6));
  CHECK(g[0].sigma[0] == doctest::Approx(8.0));
  CHECK(g[0].sigma[1] == doctest::Approx(8.0));
  CHECK(g[1].rho == doctest::Approx(0.7));
  CHECK(g[1].eta == doctest::Approx(0.4));
  CHECK(g[1].sigma[1] == doctest::Approx(6.0));
  CHECK(g[2].rho == doctest::Approx(0.5));
  CHECK(g[2].eta == doctest::Approx(0.4));
  CHECK(g[2].sigma[0] == doctest::Approx(2.0));

  // channel structure: group 0 channel 2 is the reversed channel 1;
  // group 1 shares channel 1; group 2 halves it
  CHECK((g[0].target_shape.row(1) + g[0].target_shape.row(0))
            .cwiseAbs()
            .maxCoeff() <= 1e-12);
  CHECK((g[1].target_shape.row(0) - g[0].target_shape.row(0))
            .cwiseAbs()
            .maxCoeff() <= 1e-12);
  CHECK((g[2].target_shape.row(0) - 0.5 * g[0].target_shape.row(0))
            .cwiseAbs()
            .maxCoeff() <= 1e-12);

  CHECK_THROWS_AS(canonical_groups("single", 35, 2), ParameterError);
  CHECK_THROWS_AS(canonical_groups("naive_multi", 35, 1), ParameterError);
  CHECK_THROWS_AS(canonical_groups("nope", 35, 1), ParameterError);
}

TEST_CASE("bump positions rescale with the window length") {
  const auto g = canonical_groups("single", 70, 1);
  CHECK(argmax_time(g[0].target_shape.row(0)) == 20);
}

TEST_CASE("gen_dataset structure and flash bookkeeping") {
  ScenarioSpec sc;
  sc.labels = {0, 1};
  sc.train_text = "TT";
  sc.train_seqs_new = 2;
  sc.train_seqs_source = 3;
  sc.test_text = "OK";
  sc.test_seqs = 2;
  sc.seed = 5;
  const auto groups = canonical_groups("single", 12, 1);

  const SimOutput out = gen_dataset(sc, groups);
  CHECK(out.train.n_channels == 1);
  CHECK(out.train.n_times == 12);
  REQUIRE(out.train.participants.size() == 2);
  CHECK(out.train.participants[0].size() == 2u * 2 * 12);
  CHECK(out.train.participants[1].size() == 2u * 3 * 12);
  CHECK_NOTHROW(out.train.validate());

  // exactly two target flashes per sequence, at T's row and column codes
  const auto [row_code, col_code] = rcp::target_codes('T');
  for (const auto& participant : out.train.participants) {
    for (std::size_t base = 0; base < participant.size(); base += 12) {
      int n_targets = 0;
      for (int j = 0; j < 12; ++j) {
        const Epoch& ep = participant[base + j];
        n_targets += ep.y;
        if (ep.y == 1)
          CHECK((ep.stim_code == row_code || ep.stim_code == col_code));
      }
      CHECK(n_targets == 2);
    }
  }

  REQUIRE(out.test.size() == 2);
  CHECK(out.test[0].truth == 'O');
  CHECK(out.test[1].truth == 'K');
  for (const TestCharacter& tc : out.test) {
    REQUIRE(tc.sequences.size() == 2);
    for (const TestSequence& seq : tc.sequences) {
      CHECK(seq.x.size() == 12);
      CHECK_NOTHROW(rcp::validate_code_seq(seq.w));
      CHECK(seq.x[0].rows() == 1);
      CHECK(seq.x[0].cols() == 12);
    }
  }
}

TEST_CASE("gen_dataset is bitwise deterministic with per-participant streams") {
  ScenarioSpec sc;
  sc.labels = {0, 1};
  sc.train_text = "T";
  sc.train_seqs_new = 2;
  sc.train_seqs_source = 2;
  sc.test_text = "A";
  sc.test_seqs = 1;
  sc.seed = 31;
  const auto groups = canonical_groups("single", 10, 1);

  const SimOutput a = gen_dataset(sc, groups);
  const SimOutput b = gen_dataset(sc, groups);
  for (std::size_t n = 0; n < a.train.participants.size(); ++n)
    for (std::size_t i = 0; i < a.train.participants[n].size(); ++i)
      CHECK((a.train.participants[n][i].x - b.train.participants[n][i].x)
                .cwiseAbs()
                .maxCoeff() == 0.0);
  CHECK((a.test[0].sequences[0].x[0] - b.test[0].sequences[0].x[0])
            .cwiseAbs()
            .maxCoeff() == 0.0);

  // adding a source leaves earlier participants' draws untouched
  ScenarioSpec wider = sc;
  wider.labels = {0, 1, 2};
  const SimOutput c = gen_dataset(wider, groups);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t i = 0; i < a.train.participants[n].size(); ++i)
      CHECK((a.train.participants[n][i].x - c.train.participants[n][i].x)
                .cwiseAbs()
                .maxCoeff() == 0.0);

  ScenarioSpec other = sc;
  other.seed = 32;
  const SimOutput d = gen_dataset(other, groups);
  CHECK((a.train.participants[0][0].x - d.train.participants[0][0].x)
            .cwiseAbs()
            .maxCoeff() > 0.0);
}

TEST_CASE("normal noise reproduces the separable covariance") {
  GroupSpec g;
  const int e = 2, t0 = 4;
  g.target_shape = MatrixXd::Zero(e, t0);
  g.target_shape.row(0) << 1, 2, 3, 4;
  g.nontarget_shape = 0.3 * g.target_shape;
  g.sigma = VectorXd(e);
  g.sigma << 1.0, 1.5;
  g.rho = 0.5;
  g.eta = 0.4;

  ScenarioSpec sc;
  sc.labels = {0};
  sc.train_text = "T";
  sc.train_seqs_new = 500;  // 6000 epochs
  sc.test_text = "";
  sc.test_seqs = 0;
  sc.seed = 7;
  const SimOutput out = gen_dataset(sc, {g});

  const StructuredCov cov{g.sigma, g.eta, g.rho};
  const MatrixXd want = kron(cov.temporal_corr(t0), cov.spatial_cov());
  const MatrixXd got = noise_covariance(out.train.participants[0], g);
  CHECK((got - want).norm() / want.norm() <= 0.06);
}

TEST_CASE("student-t noise keeps the covariance but fattens the tails") {
  GroupSpec g;
  g.target_shape = MatrixXd::Zero(1, 3);
  g.nontarget_shape = MatrixXd::Zero(1, 3);
  g.sigma = VectorXd::Constant(1, 2.0);
  g.rho = 0.5;
  g.eta = 0.5;
  g.noise = GroupSpec::Noise::kStudentT;
  g.df = 5;

  ScenarioSpec sc;
  sc.labels = {0};
  sc.train_text = "T";
  sc.train_seqs_new = 800;  // 9600 epochs
  sc.test_text = "";
  sc.test_seqs = 0;
  sc.seed = 13;
  const SimOutput out = gen_dataset(sc, {g});

  const StructuredCov cov{g.sigma, g.eta, g.rho};
  const MatrixXd want = kron(cov.temporal_corr(3), cov.spatial_cov());
  const MatrixXd got = noise_covariance(out.train.participants[0], g);
  CHECK((got - want).norm() / want.norm() <= 0.10);

  // excess kurtosis of one coordinate: 6/(df-4) = 6 for df = 5
  double m2 = 0.0, m4 = 0.0;
  const auto& epochs = out.train.participants[0];
  for (const Epoch& ep : epochs) {
    const double v = ep.x(0, 0);
    m2 += v * v;
    m4 += v * v * v * v;
  }
  m2 /= static_cast<double>(epochs.size());
  m4 /= static_cast<double>(epochs.size());
  CHECK(m4 / (m2 * m2) - 3.0 > 1.0);

  GroupSpec bad = g;
  bad.df = 2;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("param files round-trip") {
  auto groups = canonical_groups("naive_multi", 8, 2);
  groups[1].noise = GroupSpec::Noise::kStudentT;
  groups[1].df = 7;

  const auto path = tmp_file("bsm_params_roundtrip.json");
  write_param_file(path.string(), groups);
  const auto loaded = load_param_file(path.string());
  REQUIRE(loaded.size() == groups.size());
  for (std::size_t i = 0; i < groups.size(); ++i) {
    CHECK((loaded[i].target_shape - groups[i].target_shape)
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK((loaded[i].sigma - groups[i].sigma).cwiseAbs().maxCoeff() == 0.0);
    CHECK(loaded[i].rho == groups[i].rho);
    CHECK(loaded[i].eta == groups[i].eta);
    CHECK(loaded[i].noise == groups[i].noise);
    CHECK(loaded[i].df == groups[i].df);
  }
  std::filesystem::remove(path);
}

TEST_CASE("param file variance multiplier scales sigma") {
  const auto path = tmp_file("bsm_params_mult.json");
  {
    std::ofstream out(path);
    out << R"({"variance_multiplier": 4.0, "groups": [{
      "target_shape": [[0, 1, 0]], "nontarget_shape": [[0, 0, 0]],
      "sigma": [1.5], "rho": 0.5, "eta": 0.5}]})";
  }
  const auto groups = load_param_file(path.string());
  REQUIRE(groups.size() == 1);
  CHECK(groups[0].sigma[0] == doctest::Approx(3.0).epsilon(1e-12));
  std::filesystem::remove(path);
}

TEST_CASE("param file errors name the offending field") {
  const auto path = tmp_file("bsm_params_bad.json");
  auto write = [&](const std::string& body) {
    std::ofstream out(path);
    out << body;
  };
  auto error_of = [&]() -> std::string {
    try {
      load_param_file(path.string());
    } catch (const IoError& e) {
      return e.what();
    }
    return "";
  };

  write(R"({"groups": [{"target_shape": [[0, 1]],
    "nontarget_shape": [[0, 0]], "rho": 0.5, "eta": 0.5}]})");
  CHECK(error_of().find("groups[0].sigma") != std::string::npos);

  write(R"({"groups": [{"target_shape": [[0, 1]], "nontarget_shape": [[0, 0]],
    "sigma": [1.0], "rho": 0.5, "eta": 0.5, "noise": "cauchy"}]})");
  CHECK(error_of().find("noise") != std::string::npos);

  write(R"({"nothing": 1})");
  CHECK(error_of().find("groups") != std::string::npos);

  write("{ not json");
  CHECK_THROWS_AS(load_param_file(path.string()), IoError);
  CHECK_THROWS_AS(load_param_file("/nonexistent/params.json"), IoError);
  std::filesystem::remove(path);
}

TEST_CASE("scenario validation") {
  ScenarioSpec sc;
  sc.labels = {0, 1};
  CHECK_THROWS_AS(sc.validate(1), ValidationError);  // label out of range
  sc.labels = {0};
  CHECK_NOTHROW(sc.validate(1));
  sc.train_text = "t";  // lowercase is not on the keyboard
  CHECK_THROWS_AS(sc.validate(1), ValidationError);
  sc.train_text = "T";
  sc.train_seqs_new = 0;
  CHECK_THROWS_AS(sc.validate(1), ValidationError);
}

TEST_CASE("presets cover the built-in study designs") {
  CHECK(preset_names().size() == 6);
  for (const std::string& name : preset_names()) {
    const Preset p = make_preset(name, 17);
    CHECK(p.groups.size() == 3);
    CHECK(p.scenario.labels.size() == 7);
    CHECK(p.scenario.labels[0] == 0);
    CHECK(p.scenario.train_text == "TTT");
    CHECK(p.scenario.test_text == "THE_QUICK_BROWN_FOX");
    CHECK(p.scenario.test_seqs == 10);
    CHECK_NOTHROW(p.model.validate());
    CHECK(p.model.n_times == 35);
    for (const GroupSpec& g : p.groups) CHECK_NOTHROW(g.validate());
  }

  const Preset s1 = make_preset("single_case_s1", 0);
  CHECK(s1.model.n_channels == 1);
  CHECK(s1.scenario.labels == std::vector<int>({0, 1, 1, 1, 2, 2, 2}));
  CHECK(s1.model.kernel_target.s0 == doctest::Approx(0.3));

  const Preset c2 = make_preset("multi_case_2", 0);
  CHECK(c2.model.n_channels == 2);
  CHECK(c2.scenario.labels == std::vector<int>({0, 0, 0, 1, 1, 2, 2}));
  CHECK(c2.model.kernel_target.s0 == doctest::Approx(0.2));
  CHECK(c2.model.delta_z == doctest::Approx(0.5));
  CHECK(c2.model.pi == doctest::Approx(0.5));

  const Preset rt = make_preset("real_style_t", 0);
  CHECK(rt.model.delta_z == doctest::Approx(0.1));
  CHECK(rt.model.pi == doctest::Approx(2.0 / 24.0));
  for (const GroupSpec& g : rt.groups)
    CHECK(g.noise == GroupSpec::Noise::kStudentT);
  const Preset rn = make_preset("real_style_normal", 0);
  for (const GroupSpec& g : rn.groups)
    CHECK(g.noise == GroupSpec::Noise::kNormal);

  CHECK_THROWS_AS(make_preset("mystery", 0), ParameterError);
}

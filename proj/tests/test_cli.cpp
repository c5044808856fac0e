#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#ifndef BSM_CLI_PATH
#error "BSM_CLI_PATH must point at the bsm binary"
#endif

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path work_dir() {
  const fs::path d = fs::temp_directory_path() / "bsm_cli_test";
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunResult run(const std::string& args) {
  const fs::path out = work_dir() / "stdout.txt";
  const fs::path err = work_dir() / "stderr.txt";
  const std::string cmd = std::string(BSM_CLI_PATH) + " " + args + " > " +
                          out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = status < 0 ? -1 : WEXITSTATUS(status);
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

}  // namespace

TEST_CASE("simulate writes a deterministic dataset bundle") {
  const fs::path a = work_dir() / "sim_a";
  const fs::path b = work_dir() / "sim_b";
  const fs::path c = work_dir() / "sim_c";
  fs::remove_all(a);
  fs::remove_all(b);
  fs::remove_all(c);

  const std::string common =
      "simulate --preset single_case_s2 --seed 42 --train-seqs-new 2 "
      "--train-seqs-source 2 --test-seqs 2 --out ";
  const RunResult ra = run(common + a.string());
  REQUIRE(ra.code == 0);
  const json ja = json::parse(ra.out);
  CHECK(ja["participants"] == 7);
  CHECK(fs::exists(a / "train.csv"));
  CHECK(fs::exists(a / "test.csv"));
  CHECK(fs::exists(a / "config.json"));

  const RunResult rb = run(common + b.string());
  REQUIRE(rb.code == 0);
  CHECK(slurp(a / "train.csv") == slurp(b / "train.csv"));
  CHECK(slurp(a / "test.csv") == slurp(b / "test.csv"));

  const RunResult rc = run(
      "simulate --preset single_case_s2 --seed 43 --train-seqs-new 2 "
      "--train-seqs-source 2 --test-seqs 2 --out " +
      c.string());
  REQUIRE(rc.code == 0);
  CHECK(slurp(a / "train.csv") != slurp(c / "train.csv"));
}

TEST_CASE("fit, select, predict, diagnose pipeline") {
  const fs::path dir = work_dir() / "pipeline";
  fs::remove_all(dir);
  const RunResult sim = run(
      "simulate --preset single_case_s2 --seed 7 --train-seqs-new 3 "
      "--train-seqs-source 3 --test-seqs 2 --out " +
      dir.string());
  REQUIRE(sim.code == 0);

  const std::string trace = (dir / "trace.json").string();
  const std::string config = (dir / "config.json").string();
  const RunResult fit = run("fit --data " + (dir / "train.csv").string() +
                            " --config " + config +
                            " --chains 2 --burnin 60 --samples 60 --seed 11 "
                            "--out " +
                            trace);
  REQUIRE(fit.code == 0);
  const json jfit = json::parse(fit.out);
  REQUIRE(jfit["match_means"].size() == 6);
  for (const auto& m : jfit["match_means"]) {
    CHECK(m.get<double>() >= 0.0);
    CHECK(m.get<double>() <= 1.0);
  }
  CHECK(jfit["psrf"].is_object());
  CHECK(jfit["psrf"].contains("psi1_0"));
  // only new-participant scalars in the fit report
  for (const auto& it : jfit["psrf"].items())
    CHECK(it.key().find("tilde") == std::string::npos);
  CHECK(jfit["accept_rate_psi"].get<double>() > 0.0);
  CHECK(fs::exists(trace));
  CHECK(fs::exists(dir / "trace.ref.json"));

  const RunResult sel = run("select --trace " + trace);
  REQUIRE(sel.code == 0);
  const json jsel = json::parse(sel.out);
  CHECK((jsel["mode"] == "BSM" || jsel["mode"] == "BSM-Reference"));
  CHECK(jsel["match_means"] == jfit["match_means"]);

  const fs::path results = dir / "results";
  const RunResult pred = run("predict --trace " + trace + " --test " +
                             (dir / "test.csv").string() + " --config " +
                             config + " --max-seqs 2 --out " +
                             results.string());
  REQUIRE(pred.code == 0);
  const json jpred = json::parse(pred.out);
  REQUIRE(jpred["accuracy"].size() == 2);
  CHECK(jpred["truth"] == "THE_QUICK_BROWN_FOX");
  CHECK(jpred["predicted"].get<std::string>().size() == 19u);
  CHECK(fs::exists(results / "results.json"));
  CHECK(fs::exists(results / "curves.csv"));
  CHECK(fs::exists(results / "erp_estimates.csv"));

  // forced modes agree with themselves and differ only in the trace used
  const RunResult pref = run("predict --trace " + trace +
                             " --mode reference --test " +
                             (dir / "test.csv").string() + " --config " +
                             config + " --max-seqs 1");
  REQUIRE(pref.code == 0);
  CHECK(json::parse(pref.out)["mode"] == "BSM-Reference");

  const RunResult diag = run("diagnose --traces " + trace);
  REQUIRE(diag.code == 0);
  const json jdiag = json::parse(diag.out);
  CHECK(jdiag["psrf"].is_object());
  CHECK(jdiag["psrf"].contains("psi1_0"));
  CHECK(jdiag["psrf"].contains("psi1_tilde_1"));
}

TEST_CASE("errors are machine-readable JSON with stable exit codes") {
  const RunResult missing = run("fit --data /nonexistent/train.csv");
  CHECK(missing.code == 2);
  const json jm = json::parse(missing.err);
  CHECK(jm["error"]["type"] == "io");
  CHECK(jm["error"]["message"].get<std::string>().find("train.csv") !=
        std::string::npos);

  const RunResult badpreset = run("simulate --preset bogus");
  CHECK(badpreset.code != 0);
  CHECK(json::parse(badpreset.err)["error"]["type"] == "usage");

  const RunResult badmode =
      run("predict --trace /nonexistent/t.json --test /nonexistent/d.csv "
          "--mode sideways");
  CHECK(badmode.code != 0);
  CHECK(json::parse(badmode.err)["error"].contains("type"));

  const RunResult nosub = run("");
  CHECK(nosub.code != 0);
}

TEST_CASE("malformed input data is rejected with the io error channel") {
  const fs::path dir = work_dir() / "baddata";
  fs::create_directories(dir);
  const fs::path csv = dir / "train.csv";
  {
    std::ofstream out(csv);
    out << "participant,char_idx\n0,0\n";
  }
  const RunResult r = run("fit --data " + csv.string());
  CHECK(r.code == 2);
  const json j = json::parse(r.err);
  CHECK(j["error"]["type"] == "io");
  CHECK(j["error"]["message"].get<std::string>().find("header") !=
        std::string::npos);
}

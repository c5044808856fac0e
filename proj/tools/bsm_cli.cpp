// bsm: calibration-transfer speller toolkit.
//
// Subcommands: simulate, fit, select, predict, diagnose. Every command is
// deterministic given --seed; errors leave a machine-readable JSON object
// on stderr and a nonzero exit code.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bsm/io.hpp"
#include "bsm/simgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------- config

struct AppConfig {
  bsm::ModelConfig model;
  bsm::McmcConfig mcmc;
};

json model_to_json(const bsm::ModelConfig& m) {
  return json{{"kernel_target", {{"s0", m.kernel_target.s0},
                                 {"gamma0", m.kernel_target.gamma0}}},
              {"kernel_nontarget", {{"s0", m.kernel_nontarget.s0},
                                    {"gamma0", m.kernel_nontarget.gamma0}}},
              {"truncation_threshold", m.truncation_threshold},
              {"rho_grid", m.rho_grid},
              {"eta_grid", m.eta_grid},
              {"pi", m.pi},
              {"delta_z", m.delta_z},
              {"n_channels", m.n_channels},
              {"n_times", m.n_times}};
}

bsm::ModelConfig model_from_json(const json& j) {
  bsm::ModelConfig m;
  if (j.contains("kernel_target")) {
    m.kernel_target.s0 = j["kernel_target"].value("s0", m.kernel_target.s0);
    m.kernel_target.gamma0 =
        j["kernel_target"].value("gamma0", m.kernel_target.gamma0);
  }
  if (j.contains("kernel_nontarget")) {
    m.kernel_nontarget.s0 =
        j["kernel_nontarget"].value("s0", m.kernel_nontarget.s0);
    m.kernel_nontarget.gamma0 =
        j["kernel_nontarget"].value("gamma0", m.kernel_nontarget.gamma0);
  }
  m.truncation_threshold =
      j.value("truncation_threshold", m.truncation_threshold);
  if (j.contains("rho_grid")) m.rho_grid = j["rho_grid"].get<std::vector<double>>();
  if (j.contains("eta_grid")) m.eta_grid = j["eta_grid"].get<std::vector<double>>();
  m.pi = j.value("pi", m.pi);
  m.delta_z = j.value("delta_z", m.delta_z);
  m.n_channels = j.value("n_channels", m.n_channels);
  m.n_times = j.value("n_times", m.n_times);
  return m;
}

void save_model_config(const std::string& path, const bsm::ModelConfig& m) {
  std::ofstream out(path);
  if (!out) throw bsm::IoError("cannot write config: " + path);
  json doc = {{"schema_version", 1}, {"model", model_to_json(m)}};
  out << doc.dump(2) << "\n";
}

bsm::ModelConfig load_model_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw bsm::IoError("cannot open config: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw bsm::IoError("config " + path + ": " + e.what());
  }
  return model_from_json(doc.contains("model") ? doc["model"] : doc);
}

// Resolve the model configuration: explicit config file wins, then preset,
// then defaults.
bsm::ModelConfig resolve_model(const std::string& config_path,
                               const std::string& preset) {
  if (!config_path.empty()) return load_model_config(config_path);
  if (!preset.empty()) return bsm::make_preset(preset, 0).model;
  return bsm::ModelConfig{};
}

std::pair<bsm::EigenBasis, bsm::EigenBasis> make_bases(
    const bsm::ModelConfig& m) {
  return {bsm::make_basis(m.kernel_target, m.n_times, m.truncation_threshold),
          bsm::make_basis(m.kernel_nontarget, m.n_times,
                          m.truncation_threshold)};
}

// reference trace lives next to the main trace: trace.json -> trace.ref.json
std::string ref_trace_path(const std::string& path) {
  const fs::path p(path);
  fs::path q = p;
  q.replace_extension();
  q += ".ref";
  q += p.extension();
  return q.string();
}

// PSRF with the degenerate case mapped to 1.0 when every chain is stuck at
// one identical value (a grid parameter can legitimately do that); genuine
// zero-variance disagreements still raise.
double psrf_report(const std::vector<std::vector<double>>& chains) {
  try {
    return bsm::psrf(chains);
  } catch (const bsm::NumericalError&) {
    const double v = chains.at(0).at(0);
    for (const auto& c : chains)
      for (double x : c)
        if (x != v) throw;
    return 1.0;
  }
}

json psrf_table(const std::vector<bsm::ChainTrace>& traces,
                bool new_participant_only) {
  std::vector<std::vector<std::pair<std::string, std::vector<double>>>> all;
  for (const auto& tr : traces) all.push_back(bsm::scalar_series(tr));
  json out = json::object();
  for (std::size_t p = 0; p < all[0].size(); ++p) {
    const std::string& name = all[0][p].first;
    if (new_participant_only && name.find("tilde") != std::string::npos)
      continue;
    std::vector<std::vector<double>> chains;
    for (const auto& series : all) chains.push_back(series[p].second);
    out[name] = psrf_report(chains);
  }
  return out;
}

// chains concatenated into one trace, e.g. for selection or prediction
bsm::ChainTrace merge_chains(const std::vector<bsm::ChainTrace>& traces) {
  if (traces.empty()) throw bsm::ContractError("no chains in trace file");
  bsm::ChainTrace merged = traces[0];
  for (std::size_t i = 1; i < traces.size(); ++i)
    merged.draws.insert(merged.draws.end(), traces[i].draws.begin(),
                        traces[i].draws.end());
  return merged;
}

// deterministic stride thinning to at most cap draws (0 = keep all)
std::vector<bsm::Draw> thin_draws(std::vector<bsm::Draw> draws, int cap) {
  if (cap <= 0 || static_cast<int>(draws.size()) <= cap) return draws;
  std::vector<bsm::Draw> out;
  out.reserve(cap);
  const double stride =
      static_cast<double>(draws.size()) / static_cast<double>(cap);
  for (int i = 0; i < cap; ++i)
    out.push_back(draws[static_cast<std::size_t>(i * stride)]);
  return out;
}

bsm::Dataset test_to_dataset(const std::vector<bsm::TestCharacter>& test,
                             int n_channels, int n_times) {
  bsm::Dataset data;
  data.n_channels = n_channels;
  data.n_times = n_times;
  data.participants.resize(1);
  for (std::size_t ci = 0; ci < test.size(); ++ci) {
    const bsm::TestCharacter& tc = test[ci];
    for (std::size_t si = 0; si < tc.sequences.size(); ++si) {
      const bsm::TestSequence& seq = tc.sequences[si];
      const bsm::rcp::TypeSeq y = bsm::rcp::stimulus_type(seq.w, tc.truth);
      for (int j = 0; j < bsm::rcp::kCodes; ++j) {
        bsm::Epoch ep;
        ep.x = seq.x[j];
        ep.y = y[j];
        ep.char_idx = static_cast<int>(ci);
        ep.seq_idx = static_cast<int>(si);
        ep.stim_code = seq.w[j];
        data.participants[0].push_back(std::move(ep));
      }
    }
  }
  return data;
}

// ------------------------------------------------------------- commands

int cmd_simulate(const std::string& preset, std::uint64_t seed,
                 const std::string& out_dir, const std::string& param_file,
                 int train_seqs_new, int train_seqs_source, int test_seqs) {
  bsm::Preset p = bsm::make_preset(preset, seed);
  if (!param_file.empty()) {
    p.groups = bsm::load_param_file(param_file);
    p.model.n_channels = static_cast<int>(p.groups[0].sigma.size());
    p.model.n_times = static_cast<int>(p.groups[0].target_shape.cols());
  }
  if (train_seqs_new > 0) p.scenario.train_seqs_new = train_seqs_new;
  if (train_seqs_source > 0) p.scenario.train_seqs_source = train_seqs_source;
  if (test_seqs >= 0) p.scenario.test_seqs = test_seqs;

  const bsm::SimOutput sim = bsm::gen_dataset(p.scenario, p.groups);

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw bsm::IoError("cannot create output directory: " + out_dir);
  const std::string train_path = (fs::path(out_dir) / "train.csv").string();
  const std::string test_path = (fs::path(out_dir) / "test.csv").string();
  const std::string config_path = (fs::path(out_dir) / "config.json").string();
  bsm::write_dataset(train_path, sim.train);
  bsm::write_dataset(
      test_path,
      test_to_dataset(sim.test, sim.train.n_channels, sim.train.n_times));
  save_model_config(config_path, p.model);

  std::cout << json{{"train", train_path},
                    {"test", test_path},
                    {"config", config_path},
                    {"participants", sim.train.participants.size()}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_fit(const std::string& data_path, const std::string& config_path,
            const std::string& preset, const std::string& out_path,
            bsm::McmcConfig mcmc) {
  bsm::Dataset data = bsm::read_dataset(data_path);
  bsm::ModelConfig model = resolve_model(config_path, preset);
  model.n_channels = data.n_channels;
  model.n_times = data.n_times;
  model.validate();
  const auto [basis1, basis0] = make_bases(model);

  const auto traces = bsm::run_chains(mcmc, data, model, basis1, basis0);

  // reference model: the new participant alone, same settings
  bsm::Dataset ref_data;
  ref_data.n_channels = data.n_channels;
  ref_data.n_times = data.n_times;
  ref_data.participants.push_back(data.participants[0]);
  const auto ref_traces =
      bsm::run_chains(mcmc, ref_data, model, basis1, basis0);

  bsm::write_traces(out_path, traces);
  const std::string ref_path = ref_trace_path(out_path);
  bsm::write_traces(ref_path, ref_traces);

  const bsm::SelectionDecision sel =
      bsm::select_model(merge_chains(traces), model.delta_z);
  long acc_psi = 0, prop_psi = 0, acc_sig = 0, prop_sig = 0;
  for (const auto& tr : traces) {
    acc_psi += tr.accept_psi.accepted;
    prop_psi += tr.accept_psi.proposed;
    acc_sig += tr.accept_sigma.accepted;
    prop_sig += tr.accept_sigma.proposed;
  }

  json report = {
      {"trace", out_path},
      {"reference_trace", ref_path},
      {"match_means", sel.match_means},
      {"psrf", psrf_table(traces, /*new_participant_only=*/true)},
      {"accept_rate_psi",
       prop_psi ? static_cast<double>(acc_psi) / prop_psi : 0.0},
      {"accept_rate_sigma",
       prop_sig ? static_cast<double>(acc_sig) / prop_sig : 0.0}};
  std::cout << report.dump() << "\n";
  return 0;
}

int cmd_select(const std::string& trace_path, double delta_z) {
  const auto traces = bsm::read_traces(trace_path);
  const bsm::SelectionDecision d =
      bsm::select_model(merge_chains(traces), delta_z);
  std::cout << json{{"mode", d.mode},
                    {"match_means", d.match_means},
                    {"delta_z", d.delta_z}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_predict(const std::string& trace_path, const std::string& mode_flag,
                const std::string& test_path, int max_seqs, double delta_z,
                const std::string& config_path, const std::string& preset,
                const std::string& out_dir, int max_draws) {
  const auto traces = bsm::read_traces(trace_path);
  const bsm::ChainTrace merged = merge_chains(traces);

  bsm::SelectionDecision decision;
  if (mode_flag == "auto") {
    decision = bsm::select_model(merged, delta_z);
  } else if (mode_flag == "bsm") {
    decision = bsm::select_model(merged, delta_z);
    decision.mode = "BSM";
  } else if (mode_flag == "reference") {
    decision = bsm::select_model(merged, delta_z);
    decision.mode = "BSM-Reference";
  } else {
    throw bsm::ParameterError("--mode must be auto, bsm, or reference");
  }

  std::vector<bsm::ChainTrace> used_traces;
  if (decision.mode == "BSM-Reference")
    used_traces = bsm::read_traces(ref_trace_path(trace_path));
  else
    used_traces = traces;
  std::vector<bsm::Draw> draws =
      thin_draws(bsm::pool_draws(used_traces), max_draws);

  bsm::ModelConfig model = resolve_model(config_path, preset);
  model.n_channels = merged.n_channels;
  model.n_times = merged.n_times;
  const auto [basis1, basis0] = make_bases(model);
  if (basis1.level != merged.level1 || basis0.level != merged.level0)
    throw bsm::ParameterError(
        "basis level mismatch between trace and model configuration; pass "
        "the config used at fit time");

  const bsm::Dataset test_data = bsm::read_dataset(test_path);
  const auto test = bsm::to_test_set(test_data);

  const std::vector<double> acc =
      bsm::accuracy_curve(test, draws, basis1, basis0, max_seqs);

  std::string predicted, truth;
  for (const bsm::TestCharacter& tc : test) {
    const bsm::CharPosterior post =
        bsm::char_log_posterior(tc.sequences, draws, basis1, basis0);
    predicted += bsm::classify(post);
    truth += tc.truth;
  }

  if (!out_dir.empty()) {
    bsm::ResultBundle bundle;
    bundle.summaries = bsm::compute_summaries(used_traces);
    bundle.match_means = decision.match_means;
    const json psrf = psrf_table(used_traces, true);
    for (const auto& it : psrf.items())
      bundle.psrf[it.key()] = it.value().get<double>();
    bundle.decision = decision;
    bundle.erp_target = bsm::erp_band(draws, basis1, basis0, 1);
    bundle.erp_nontarget = bsm::erp_band(draws, basis1, basis0, 0);
    bundle.curves.push_back({decision.mode, "predict", acc});
    bsm::write_results(bundle, out_dir);
  }

  std::cout << json{{"mode", decision.mode},
                    {"match_means", decision.match_means},
                    {"accuracy", acc},
                    {"predicted", predicted},
                    {"truth", truth}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_diagnose(const std::vector<std::string>& trace_paths) {
  std::vector<bsm::ChainTrace> chains;
  for (const std::string& p : trace_paths)
    for (auto& tr : bsm::read_traces(p)) chains.push_back(std::move(tr));
  if (chains.size() < 2)
    throw bsm::ParameterError("diagnose: need at least 2 chains in total");
  std::cout << json{{"psrf", psrf_table(chains, false)}}.dump() << "\n";
  return 0;
}

json error_json(const std::string& type, const std::string& message) {
  return json{{"error", {{"type", type}, {"message", message}}}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian signal-matching speller calibration"};
  app.require_subcommand(1);

  // simulate
  std::string preset, out_dir = "bsm_sim", param_file;
  std::uint64_t seed = 0;
  int train_seqs_new = 0, train_seqs_source = 0, test_seqs = -1;
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset");
  sim->add_option("--preset", preset, "Scenario preset")
      ->required()
      ->check(CLI::IsMember(bsm::preset_names()));
  sim->add_option("--seed", seed, "Master RNG seed");
  sim->add_option("--out", out_dir, "Output directory");
  sim->add_option("--param-file", param_file, "Group parameter JSON");
  sim->add_option("--train-seqs-new", train_seqs_new,
                  "Training sequences per character, new participant");
  sim->add_option("--train-seqs-source", train_seqs_source,
                  "Training sequences per character, source participants");
  sim->add_option("--test-seqs", test_seqs, "Test sequences per character");

  // fit
  std::string data_path, config_path, fit_preset, trace_out = "trace.json";
  bsm::McmcConfig mcmc;
  auto* fit = app.add_subcommand(
      "fit", "Fit the matching and reference models by MCMC");
  fit->add_option("--data", data_path, "Training dataset CSV")->required();
  fit->add_option("--config", config_path, "Model configuration JSON");
  fit->add_option("--preset", fit_preset, "Model defaults from a preset")
      ->check(CLI::IsMember(bsm::preset_names()));
  fit->add_option("--out", trace_out, "Trace output path");
  fit->add_option("--chains", mcmc.n_chains, "Number of chains");
  fit->add_option("--burnin", mcmc.n_burnin, "Burn-in iterations");
  fit->add_option("--samples", mcmc.n_samples, "Retained draws per chain");
  fit->add_option("--thin", mcmc.thinning, "Thinning interval");
  fit->add_option("--step-psi", mcmc.step_psi, "MH step for psi (log scale)");
  fit->add_option("--step-sigma", mcmc.step_sigma,
                  "MH step for sigma (log scale)");
  fit->add_option("--seed", mcmc.seed, "Master RNG seed");

  // select
  std::string sel_trace;
  double delta_z = 0.5;
  auto* sel = app.add_subcommand("select", "Model selection from a trace");
  sel->add_option("--trace", sel_trace, "Trace JSON from fit")->required();
  sel->add_option("--delta-z", delta_z, "Matching threshold");

  // predict
  std::string pred_trace, pred_mode = "auto", pred_test, pred_config,
              pred_preset, pred_out;
  int max_seqs = 10, max_draws = 600;
  double pred_delta_z = 0.5;
  auto* pred = app.add_subcommand("predict", "Character prediction");
  pred->add_option("--trace", pred_trace, "Trace JSON from fit")->required();
  pred->add_option("--mode", pred_mode, "auto | bsm | reference");
  pred->add_option("--test", pred_test, "Test dataset CSV")->required();
  pred->add_option("--max-seqs", max_seqs, "Accuracy curve length");
  pred->add_option("--delta-z", pred_delta_z, "Matching threshold (auto)");
  pred->add_option("--config", pred_config, "Model configuration JSON");
  pred->add_option("--preset", pred_preset, "Model defaults from a preset")
      ->check(CLI::IsMember(bsm::preset_names()));
  pred->add_option("--out", pred_out, "Result bundle directory");
  pred->add_option("--max-draws", max_draws,
                   "Cap on pooled draws used (0 = all)");

  // diagnose
  std::vector<std::string> diag_traces;
  auto* diag = app.add_subcommand("diagnose", "Gelman-Rubin PSRF table");
  diag->add_option("--traces", diag_traces, "Trace files (chains pooled)")
      ->required()
      ->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << error_json("usage", e.what()).dump() << "\n";
    return e.get_exit_code() == 0 ? 1 : e.get_exit_code();
  }

  try {
    if (sim->parsed())
      return cmd_simulate(preset, seed, out_dir, param_file, train_seqs_new,
                          train_seqs_source, test_seqs);
    if (fit->parsed())
      return cmd_fit(data_path, config_path, fit_preset, trace_out, mcmc);
    if (sel->parsed()) return cmd_select(sel_trace, delta_z);
    if (pred->parsed())
      return cmd_predict(pred_trace, pred_mode, pred_test, max_seqs,
                         pred_delta_z, pred_config, pred_preset, pred_out,
                         max_draws);
    if (diag->parsed()) return cmd_diagnose(diag_traces);
  } catch (const bsm::IoError& e) {
    std::cerr << error_json("io", e.what()).dump() << "\n";
    return 2;
  } catch (const bsm::ValidationError& e) {
    std::cerr << error_json("validation", e.what()).dump() << "\n";
    return 3;
  } catch (const bsm::ParameterError& e) {
    std::cerr << error_json("parameter", e.what()).dump() << "\n";
    return 4;
  } catch (const bsm::NumericalError& e) {
    std::cerr << error_json("numerical", e.what()).dump() << "\n";
    return 5;
  } catch (const std::exception& e) {
    std::cerr << error_json("internal", e.what()).dump() << "\n";
    return 10;
  }
  return 1;
}

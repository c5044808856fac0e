#include "bsm/io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

namespace bsm {

namespace {

using nlohmann::json;

constexpr const char* kDatasetHeader =
    "participant,char_idx,seq_idx,stim_idx,stim_code,stim_type,channel,t,"
    "value";

[[noreturn]] void row_error(long row, const std::string& rule,
                            const std::string& detail) {
  throw IoError("row " + std::to_string(row) + ": " + rule + ": " + detail);
}

long parse_int(const std::string& field, long row, const std::string& name) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(field, &pos);
    if (pos != field.size()) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    row_error(row, "parse", "field " + name + " is not an integer: \"" +
                                field + "\"");
  }
}

double parse_double(const std::string& field, long row,
                    const std::string& name) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(field, &pos);
    if (pos != field.size() || !std::isfinite(v))
      throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    row_error(row, "parse", "field " + name + " is not a finite number: \"" +
                                field + "\"");
  }
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

struct EpochKey {
  long participant, char_idx, seq_idx, stim_idx;
  bool operator<(const EpochKey& o) const {
    return std::tie(participant, char_idx, seq_idx, stim_idx) <
           std::tie(o.participant, o.char_idx, o.seq_idx, o.stim_idx);
  }
};

struct EpochAcc {
  long first_row = 0;
  int stim_code = 0;
  int stim_type = 0;
  std::map<std::pair<long, long>, double> values;  // (channel, t) -> value
};

json matrix_to_json(const MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw IoError("trace file: bad matrix");
  const std::size_t cols = j[0].size();
  MatrixXd m(j.size(), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (j[i].size() != cols) throw IoError("trace file: ragged matrix");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<int>(i), static_cast<int>(c)) = j[i][c];
  }
  return m;
}

double round6(double v) { return std::round(v * 1e6) / 1e6; }

double quantile(std::vector<double>& sorted_scratch, double q) {
  std::sort(sorted_scratch.begin(), sorted_scratch.end());
  const double idx = q * static_cast<double>(sorted_scratch.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(idx);
  const std::size_t hi = std::min(lo + 1, sorted_scratch.size() - 1);
  const double w = idx - static_cast<double>(lo);
  return (1.0 - w) * sorted_scratch[lo] + w * sorted_scratch[hi];
}

}  // namespace

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset: " + path);

  std::string line;
  if (!std::getline(in, line)) throw IoError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kDatasetHeader)
    row_error(1, "header", "expected \"" + std::string(kDatasetHeader) + "\"");

  std::map<EpochKey, EpochAcc> epochs;
  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv(line);
    if (f.size() != 9)
      row_error(row, "field-count", "expected 9 fields, got " +
                                        std::to_string(f.size()));
    EpochKey key{parse_int(f[0], row, "participant"),
                 parse_int(f[1], row, "char_idx"),
                 parse_int(f[2], row, "seq_idx"),
                 parse_int(f[3], row, "stim_idx")};
    const long code = parse_int(f[4], row, "stim_code");
    const long type = parse_int(f[5], row, "stim_type");
    const long channel = parse_int(f[6], row, "channel");
    const long t = parse_int(f[7], row, "t");
    const double value = parse_double(f[8], row, "value");

    if (key.participant < 0) row_error(row, "range", "participant < 0");
    if (key.stim_idx < 0 || key.stim_idx >= rcp::kCodes)
      row_error(row, "range", "stim_idx outside 0..11");
    if (code < 1 || code > rcp::kCodes)
      row_error(row, "range", "stim_code outside 1..12");
    if (type != 0 && type != 1) row_error(row, "range", "stim_type not 0/1");
    if (channel < 1) row_error(row, "range", "channel < 1");
    if (t < 0) row_error(row, "range", "t < 0");

    EpochAcc& acc = epochs[key];
    if (acc.values.empty()) {
      acc.first_row = row;
      acc.stim_code = static_cast<int>(code);
      acc.stim_type = static_cast<int>(type);
    } else if (acc.stim_code != code || acc.stim_type != type) {
      row_error(row, "consistency",
                "stim_code/stim_type differ within one epoch");
    }
    if (!acc.values.emplace(std::make_pair(channel, t), value).second)
      row_error(row, "duplicate", "repeated (channel, t) within one epoch");
  }
  if (epochs.empty()) throw IoError(path + ": no data rows");

  // infer dimensions from the first epoch; everything else must match
  const EpochAcc& first = epochs.begin()->second;
  long n_e = 0, n_t = 0;
  for (const auto& [ct, v] : first.values) {
    n_e = std::max(n_e, ct.first);
    n_t = std::max(n_t, ct.second + 1);
  }
  if (static_cast<long>(first.values.size()) != n_e * n_t)
    row_error(first.first_row, "dimension", "epoch grid has holes");

  long n_participants = 0;
  for (const auto& [key, acc] : epochs)
    n_participants = std::max(n_participants, key.participant + 1);

  Dataset data;
  data.n_channels = static_cast<int>(n_e);
  data.n_times = static_cast<int>(n_t);
  data.participants.resize(n_participants);

  // assemble epochs and check sequence-level rules
  EpochKey cur_seq{-1, -1, -1, -1};
  std::vector<const EpochAcc*> seq_accs;
  std::vector<int> seq_codes;
  auto flush_seq = [&]() {
    if (seq_accs.empty()) return;
    const long r = seq_accs.front()->first_row;
    if (seq_accs.size() != rcp::kCodes)
      row_error(r, "incomplete-sequence",
                "sequence has " + std::to_string(seq_accs.size()) +
                    " epochs, expected 12");
    rcp::CodeSeq w{};
    int n_targets = 0;
    for (int j = 0; j < rcp::kCodes; ++j) {
      w[j] = seq_accs[j]->stim_code;
      n_targets += seq_accs[j]->stim_type;
    }
    try {
      rcp::validate_code_seq(w);
    } catch (const std::exception& e) {
      row_error(r, "permutation", e.what());
    }
    if (n_targets != 2)
      row_error(r, "two-target rule",
                "sequence has " + std::to_string(n_targets) +
                    " target flashes, expected 2");
    seq_accs.clear();
  };

  for (const auto& [key, acc] : epochs) {
    long e_max = 0, t_max = 0;
    for (const auto& [ct, v] : acc.values) {
      e_max = std::max(e_max, ct.first);
      t_max = std::max(t_max, ct.second + 1);
    }
    if (e_max != n_e || t_max != n_t ||
        static_cast<long>(acc.values.size()) != n_e * n_t)
      row_error(acc.first_row, "dimension",
                "epoch dimensions differ from the first epoch");

    if (key.participant != cur_seq.participant ||
        key.char_idx != cur_seq.char_idx || key.seq_idx != cur_seq.seq_idx) {
      flush_seq();
      cur_seq = key;
    }
    seq_accs.push_back(&acc);

    Epoch ep;
    ep.char_idx = static_cast<int>(key.char_idx);
    ep.seq_idx = static_cast<int>(key.seq_idx);
    ep.stim_code = acc.stim_code;
    ep.y = acc.stim_type;
    ep.x = MatrixXd(n_e, n_t);
    for (const auto& [ct, v] : acc.values)
      ep.x(static_cast<int>(ct.first - 1), static_cast<int>(ct.second)) = v;
    data.participants[key.participant].push_back(std::move(ep));
  }
  flush_seq();
  data.validate();
  return data;
}

void write_dataset(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset: " + path);
  out << kDatasetHeader << "\n";
  out.precision(17);
  for (std::size_t n = 0; n < data.participants.size(); ++n) {
    // rows grouped by epoch in presentation order
    std::map<std::tuple<int, int>, std::vector<const Epoch*>> seqs;
    for (const Epoch& ep : data.participants[n])
      seqs[{ep.char_idx, ep.seq_idx}].push_back(&ep);
    for (const auto& [cs, eps] : seqs) {
      for (std::size_t j = 0; j < eps.size(); ++j) {
        const Epoch& ep = *eps[j];
        for (int e = 0; e < data.n_channels; ++e)
          for (int t = 0; t < data.n_times; ++t)
            out << n << ',' << ep.char_idx << ',' << ep.seq_idx << ',' << j
                << ',' << ep.stim_code << ',' << ep.y << ',' << (e + 1) << ','
                << t << ',' << ep.x(e, t) << "\n";
      }
    }
  }
}

std::vector<TestCharacter> to_test_set(const Dataset& data, int participant) {
  if (participant < 0 ||
      participant >= static_cast<int>(data.participants.size()))
    throw ParameterError("to_test_set: participant out of range");

  std::map<int, std::map<int, std::vector<const Epoch*>>> chars;
  for (const Epoch& ep : data.participants[participant])
    chars[ep.char_idx][ep.seq_idx].push_back(&ep);

  std::vector<TestCharacter> out;
  for (const auto& [ci, seqs] : chars) {
    TestCharacter tc;
    bool truth_set = false;
    for (const auto& [si, eps] : seqs) {
      if (eps.size() != rcp::kCodes)
        throw ValidationError("to_test_set: incomplete sequence");
      TestSequence seq;
      seq.x.resize(rcp::kCodes);
      int row_code = 0, col_code = 0;
      for (int j = 0; j < rcp::kCodes; ++j) {
        seq.w[j] = eps[j]->stim_code;
        seq.x[j] = eps[j]->x;
        if (eps[j]->y == 1) {
          if (eps[j]->stim_code <= rcp::kRows)
            row_code = eps[j]->stim_code;
          else
            col_code = eps[j]->stim_code;
        }
      }
      if (row_code == 0 || col_code == 0)
        throw ValidationError(
            "to_test_set: target flashes do not identify a cell");
      const char truth = rcp::cell_at(row_code, col_code - rcp::kRows);
      if (truth_set && truth != tc.truth)
        throw ValidationError("to_test_set: inconsistent truth in character " +
                              std::to_string(ci));
      tc.truth = truth;
      truth_set = true;
      tc.sequences.push_back(std::move(seq));
    }
    out.push_back(std::move(tc));
  }
  return out;
}

void write_traces(const std::string& path,
                  const std::vector<ChainTrace>& traces) {
  json doc;
  doc["schema_version"] = 1;
  doc["chains"] = json::array();
  for (const ChainTrace& tr : traces) {
    json jc;
    jc["n_sources"] = tr.n_sources;
    jc["n_channels"] = tr.n_channels;
    jc["n_times"] = tr.n_times;
    jc["level1"] = tr.level1;
    jc["level0"] = tr.level0;
    jc["nuisance_names"] = tr.nuisance_names;
    jc["accept_psi"] = {{"accepted", tr.accept_psi.accepted},
                        {"proposed", tr.accept_psi.proposed}};
    jc["accept_sigma"] = {{"accepted", tr.accept_sigma.accepted},
                          {"proposed", tr.accept_sigma.proposed}};
    json jdraws = json::array();
    for (const Draw& d : tr.draws) {
      json jd;
      jd["a1"] = matrix_to_json(d.p0.a1);
      jd["psi1"] = d.p0.psi1;
      jd["sigma"] = std::vector<double>(d.p0.sigma.data(),
                                        d.p0.sigma.data() + d.p0.sigma.size());
      jd["rho"] = d.p0.rho;
      jd["eta"] = d.p0.eta;
      if (d.p0.a0) {
        jd["a0"] = matrix_to_json(*d.p0.a0);
        jd["psi0"] = *d.p0.psi0;
      }
      jd["z"] = d.z;
      jd["nuisance"] = d.nuisance;
      jdraws.push_back(std::move(jd));
    }
    jc["draws"] = std::move(jdraws);
    doc["chains"].push_back(std::move(jc));
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trace file: " + path);
  out << doc.dump() << "\n";
}

std::vector<ChainTrace> read_traces(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw IoError("trace file " + path + ": " + e.what());
  }
  if (doc.value("schema_version", 0) != 1)
    throw IoError("trace file " + path + ": unsupported schema version");

  std::vector<ChainTrace> traces;
  for (const json& jc : doc.at("chains")) {
    ChainTrace tr;
    tr.n_sources = jc.at("n_sources").get<int>();
    tr.n_channels = jc.at("n_channels").get<int>();
    tr.n_times = jc.at("n_times").get<int>();
    tr.level1 = jc.at("level1").get<int>();
    tr.level0 = jc.at("level0").get<int>();
    tr.nuisance_names =
        jc.at("nuisance_names").get<std::vector<std::string>>();
    tr.accept_psi.accepted = jc.at("accept_psi").at("accepted").get<long>();
    tr.accept_psi.proposed = jc.at("accept_psi").at("proposed").get<long>();
    tr.accept_sigma.accepted =
        jc.at("accept_sigma").at("accepted").get<long>();
    tr.accept_sigma.proposed =
        jc.at("accept_sigma").at("proposed").get<long>();
    for (const json& jd : jc.at("draws")) {
      Draw d;
      d.p0.a1 = matrix_from_json(jd.at("a1"));
      d.p0.psi1 = jd.at("psi1").get<double>();
      const auto sig = jd.at("sigma").get<std::vector<double>>();
      d.p0.sigma = Eigen::Map<const VectorXd>(sig.data(),
                                              static_cast<long>(sig.size()));
      d.p0.rho = jd.at("rho").get<double>();
      d.p0.eta = jd.at("eta").get<double>();
      if (jd.contains("a0")) {
        d.p0.a0 = matrix_from_json(jd.at("a0"));
        d.p0.psi0 = jd.at("psi0").get<double>();
      }
      d.z = jd.at("z").get<std::vector<int>>();
      d.nuisance = jd.at("nuisance").get<std::vector<double>>();
      if (static_cast<int>(d.z.size()) != tr.n_sources)
        throw IoError("trace file: Z length mismatch");
      tr.draws.push_back(std::move(d));
    }
    traces.push_back(std::move(tr));
  }
  return traces;
}

std::vector<Draw> pool_draws(const std::vector<ChainTrace>& traces) {
  std::vector<Draw> out;
  for (const ChainTrace& tr : traces)
    out.insert(out.end(), tr.draws.begin(), tr.draws.end());
  return out;
}

std::map<std::string, ScalarSummary> compute_summaries(
    const std::vector<ChainTrace>& traces) {
  if (traces.empty()) throw ContractError("compute_summaries: no traces");
  std::map<std::string, std::vector<double>> pooled;
  for (const ChainTrace& tr : traces)
    for (auto& [name, values] : scalar_series(tr)) {
      auto& dst = pooled[name];
      dst.insert(dst.end(), values.begin(), values.end());
    }

  std::map<std::string, ScalarSummary> out;
  for (auto& [name, v] : pooled) {
    if (v.empty()) continue;
    ScalarSummary s;
    for (double x : v) s.mean += x;
    s.mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - s.mean) * (x - s.mean);
    s.sd = v.size() > 1
               ? std::sqrt(var / static_cast<double>(v.size() - 1))
               : 0.0;
    std::vector<double> scratch = v;
    s.lo = quantile(scratch, 0.025);
    s.hi = quantile(scratch, 0.975);
    out[name] = s;
  }
  return out;
}

ErpBand erp_band(const std::vector<Draw>& draws, const EigenBasis& basis1,
                 const EigenBasis& basis0, int y) {
  if (draws.empty()) throw ContractError("erp_band: no draws");
  const int n_e = static_cast<int>(draws.front().p0.a1.rows());
  const int t0 = basis1.t0();

  // per-point draw values, then pointwise mean and quantiles
  std::vector<std::vector<double>> vals(
      static_cast<std::size_t>(n_e) * t0,
      std::vector<double>());
  for (auto& v : vals) v.reserve(draws.size());
  for (const Draw& d : draws) {
    const MatrixXd b = assemble_mean(d.p0, y, basis1, basis0);
    for (int e = 0; e < n_e; ++e)
      for (int t = 0; t < t0; ++t)
        vals[static_cast<std::size_t>(e) * t0 + t].push_back(b(e, t));
  }

  ErpBand band;
  band.mean = MatrixXd::Zero(n_e, t0);
  band.lo = MatrixXd::Zero(n_e, t0);
  band.hi = MatrixXd::Zero(n_e, t0);
  for (int e = 0; e < n_e; ++e)
    for (int t = 0; t < t0; ++t) {
      auto& v = vals[static_cast<std::size_t>(e) * t0 + t];
      double mean = 0.0;
      for (double x : v) mean += x;
      band.mean(e, t) = mean / static_cast<double>(v.size());
      band.lo(e, t) = quantile(v, 0.025);
      band.hi(e, t) = quantile(v, 0.975);
    }
  return band;
}

void write_results(const ResultBundle& bundle, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create result directory: " + dir);

  json doc;
  doc["schema_version"] = 1;
  for (const auto& [name, s] : bundle.summaries)
    doc["summaries"][name] = {
        {"mean", s.mean}, {"sd", s.sd}, {"lo", s.lo}, {"hi", s.hi}};
  doc["match_means"] = json::array();
  for (double m : bundle.match_means)
    doc["match_means"].push_back(round6(m));
  for (const auto& [name, v] : bundle.psrf) doc["psrf"][name] = v;
  doc["decision"] = {{"mode", bundle.decision.mode},
                     {"delta_z", bundle.decision.delta_z}};

  const std::string results_path = (fs::path(dir) / "results.json").string();
  std::ofstream jout(results_path);
  if (!jout) throw IoError("cannot write " + results_path);
  jout << doc.dump(2) << "\n";

  const std::string curves_path = (fs::path(dir) / "curves.csv").string();
  std::ofstream cout_(curves_path);
  if (!cout_) throw IoError("cannot write " + curves_path);
  cout_ << "method,config,seqs,accuracy\n";
  cout_.precision(17);
  for (const AccuracyCurve& c : bundle.curves)
    for (std::size_t s = 0; s < c.accuracy.size(); ++s)
      cout_ << c.method << ',' << c.config << ',' << (s + 1) << ','
            << c.accuracy[s] << "\n";

  const std::string erp_path = (fs::path(dir) / "erp_estimates.csv").string();
  std::ofstream eout(erp_path);
  if (!eout) throw IoError("cannot write " + erp_path);
  eout << "t,channel,kind,mean,lo,hi\n";
  eout.precision(17);
  auto write_band = [&](const ErpBand& b, const char* kind) {
    for (int e = 0; e < b.mean.rows(); ++e)
      for (int t = 0; t < b.mean.cols(); ++t)
        eout << t << ',' << (e + 1) << ',' << kind << ',' << b.mean(e, t)
             << ',' << b.lo(e, t) << ',' << b.hi(e, t) << "\n";
  };
  write_band(bundle.erp_target, "target");
  write_band(bundle.erp_nontarget, "nontarget");
}

}  // namespace bsm

// Copyright 2026 The hbproxy Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: run, verify, predict, report.
//
// Exit codes: 0 success, 1 verification mismatch, 2 configuration error.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hbproxy/hbproxy.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kMismatch = 1;
constexpr int kConfigError = 2;

const std::map<std::string, hbp::Axis> kAxes = {
    {"harmonics", hbp::Axis::harmonics}, {"gridpoints", hbp::Axis::gridpoints}, {"blocks", hbp::Axis::blocks}};
const std::map<std::string, hbp::Activation> kActivations = {{"per-loop", hbp::Activation::per_loop},
                                                              {"hoisted", hbp::Activation::hoisted}};
const std::map<std::string, hbp::ExchangeMode> kExchanges = {{"per-element", hbp::ExchangeMode::per_element},
                                                              {"aggregated", hbp::ExchangeMode::aggregated}};
const std::map<std::string, hbp::ThreadMode> kThreadModes = {{"serial", hbp::ThreadMode::serial},
                                                              {"tagged", hbp::ThreadMode::tagged_threads}};
const std::map<std::string, hbp::ReduceMode> kReduces = {{"per-item", hbp::ReduceMode::per_item},
                                                          {"buffered", hbp::ReduceMode::buffered}};
const std::map<std::string, hbp::WriteMode> kWrites = {{"per-value", hbp::WriteMode::per_value},
                                                        {"buffered", hbp::WriteMode::buffered}};

struct RunArgs {
  std::string case_file;
  int ranks = 1;
  int threads = 1;
  std::string axis = "harmonics";
  std::string activation = "hoisted";
  std::string exchange = "aggregated";
  std::string thread_exchange = "serial";
  std::string reduce = "buffered";
  std::string io = "buffered";
  int functag = 3;
  int iterations = -1;
  std::string out;
  std::string machine;
};

int cmd_run(const RunArgs& a) {
  const auto cfg = hbp::load_case(a.case_file);
  const auto topo = hbp::build_topology(cfg);
  hbp::RunOptions opt;
  opt.ranks = a.ranks;
  opt.team = {a.threads, kAxes.at(a.axis), kActivations.at(a.activation)};
  opt.exchange = {kExchanges.at(a.exchange), kThreadModes.at(a.thread_exchange)};
  opt.reduce = {kReduces.at(a.reduce), a.functag};
  opt.io = kWrites.at(a.io);
  if (a.iterations >= 0) opt.iterations = a.iterations;
  opt.out_dir = a.out;
  if (!a.machine.empty()) hbp::machine_profile(a.machine);

  const auto res = hbp::run_case(topo, cfg.params, opt);

  hbp::RunRecord rec;
  rec.case_id = fs::path(a.case_file).stem().string();
  rec.machine = a.machine;
  rec.strategy = a.exchange + "/" + a.thread_exchange + "/" + a.reduce + "/" + a.io + "/" + a.activation + "/" + a.axis;
  rec.ranks = a.ranks;
  rec.threads = a.threads;
  rec.iterations = opt.iterations.value_or(cfg.params.iterations);
  rec.wall_s = std::max(res.wall_s, 1e-9);
  const auto it = res.total(res.iterate);
  rec.counters.messages_sent = it.messages_sent;
  rec.counters.bytes_sent = it.bytes_sent;
  rec.counters.collective_calls = res.iterate.front().collective_calls;
  rec.counters.team_activations = res.iterate.front().team_activations;
  rec.counters.write_ops = res.total(res.output).write_ops;

  if (rec.iterations == 0) {
    std::cout << "0 iterations: output written, no run record\n";
    return kOk;
  }
  const auto report = hbp::emit_report({rec});
  std::ofstream(fs::path(a.out) / "run.csv") << report.csv;
  std::cout << report.table;
  return kOk;
}

int cmd_verify(const std::string& out, const std::string& golden) {
  if (!fs::is_directory(golden)) throw hbp::ConfigError(0, "golden directory '" + golden + "' not found");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(golden))
    if (e.is_regular_file() && e.path().extension() == ".bin") files.push_back(e.path().filename());
  if (files.empty()) throw hbp::ConfigError(0, "no .bin files in '" + golden + "'");
  std::sort(files.begin(), files.end());
  int bad = 0;
  for (const auto& f : files) {
    const auto o = fs::path(out) / f;
    if (!fs::exists(o)) {
      std::cout << "MISSING  " << f.string() << '\n';
      ++bad;
      continue;
    }
    const auto x = hbp::read_file(o);
    const auto y = hbp::read_file(fs::path(golden) / f);
    if (x != y) {
      std::size_t at = 0;
      while (at < std::min(x.size(), y.size()) && x[at] == y[at]) ++at;
      std::cout << "DIFFER   " << f.string() << " (first difference at byte " << at << ")\n";
      ++bad;
    } else {
      std::cout << "OK       " << f.string() << '\n';
    }
  }
  return bad ? kMismatch : kOk;
}

int cmd_predict(const std::string& case_file, const std::string& machine, const std::string& exchange, int ranks) {
  const auto cfg = hbp::load_case(case_file);
  const auto topo = hbp::build_topology(cfg);
  const auto& prof = hbp::machine_profile(machine);
  if (ranks <= 0) ranks = topo.nblocks();
  const auto part = hbp::partition_blocks(topo, ranks);
  const auto plan = hbp::build_cut_plan(topo, part, cfg.params.nharms, cfg.params.npde);
  const auto mode = kExchanges.at(exchange);
  const auto per_dir = hbp::predicted_message_count(plan, mode);
  std::cout << "case " << fs::path(case_file).stem().string() << ", " << ranks << " ranks, " << exchange << ", "
            << prof.name << "\n"
            << "messages per direction: " << per_dir.messages << "\n"
            << "bytes per direction:    " << per_dir.bytes << "\n"
            << "predicted seconds per exchange: " << hbp::predict_comm_time(plan, mode, prof, ranks) << "\n";
  return kOk;
}

int cmd_report(const std::vector<std::string>& files, const std::string& machine, const std::string& csv_out) {
  std::vector<hbp::RunRecord> records;
  for (const auto& f : files) {
    auto r = hbp::load_records_csv(f);
    records.insert(records.end(), r.begin(), r.end());
  }
  std::optional<std::string> over;
  if (!machine.empty()) over = machine;
  const auto rep = hbp::emit_report(records, over);
  std::cout << rep.table;
  if (!csv_out.empty()) std::ofstream(csv_out) << rep.csv;
  else std::cout << '\n' << rep.csv;
  return kOk;
}

template <class M>
auto choices(const M& m) {
  std::vector<std::string> v;
  for (const auto& [k, _] : m) v.push_back(k);
  return CLI::IsMember(v);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-block harmonic-balance proxy and parallel-runtime laboratory"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run a case and write restart/flowtec files");
  run_cmd->add_option("--case", run.case_file, "Case file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--ranks", run.ranks, "Number of ranks")->check(CLI::PositiveNumber);
  run_cmd->add_option("--threads", run.threads, "Threads per rank")->check(CLI::PositiveNumber);
  run_cmd->add_option("--axis", run.axis, "Thread work axis")->check(choices(kAxes));
  run_cmd->add_option("--activation", run.activation, "Team activation mode")->check(choices(kActivations));
  run_cmd->add_option("--exchange", run.exchange, "Halo exchange packing")->check(choices(kExchanges));
  run_cmd->add_option("--thread-exchange", run.thread_exchange, "Halo exchange threading")
      ->check(choices(kThreadModes));
  run_cmd->add_option("--reduce", run.reduce, "Force reduction packing")->check(choices(kReduces));
  run_cmd->add_option("--functag", run.functag, "Force components reduced (2 or 3)")->check(CLI::IsMember({2, 3}));
  run_cmd->add_option("--io", run.io, "Write strategy")->check(choices(kWrites));
  run_cmd->add_option("--iterations", run.iterations, "Iterations (default: from case)")
      ->check(CLI::NonNegativeNumber);
  run_cmd->add_option("--out", run.out, "Output directory")->required();
  run_cmd->add_option("--machine", run.machine, "Machine profile for the record (bgq, xe6, b510)");

  std::string v_out, v_golden;
  auto* verify_cmd = app.add_subcommand("verify", "Byte-compare output files against a golden directory");
  verify_cmd->add_option("--out", v_out, "Directory to check")->required();
  verify_cmd->add_option("--golden", v_golden, "Reference directory")->required();

  std::string p_case, p_machine, p_exchange = "aggregated";
  int p_ranks = 0;
  auto* predict_cmd = app.add_subcommand("predict", "Predict halo-exchange time from a machine profile");
  predict_cmd->add_option("--case", p_case, "Case file")->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--machine", p_machine, "bgq, xe6 or b510")->required()->check(
      CLI::IsMember({"bgq", "xe6", "b510"}));
  predict_cmd->add_option("--exchange", p_exchange, "Halo exchange packing")->check(choices(kExchanges));
  predict_cmd->add_option("--ranks", p_ranks, "Ranks (default: one per block)");

  std::vector<std::string> r_files;
  std::string r_machine, r_csv;
  auto* report_cmd = app.add_subcommand("report", "Combine run records into an efficiency/energy report");
  report_cmd->add_option("--records", r_files, "Record CSV files")->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--machine", r_machine, "Machine profile applied to every record")
      ->check(CLI::IsMember({"bgq", "xe6", "b510"}));
  report_cmd->add_option("--csv", r_csv, "Write the CSV here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*verify_cmd) return cmd_verify(v_out, v_golden);
    if (*predict_cmd) return cmd_predict(p_case, p_machine, p_exchange, p_ranks);
    if (*report_cmd) return cmd_report(r_files, r_machine, r_csv);
  } catch (const hbp::RankError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const hbp::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }
  return kConfigError;
}

// shuffle-align: command-line harness for the data-shuffling transceiver
// design experiments. Subcommands run the three standard sweeps (storage,
// antennas, users) or a single ad-hoc instance.

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "shuffle_align/errors.hpp"
#include "shuffle_align/ia_system.hpp"
#include "shuffle_align/instance.hpp"
#include "shuffle_align/rng.hpp"
#include "shuffle_align/solvers.hpp"
#include "shuffle_align/spectral.hpp"
#include "shuffle_align/sweep.hpp"
#include "shuffle_align/transceiver.hpp"

namespace sa = shuffle_align;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct SweepCliOpts {
  int reps = -1;  // -1 keeps the scenario default
  std::uint64_t seed = 0;
  std::string solvers = "dc,irls,nuclear";
  std::string out;
  int workers = 0;  // 0: one worker per hardware thread
  std::vector<int> values;
  bool timings = false;
};

void add_sweep_options(CLI::App* cmd, SweepCliOpts& opts) {
  cmd->add_option("--reps", opts.reps, "Trials per sweep value");
  cmd->add_option("--seed", opts.seed, "Base seed for trial derivation");
  cmd->add_option("--solvers", opts.solvers, "Comma list from {dc,irls,nuclear}");
  cmd->add_option("--out", opts.out, "Write records to this CSV file");
  cmd->add_option("--workers", opts.workers, "Worker threads (0 = auto)");
  cmd->add_option("--values", opts.values, "Override the swept values")->delimiter(',');
  cmd->add_flag("--timings", opts.timings, "Record real wall times in the CSV (not reproducible)");
  cmd->set_config("--config", "", "Line-based key=value configuration file");
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw sa::InvalidInput("cannot open for writing: " + path);
  os << content;
}

void print_sweep_summary(const sa::ScenarioConfig& cfg, const sa::SweepResult& result,
                         double elapsed_s) {
  std::printf("scenario=%s reps=%d trials=%d seed=%llu elapsed=%.1fs\n", cfg.name.c_str(),
              cfg.reps, result.instances, static_cast<unsigned long long>(cfg.base_seed),
              elapsed_s);
  std::printf("%12s %8s %10s %10s\n", "sweep_value", "solver", "mean_dof", "mean_rank");
  std::vector<int> values = cfg.sweep_values;
  if (values.empty()) values.push_back(0);
  for (int v : values) {
    for (sa::SolverKind kind : cfg.solvers) {
      double dof_sum = 0.0, rank_sum = 0.0;
      int count = 0;
      for (const auto& r : result.records) {
        if (r.sweep_value != v || r.solver != sa::to_string(kind)) continue;
        dof_sum += r.dof.decimal();
        rank_sum += r.rank;
        ++count;
      }
      if (count == 0) continue;
      std::printf("%12d %8s %10.4f %10.2f\n", v, sa::to_string(kind).c_str(), dof_sum / count,
                  rank_sum / count);
    }
  }
  if (result.descent_violations > 0)
    std::printf("warning: %ld descent violations recorded\n", result.descent_violations);
}

int run_sweep(sa::ScenarioConfig cfg, const SweepCliOpts& opts) {
  if (opts.reps >= 0) cfg.reps = opts.reps;
  cfg.base_seed = opts.seed;
  cfg.solvers = sa::parse_solver_list(opts.solvers);
  cfg.workers = opts.workers;
  cfg.timings = opts.timings;
  if (!opts.values.empty()) cfg.sweep_values = opts.values;

  const auto started = std::chrono::steady_clock::now();
  const sa::SweepResult result = sa::run_scenario(cfg);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  print_sweep_summary(cfg, result, elapsed);
  if (!opts.out.empty()) {
    write_file(opts.out, sa::records_to_csv(result.records));
    std::printf("wrote %zu records to %s\n", result.records.size(), opts.out.c_str());
  }
  return kExitOk;
}

struct SingleCliOpts {
  std::string instance_file;
  int K = 2, N = 2, mu = 1, L = 1, M = 1, d = 1;
  std::string placement = "random";
  std::string mode = "direct";
  std::uint64_t seed = 0;
  std::string solvers = "dc";
  std::string out;
  std::string trace_dir;
  std::string dump_system_file;
  std::string save_instance_file;
  bool verify = false;
  int draws = 10;
  double tol = 1e-3;
};

sa::PlacementRule placement_from_string(const std::string& s) {
  if (s == "uniform") return sa::PlacementRule::Uniform;
  if (s == "random") return sa::PlacementRule::Random;
  throw sa::InvalidInput("unknown placement rule: " + s);
}

int run_single(const SingleCliOpts& opts) {
  sa::ProblemInstance inst;
  if (!opts.instance_file.empty()) {
    inst = sa::load_instance_file(opts.instance_file);
  } else {
    inst = sa::make_instance(opts.K, opts.N, opts.mu, opts.L, opts.M, opts.d,
                             placement_from_string(opts.placement),
                             sa::channel_mode_from_string(opts.mode), opts.seed);
  }
  if (!opts.save_instance_file.empty()) sa::save_instance_file(inst, opts.save_instance_file);

  const sa::IndexSets idx = sa::build_index_sets(inst.K, inst.N, inst.placement);
  const sa::AffineSystem sys = sa::assemble(inst, idx);
  std::printf("instance: K=%d N=%d mu=%d L=%d M=%d d=%d T=%d S=%d unknowns=%lldx%lld nnz=%lld\n",
              inst.K, inst.N, inst.mu, inst.L, inst.M, inst.d, idx.T, sys.equations(),
              static_cast<long long>(sys.rows()), static_cast<long long>(sys.cols()),
              sys.nnz());

  if (!opts.dump_system_file.empty()) {
    std::ofstream os(opts.dump_system_file);
    if (!os) throw sa::InvalidInput("cannot open for writing: " + opts.dump_system_file);
    sa::dump_system(sys, os);
  }

  const auto solvers = sa::parse_solver_list(opts.solvers);
  sa::DcConfig dc_cfg;
  dc_cfg.init_seed = sa::mix_seed(inst.seed, sa::fnv1a64("dc-init"));
  std::vector<std::pair<sa::SolverKind, sa::SolverResult>> results;
  for (sa::SolverKind kind : solvers) {
    const auto started = std::chrono::steady_clock::now();
    sa::SolverResult res;
    switch (kind) {
      case sa::SolverKind::Dc: res = sa::min_rank_dc(sys, dc_cfg); break;
      case sa::SolverKind::Irls: res = sa::irls_solve(sys, 0.5, sa::IrlsConfig{}); break;
      case sa::SolverKind::Nuclear: res = sa::nuclear_solve(sys, sa::NuclearConfig{}); break;
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    std::printf("solver=%s rank=%d dof=%s iters=%ld residual=%.3g status=%s time=%.2fs\n",
                sa::to_string(kind).c_str(), res.numeric_rank, res.dof.str().c_str(),
                res.iterations, res.feasibility_residual, sa::to_string(res.status).c_str(),
                elapsed);
    results.emplace_back(kind, std::move(res));
  }

  if (!opts.trace_dir.empty()) {
    std::filesystem::create_directories(opts.trace_dir);
    for (const auto& [kind, res] : results) {
      std::ofstream os(opts.trace_dir + "/trace_" + sa::to_string(kind) + ".csv");
      sa::write_trace_csv(res, os);
    }
  }

  if (!opts.out.empty()) {
    std::vector<sa::SweepRecord> records;
    for (const auto& [kind, res] : results) {
      sa::SweepRecord rec;
      rec.scenario = "single";
      rec.sweep_value = 0;
      rec.trial = 0;
      rec.solver = sa::to_string(kind);
      rec.rank = res.numeric_rank;
      rec.dof = res.dof;
      rec.iterations = res.iterations;
      rec.wall_ms = 0;
      rec.seed = inst.seed;
      rec.feasibility_residual = res.feasibility_residual;
      rec.status = sa::to_string(res.status);
      records.push_back(std::move(rec));
    }
    write_file(opts.out, sa::records_to_csv(records));
  }

  if (opts.verify) {
    // Verify the lowest-rank solution end to end.
    const auto best = std::min_element(results.begin(), results.end(),
                                       [](const auto& a, const auto& b) {
                                         return a.second.numeric_rank < b.second.numeric_rank;
                                       });
    if (best == results.end() || best->second.numeric_rank < 1) {
      std::printf("verify: nothing to verify (rank 0 solution)\n");
      return kExitOk;
    }
    const sa::SolverResult& res = best->second;
    const sa::TransceiverSet ts = sa::factorize(res.X, res.numeric_rank, sys.layout());
    const sa::IaReport report = sa::verify_ia(ts, inst, idx, opts.tol);
    std::printf("verify: solver=%s r=%d alignment=%s worst_desired=%.3g worst_interference=%.3g\n",
                best->first == sa::SolverKind::Dc
                    ? "dc"
                    : sa::to_string(best->first).c_str(),
                ts.r, report.pass ? "pass" : "FAIL", report.worst_desired(),
                report.worst_interference());
    if (!opts.trace_dir.empty()) {
      std::ofstream os(opts.trace_dir + "/ia_report.csv");
      sa::write_ia_report_csv(report, os);
    }
    if (report.pass) {
      const sa::DecodeReport decode =
          sa::simulate_shuffle(ts, inst, idx, inst.seed, opts.draws, opts.tol);
      std::printf("decode: draws=%d max_relative_error=%.3g\n", decode.draws,
                  decode.max_relative_error);
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transceiver design for wireless data shuffling via low-rank optimization"};
  app.require_subcommand(1);

  SweepCliOpts storage_opts, antenna_opts, user_opts;
  auto* storage = app.add_subcommand("storage", "DoF over local storage size");
  add_sweep_options(storage, storage_opts);
  auto* antennas = app.add_subcommand("antennas", "DoF over antenna count");
  add_sweep_options(antennas, antenna_opts);
  auto* users = app.add_subcommand("users", "DoF over network size");
  add_sweep_options(users, user_opts);

  SingleCliOpts single_opts;
  auto* single = app.add_subcommand("single", "Solve one instance");
  single->add_option("--instance", single_opts.instance_file, "Load a serialized instance");
  single->add_option("--K", single_opts.K, "Users");
  single->add_option("--N", single_opts.N, "Files");
  single->add_option("--mu", single_opts.mu, "Files stored per user");
  single->add_option("--L", single_opts.L, "Antennas per user");
  single->add_option("--M", single_opts.M, "Antennas at the access point");
  single->add_option("--d", single_opts.d, "Datastreams per message");
  single->add_option("--placement", single_opts.placement, "uniform|random");
  single->add_option("--mode", single_opts.mode, "direct|composed");
  single->add_option("--seed", single_opts.seed, "Instance seed");
  single->add_option("--solvers", single_opts.solvers, "Comma list from {dc,irls,nuclear}");
  single->add_option("--out", single_opts.out, "Write records to this CSV file");
  single->add_option("--trace", single_opts.trace_dir, "Write per-solver iteration traces here");
  single->add_option("--dump-system", single_opts.dump_system_file,
                     "Dump the assembled linear system as text");
  single->add_option("--save-instance", single_opts.save_instance_file,
                     "Serialize the instance to this file");
  single->add_flag("--verify", single_opts.verify,
                   "Factorize the best solution and run the alignment and decode checks");
  single->add_option("--draws", single_opts.draws, "Message draws for the decode simulation");
  single->add_option("--tol", single_opts.tol, "Alignment verification tolerance");
  single->set_config("--config", "", "Line-based key=value configuration file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (storage->parsed()) return run_sweep(sa::storage_sweep_config(), storage_opts);
    if (antennas->parsed()) return run_sweep(sa::antenna_sweep_config(), antenna_opts);
    if (users->parsed()) return run_sweep(sa::user_sweep_config(), user_opts);
    return run_single(single_opts);
  } catch (const sa::InvalidInput& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const sa::ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  }
}

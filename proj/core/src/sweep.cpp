#include "shuffle_align/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "shuffle_align/errors.hpp"
#include "shuffle_align/ia_system.hpp"
#include "shuffle_align/rng.hpp"

namespace shuffle_align {

std::string to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::Dc: return "dc";
    case SolverKind::Irls: return "irls";
    case SolverKind::Nuclear: return "nuclear";
  }
  return "unknown";
}

SolverKind solver_from_string(const std::string& s) {
  if (s == "dc") return SolverKind::Dc;
  if (s == "irls") return SolverKind::Irls;
  if (s == "nuclear") return SolverKind::Nuclear;
  throw InvalidInput("unknown solver: " + s);
}

std::vector<SolverKind> parse_solver_list(const std::string& csv) {
  std::vector<SolverKind> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(solver_from_string(item));
  }
  if (out.empty()) throw InvalidInput("solver list is empty");
  return out;
}

namespace {

// Iteration budget used by the standard sweeps: infeasible rank passes are
// cut off once both the objective and the cut singular value flatten, which
// keeps figure-scale runs in the minutes while leaving converging passes
// their full budget.
void apply_sweep_solver_budget(ScenarioConfig& cfg) {
  cfg.dc.max_iter_per_k = 1200;
  cfg.dc.stall_rel = 1e-3;
}

}  // namespace

ScenarioConfig storage_sweep_config() {
  ScenarioConfig cfg;
  cfg.name = "storage";
  cfg.K = 5;
  cfg.N = 10;
  cfg.L = cfg.M = cfg.d = 1;
  cfg.placement_rule = PlacementRule::Random;
  cfg.sweep_variable = SweepVariable::Mu;
  cfg.sweep_values = {5, 6, 7, 8, 9};
  cfg.reps = 100;
  apply_sweep_solver_budget(cfg);
  return cfg;
}

ScenarioConfig antenna_sweep_config() {
  ScenarioConfig cfg;
  cfg.name = "antennas";
  cfg.K = 8;
  cfg.N = 4;
  cfg.mu = 1;
  cfg.d = 1;
  cfg.placement_rule = PlacementRule::Random;
  cfg.sweep_variable = SweepVariable::Antennas;
  cfg.sweep_values = {1, 2, 3, 4};
  cfg.reps = 100;
  apply_sweep_solver_budget(cfg);
  return cfg;
}

ScenarioConfig user_sweep_config() {
  ScenarioConfig cfg;
  cfg.name = "users";
  cfg.N = 5;
  cfg.mu = 2;
  cfg.L = cfg.M = cfg.d = 1;
  cfg.placement_rule = PlacementRule::Uniform;
  cfg.sweep_variable = SweepVariable::Users;
  cfg.sweep_values = {5, 10, 15, 20};
  cfg.reps = 100;
  apply_sweep_solver_budget(cfg);
  return cfg;
}

std::uint64_t trial_seed(std::uint64_t base_seed, const std::string& scenario,
                         int sweep_value, int trial) {
  std::uint64_t h = splitmix64(base_seed);
  h = mix_seed(h, fnv1a64(scenario));
  h = mix_seed(h, static_cast<std::uint64_t>(sweep_value));
  h = mix_seed(h, static_cast<std::uint64_t>(trial));
  return h;
}

namespace {

struct EffectiveParams {
  int K, N, mu, L, M;
};

EffectiveParams apply_sweep(const ScenarioConfig& cfg, int value) {
  EffectiveParams p{cfg.K, cfg.N, cfg.mu, cfg.L, cfg.M};
  switch (cfg.sweep_variable) {
    case SweepVariable::None: break;
    case SweepVariable::Mu: p.mu = value; break;
    case SweepVariable::Antennas: p.L = p.M = value; break;
    case SweepVariable::Users: p.K = value; break;
  }
  return p;
}

}  // namespace

void validate_config(const ScenarioConfig& cfg) {
  if (cfg.reps < 1) throw InvalidInput("reps must be at least 1");
  if (cfg.solvers.empty()) throw InvalidInput("at least one solver is required");
  if (cfg.sweep_variable != SweepVariable::None && cfg.sweep_values.empty())
    throw InvalidInput("sweep requested but no sweep values given");
  if (cfg.workers < 0) throw InvalidInput("workers must be nonnegative");
  if (!(cfg.irls_p > 0.0) || cfg.irls_p > 1.0) throw InvalidInput("irls p must lie in (0, 1]");

  std::vector<int> values = cfg.sweep_values;
  if (values.empty()) values.push_back(0);
  for (int v : values) {
    const EffectiveParams p = apply_sweep(cfg, v);
    if (p.K < 2 || p.N < 1 || p.mu < 1 || p.L < 1 || p.M < 1 || cfg.d < 1)
      throw InvalidInput("scenario parameters must be positive (K >= 2)");
    if (p.mu > p.N) throw InvalidInput("mu cannot exceed N");
    if (static_cast<long long>(p.mu) * p.K < p.N)
      throw InvalidInput("mu*K < N: the dataset cannot be covered");
    if (cfg.placement_rule == PlacementRule::Uniform &&
        (static_cast<long long>(p.mu) * p.K) % p.N != 0)
      throw InvalidInput("uniform placement needs mu*K divisible by N; violated at sweep value " +
                         std::to_string(v) + " (mu*K=" + std::to_string(p.mu * p.K) +
                         ", N=" + std::to_string(p.N) + ")");
  }
}

ProblemInstance instance_for(const ScenarioConfig& cfg, int sweep_value, std::uint64_t seed) {
  const EffectiveParams p = apply_sweep(cfg, sweep_value);
  return make_instance(p.K, p.N, p.mu, p.L, p.M, cfg.d, cfg.placement_rule, cfg.mode, seed);
}

namespace {

struct TrialOutput {
  std::vector<SweepRecord> records;
  long descent_violations = 0;
  long nnz_mismatches = 0;
};

TrialOutput run_trial(const ScenarioConfig& cfg, int sweep_value, int trial) {
  const std::uint64_t seed = trial_seed(cfg.base_seed, cfg.name, sweep_value, trial);
  const ProblemInstance inst = instance_for(cfg, sweep_value, seed);
  const IndexSets idx = build_index_sets(inst.K, inst.N, inst.placement);
  const AffineSystem sys = assemble(inst, idx);

  TrialOutput out;
  if (sys.nnz() != nnz_formula(inst, idx)) ++out.nnz_mismatches;

  DcConfig dc_cfg = cfg.dc;
  dc_cfg.init_seed = mix_seed(seed, fnv1a64("dc-init"));

  for (SolverKind kind : cfg.solvers) {
    const auto started = std::chrono::steady_clock::now();
    SolverResult res;
    switch (kind) {
      case SolverKind::Dc: res = min_rank_dc(sys, dc_cfg); break;
      case SolverKind::Irls: res = irls_solve(sys, cfg.irls_p, cfg.irls); break;
      case SolverKind::Nuclear: res = nuclear_solve(sys, cfg.nuclear); break;
    }
    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - started)
                             .count();
    out.descent_violations += res.descent_violations;

    SweepRecord rec;
    rec.scenario = cfg.name;
    rec.sweep_value = sweep_value;
    rec.trial = trial;
    rec.solver = to_string(kind);
    rec.rank = res.numeric_rank;
    rec.dof = res.dof;
    rec.iterations = res.iterations;
    rec.wall_ms = cfg.timings ? static_cast<long>(elapsed) : 0;
    rec.seed = seed;
    rec.feasibility_residual = res.feasibility_residual;
    rec.status = to_string(res.status);
    out.records.push_back(std::move(rec));
  }
  return out;
}

}  // namespace

SweepResult run_scenario(const ScenarioConfig& cfg) {
  validate_config(cfg);

  std::vector<int> values = cfg.sweep_values;
  if (values.empty()) values.push_back(0);

  struct Task {
    int value;
    int trial;
  };
  std::vector<Task> tasks;
  for (int v : values)
    for (int t = 0; t < cfg.reps; ++t) tasks.push_back({v, t});

  std::vector<TrialOutput> outputs(tasks.size());
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const size_t width = std::min<size_t>(
      tasks.size(), cfg.workers > 0 ? static_cast<size_t>(cfg.workers) : hw);

  std::atomic<size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        outputs[i] = run_trial(cfg, tasks[i].value, tasks[i].trial);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };

  if (width <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(width);
    for (size_t w = 0; w < width; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  SweepResult result;
  result.instances = static_cast<int>(tasks.size());
  for (auto& out : outputs) {
    result.descent_violations += out.descent_violations;
    result.nnz_mismatches += out.nnz_mismatches;
    for (auto& rec : out.records) result.records.push_back(std::move(rec));
  }

  // Slot order is already deterministic; the sort pins the contract anyway.
  auto pos_of = [&values](int v) {
    return static_cast<int>(std::find(values.begin(), values.end(), v) - values.begin());
  };
  auto solver_pos = [&cfg](const std::string& s) {
    for (size_t i = 0; i < cfg.solvers.size(); ++i)
      if (to_string(cfg.solvers[i]) == s) return static_cast<int>(i);
    return 0;
  };
  std::stable_sort(result.records.begin(), result.records.end(),
                   [&](const SweepRecord& a, const SweepRecord& b) {
                     const int pa = pos_of(a.sweep_value), pb = pos_of(b.sweep_value);
                     if (pa != pb) return pa < pb;
                     if (a.trial != b.trial) return a.trial < b.trial;
                     return solver_pos(a.solver) < solver_pos(b.solver);
                   });
  return result;
}

SweepResult run_storage_sweep(const ScenarioConfig& cfg) { return run_scenario(cfg); }
SweepResult run_antenna_sweep(const ScenarioConfig& cfg) { return run_scenario(cfg); }
SweepResult run_user_sweep(const ScenarioConfig& cfg) { return run_scenario(cfg); }

std::string csv_field(const std::string& raw) {
  if (raw.find_first_of(",\"\r\n") == std::string::npos) return raw;
  std::string quoted = "\"";
  for (char c : raw) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

void write_records_csv(const std::vector<SweepRecord>& records, std::ostream& os) {
  os << "scenario,sweep_value,trial,solver,rank,dof_rational,dof_decimal,iterations,"
        "wall_ms,seed,feasibility_residual,status\n";
  char buf[96];
  for (const auto& r : records) {
    os << csv_field(r.scenario) << ',' << r.sweep_value << ',' << r.trial << ','
       << csv_field(r.solver) << ',' << r.rank << ',' << csv_field(r.dof.str()) << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.dof.decimal());
    os << buf << ',' << r.iterations << ',' << r.wall_ms << ',' << r.seed << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.feasibility_residual);
    os << buf << ',' << csv_field(r.status) << '\n';
  }
}

std::string records_to_csv(const std::vector<SweepRecord>& records) {
  std::ostringstream oss;
  write_records_csv(records, oss);
  return oss.str();
}

double mean_dof(const std::vector<SweepRecord>& records, SolverKind solver, int sweep_value) {
  const std::string name = to_string(solver);
  double sum = 0.0;
  int count = 0;
  for (const auto& r : records) {
    if (r.solver == name && r.sweep_value == sweep_value) {
      sum += r.dof.decimal();
      ++count;
    }
  }
  return count > 0 ? sum / count : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace shuffle_align

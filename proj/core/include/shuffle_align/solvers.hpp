#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "shuffle_align/ia_system.hpp"
#include "shuffle_align/spectral.hpp"
#include "shuffle_align/types.hpp"

namespace shuffle_align {

enum class SolveStatus { Converged, MaxIter, Stalled };

std::string to_string(SolveStatus s);

struct IterRecord {
  int iter = 0;
  double objective = 0.0;
  double step_norm = 0.0;
  double sigma_kplus1 = 0.0;
  double residual = 0.0;
};

struct SolverResult {
  CMat X;                     // always feasible for the system it was solved on
  RVec singular_values;       // descending
  int numeric_rank = 0;
  Dof dof;                    // d / numeric_rank; r = 0 is the n/a sentinel
  double feasibility_residual = 0.0;  // ||A(X) - b||_inf
  long iterations = 0;
  SolveStatus status = SolveStatus::Converged;
  std::vector<IterRecord> trace;
  long descent_violations = 0;  // monotone-descent checks that failed
  int rank_param = 0;           // rank parameter of the returning pass
};

struct DcConfig {
  double rank_tol = 1e-5;
  int max_iter_per_k = 5000;
  int stall_window = 50;
  double stall_eps = 1e-10;
  // Optional relative stall term: a pass also stalls when the objective
  // improves by less than stall_rel * phi over the window. 0 disables it;
  // the sweep harness raises it to bound the time spent on infeasible ranks.
  double stall_rel = 0.0;
  // The least-norm point is itself a fixed point of the truncate-project map
  // on instances whose equations pin disjoint entries (it sits on a rank-r+1
  // critical point), so the default start is a seeded random feasible point.
  enum class Init { LeastNorm, Random } init = Init::Random;
  std::uint64_t init_seed = 0;
  // Start pass k+1 from pass k's final iterate instead of a fresh point.
  bool warm_start = true;
};

struct IrlsConfig {
  double gamma0 = 1e-2;       // divided by gamma_decay each iteration
  double gamma_decay = 1.1;
  double gamma_floor = 1e-12;
  int max_iter = 300;
  double step_tol = 1e-6;
  double rank_tol = 1e-5;
  // The least-norm point is a stationary point of every reweighted
  // subproblem on these systems (its rows stay mutually orthogonal), so the
  // default start is a seeded random feasible point, like the DC solver.
  enum class Init { LeastNorm, Random } init = Init::Random;
  std::uint64_t init_seed = 0;
};

struct NuclearConfig {
  double rho = 1.0;  // ADMM penalty
  double tol = 1e-6;
  int max_iter = 5000;
  double rank_tol = 1e-5;
};

/// Squared Ky Fan 2-k norm: sum of the k largest squared singular values.
double kyfan_2k_norm_sq(const CMat& X, Index k);

/// One subgradient of the squared Ky Fan 2-k norm: 2 U Sigma_k V^H.
CMat kyfan_2k_subgrad(const CMat& X, Index k);

/// Fixed-rank pass: alternate the rank-k truncation with the affine
/// projection until sigma_{k+1} drops below rank_tol, the objective
/// ||X||_F^2 - |||X|||_{k,2}^2 stalls, or the iteration budget runs out.
/// A non-null warm_start overrides cfg.init as the initial point.
SolverResult dc_solve(const AffineSystem& sys, Index k, const DcConfig& cfg,
                      const CMat* warm_start = nullptr);

/// Sweep k = 1, 2, ... and return the first pass whose solution has numeric
/// rank at most k. Terminates at k = min dims, where the objective is zero.
SolverResult min_rank_dc(const AffineSystem& sys, const DcConfig& cfg);

/// Iterative reweighted least squares with Schatten-p smoothing; each
/// subproblem min Tr(W X^H X) s.t. A(X) = b is solved exactly.
SolverResult irls_solve(const AffineSystem& sys, double p, const IrlsConfig& cfg);

/// Nuclear-norm relaxation by ADMM splitting (X = Z), singular value
/// soft-thresholding on the Z block. Output is the feasible X block.
SolverResult nuclear_solve(const AffineSystem& sys, const NuclearConfig& cfg);

/// Exact solution of min Tr(W X^H X) s.t. A(X) = b where
/// W^{-1} is proportional to I - V diag(eps) V^H (V orthonormal columns,
/// eps < 1 entrywise). Empty V gives W = I, i.e. the least-norm solution.
CMat weighted_min_norm(const AffineSystem& sys, const CMat& V, const RVec& eps);

inline Dof dof(long long d, long long rank) { return Dof::of(d, rank); }

/// Trace export: `iter, objective, step_norm, sigma_kplus1, residual`.
void write_trace_csv(const SolverResult& result, std::ostream& os);

}  // namespace shuffle_align

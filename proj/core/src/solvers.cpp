#include "shuffle_align/solvers.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <utility>

#include "shuffle_align/errors.hpp"
#include "shuffle_align/rng.hpp"

namespace shuffle_align {

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIter: return "max-iter";
    case SolveStatus::Stalled: return "stalled";
  }
  return "unknown";
}

namespace {

double tail_sq(const RVec& sigma, Index k) {
  double s = 0.0;
  for (Index i = k; i < sigma.size(); ++i) s += sigma[i] * sigma[i];
  return s;
}

double head_sq(const RVec& sigma, Index k) {
  double s = 0.0;
  for (Index i = 0; i < k && i < sigma.size(); ++i) s += sigma[i] * sigma[i];
  return s;
}

/// Largest singular value at or below tol (0 when none): the spectral edge
/// that the rank threshold cuts at.
double edge_sigma(const RVec& sigma, double tol) {
  for (Index i = 0; i < sigma.size(); ++i) {
    if (sigma[i] <= tol) return sigma[i];
  }
  return 0.0;
}

SolverResult degenerate_result(const AffineSystem& sys) {
  SolverResult res;
  res.X = CMat::Zero(sys.rows(), sys.cols());
  res.singular_values = RVec::Zero(std::min(sys.rows(), sys.cols()));
  res.numeric_rank = 0;
  res.dof = Dof::of(sys.layout().d, 0);
  res.status = SolveStatus::Converged;
  return res;
}

void measure(SolverResult& res, const AffineSystem& sys, const RVec& sigma, double rank_tol) {
  res.singular_values = sigma;
  res.numeric_rank = numeric_rank(sigma, rank_tol);
  res.dof = Dof::of(sys.layout().d, res.numeric_rank);
  res.feasibility_residual = sys.residual_inf(res.X);
}

}  // namespace

double kyfan_2k_norm_sq(const CMat& X, Index k) {
  if (k < 1 || k > std::min(X.rows(), X.cols()))
    throw InvalidInput("kyfan_2k_norm_sq: k out of range");
  return head_sq(singular_values(X), k);
}

CMat kyfan_2k_subgrad(const CMat& X, Index k) {
  if (k < 1 || k > std::min(X.rows(), X.cols()))
    throw InvalidInput("kyfan_2k_subgrad: k out of range");
  return 2.0 * truncate_rank(X, k);
}

SolverResult dc_solve(const AffineSystem& sys, Index k, const DcConfig& cfg,
                      const CMat* warm_start) {
  if (sys.equations() == 0) return degenerate_result(sys);
  const Index q = std::min(sys.rows(), sys.cols());
  if (k < 1 || k > q) throw InvalidInput("dc_solve: rank parameter out of range");

  CMat X;
  if (warm_start != nullptr) {
    X = *warm_start;
  } else if (cfg.init == DcConfig::Init::LeastNorm) {
    X = sys.least_norm_solution();
  } else {
    Rng rng(mix_seed(cfg.init_seed, fnv1a64("dc-random-init")));
    X = sys.project_affine(random_cgauss_matrix(sys.rows(), sys.cols(), rng));
  }

  SolverResult res;
  res.rank_param = static_cast<int>(k);
  res.status = SolveStatus::MaxIter;

  // The hot loop works off the short-side Gram spectrum with preallocated
  // buffers; the eigenvalues come back ascending, so the discarded tail is a
  // prefix sum and the top-k eigenvectors are the rightmost columns.
  const bool left = sys.rows() <= sys.cols();
  const Index m = left ? sys.rows() : sys.cols();
  CMat gram(m, m);
  Eigen::SelfAdjointEigenSolver<CMat> eig;
  CMat mid(left ? k : sys.rows(), left ? sys.cols() : k);
  CMat Xn(sys.rows(), sys.cols());
  CVec y, mu;

  std::vector<double> phi_hist, sig_hist;
  double prev_phi = 0.0, last_step = 0.0, resid = sys.residual_inf(X);
  bool have_prev = false;
  RVec sigma(m);

  for (int t = 0;; ++t) {
    if (left)
      gram.noalias() = X * X.adjoint();
    else
      gram.noalias() = X.adjoint() * X;
    eig.compute(gram);
    if (eig.info() != Eigen::Success)
      throw NumericalError("dc_solve: Hermitian eigendecomposition failed");
    const auto& lam = eig.eigenvalues();
    for (Index i = 0; i < m; ++i) sigma[i] = std::sqrt(std::max(lam[m - 1 - i], 0.0));
    double phi = 0.0;
    for (Index i = 0; i < m - k; ++i) phi += std::max(lam[i], 0.0);
    const double sig_k1 = k < q ? sigma[k] : 0.0;
    res.trace.push_back({t, phi, last_step, sig_k1, resid});

    // Descent inequality of the convergence argument:
    //   phi(X_{t+1}) <= phi(X_t) - ||X_{t+1} - X_t||_F^2, up to roundoff.
    if (have_prev &&
        phi > prev_phi - last_step * last_step + 1e-9 * (1.0 + std::abs(prev_phi)))
      ++res.descent_violations;

    if (sig_k1 < cfg.rank_tol) {
      res.status = SolveStatus::Converged;
      break;
    }
    phi_hist.push_back(phi);
    sig_hist.push_back(sig_k1);
    const int w = cfg.stall_window;
    if (static_cast<int>(phi_hist.size()) > w) {
      const double before = phi_hist[phi_hist.size() - 1 - static_cast<size_t>(w)];
      bool stalled = before - phi < cfg.stall_eps;
      if (!stalled && cfg.stall_rel > 0.0) {
        // Declare the rank infeasible only when both the objective and the
        // cut singular value have flattened out; a pass that is still
        // shrinking sigma_{k+1} geometrically is left to converge.
        const double sig_before = sig_hist[sig_hist.size() - 1 - static_cast<size_t>(w)];
        stalled = before - phi < cfg.stall_rel * std::abs(before) &&
                  sig_before - sig_k1 < 0.02 * sig_before;
      }
      if (stalled) {
        res.status = SolveStatus::Stalled;
        break;
      }
    }
    if (t >= cfg.max_iter_per_k) break;  // stays MaxIter

    const auto top = eig.eigenvectors().rightCols(k);
    if (left) {
      mid.noalias() = top.adjoint() * X;
      Xn.noalias() = top * mid;
    } else {
      mid.noalias() = X * top;
      Xn.noalias() = mid * top.adjoint();
    }
    resid = sys.project_inplace(Xn, y, mu);
    last_step = (Xn - X).norm();
    prev_phi = phi;
    have_prev = true;
    std::swap(X, Xn);
    res.iterations = t + 1;
  }

  res.X = std::move(X);
  measure(res, sys, sigma, cfg.rank_tol);
  return res;
}

SolverResult min_rank_dc(const AffineSystem& sys, const DcConfig& cfg) {
  if (sys.equations() == 0) return degenerate_result(sys);
  const Index q = std::min(sys.rows(), sys.cols());
  long total_iters = 0;
  long total_viol = 0;
  SolverResult res;
  CMat carry;
  for (Index r = 1; r <= q; ++r) {
    const CMat* warm = (cfg.warm_start && r > 1) ? &carry : nullptr;
    res = dc_solve(sys, r, cfg, warm);
    total_iters += res.iterations;
    total_viol += res.descent_violations;
    if (res.numeric_rank <= static_cast<int>(r)) break;
    // At r = q the pass converges immediately, so the loop always returns.
    if (cfg.warm_start) carry = res.X;
  }
  res.iterations = total_iters;
  res.descent_violations = total_viol;
  return res;
}

CMat weighted_min_norm(const AffineSystem& sys, const CMat& V, const RVec& eps) {
  if (V.cols() != eps.size())
    throw InvalidInput("weighted_min_norm: V and eps disagree on the subspace size");
  if (V.cols() > 0 && V.rows() != sys.cols())
    throw InvalidInput("weighted_min_norm: V rows must match the unknown's columns");
  for (Index i = 0; i < eps.size(); ++i) {
    if (!(eps[i] < 1.0)) throw InvalidInput("weighted_min_norm: eps must stay below 1");
  }
  if (sys.equations() == 0) return CMat::Zero(sys.rows(), sys.cols());

  const auto& trip = sys.triplets();
  const auto& off = sys.eq_offsets();
  const Index q = V.cols();
  // Conjugate-transposed copy so each unknown's compressed coefficients are a
  // contiguous column.
  const CMat VcT = V.adjoint();

  struct Segment {
    Index row;
    int local_eq;
  };
  std::vector<Segment> segs;
  std::vector<int> order;
  CMat G, Gw;

  CVec lambda(sys.equations());
  for (const auto& block : sys.coupled_blocks()) {
    const int nb = static_cast<int>(block.size());
    CMat B = CMat::Zero(nb, nb);
    if (sys.gram_is_diagonal()) {
      for (int li = 0; li < nb; ++li)
        B(li, li) = sys.gram_diagonal()[block[static_cast<size_t>(li)]];
    } else {
      for (int li = 0; li < nb; ++li)
        for (int lj = 0; lj <= li; ++lj)
          B(li, lj) = sys.gram_entry(block[static_cast<size_t>(li)],
                                     block[static_cast<size_t>(lj)]);
    }

    if (q > 0) {
      // Per shared row r of X, the low-rank weight correction couples the
      // compressed coefficient vectors g_{e,r} = sum_c coeff * conj(V(c,:)).
      segs.clear();
      int nseg = 0;
      for (int li = 0; li < nb; ++li) {
        const int e = block[static_cast<size_t>(li)];
        for (int i = off[static_cast<size_t>(e)]; i < off[static_cast<size_t>(e) + 1];) {
          const Index r = trip[static_cast<size_t>(i)].row;
          while (i < off[static_cast<size_t>(e) + 1] && trip[static_cast<size_t>(i)].row == r) ++i;
          segs.push_back({r, li});
          ++nseg;
        }
      }
      if (G.rows() != q || G.cols() < nseg) {
        G.resize(q, nseg);
        Gw.resize(q, nseg);
      }
      {
        int s = 0;
        for (int li = 0; li < nb; ++li) {
          const int e = block[static_cast<size_t>(li)];
          for (int i = off[static_cast<size_t>(e)]; i < off[static_cast<size_t>(e) + 1];) {
            const Index r = trip[static_cast<size_t>(i)].row;
            G.col(s).setZero();
            while (i < off[static_cast<size_t>(e) + 1] && trip[static_cast<size_t>(i)].row == r) {
              G.col(s) += trip[static_cast<size_t>(i)].coeff *
                          VcT.col(trip[static_cast<size_t>(i)].col);
              ++i;
            }
            Gw.col(s) = eps.cast<Complex>().asDiagonal() * G.col(s);
            ++s;
          }
        }
      }
      order.resize(static_cast<size_t>(nseg));
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&segs](int a, int b) {
        return segs[static_cast<size_t>(a)].row < segs[static_cast<size_t>(b)].row;
      });
      CMat Ggrp, Gwgrp, C;
      for (int i0 = 0; i0 < nseg;) {
        int i1 = i0;
        while (i1 < nseg && segs[static_cast<size_t>(order[static_cast<size_t>(i1)])].row ==
                                segs[static_cast<size_t>(order[static_cast<size_t>(i0)])].row)
          ++i1;
        const int g = i1 - i0;
        // One Gram product per shared row: C(a, b) = sum_q conj(g_b) eps g_a.
        Ggrp.resize(q, g);
        Gwgrp.resize(q, g);
        for (int a = 0; a < g; ++a) {
          const int s = order[static_cast<size_t>(i0 + a)];
          Ggrp.col(a) = G.col(s);
          Gwgrp.col(a) = Gw.col(s);
        }
        C.resize(g, g);
        C.noalias() = Ggrp.adjoint() * Gwgrp;
        for (int a = 0; a < g; ++a) {
          const int la = segs[static_cast<size_t>(order[static_cast<size_t>(i0 + a)])].local_eq;
          for (int bidx = 0; bidx < g; ++bidx) {
            const int lb =
                segs[static_cast<size_t>(order[static_cast<size_t>(i0 + bidx)])].local_eq;
            if (lb > la) continue;
            B(la, lb) -= C(bidx, a);
          }
        }
        i0 = i1;
      }
    }
    B = B.template selfadjointView<Eigen::Lower>();

    CVec bb(nb);
    for (int li = 0; li < nb; ++li) bb[li] = sys.rhs()[block[static_cast<size_t>(li)]];
    Eigen::LLT<CMat> llt(B);
    CVec lam;
    if (llt.info() == Eigen::Success) {
      lam = llt.solve(bb);
    } else {
      Eigen::LDLT<CMat> ldlt(B);
      if (ldlt.info() != Eigen::Success)
        throw NumericalError("weighted subproblem factorization failed");
      lam = ldlt.solve(bb);
    }
    for (int li = 0; li < nb; ++li) lambda[block[static_cast<size_t>(li)]] = lam[li];
  }

  CMat X = sys.adjoint(lambda);
  if (q > 0) X -= (X * V) * eps.cast<Complex>().asDiagonal() * V.adjoint();
  return X;
}

SolverResult irls_solve(const AffineSystem& sys, double p, const IrlsConfig& cfg) {
  if (!(p > 0.0) || p > 1.0) throw InvalidInput("irls_solve: p must lie in (0, 1]");
  if (sys.equations() == 0) return degenerate_result(sys);

  CMat X;
  if (cfg.init == IrlsConfig::Init::LeastNorm) {
    X = sys.least_norm_solution();
  } else {
    Rng rng(mix_seed(cfg.init_seed, fnv1a64("irls-random-init")));
    X = sys.project_affine(random_cgauss_matrix(sys.rows(), sys.cols(), rng));
  }
  double gamma = cfg.gamma0;

  SolverResult res;
  res.status = SolveStatus::MaxIter;
  for (int t = 1; t <= cfg.max_iter; ++t) {
    RightSpectrum spec = right_spectrum(X);
    const Index q = spec.sigma.size();
    RVec eps(q);
    double obj = 0.0;  // smoothed Schatten-p objective sum (sigma^2 + gamma)^{p/2}
    for (Index i = 0; i < q; ++i) {
      const double s2 = spec.sigma[i] * spec.sigma[i];
      obj += std::pow(s2 + gamma, p / 2.0);
      eps[i] = 1.0 - std::pow((s2 + gamma) / gamma, 1.0 - p / 2.0);
    }

    CMat Xn;
    try {
      Xn = weighted_min_norm(sys, spec.V, eps);
    } catch (const NumericalError& err) {
      throw NumericalError("irls_solve: iteration " + std::to_string(t) + ": " + err.what());
    }
    const double step = (Xn - X).norm();
    const double base = 1.0 + X.norm();
    res.trace.push_back(
        {t, obj, step, edge_sigma(spec.sigma, cfg.rank_tol), sys.residual_inf(Xn)});
    X = std::move(Xn);
    res.iterations = t;
    if (step <= cfg.step_tol * base) {
      res.status = SolveStatus::Converged;
      break;
    }
    gamma = std::max(gamma / cfg.gamma_decay, cfg.gamma_floor);
  }

  res.X = sys.project_affine(X);
  measure(res, sys, singular_values(res.X), cfg.rank_tol);
  return res;
}

SolverResult nuclear_solve(const AffineSystem& sys, const NuclearConfig& cfg) {
  if (sys.equations() == 0) return degenerate_result(sys);
  const double tau = 1.0 / cfg.rho;

  CMat Z = CMat::Zero(sys.rows(), sys.cols());
  CMat U = Z, X = Z;

  SolverResult res;
  res.status = SolveStatus::MaxIter;
  for (int t = 1; t <= cfg.max_iter; ++t) {
    X = sys.project_affine(Z - U);
    const CMat W = X + U;
    ShortSideSpectrum spec = short_side_spectrum(W);
    CMat Zn = svt(W, tau, spec);
    double obj = 0.0;  // ||Z_{t+1}||_* straight from the thresholded spectrum
    for (Index i = 0; i < spec.sigma.size(); ++i) obj += std::max(spec.sigma[i] - tau, 0.0);
    U += X - Zn;
    const double zstep = (Zn - Z).norm();
    Z = std::move(Zn);
    const double gap = (X - Z).norm();
    res.trace.push_back({t, obj, zstep, 0.0, sys.residual_inf(X)});
    res.iterations = t;
    if (gap <= cfg.tol * (1.0 + X.norm()) && zstep <= cfg.tol) {
      res.status = SolveStatus::Converged;
      break;
    }
  }

  res.X = std::move(X);
  measure(res, sys, singular_values(res.X), cfg.rank_tol);
  return res;
}

void write_trace_csv(const SolverResult& result, std::ostream& os) {
  os << "iter,objective,step_norm,sigma_kplus1,residual\n";
  char buf[160];
  for (const auto& r : result.trace) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g", r.iter, r.objective,
                  r.step_norm, r.sigma_kplus1, r.residual);
    os << buf << '\n';
  }
}

}  // namespace shuffle_align

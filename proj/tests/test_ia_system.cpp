#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "oracles.hpp"
#include "shuffle_align/errors.hpp"
#include "shuffle_align/ia_system.hpp"
#include "shuffle_align/solvers.hpp"
#include "shuffle_align/spectral.hpp"

using namespace shuffle_align;
namespace oracle = shuffle_align::testing;

namespace {

ProblemInstance two_user_instance(std::uint64_t seed = 42) {
  ProblemInstance inst;
  inst.K = 2;
  inst.N = 2;
  inst.mu = 1;
  inst.L = inst.M = inst.d = 1;
  inst.placement = {{1}, {2}};
  inst.seed = seed;
  inst.channels = sample_channels(2, 1, 1, ChannelMode::Direct, seed);
  return inst;
}

/// Zero-pad a reduced solution into the full (all pairs) unknown.
CMat pad_to_full(const CMat& X, const MatrixLayout& red, const MatrixLayout& full) {
  CMat out = CMat::Zero(full.Drows, full.Dcols);
  const int blk = red.block();
  for (size_t p = 0; p < red.rx_pairs.size(); ++p) {
    const int fp = full.rx_index(red.rx_pairs[p].user, red.rx_pairs[p].msg);
    for (size_t q = 0; q < red.tx_pairs.size(); ++q) {
      const int fq = full.tx_index(red.tx_pairs[q].user, red.tx_pairs[q].msg);
      out.block(static_cast<Index>(fp) * blk, static_cast<Index>(fq) * blk, blk, blk) =
          X.block(static_cast<Index>(p) * blk, static_cast<Index>(q) * blk, blk, blk);
    }
  }
  return out;
}

}  // namespace

TEST_SUITE_BEGIN("ia_system");

TEST_CASE("two-user system has the expected shape and entries") {
  const ProblemInstance inst = two_user_instance();
  const IndexSets idx = build_index_sets(inst.K, inst.N, inst.placement);
  const AffineSystem sys = assemble(inst, idx);

  CHECK(sys.rows() == 2);
  CHECK(sys.cols() == 4);
  CHECK(sys.equations() == 4);
  CHECK(sys.rhs()[0] == Complex(1, 0));
  CHECK(sys.rhs()[1] == Complex(0, 0));
  CHECK(sys.rhs()[2] == Complex(1, 0));
  CHECK(sys.rhs()[3] == Complex(0, 0));

  // Transmit pairs in order: (1,1) (1,3) (2,2) (2,4).
  const Complex h12 = inst.channels.H(1, 2)(0, 0);
  const Complex h21 = inst.channels.H(2, 1)(0, 0);
  REQUIRE(sys.nnz() == 4);
  const auto& t = sys.triplets();
  CHECK(t[0].eq == 0);
  CHECK(t[0].row == 0);
  CHECK(t[0].col == 2);
  CHECK(t[0].coeff == h12);
  CHECK(t[1].eq == 1);
  CHECK(t[1].row == 0);
  CHECK(t[1].col == 3);
  CHECK(t[1].coeff == h12);
  CHECK(t[2].eq == 2);
  CHECK(t[2].row == 1);
  CHECK(t[2].col == 1);
  CHECK(t[2].coeff == h21);
  CHECK(t[3].eq == 3);
  CHECK(t[3].row == 1);
  CHECK(t[3].col == 0);
  CHECK(t[3].coeff == h21);
}

TEST_CASE("equation count and sparsity formula at figure scale") {
  ProblemInstance inst;
  inst.K = 5;
  inst.N = 10;
  inst.mu = 6;
  inst.L = inst.M = inst.d = 1;
  inst.placement = uniform_placement(5, 10, 6, 9);
  inst.channels = sample_channels(5, 1, 1, ChannelMode::Direct, 9);
  const IndexSets idx = build_index_sets(inst.K, inst.N, inst.placement);
  const AffineSystem sys = assemble(inst, idx);

  CHECK(sys.equations() == 400);
  CHECK(nnz_formula(inst, idx) == 1200);
  CHECK(sys.nnz() == 1200);

  // Brute-force enumeration of the alignment equations.
  long equations = 0, entries = 0;
  for (int k = 1; k <= 5; ++k) {
    const auto& avail = idx.Tk[static_cast<size_t>(k - 1)];
    for (int l : idx.Rk[static_cast<size_t>(k - 1)]) {
      (void)l;
      for (int j = 1; j <= idx.T; ++j) {
        if (std::binary_search(avail.begin(), avail.end(), j)) continue;
        ++equations;
        for (int i = 1; i <= 5; ++i) {
          const auto& ti = idx.Tk[static_cast<size_t>(i - 1)];
          if (std::binary_search(ti.begin(), ti.end(), j)) ++entries;
        }
      }
    }
  }
  CHECK(equations == 400);
  CHECK(entries == 1200);
}

TEST_CASE("sparsity formula scales with the L^2 d^2 block area") {
  ProblemInstance small = two_user_instance();
  const IndexSets idx = build_index_sets(2, 2, small.placement);
  CHECK(nnz_formula(small, idx) == 4);

  ProblemInstance big = small;
  big.L = big.M = big.d = 2;
  big.channels = sample_channels(2, 2, 2, ChannelMode::Direct, 42);
  CHECK(nnz_formula(big, idx) == 4 * 16);
  CHECK(assemble(big, idx).nnz() == 64);
}

TEST_CASE("apply matches hand evaluation on the two-user system") {
  const ProblemInstance inst = two_user_instance();
  const IndexSets idx = build_index_sets(inst.K, inst.N, inst.placement);
  const AffineSystem sys = assemble(inst, idx);

  CHECK(sys.apply(CMat::Zero(2, 4)).norm() == 0.0);

  CMat X = CMat::Zero(2, 4);
  X(0, 2) = 1.0 / inst.channels.H(1, 2)(0, 0);
  const CVec y = sys.apply(X);
  CHECK(std::abs(y[0] - Complex(1, 0)) < 1e-15);
  CHECK(std::abs(y[1]) < 1e-15);
  CHECK(std::abs(y[2]) < 1e-15);
  CHECK(std::abs(y[3]) < 1e-15);

  CHECK_THROWS_AS(sys.apply(CMat::Zero(3, 4)), InvalidInput);
}

TEST_CASE("adjoint pairing identity") {
  const ProblemInstance inst = oracle::random_small_instance(31);
  const IndexSets idx = build_index_sets(inst.K, inst.N, inst.placement);
  const AffineSystem sys = assemble(inst, idx);

  Rng rng(8);
  for (int it = 0; it < 100; ++it) {
    const CMat X = random_cgauss_matrix(sys.rows(), sys.cols(), rng);
    CVec y(sys.equations());
    for (int e = 0; e < sys.equations(); ++e) y[e] = rng.cgauss();
    // <A(X), y> = <X, A^H(y)> under the trace inner product.
    const Complex lhs = (y.adjoint() * sys.apply(X))(0, 0);
    const Complex rhs = (sys.adjoint(y).adjoint() * X).trace();
    REQUIRE(std::abs(lhs - rhs) <= 1e-12 * (1.0 + std::abs(lhs)));
  }
  CHECK(sys.adjoint(CVec::Zero(sys.equations())).norm() == 0.0);
  CHECK_THROWS_AS(sys.adjoint(CVec::Zero(sys.equations() + 1)), InvalidInput);
}

TEST_CASE("adjoint of a unit vector on the two-user system") {
  const ProblemInstance inst = two_user_instance();
  const IndexSets idx = build_index_sets(inst.K, inst.N, inst.placement);
  const AffineSystem sys = assemble(inst, idx);

  CVec e1 = CVec::Zero(4);
  e1[0] = 1.0;
  const CMat M = sys.adjoint(e1);
  CHECK(M(0, 2) == std::conj(inst.channels.H(1, 2)(0, 0)));
  CHECK(std::abs(M.norm() - std::abs(M(0, 2))) < 1e-15);
}

TEST_CASE("applying the adjoint of a basis vector reproduces a Gram row") {
  const ProblemInstance inst = oracle::random_small_instance(77);
  const IndexSets idx = build_index_sets(inst.K, inst.N, inst.placement);
  const AffineSystem sys = assemble(inst, idx);
  const CMat A = oracle::dense_materialize(sys);
  const CMat gram = A * A.adjoint();

  CVec e1 = CVec::Zero(sys.equations());
  e1[0] = 1.0;
  const CVec row = sys.apply(sys.adjoint(e1));
  REQUIRE((row - gram.col(0)).norm() <= 1e-10 * (1.0 + gram.norm()));
}

TEST_CASE("projection matches the dense pseudoinverse oracle") {
  Rng rng(60);
  for (int it = 0; it < 25; ++it) {
    const ProblemInstance inst = oracle::random_small_instance(rng.next_u64());
    const IndexSets idx = build_index_sets(inst.K, inst.N, inst.placement);
    const AffineSystem sys = assemble(inst, idx);
    const CMat M = random_cgauss_matrix(sys.rows(), sys.cols(), rng);
    const CMat got = sys.project_affine(M);
    const CMat want = oracle::dense_project(sys, M);
    REQUIRE((got - want).norm() <= 1e-8 * (1.0 + want.norm()));
    REQUIRE(sys.residual_inf(got) <= 1e-10 * (1.0 + sys.rhs_inf()));
  }
}

TEST_CASE("projection is idempotent and orthogonal to the feasible set") {
  Rng rng(61);
  const ProblemInstance inst = oracle::random_small_instance(404);
  const IndexSets idx = build_index_sets(inst.K, inst.N, inst.placement);
  const AffineSystem sys = assemble(inst, idx);

  for (int it = 0; it < 20; ++it) {
    const CMat M = random_cgauss_matrix(sys.rows(), sys.cols(), rng);
    const CMat P = sys.project_affine(M);
    REQUIRE((sys.project_affine(P) - P).norm() <= 1e-10 * (1.0 + P.norm()));

    const CMat F1 = sys.project_affine(random_cgauss_matrix(sys.rows(), sys.cols(), rng));
    const CMat F2 = sys.project_affine(random_cgauss_matrix(sys.rows(), sys.cols(), rng));
    const Complex ip = ((M - P).adjoint() * (F1 - F2)).trace();
    REQUIRE(std::abs(ip) <= 1e-9 * (1.0 + M.norm() * (F1 - F2).norm()));
  }
}

TEST_CASE("feasible points are fixed by the projection") {
  const ProblemInstance inst = two_user_instance();
  const IndexSets idx = build_index_sets(inst.K, inst.N, inst.placement);
  const AffineSystem sys = assemble(inst, idx);
  Rng rng(3);
  const CMat F = sys.project_affine(random_cgauss_matrix(2, 4, rng));
  CHECK((sys.project_affine(F) - F).norm() <= 1e-12 * (1.0 + F.norm()));
}

TEST_CASE("least-norm solution of the two-user system") {
  const ProblemInstance inst = two_user_instance();
  const IndexSets idx = build_index_sets(inst.K, inst.N, inst.placement);
  const AffineSystem sys = assemble(inst, idx);
  const CMat X = sys.least_norm_solution();

  const Complex h12 = inst.channels.H(1, 2)(0, 0);
  const Complex h21 = inst.channels.H(2, 1)(0, 0);
  CHECK(std::abs(X(0, 2) - 1.0 / h12) < 1e-14);
  CHECK(std::abs(X(1, 1) - 1.0 / h21) < 1e-14);
  CHECK(std::abs(X(0, 0)) == 0.0);
  CHECK(std::abs(X(0, 1)) == 0.0);
  CHECK(std::abs(X(0, 3)) == 0.0);
  CHECK(std::abs(X(1, 0)) == 0.0);
  CHECK(std::abs(X(1, 2)) == 0.0);
  CHECK(std::abs(X(1, 3)) == 0.0);
  CHECK(numeric_rank(singular_values(X), 1e-5) == 2);
}

TEST_CASE("least-norm feasibility over random instances") {
  Rng rng(62);
  for (int it = 0; it < 100; ++it) {
    const ProblemInstance inst = oracle::random_small_instance(rng.next_u64());
    const IndexSets idx = build_index_sets(inst.K, inst.N, inst.placement);
    const AffineSystem sys = assemble(inst, idx);
    REQUIRE(sys.residual_inf(sys.least_norm_solution()) <= 1e-10 * (1.0 + sys.rhs_inf()));
  }
}

TEST_CASE("least-norm solution of a homogeneous system is zero") {
  const AffineSystem sys = oracle::make_random_system(4, 6, 5, 3, 11, /*zero_rhs=*/true);
  CHECK(sys.least_norm_solution().norm() == 0.0);
}

TEST_CASE("triplet count equals the sparsity formula on random instances") {
  Rng rng(63);
  for (int it = 0; it < 50; ++it) {
    const ProblemInstance inst = oracle::random_small_instance(rng.next_u64());
    const IndexSets idx = build_index_sets(inst.K, inst.N, inst.placement);
    const AffineSystem sys = assemble(inst, idx);
    REQUIRE(sys.nnz() == nnz_formula(inst, idx));
  }
}

TEST_CASE("reduced and full formulations agree") {
  Rng rng(64);
  for (int it = 0; it < 10; ++it) {
    const ProblemInstance inst = oracle::random_small_instance(rng.next_u64(), 40, 20);
    const IndexSets idx = build_index_sets(inst.K, inst.N, inst.placement);
    const AffineSystem red = assemble(inst, idx, LayoutKind::Reduced);
    if (red.rows() * red.cols() > 400) continue;
    const AffineSystem full = assemble(inst, idx, LayoutKind::Full);
    REQUIRE(full.equations() == red.equations());
    REQUIRE(full.rows() == static_cast<Index>(inst.L) * inst.d * inst.K * idx.T);

    const CMat Xr = red.project_affine(random_cgauss_matrix(red.rows(), red.cols(), rng));
    const CMat padded = pad_to_full(Xr, red.layout(), full.layout());
    // Zero padding preserves feasibility and rank.
    REQUIRE(full.residual_inf(padded) <= 1e-9 * (1.0 + full.rhs_inf()));
    REQUIRE(numeric_rank(singular_values(padded), 1e-6) ==
            numeric_rank(singular_values(Xr), 1e-6));
  }
}

TEST_CASE("full formulation reaches the same minimum rank on the two-user system") {
  const ProblemInstance inst = two_user_instance();
  const IndexSets idx = build_index_sets(inst.K, inst.N, inst.placement);
  const AffineSystem red = assemble(inst, idx, LayoutKind::Reduced);
  const AffineSystem full = assemble(inst, idx, LayoutKind::Full);

  DcConfig cfg;
  cfg.init_seed = 5;
  const SolverResult r1 = min_rank_dc(red, cfg);
  const SolverResult r2 = min_rank_dc(full, cfg);
  CHECK(r1.numeric_rank == 1);
  CHECK(r2.numeric_rank == 1);
}

TEST_CASE("a fully replicated dataset yields the degenerate empty system") {
  ProblemInstance inst =
      make_instance(2, 2, 2, 1, 1, 1, PlacementRule::Random, ChannelMode::Direct, 8);
  const IndexSets idx = build_index_sets(inst.K, inst.N, inst.placement);
  const AffineSystem sys = assemble(inst, idx);
  CHECK(sys.equations() == 0);
  CHECK(sys.rows() == 0);

  const SolverResult res = min_rank_dc(sys, DcConfig{});
  CHECK(res.numeric_rank == 0);
  CHECK(res.X.norm() == 0.0);
  CHECK(res.dof.not_applicable());
  CHECK(res.dof.str() == "na");
}

TEST_CASE("duplicated equations are flagged as a singular system") {
  std::vector<SystemTriplet> trips = {
      {0, 0, 0, Complex(1, 0)}, {0, 1, 1, Complex(0, 1)},
      {1, 0, 0, Complex(1, 0)}, {1, 1, 1, Complex(0, 1)},  // same as equation 0
      {2, 1, 2, Complex(2, 0)},
  };
  CVec b(3);
  b << Complex(1, 0), Complex(1, 0), Complex(0, 0);
  const AffineSystem sys = AffineSystem::from_triplets(2, 3, 3, trips, b);
  CHECK(sys.rank_deficiency() == 1);
  try {
    sys.project_affine(CMat::Zero(2, 3));
    FAIL("expected a singular-system error");
  } catch (const SingularSystem& e) {
    CHECK(e.rank_deficiency == 1);
  }
}

TEST_CASE("system dump is deterministic and well-formed") {
  const ProblemInstance inst = two_user_instance();
  const IndexSets idx = build_index_sets(inst.K, inst.N, inst.placement);
  const AffineSystem sys = assemble(inst, idx);

  std::ostringstream a, b;
  dump_system(sys, a);
  dump_system(sys, b);
  CHECK(a.str() == b.str());

  std::istringstream in(a.str());
  int S, rows, cols;
  long long nnz;
  in >> S >> rows >> cols >> nnz;
  CHECK(S == 4);
  CHECK(rows == 2);
  CHECK(cols == 4);
  CHECK(nnz == 4);
}

TEST_SUITE_END();

#include <doctest.h>

#include <sstream>

#include "oracles.hpp"
#include "shuffle_align/errors.hpp"
#include "shuffle_align/solvers.hpp"
#include "shuffle_align/spectral.hpp"
#include "shuffle_align/transceiver.hpp"

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

/// Reassemble the product U~ V~ from the sliced antenna blocks.
CMat reconstruct(const TransceiverSet& ts) {
  const MatrixLayout& lay = ts.layout;
  CMat Ut(lay.Drows, ts.r);
  for (size_t p = 0; p < ts.U.size(); ++p)
    for (int m = 1; m <= lay.L; ++m)
      Ut.middleRows(lay.row(static_cast<int>(p), m, 1), lay.d) =
          ts.U[p][static_cast<size_t>(m - 1)];
  CMat Vt(ts.r, lay.Dcols);
  for (size_t q = 0; q < ts.V.size(); ++q)
    for (int n = 1; n <= lay.L; ++n)
      Vt.middleCols(lay.col(static_cast<int>(q), n, 1), lay.d) =
          ts.V[q][static_cast<size_t>(n - 1)];
  return Ut * Vt;
}

/// The exact two-user transceivers: unit decoders, inverse-channel precoders
/// on the desired links, zeros on the cross links.
TransceiverSet exact_two_user_ts(const ProblemInstance& inst, const MatrixLayout& lay) {
  TransceiverSet ts;
  ts.r = 1;
  ts.layout = lay;
  ts.U.assign(2, {CMat::Ones(1, 1)});
  ts.V.assign(4, {CMat::Zero(1, 1)});
  // Transmit pairs in order: (1,1) (1,3) (2,2) (2,4).
  ts.V[1][0](0, 0) = 1.0 / inst.channels.H(2, 1)(0, 0);
  ts.V[2][0](0, 0) = 1.0 / inst.channels.H(1, 2)(0, 0);
  return ts;
}

}  // namespace

TEST_SUITE_BEGIN("transceiver");

TEST_CASE("factorizing a rank-1 product is exact") {
  const ProblemInstance inst = two_user_instance();
  const IndexSets idx = build_index_sets(2, 2, inst.placement);
  const MatrixLayout lay = make_layout(idx, 1, 1);

  Rng rng(1);
  const CMat X = random_cgauss_matrix(lay.Drows, 1, rng) *
                 random_cgauss_matrix(1, lay.Dcols, rng);
  const TransceiverSet ts = factorize(X, 1, lay);
  CHECK((reconstruct(ts) - X).norm() <= 1e-10 * X.norm());
}

TEST_CASE("factorizing at full rank reconstructs any matrix") {
  const ProblemInstance inst = two_user_instance();
  const IndexSets idx = build_index_sets(2, 2, inst.placement);
  const MatrixLayout lay = make_layout(idx, 1, 1);
  Rng rng(2);
  const CMat X = random_cgauss_matrix(lay.Drows, lay.Dcols, rng);
  const TransceiverSet ts = factorize(X, 2, lay);
  CHECK((reconstruct(ts) - X).norm() <= 1e-10 * X.norm());
  CHECK_THROWS_AS(factorize(X, 3, lay), InvalidInput);
  CHECK_THROWS_AS(factorize(X, -1, lay), InvalidInput);
}

TEST_CASE("reconstruction error equals the discarded singular tail") {
  Rng rng(3);
  const ProblemInstance inst = oracle::random_small_instance(55);
  const IndexSets idx = build_index_sets(inst.K, inst.N, inst.placement);
  const MatrixLayout lay = make_layout(idx, inst.L, inst.d);
  const CMat X = random_cgauss_matrix(lay.Drows, lay.Dcols, rng);
  const RVec sigma = singular_values(X);
  for (int r = 0; r <= static_cast<int>(std::min(lay.Drows, lay.Dcols)); ++r) {
    const TransceiverSet ts = factorize(X, r, lay);
    double tail = 0;
    for (Index i = r; i < sigma.size(); ++i) tail += sigma[i] * sigma[i];
    const double err2 = (reconstruct(ts) - X).squaredNorm();
    REQUIRE(err2 == doctest::Approx(tail).epsilon(1e-9).scale(X.squaredNorm()));
  }
}

TEST_CASE("solved two-user factors satisfy the unit desired gain") {
  const ProblemInstance inst = two_user_instance(7);
  const IndexSets idx = build_index_sets(2, 2, inst.placement);
  const AffineSystem sys = assemble(inst, idx);
  DcConfig cfg;
  cfg.init_seed = 3;
  const SolverResult res = min_rank_dc(sys, cfg);
  REQUIRE(res.numeric_rank == 1);

  const TransceiverSet ts = factorize(res.X, 1, sys.layout());
  // U * H12 * V on the desired link of user 1 recovers the identity.
  const Complex gain = ts.U[0][0](0, 0) * inst.channels.H(1, 2)(0, 0) * ts.V[2][0](0, 0);
  CHECK(std::abs(gain - Complex(1, 0)) <= 1e-4);

  const IaReport report = verify_ia(ts, inst, idx, 1e-3);
  CHECK(report.pass);
}

TEST_CASE("hand-built two-user transceivers verify exactly") {
  const ProblemInstance inst = two_user_instance(5);
  const IndexSets idx = build_index_sets(2, 2, inst.placement);
  const MatrixLayout lay = make_layout(idx, 1, 1);
  const TransceiverSet ts = exact_two_user_ts(inst, lay);

  const IaReport report = verify_ia(ts, inst, idx, 1e-12);
  CHECK(report.pass);
  CHECK(report.worst_desired() <= 1e-14);
  CHECK(report.worst_interference() <= 1e-14);
}

TEST_CASE("zeroed precoders fail every desired check at sqrt(d)") {
  for (int d : {1, 2}) {
    ProblemInstance inst = two_user_instance(6);
    inst.d = d;
    const IndexSets idx = build_index_sets(2, 2, inst.placement);
    const AffineSystem sys = assemble(inst, idx);
    Rng rng(4);
    const CMat X = sys.project_affine(random_cgauss_matrix(sys.rows(), sys.cols(), rng));
    TransceiverSet ts = factorize(X, static_cast<int>(std::min(sys.rows(), sys.cols())),
                                  sys.layout());
    for (auto& blocks : ts.V)
      for (auto& v : blocks) v.setZero();

    const IaReport report = verify_ia(ts, inst, idx, 1e-3);
    CHECK(!report.pass);
    for (const auto& pair : report.pairs)
      REQUIRE(pair.desired_residual == doctest::Approx(std::sqrt(double(d))).epsilon(1e-12));
  }
}

TEST_CASE("exact transceivers decode with negligible error") {
  const ProblemInstance inst = two_user_instance(8);
  const IndexSets idx = build_index_sets(2, 2, inst.placement);
  const MatrixLayout lay = make_layout(idx, 1, 1);
  const TransceiverSet ts = exact_two_user_ts(inst, lay);

  const DecodeReport rep = simulate_shuffle(ts, inst, idx, 99, 10, 1e-9);
  CHECK(rep.draws == 10);
  CHECK(rep.max_relative_error <= 1e-12);
}

TEST_CASE("zero messages decode to zero exactly") {
  const ProblemInstance inst = two_user_instance(9);
  const IndexSets idx = build_index_sets(2, 2, inst.placement);
  const MatrixLayout lay = make_layout(idx, 1, 1);
  const TransceiverSet ts = exact_two_user_ts(inst, lay);
  CHECK(decode_error(ts, inst, idx, CMat::Zero(1, idx.T)) == 0.0);
}

TEST_CASE("failing transceivers are refused by the simulation") {
  const ProblemInstance inst = two_user_instance(10);
  const IndexSets idx = build_index_sets(2, 2, inst.placement);
  const MatrixLayout lay = make_layout(idx, 1, 1);
  TransceiverSet ts = exact_two_user_ts(inst, lay);
  ts.V[2][0].setZero();  // kill one desired link
  CHECK_THROWS_AS(simulate_shuffle(ts, inst, idx, 1, 5, 1e-3), PreconditionError);
}

TEST_CASE("solved instances decode end to end") {
  Rng rng(11);
  for (int it = 0; it < 5; ++it) {
    const ProblemInstance inst = oracle::random_small_instance(rng.next_u64());
    const IndexSets idx = build_index_sets(inst.K, inst.N, inst.placement);
    const AffineSystem sys = assemble(inst, idx);
    DcConfig cfg;
    cfg.init_seed = rng.next_u64();
    const SolverResult res = min_rank_dc(sys, cfg);
    REQUIRE(res.status == SolveStatus::Converged);
    const TransceiverSet ts = factorize(res.X, res.numeric_rank, sys.layout());
    const IaReport report = verify_ia(ts, inst, idx, 1e-3);
    REQUIRE(report.pass);
    const DecodeReport rep = simulate_shuffle(ts, inst, idx, inst.seed, 10, 1e-3);
    REQUIRE(rep.max_relative_error <= 1e-2);
  }
}

TEST_CASE("decode error grows monotonically with injected misalignment") {
  const ProblemInstance inst = two_user_instance(12);
  const IndexSets idx = build_index_sets(2, 2, inst.placement);
  const MatrixLayout lay = make_layout(idx, 1, 1);

  Rng rng(13);
  const CMat noise = random_cgauss_matrix(1, 1, rng);
  const CMat messages = random_cgauss_matrix(1, idx.T, rng);
  double prev = -1.0;
  for (double scale : {0.0, 1e-8, 1e-6, 1e-4, 1e-2, 1e-1}) {
    TransceiverSet ts = exact_two_user_ts(inst, lay);
    ts.V[0][0] += scale * noise;  // leaks interference into receive pair (1,2)
    const double err = decode_error(ts, inst, idx, messages);
    REQUIRE(err >= prev);
    prev = err;
  }
  CHECK(prev > 1e-3);
}

TEST_CASE("verification report exports as CSV") {
  const ProblemInstance inst = two_user_instance(14);
  const IndexSets idx = build_index_sets(2, 2, inst.placement);
  const MatrixLayout lay = make_layout(idx, 1, 1);
  const IaReport report = verify_ia(exact_two_user_ts(inst, lay), inst, idx, 1e-6);

  std::ostringstream os;
  write_ia_report_csv(report, os);
  std::istringstream in(os.str());
  std::string header;
  std::getline(in, header);
  CHECK(header == "k,l,desired_residual,worst_interference_residual,pass");
  int lines = 0;
  std::string line;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 2);
}

TEST_SUITE_END();

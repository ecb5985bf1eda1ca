#include "shuffle_align/transceiver.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

#include "shuffle_align/errors.hpp"
#include "shuffle_align/rng.hpp"
#include "shuffle_align/spectral.hpp"

namespace shuffle_align {

TransceiverSet factorize(const CMat& X, int r, const MatrixLayout& layout) {
  if (X.rows() != layout.Drows || X.cols() != layout.Dcols)
    throw InvalidInput("factorize: matrix does not match the layout");
  if (r < 0 || r > std::min(X.rows(), X.cols()))
    throw InvalidInput("factorize: r out of range");

  ThinSvd svd = thin_svd(X);
  RVec root = svd.sigma.head(r).cwiseMax(0.0).cwiseSqrt();
  CMat Ut = svd.U.leftCols(r) * root.cast<Complex>().asDiagonal();       // Drows x r
  CMat Vt = root.cast<Complex>().asDiagonal() * svd.V.leftCols(r).adjoint();  // r x Dcols

  TransceiverSet ts;
  ts.r = r;
  ts.layout = layout;
  const int L = layout.L, d = layout.d;
  ts.U.resize(layout.rx_pairs.size());
  for (size_t p = 0; p < layout.rx_pairs.size(); ++p) {
    ts.U[p].reserve(static_cast<size_t>(L));
    for (int m = 1; m <= L; ++m)
      ts.U[p].push_back(Ut.middleRows(layout.row(static_cast<int>(p), m, 1), d));
  }
  ts.V.resize(layout.tx_pairs.size());
  for (size_t qp = 0; qp < layout.tx_pairs.size(); ++qp) {
    ts.V[qp].reserve(static_cast<size_t>(L));
    for (int n = 1; n <= L; ++n)
      ts.V[qp].push_back(Vt.middleCols(layout.col(static_cast<int>(qp), n, 1), d));
  }
  return ts;
}

namespace {

std::vector<std::vector<int>> message_owners(const IndexSets& idx) {
  std::vector<std::vector<int>> owners(static_cast<size_t>(idx.T) + 1);
  for (size_t i = 0; i < idx.Tk.size(); ++i)
    for (int j : idx.Tk[i]) owners[static_cast<size_t>(j)].push_back(static_cast<int>(i) + 1);
  return owners;
}

/// Composed gain sum_{i: j in Ti} sum_{m,n} H_ki[m,n] U_p[m] V_(i,j)[n].
CMat pair_gain(const TransceiverSet& ts, const ProblemInstance& inst, int k, int rx_pair,
               int j, const std::vector<std::vector<int>>& owners) {
  const int L = ts.layout.L, d = ts.layout.d;
  CMat G = CMat::Zero(d, d);
  for (int i : owners[static_cast<size_t>(j)]) {
    const int q = ts.layout.tx_index(i, j);
    const CMat& H = inst.channels.H(k, i);
    for (int m = 1; m <= L; ++m)
      for (int n = 1; n <= L; ++n)
        G += H(m - 1, n - 1) * ts.U[static_cast<size_t>(rx_pair)][static_cast<size_t>(m - 1)] *
             ts.V[static_cast<size_t>(q)][static_cast<size_t>(n - 1)];
  }
  return G;
}

}  // namespace

double IaReport::worst_desired() const {
  double w = 0.0;
  for (const auto& p : pairs) w = std::max(w, p.desired_residual);
  return w;
}

double IaReport::worst_interference() const {
  double w = 0.0;
  for (const auto& p : pairs) w = std::max(w, p.worst_interference_residual);
  return w;
}

IaReport verify_ia(const TransceiverSet& ts, const ProblemInstance& inst,
                   const IndexSets& idx, double tol) {
  const int d = ts.layout.d;
  const auto owners = message_owners(idx);
  IaReport report;
  report.tol = tol;
  report.pass = true;

  for (size_t p = 0; p < ts.layout.rx_pairs.size(); ++p) {
    const int k = ts.layout.rx_pairs[p].user;
    const int l = ts.layout.rx_pairs[p].msg;
    const auto& avail = idx.Tk[static_cast<size_t>(k - 1)];

    PairCheck chk;
    chk.k = k;
    chk.l = l;
    chk.desired_residual =
        (pair_gain(ts, inst, k, static_cast<int>(p), l, owners) - CMat::Identity(d, d)).norm();
    for (int j = 1; j <= idx.T; ++j) {
      if (j == l || std::binary_search(avail.begin(), avail.end(), j)) continue;
      const double g = pair_gain(ts, inst, k, static_cast<int>(p), j, owners).norm();
      if (g > chk.worst_interference_residual) {
        chk.worst_interference_residual = g;
        chk.worst_interferer = j;
      }
    }
    chk.pass = chk.desired_residual <= tol && chk.worst_interference_residual <= tol;
    report.pass = report.pass && chk.pass;
    report.pairs.push_back(chk);
  }
  return report;
}

double decode_error(const TransceiverSet& ts, const ProblemInstance& inst,
                    const IndexSets& idx, const CMat& messages) {
  const int K = inst.K, L = ts.layout.L, d = ts.layout.d, r = ts.r;
  if (messages.rows() != d || messages.cols() != idx.T)
    throw InvalidInput("decode_error: messages must be d x T");
  const auto owners = message_owners(idx);

  // Transmitted signal per user: column n holds antenna n over r channel uses.
  std::vector<CMat> xsig(static_cast<size_t>(K), CMat::Zero(r, L));
  for (int i = 1; i <= K; ++i) {
    for (int j : idx.Tk[static_cast<size_t>(i - 1)]) {
      const int q = ts.layout.tx_index(i, j);
      for (int n = 1; n <= L; ++n)
        xsig[static_cast<size_t>(i - 1)].col(n - 1) +=
            ts.V[static_cast<size_t>(q)][static_cast<size_t>(n - 1)] * messages.col(j - 1);
    }
  }

  // Received signal after the composed (noiseless) channel.
  std::vector<CMat> zsig(static_cast<size_t>(K), CMat::Zero(r, L));
  for (int k = 1; k <= K; ++k) {
    for (int i = 1; i <= K; ++i) {
      const CMat& H = inst.channels.H(k, i);
      for (int m = 1; m <= L; ++m)
        for (int n = 1; n <= L; ++n)
          zsig[static_cast<size_t>(k - 1)].col(m - 1) +=
              H(m - 1, n - 1) * xsig[static_cast<size_t>(i - 1)].col(n - 1);
    }
  }

  double worst = 0.0;
  for (size_t p = 0; p < ts.layout.rx_pairs.size(); ++p) {
    const int k = ts.layout.rx_pairs[p].user;
    const int l = ts.layout.rx_pairs[p].msg;

    CVec decoded = CVec::Zero(d);
    for (int m = 1; m <= L; ++m)
      decoded += ts.U[p][static_cast<size_t>(m - 1)] * zsig[static_cast<size_t>(k - 1)].col(m - 1);

    // Cancel the locally computed contribution, then the identity
    // normalization of the desired gain leaves s_l directly.
    for (int j : idx.Tk[static_cast<size_t>(k - 1)])
      decoded -= pair_gain(ts, inst, k, static_cast<int>(p), j, owners) * messages.col(j - 1);

    const double truth = messages.col(l - 1).norm();
    const double err = (decoded - messages.col(l - 1)).norm();
    worst = std::max(worst, truth > 0.0 ? err / truth : err);
  }
  return worst;
}

DecodeReport simulate_shuffle(const TransceiverSet& ts, const ProblemInstance& inst,
                              const IndexSets& idx, std::uint64_t seed, int draws,
                              double tol) {
  if (draws < 1) throw InvalidInput("simulate_shuffle: draws must be positive");
  const IaReport gate = verify_ia(ts, inst, idx, tol);
  if (!gate.pass)
    throw PreconditionError("simulate_shuffle: transceivers fail alignment at tol=" +
                            std::to_string(tol));

  Rng rng(mix_seed(seed, fnv1a64("shuffle-sim")));
  DecodeReport rep;
  rep.draws = draws;
  for (int it = 0; it < draws; ++it) {
    const CMat messages = random_cgauss_matrix(ts.layout.d, idx.T, rng);
    rep.max_relative_error = std::max(rep.max_relative_error,
                                      decode_error(ts, inst, idx, messages));
  }
  return rep;
}

void write_ia_report_csv(const IaReport& report, std::ostream& os) {
  os << "k,l,desired_residual,worst_interference_residual,pass\n";
  char buf[96];
  for (const auto& p : report.pairs) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%d", p.k, p.l, p.desired_residual,
                  p.worst_interference_residual, p.pass ? 1 : 0);
    os << buf << '\n';
  }
}

}  // namespace shuffle_align

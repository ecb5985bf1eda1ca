#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "shuffle_align/ia_system.hpp"
#include "shuffle_align/instance.hpp"
#include "shuffle_align/types.hpp"

namespace shuffle_align {

/// Concrete decoders and precoders recovered from a solution matrix over r
/// channel uses. U[p][m] is the d x r decoder block of receive pair p at
/// antenna m; V[q][n] the r x d precoder block of transmit pair q at antenna n.
struct TransceiverSet {
  int r = 0;
  MatrixLayout layout;
  std::vector<std::vector<CMat>> U;
  std::vector<std::vector<CMat>> V;
};

/// Split X ~= (U_r sqrt(Sigma_r)) (sqrt(Sigma_r) V_r^H) by truncated SVD and
/// slice the factors into per-pair antenna blocks. The reconstruction error
/// equals the discarded singular-value tail in Frobenius norm.
TransceiverSet factorize(const CMat& X, int r, const MatrixLayout& layout);

struct PairCheck {
  int k = 0;
  int l = 0;
  double desired_residual = 0.0;            // ||G_des - I||_F
  double worst_interference_residual = 0.0;  // max_j ||G_int(j)||_F
  int worst_interferer = 0;                  // message j of the worst residual
  bool pass = false;
};

struct IaReport {
  bool pass = false;
  double tol = 0.0;
  std::vector<PairCheck> pairs;
  double worst_desired() const;
  double worst_interference() const;
};

/// Check the alignment conditions pairwise: the composed desired-signal gain
/// must be the d x d identity and every unknown interferer must vanish,
/// both up to tol in Frobenius norm.
IaReport verify_ia(const TransceiverSet& ts, const ProblemInstance& inst,
                   const IndexSets& idx, double tol = 1e-3);

struct DecodeReport {
  double max_relative_error = 0.0;
  int draws = 0;
};

/// Noiseless end-to-end shuffle: encode Gaussian messages, pass them through
/// the composed channel, cancel the locally known part at each receiver, and
/// compare the decoded streams against the transmitted ones.
/// Requires a transceiver set that passes verify_ia at tol.
DecodeReport simulate_shuffle(const TransceiverSet& ts, const ProblemInstance& inst,
                              const IndexSets& idx, std::uint64_t seed, int draws = 10,
                              double tol = 1e-3);

/// Decode one fixed message block; messages.col(j-1) carries s_j.
/// Returns max_l ||s_l_hat - s_l|| / ||s_l|| (0/0 counts as 0).
double decode_error(const TransceiverSet& ts, const ProblemInstance& inst,
                    const IndexSets& idx, const CMat& messages);

/// CSV export: `k, l, desired_residual, worst_interference_residual, pass`.
void write_ia_report_csv(const IaReport& report, std::ostream& os);

}  // namespace shuffle_align

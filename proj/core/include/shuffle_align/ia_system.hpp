#pragma once

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <iosfwd>
#include <memory>
#include <vector>

#include "shuffle_align/instance.hpp"
#include "shuffle_align/types.hpp"

namespace shuffle_align {

// The unknown is a single complex matrix X whose row blocks correspond to
// receive pairs (k, l) with l in Rk, and whose column blocks correspond to
// transmit pairs (i, j) with j in Ti. Each block is (L*d) x (L*d); sub-entry
// (m, a) of a row block sits at row p*L*d + (m-1)*d + (a-1), and likewise for
// columns with (n, b). Every alignment equation is linear in the entries of
// X, so the whole condition set reads A(X) = b for a sparse operator A.

struct PairRef {
  int user = 0;  // k for receive pairs, i for transmit pairs
  int msg = 0;   // l or j (1-based message index)
};

enum class LayoutKind {
  Reduced,  // only pairs that carry constraints (default)
  Full      // all (user, message) pairs; diagnostic, dimension L*d*K*T
};

struct MatrixLayout {
  int L = 1;
  int d = 1;
  int K = 0;
  int T = 0;
  std::vector<PairRef> rx_pairs;
  std::vector<PairRef> tx_pairs;
  Index Drows = 0;
  Index Dcols = 0;

  int block() const { return L * d; }

  // m, n, a, b are 1-based; pair indices and matrix coordinates 0-based.
  Index row(int rx_pair, int m, int a) const {
    return static_cast<Index>(rx_pair) * block() + static_cast<Index>(m - 1) * d + (a - 1);
  }
  Index col(int tx_pair, int n, int b) const {
    return static_cast<Index>(tx_pair) * block() + static_cast<Index>(n - 1) * d + (b - 1);
  }

  int rx_index(int k, int l) const { return lut_at(rx_lut, k, l); }
  int tx_index(int i, int j) const { return lut_at(tx_lut, i, j); }

  std::vector<int> rx_lut;  // (user-1)*T + (msg-1) -> pair index, -1 if absent
  std::vector<int> tx_lut;

 private:
  int lut_at(const std::vector<int>& lut, int user, int msg) const {
    const size_t key = static_cast<size_t>(user - 1) * T + (msg - 1);
    return key < lut.size() ? lut[key] : -1;
  }
};

MatrixLayout make_layout(const IndexSets& idx, int L, int d,
                         LayoutKind kind = LayoutKind::Reduced);

struct SystemTriplet {
  int eq = 0;
  Index row = 0;
  Index col = 0;
  Complex coeff;
};

/// Sparse affine operator A : C^{Drows x Dcols} -> C^S with right-hand side b
/// and a cached factorization of the Gram matrix A A^H. Immutable once built;
/// all member operations are const and safe to call concurrently.
class AffineSystem {
 public:
  Index rows() const { return layout_.Drows; }
  Index cols() const { return layout_.Dcols; }
  int equations() const { return S_; }
  const CVec& rhs() const { return b_; }
  const MatrixLayout& layout() const { return layout_; }
  const std::vector<SystemTriplet>& triplets() const { return triplets_; }
  long long nnz() const { return static_cast<long long>(triplets_.size()); }
  /// Offsets into triplets() per equation, size S+1.
  const std::vector<int>& eq_offsets() const { return eq_off_; }
  /// Groups of equations coupled through shared rows of X (used by the
  /// weighted least-squares subproblems, which decouple across groups).
  const std::vector<std::vector<int>>& coupled_blocks() const { return blocks_; }

  bool used_rank_fallback() const { return fallback_; }
  int rank_deficiency() const { return deficiency_; }
  bool gram_is_diagonal() const { return diag_gram_; }
  const RVec& gram_diagonal() const { return gram_diag_; }

  CVec apply(const CMat& X) const;
  CMat adjoint(const CVec& y) const;
  /// Entry (e, e') of the Gram matrix A A^H.
  Complex gram_entry(int e, int ep) const { return gram_.coeff(e, ep); }
  /// Solve (A A^H) mu = y with the cached factorization.
  CVec solve_gram(const CVec& y) const;
  /// Frobenius-nearest feasible point to M.
  CMat project_affine(const CMat& M) const;
  /// Allocation-free variants for solver loops. project_inplace overwrites X
  /// with its projection and returns the post-projection residual in the
  /// max norm; y and mu are scratch vectors resized on first use.
  void apply_into(const CMat& X, CVec& y) const;
  void adjoint_subtract(const CVec& mu, CMat& X) const;
  double project_inplace(CMat& X, CVec& y, CVec& mu) const;
  /// Minimum-Frobenius-norm solution of A(X) = b.
  CMat least_norm_solution() const;

  double residual_inf(const CMat& X) const;
  double rhs_inf() const { return b_inf_; }

  /// Build a system from explicit triplets (synthetic systems, tests).
  static AffineSystem from_triplets(Index rows, Index cols, int S,
                                    std::vector<SystemTriplet> triplets, CVec b);

  AffineSystem(AffineSystem&&) = default;
  AffineSystem& operator=(AffineSystem&&) = default;
  AffineSystem(const AffineSystem&) = delete;
  AffineSystem& operator=(const AffineSystem&) = delete;

  friend AffineSystem assemble(const ProblemInstance& inst, const IndexSets& idx,
                               LayoutKind kind);

 private:
  AffineSystem() = default;
  void finalize();  // sort triplets, build offsets, blocks, factorization

  MatrixLayout layout_;
  int S_ = 0;
  std::vector<SystemTriplet> triplets_;
  std::vector<int> eq_off_;
  std::vector<std::vector<int>> blocks_;
  CVec b_;
  double b_inf_ = 0.0;

  Eigen::SparseMatrix<Complex> gram_;
  RVec gram_diag_;  // populated when the Gram matrix is exactly diagonal
  bool diag_gram_ = false;
  std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<Complex>>> gram_ldlt_;
  std::unique_ptr<Eigen::CompleteOrthogonalDecomposition<CMat>> gram_cod_;
  bool fallback_ = false;
  int deficiency_ = 0;
};

/// Assemble the alignment equations over a problem instance. For each receive
/// pair (k, l), the desired block (j = l, right side the d x d identity)
/// comes first, then one zero block per interfering message j ascending.
/// Within a block, stream pairs (a, b) are emitted row-major.
AffineSystem assemble(const ProblemInstance& inst, const IndexSets& idx,
                      LayoutKind kind = LayoutKind::Reduced);

/// Closed-form nonzero count of the assembled operator:
/// d^2 L^2 sum_k sum_{l in Rk} sum_{j not in Tk} |{i : j in Ti}|.
long long nnz_formula(const ProblemInstance& inst, const IndexSets& idx);

/// Text dump of (S, Drows, Dcols, triplets, b) for cross-implementation diffs.
void dump_system(const AffineSystem& sys, std::ostream& os);

}  // namespace shuffle_align

#include "shuffle_align/ia_system.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "shuffle_align/errors.hpp"

namespace shuffle_align {

MatrixLayout make_layout(const IndexSets& idx, int L, int d, LayoutKind kind) {
  if (L < 1 || d < 1) throw InvalidInput("L and d must be positive");
  MatrixLayout lay;
  lay.L = L;
  lay.d = d;
  lay.K = static_cast<int>(idx.Tk.size());
  lay.T = idx.T;
  lay.rx_lut.assign(static_cast<size_t>(lay.K) * lay.T, -1);
  lay.tx_lut.assign(static_cast<size_t>(lay.K) * lay.T, -1);

  auto push_rx = [&lay](int k, int l) {
    lay.rx_lut[static_cast<size_t>(k - 1) * lay.T + (l - 1)] = static_cast<int>(lay.rx_pairs.size());
    lay.rx_pairs.push_back({k, l});
  };
  auto push_tx = [&lay](int i, int j) {
    lay.tx_lut[static_cast<size_t>(i - 1) * lay.T + (j - 1)] = static_cast<int>(lay.tx_pairs.size());
    lay.tx_pairs.push_back({i, j});
  };

  if (kind == LayoutKind::Reduced) {
    for (int k = 1; k <= lay.K; ++k)
      for (int l : idx.Rk[static_cast<size_t>(k - 1)]) push_rx(k, l);
    for (int i = 1; i <= lay.K; ++i)
      for (int j : idx.Tk[static_cast<size_t>(i - 1)]) push_tx(i, j);
  } else {
    for (int k = 1; k <= lay.K; ++k)
      for (int l = 1; l <= lay.T; ++l) push_rx(k, l);
    for (int i = 1; i <= lay.K; ++i)
      for (int j = 1; j <= lay.T; ++j) push_tx(i, j);
  }
  lay.Drows = static_cast<Index>(lay.rx_pairs.size()) * lay.block();
  lay.Dcols = static_cast<Index>(lay.tx_pairs.size()) * lay.block();
  return lay;
}

namespace {

// Union-find over equation indices.
struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(static_cast<size_t>(n)) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int a) {
    while (parent[static_cast<size_t>(a)] != a) {
      parent[static_cast<size_t>(a)] = parent[static_cast<size_t>(parent[static_cast<size_t>(a)])];
      a = parent[static_cast<size_t>(a)];
    }
    return a;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[static_cast<size_t>(b)] = a;
  }
};

constexpr double kPivotRatio = 1e-12;

}  // namespace

void AffineSystem::finalize() {
  std::stable_sort(triplets_.begin(), triplets_.end(),
                   [](const SystemTriplet& a, const SystemTriplet& b) {
                     if (a.eq != b.eq) return a.eq < b.eq;
                     if (a.row != b.row) return a.row < b.row;
                     return a.col < b.col;
                   });
  eq_off_.assign(static_cast<size_t>(S_) + 1, 0);
  for (const auto& t : triplets_) ++eq_off_[static_cast<size_t>(t.eq) + 1];
  for (int e = 0; e < S_; ++e) eq_off_[static_cast<size_t>(e) + 1] += eq_off_[static_cast<size_t>(e)];

  // Equations coupled through a shared row of X form one block; the weighted
  // subproblems decouple across blocks.
  if (S_ > 0) {
    UnionFind uf(S_);
    std::vector<int> first_eq(static_cast<size_t>(layout_.Drows), -1);
    for (const auto& t : triplets_) {
      int& f = first_eq[static_cast<size_t>(t.row)];
      if (f < 0)
        f = t.eq;
      else
        uf.unite(f, t.eq);
    }
    std::vector<int> root_to_block(static_cast<size_t>(S_), -1);
    for (int e = 0; e < S_; ++e) {
      const int r = uf.find(e);
      int& blk = root_to_block[static_cast<size_t>(r)];
      if (blk < 0) {
        blk = static_cast<int>(blocks_.size());
        blocks_.emplace_back();
      }
      blocks_[static_cast<size_t>(blk)].push_back(e);
    }
  }

  b_inf_ = S_ > 0 ? b_.cwiseAbs().maxCoeff() : 0.0;

  if (S_ == 0) return;

  Eigen::SparseMatrix<Complex> A(S_, layout_.Drows * layout_.Dcols);
  {
    std::vector<Eigen::Triplet<Complex>> ts;
    ts.reserve(triplets_.size());
    for (const auto& t : triplets_)
      ts.emplace_back(t.eq, static_cast<int>(t.col * layout_.Drows + t.row), t.coeff);
    A.setFromTriplets(ts.begin(), ts.end());
  }
  gram_ = (A * A.adjoint()).pruned();

  // Instance-derived operators have mutually orthogonal rows (distinct
  // equations touch disjoint entries of X), making the Gram matrix diagonal.
  diag_gram_ = true;
  for (int outer = 0; outer < gram_.outerSize() && diag_gram_; ++outer) {
    for (Eigen::SparseMatrix<Complex>::InnerIterator it(gram_, outer); it; ++it) {
      if (it.row() != it.col()) {
        diag_gram_ = false;
        break;
      }
    }
  }

  bool healthy;
  if (diag_gram_) {
    gram_diag_ = gram_.diagonal().real();
    const double dmax = gram_diag_.maxCoeff();
    const double dmin = gram_diag_.minCoeff();
    healthy = dmin > kPivotRatio * dmax;
  } else {
    gram_ldlt_ = std::make_unique<Eigen::SimplicialLDLT<Eigen::SparseMatrix<Complex>>>();
    gram_ldlt_->compute(gram_);
    healthy = gram_ldlt_->info() == Eigen::Success;
    if (healthy) {
      const auto dvec = gram_ldlt_->vectorD();
      double dmin = std::numeric_limits<double>::infinity(), dmax = 0.0;
      for (Index i = 0; i < dvec.size(); ++i) {
        const double v = std::abs(dvec[i]);
        dmin = std::min(dmin, v);
        dmax = std::max(dmax, v);
      }
      healthy = dmin > kPivotRatio * dmax;
    }
  }
  if (!healthy) {
    // Rank-revealing fallback; generic channels never take this path.
    CMat dense = CMat(gram_);
    gram_cod_ = std::make_unique<Eigen::CompleteOrthogonalDecomposition<CMat>>();
    gram_cod_->setThreshold(kPivotRatio);
    gram_cod_->compute(dense);
    fallback_ = true;
    deficiency_ = S_ - static_cast<int>(gram_cod_->rank());
    std::fprintf(stderr,
                 "shuffle_align: Gram factorization ill-conditioned, using rank-revealing "
                 "solve (S=%d, estimated rank deficiency %d)\n",
                 S_, deficiency_);
    gram_ldlt_.reset();
    diag_gram_ = false;
  }
}

CVec AffineSystem::apply(const CMat& X) const {
  if (X.rows() != rows() || X.cols() != cols())
    throw InvalidInput("apply: matrix does not match the system layout");
  CVec y(S_);
  apply_into(X, y);
  return y;
}

void AffineSystem::apply_into(const CMat& X, CVec& y) const {
  y.setZero(S_);
  for (const auto& t : triplets_) y[t.eq] += t.coeff * X(t.row, t.col);
}

void AffineSystem::adjoint_subtract(const CVec& mu, CMat& X) const {
  for (const auto& t : triplets_) X(t.row, t.col) -= std::conj(t.coeff) * mu[t.eq];
}

CMat AffineSystem::adjoint(const CVec& y) const {
  if (y.size() != S_) throw InvalidInput("adjoint: vector length does not match S");
  CMat M = CMat::Zero(rows(), cols());
  for (const auto& t : triplets_) M(t.row, t.col) += std::conj(t.coeff) * y[t.eq];
  return M;
}

CVec AffineSystem::solve_gram(const CVec& y) const {
  if (deficiency_ > 0)
    throw SingularSystem(deficiency_, "affine operator is row-rank deficient by " +
                                          std::to_string(deficiency_));
  if (fallback_) return gram_cod_->solve(y);
  if (diag_gram_) return y.array() / gram_diag_.array();
  return gram_ldlt_->solve(y);
}

CMat AffineSystem::project_affine(const CMat& M) const {
  if (M.rows() != rows() || M.cols() != cols())
    throw InvalidInput("project_affine: matrix does not match the system layout");
  CMat X = M;
  CVec y, mu;
  project_inplace(X, y, mu);
  return X;
}

double AffineSystem::project_inplace(CMat& X, CVec& y, CVec& mu) const {
  if (S_ == 0) return 0.0;
  apply_into(X, y);
  y -= b_;
  if (diag_gram_ && !fallback_) {
    mu = y.array() / gram_diag_.array();
  } else {
    mu = solve_gram(y);
  }
  adjoint_subtract(mu, X);
  apply_into(X, y);
  y -= b_;
  double resid = y.cwiseAbs().maxCoeff();
  // One refinement pass if the first solve left a visible residual.
  if (resid > 1e-10 * (1.0 + b_inf_)) {
    mu = solve_gram(y);
    adjoint_subtract(mu, X);
    apply_into(X, y);
    y -= b_;
    resid = y.cwiseAbs().maxCoeff();
  }
  return resid;
}

CMat AffineSystem::least_norm_solution() const {
  return project_affine(CMat::Zero(rows(), cols()));
}

double AffineSystem::residual_inf(const CMat& X) const {
  if (S_ == 0) return 0.0;
  return (apply(X) - b_).cwiseAbs().maxCoeff();
}

AffineSystem AffineSystem::from_triplets(Index rows, Index cols, int S,
                                         std::vector<SystemTriplet> triplets, CVec b) {
  if (b.size() != S) throw InvalidInput("from_triplets: b length must equal S");
  AffineSystem sys;
  sys.layout_.L = 1;
  sys.layout_.d = 1;
  sys.layout_.Drows = rows;
  sys.layout_.Dcols = cols;
  for (Index r = 0; r < rows; ++r) sys.layout_.rx_pairs.push_back({0, static_cast<int>(r + 1)});
  for (Index c = 0; c < cols; ++c) sys.layout_.tx_pairs.push_back({0, static_cast<int>(c + 1)});
  sys.S_ = S;
  for (const auto& t : triplets) {
    if (t.eq < 0 || t.eq >= S || t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols)
      throw InvalidInput("from_triplets: triplet out of range");
  }
  sys.triplets_ = std::move(triplets);
  sys.b_ = std::move(b);
  sys.finalize();
  return sys;
}

AffineSystem assemble(const ProblemInstance& inst, const IndexSets& idx, LayoutKind kind) {
  const int K = inst.K, T = idx.T, L = inst.L, d = inst.d;
  AffineSystem sys;
  sys.layout_ = make_layout(idx, L, d, kind);
  const MatrixLayout& lay = sys.layout_;

  // Users holding each message, ascending.
  std::vector<std::vector<int>> owners(static_cast<size_t>(T) + 1);
  for (int i = 1; i <= K; ++i)
    for (int j : idx.Tk[static_cast<size_t>(i - 1)]) owners[static_cast<size_t>(j)].push_back(i);

  int S = 0;
  for (int k = 1; k <= K; ++k)
    S += static_cast<int>(idx.Rk[static_cast<size_t>(k - 1)].size()) *
         (T - static_cast<int>(idx.Tk[static_cast<size_t>(k - 1)].size()));
  S *= d * d;
  sys.S_ = S;
  sys.b_ = CVec::Zero(S);

  int eq = 0;
  auto emit_block = [&](int k, int rx_pair, int j, bool desired) {
    for (int a = 1; a <= d; ++a) {
      for (int b = 1; b <= d; ++b) {
        if (desired && a == b) sys.b_[eq] = Complex(1.0, 0.0);
        for (int m = 1; m <= L; ++m) {
          for (int i : owners[static_cast<size_t>(j)]) {
            const int tx_pair = lay.tx_index(i, j);
            const CMat& H = inst.channels.H(k, i);
            for (int n = 1; n <= L; ++n) {
              sys.triplets_.push_back(
                  {eq, lay.row(rx_pair, m, a), lay.col(tx_pair, n, b), H(m - 1, n - 1)});
            }
          }
        }
        ++eq;
      }
    }
  };

  for (int k = 1; k <= K; ++k) {
    const auto& avail = idx.Tk[static_cast<size_t>(k - 1)];
    for (int l : idx.Rk[static_cast<size_t>(k - 1)]) {
      const int rx_pair = lay.rx_index(k, l);
      emit_block(k, rx_pair, l, /*desired=*/true);
      for (int j = 1; j <= T; ++j) {
        if (j == l || std::binary_search(avail.begin(), avail.end(), j)) continue;
        emit_block(k, rx_pair, j, /*desired=*/false);
      }
    }
  }
  if (eq != S) throw NumericalError("assembled equation count disagrees with the size formula");
  if (static_cast<long long>(sys.triplets_.size()) != nnz_formula(inst, idx))
    throw NumericalError("assembled triplet count disagrees with the sparsity formula");

  sys.finalize();
  return sys;
}

long long nnz_formula(const ProblemInstance& inst, const IndexSets& idx) {
  const int K = inst.K, T = idx.T;
  std::vector<int> owner_count(static_cast<size_t>(T) + 1, 0);
  for (int i = 1; i <= K; ++i)
    for (int j : idx.Tk[static_cast<size_t>(i - 1)]) ++owner_count[static_cast<size_t>(j)];

  long long total = 0;
  for (int k = 1; k <= K; ++k) {
    const auto& avail = idx.Tk[static_cast<size_t>(k - 1)];
    long long per_rx = 0;
    for (int j = 1; j <= T; ++j) {
      if (std::binary_search(avail.begin(), avail.end(), j)) continue;
      per_rx += owner_count[static_cast<size_t>(j)];
    }
    total += per_rx * static_cast<long long>(idx.Rk[static_cast<size_t>(k - 1)].size());
  }
  return total * inst.d * inst.d * inst.L * inst.L;
}

void dump_system(const AffineSystem& sys, std::ostream& os) {
  os << sys.equations() << ' ' << sys.rows() << ' ' << sys.cols() << ' ' << sys.nnz() << '\n';
  char buf[64];
  for (const auto& t : sys.triplets()) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g", t.coeff.real(), t.coeff.imag());
    os << (t.eq + 1) << ' ' << (t.row + 1) << ' ' << (t.col + 1) << ' ' << buf << '\n';
  }
  os << '\n';
  for (int e = 0; e < sys.equations(); ++e) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g", sys.rhs()[e].real(), sys.rhs()[e].imag());
    os << buf << '\n';
  }
}

}  // namespace shuffle_align

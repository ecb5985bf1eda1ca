#include "shuffle_align/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "shuffle_align/errors.hpp"

namespace shuffle_align {

ShortSideSpectrum short_side_spectrum(const CMat& X) {
  ShortSideSpectrum out;
  out.left = X.rows() <= X.cols();
  const Index q = std::min(X.rows(), X.cols());
  if (q == 0) {
    out.sigma = RVec(0);
    out.basis = CMat(out.left ? X.rows() : X.cols(), 0);
    return out;
  }
  CMat gram = out.left ? CMat(X * X.adjoint()) : CMat(X.adjoint() * X);
  Eigen::SelfAdjointEigenSolver<CMat> eig(gram);
  if (eig.info() != Eigen::Success) throw NumericalError("Hermitian eigendecomposition failed");
  // Eigenvalues come ascending; flip to descending singular order.
  out.sigma = RVec(q);
  out.basis = CMat(gram.rows(), q);
  for (Index i = 0; i < q; ++i) {
    const double lam = std::max(eig.eigenvalues()[q - 1 - i], 0.0);
    out.sigma[i] = std::sqrt(lam);
    out.basis.col(i) = eig.eigenvectors().col(q - 1 - i);
  }
  return out;
}

RVec singular_values(const CMat& X) { return short_side_spectrum(X).sigma; }

CMat truncate_rank(const CMat& X, Index k, const ShortSideSpectrum& spec) {
  const Index q = spec.sigma.size();
  if (k >= q) return X;
  if (k <= 0) return CMat::Zero(X.rows(), X.cols());
  const auto Bk = spec.basis.leftCols(k);
  // Projection onto the top-k singular subspace reproduces U_k Sigma_k V_k^H.
  if (spec.left) return Bk * (Bk.adjoint() * X);
  return (X * Bk) * Bk.adjoint();
}

CMat truncate_rank(const CMat& X, Index k) {
  if (k >= std::min(X.rows(), X.cols())) return X;
  return truncate_rank(X, k, short_side_spectrum(X));
}

CMat svt(const CMat& X, double tau, const ShortSideSpectrum& spec) {
  if (tau < 0) throw InvalidInput("svt: tau must be nonnegative");
  if (tau == 0.0) return X;
  const Index q = spec.sigma.size();
  Index keep = 0;
  while (keep < q && spec.sigma[keep] > tau) ++keep;
  if (keep == 0) return CMat::Zero(X.rows(), X.cols());
  CMat Bk = spec.basis.leftCols(keep);
  RVec scale(keep);
  for (Index i = 0; i < keep; ++i) scale[i] = 1.0 - tau / spec.sigma[i];
  if (spec.left) return Bk * (scale.cast<Complex>().asDiagonal() * (Bk.adjoint() * X));
  return ((X * Bk) * scale.cast<Complex>().asDiagonal()) * Bk.adjoint();
}

CMat svt(const CMat& X, double tau) {
  if (tau == 0.0) {
    if (tau < 0) throw InvalidInput("svt: tau must be nonnegative");
    return X;
  }
  return svt(X, tau, short_side_spectrum(X));
}

ThinSvd thin_svd(const CMat& X) {
  ThinSvd out;
  const Index q = std::min(X.rows(), X.cols());
  if (q == 0) {
    out.U = CMat(X.rows(), 0);
    out.sigma = RVec(0);
    out.V = CMat(X.cols(), 0);
    return out;
  }
  Eigen::BDCSVD<CMat> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  out.U = svd.matrixU();
  out.sigma = svd.singularValues();
  out.V = svd.matrixV();
  return out;
}

RightSpectrum right_spectrum(const CMat& X, double rel_guard) {
  ShortSideSpectrum spec = short_side_spectrum(X);
  RightSpectrum out;
  if (spec.sigma.size() == 0) {
    out.sigma = RVec(0);
    out.V = CMat(X.cols(), 0);
    return out;
  }
  const double cutoff = rel_guard * spec.sigma[0];
  Index keep = 0;
  while (keep < spec.sigma.size() && spec.sigma[keep] > cutoff) ++keep;
  out.sigma = spec.sigma.head(keep);
  if (!spec.left) {
    out.V = spec.basis.leftCols(keep);
    return out;
  }
  out.V = X.adjoint() * spec.basis.leftCols(keep);
  for (Index i = 0; i < keep; ++i) out.V.col(i) /= spec.sigma[i];
  return out;
}

int numeric_rank(const RVec& sigma_desc, double tol) {
  int r = 0;
  for (Index i = 0; i < sigma_desc.size(); ++i) {
    if (sigma_desc[i] > tol)
      ++r;
    else
      break;
  }
  return r;
}

}  // namespace shuffle_align

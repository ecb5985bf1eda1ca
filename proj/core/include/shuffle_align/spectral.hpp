#pragma once

#include "shuffle_align/types.hpp"

namespace shuffle_align {

// The solver loops only ever need spectra of strongly rectangular matrices,
// so singular values are computed from the Hermitian eigendecomposition of
// the short-side Gram matrix (X X^H or X^H X, whichever is smaller).

/// Singular values, descending.
RVec singular_values(const CMat& X);

/// Spectrum plus the orthonormal singular-vector basis on the short side.
struct ShortSideSpectrum {
  RVec sigma;  // descending
  CMat basis;  // columns ordered like sigma
  bool left = true;  // basis holds left singular vectors when rows <= cols
};

ShortSideSpectrum short_side_spectrum(const CMat& X);

/// Best rank-k approximation of X (k >= min dims returns X).
CMat truncate_rank(const CMat& X, Index k);
CMat truncate_rank(const CMat& X, Index k, const ShortSideSpectrum& spec);

/// Singular value soft-thresholding, the proximal operator of the nuclear
/// norm: each singular value shrinks by tau, clamped at zero.
CMat svt(const CMat& X, double tau);
CMat svt(const CMat& X, double tau, const ShortSideSpectrum& spec);

struct ThinSvd {
  CMat U;
  RVec sigma;  // descending
  CMat V;
};

/// Reference-quality thin SVD (bidiagonal divide and conquer).
ThinSvd thin_svd(const CMat& X);

/// Right singular vectors and singular values from the short-side Gram
/// route. Columns whose singular value falls below rel_guard * sigma_max are
/// dropped (their directions are numerically indistinguishable from the
/// null space). Cheaper than a full SVD for strongly rectangular matrices.
struct RightSpectrum {
  RVec sigma;  // descending, only the kept columns
  CMat V;
};
RightSpectrum right_spectrum(const CMat& X, double rel_guard = 1e-7);

/// Count of singular values strictly above tol; input sorted descending.
int numeric_rank(const RVec& sigma_desc, double tol);

}  // namespace shuffle_align

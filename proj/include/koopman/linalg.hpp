#pragma once

#include "koopman/tensor.hpp"

#include <vector>

namespace koopman {

/// Relative cutoff below which singular values are dropped: s < rel_tol * S[0].
/// Keeps 1/s bounded when the truncated factors feed the Koopman fit.
inline constexpr double kSingularValueRelTol = 1e-10;

/// Pairwise spectrum separation (relative to the largest magnitude) required
/// before SVD / eig backward passes are allowed to run.
inline constexpr double kSpectrumSeparationTol = 1e-6;

struct SvdResult {
    Tensor U;              // rows x effective_rank, real
    std::vector<double> S; // strictly positive, non-increasing
    Tensor V;              // cols x effective_rank, real
    int64_t effective_rank = 0;
};

/// Full thin SVD (all min(m,n) triplets, no cutoff); backing store for both
/// svd_truncated and its autodiff adjoint.
struct ThinSvd {
    Tensor U;
    std::vector<double> S;
    Tensor V;
};

struct EigResult {
    Tensor eigenvalues;  // complex r x 1, |lambda| descending, ties by angle ascending
    Tensor eigenvectors; // complex r x r, columns unit norm, first nonzero component
                         // rotated onto the positive real axis
};

ThinSvd svd_thin(const Tensor& a);

/// Top-`rank` singular triplets of a real matrix; triplets with
/// s < kSingularValueRelTol * S[0] are dropped and effective_rank reduced.
SvdResult svd_truncated(const Tensor& a, int64_t rank);

/// Eigendecomposition of a square real or complex matrix. Rejects matrices
/// whose eigenvector matrix has condition number above 1e12.
EigResult eig(const Tensor& a);

/// Moore-Penrose pseudoinverse via SVD with the kSingularValueRelTol cutoff.
Tensor pinv(const Tensor& a);

/// Elementwise exp(omega * i) of a complex vector.
Tensor matexp_eigs(const Tensor& omega, double i);

/// X solving A X = B for square complex A (LU).
Tensor solve(const Tensor& a, const Tensor& b);

/// Condition number estimate s_max / s_min from singular values.
double cond_2norm(const Tensor& a);

} // namespace koopman

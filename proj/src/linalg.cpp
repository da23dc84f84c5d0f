#include "koopman/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

namespace koopman {

namespace {

void check_lapack(int info, const char* routine) {
    if (info < 0) {
        throw Error(std::string(routine) + ": illegal argument " + std::to_string(-info));
    }
    if (info > 0) {
        throw ConvergenceFailure(std::string(routine) + ": did not converge (info=" +
                                 std::to_string(info) + ")");
    }
}

// Thin SVD of a complex matrix, A = U diag(S) V^H.
struct ThinSvdC {
    Tensor U;
    std::vector<double> S;
    Tensor V;
};

ThinSvdC svd_thin_complex(const Tensor& a) {
    const int64_t m = a.rows(), n = a.cols(), p = std::min(m, n);
    Tensor work = a;
    ThinSvdC out;
    out.U = Tensor(m, p, Scalar::Complex128);
    out.S.assign(static_cast<size_t>(p), 0.0);
    Tensor vh(p, n, Scalar::Complex128);
    std::vector<double> superb(static_cast<size_t>(std::max<int64_t>(p - 1, 1)));
    int info = LAPACKE_zgesvd(LAPACK_ROW_MAJOR, 'S', 'S', static_cast<int>(m),
                              static_cast<int>(n), work.complex_data(), static_cast<int>(n),
                              out.S.data(), out.U.complex_data(), static_cast<int>(p),
                              vh.complex_data(), static_cast<int>(n), superb.data());
    check_lapack(info, "zgesvd");
    out.V = vh.hermitian();
    return out;
}

} // namespace

ThinSvd svd_thin(const Tensor& a) {
    if (!a.is_real()) {
        throw ShapeMismatch("svd_thin: expected a real matrix, got " + a.shape_str());
    }
    const int64_t m = a.rows(), n = a.cols(), p = std::min(m, n);
    if (p == 0) {
        throw ShapeMismatch("svd_thin: empty matrix");
    }
    Tensor work = a;
    ThinSvd out;
    out.U = Tensor(m, p);
    out.S.assign(static_cast<size_t>(p), 0.0);
    Tensor vt(p, n);
    std::vector<double> superb(static_cast<size_t>(std::max<int64_t>(p - 1, 1)));
    int info = LAPACKE_dgesvd(LAPACK_ROW_MAJOR, 'S', 'S', static_cast<int>(m),
                              static_cast<int>(n), work.real_data(), static_cast<int>(n),
                              out.S.data(), out.U.real_data(), static_cast<int>(p),
                              vt.real_data(), static_cast<int>(n), superb.data());
    check_lapack(info, "dgesvd");
    out.V = vt.transpose();
    return out;
}

SvdResult svd_truncated(const Tensor& a, int64_t rank) {
    if (!a.is_real()) {
        throw ShapeMismatch("svd_truncated: expected a real matrix");
    }
    const int64_t p = std::min(a.rows(), a.cols());
    if (rank < 1 || rank > p) {
        throw RankTooLarge("svd_truncated: rank " + std::to_string(rank) +
                           " outside [1, " + std::to_string(p) + "] for " + a.shape_str());
    }
    ThinSvd full = svd_thin(a);

    const double cutoff = kSingularValueRelTol * full.S[0];
    int64_t re = 0;
    while (re < rank && full.S[static_cast<size_t>(re)] > cutoff &&
           full.S[static_cast<size_t>(re)] > 0.0) {
        ++re;
    }

    SvdResult out;
    out.effective_rank = re;
    out.S.assign(full.S.begin(), full.S.begin() + re);
    out.U = Tensor(a.rows(), re);
    out.V = Tensor(a.cols(), re);
    for (int64_t i = 0; i < a.rows(); ++i) {
        for (int64_t j = 0; j < re; ++j) {
            out.U.at(i, j) = full.U.at(i, j);
        }
    }
    for (int64_t i = 0; i < a.cols(); ++i) {
        for (int64_t j = 0; j < re; ++j) {
            out.V.at(i, j) = full.V.at(i, j);
        }
    }
    return out;
}

EigResult eig(const Tensor& a) {
    if (a.rows() != a.cols()) {
        throw ShapeMismatch("eig: matrix not square, " + a.shape_str());
    }
    const int64_t n = a.rows();
    Tensor work = a.to_complex();
    Tensor lambda(n, 1, Scalar::Complex128);
    Tensor vr(n, n, Scalar::Complex128);
    int info = LAPACKE_zgeev(LAPACK_ROW_MAJOR, 'N', 'V', static_cast<int>(n),
                             work.complex_data(), static_cast<int>(n), lambda.complex_data(),
                             nullptr, static_cast<int>(n), vr.complex_data(),
                             static_cast<int>(n));
    check_lapack(info, "zgeev");

    // Sort: |lambda| descending, ties by angle ascending in (-pi, pi].
    std::vector<int64_t> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    auto angle = [&](int64_t k) {
        double th = std::arg(lambda.c(k));
        if (th <= -M_PI) {
            th = M_PI; // fold -pi onto +pi so the range is (-pi, pi]
        }
        return th;
    };
    std::stable_sort(order.begin(), order.end(), [&](int64_t x, int64_t y) {
        const double mx = std::abs(lambda.c(x)), my = std::abs(lambda.c(y));
        if (mx != my) {
            return mx > my;
        }
        return angle(x) < angle(y);
    });

    EigResult out;
    out.eigenvalues = Tensor(n, 1, Scalar::Complex128);
    out.eigenvectors = Tensor(n, n, Scalar::Complex128);
    for (int64_t k = 0; k < n; ++k) {
        const int64_t src = order[static_cast<size_t>(k)];
        out.eigenvalues.c(k) = lambda.c(src);

        // Unit norm with the first significant component rotated to the
        // positive real axis; removes the phase ambiguity.
        double norm = 0.0, maxmag = 0.0;
        for (int64_t i = 0; i < n; ++i) {
            norm += std::norm(vr.cat(i, src));
            maxmag = std::max(maxmag, std::abs(vr.cat(i, src)));
        }
        norm = std::sqrt(norm);
        cplx phase(1.0, 0.0);
        for (int64_t i = 0; i < n; ++i) {
            const cplx v = vr.cat(i, src);
            if (std::abs(v) > 1e-12 * maxmag) {
                phase = std::conj(v) / std::abs(v);
                break;
            }
        }
        for (int64_t i = 0; i < n; ++i) {
            out.eigenvectors.cat(i, k) = vr.cat(i, src) * phase / norm;
        }
    }

    const double condw = cond_2norm(out.eigenvectors);
    if (!(condw <= 1e12)) {
        throw DefectiveMatrix("eig: eigenvector matrix condition number " +
                              std::to_string(condw) + " exceeds 1e12 (defective or "
                              "near-defective matrix)");
    }

    // Residual check ||A w - lambda w|| <= 1e-8 ||A||_F per pair.
    const Tensor ac = a.to_complex();
    const Tensor aw = matmul(ac, out.eigenvectors);
    const double afro = a.frobenius_norm();
    for (int64_t k = 0; k < n; ++k) {
        double resid = 0.0;
        for (int64_t i = 0; i < n; ++i) {
            resid += std::norm(aw.cat(i, k) - out.eigenvalues.c(k) * out.eigenvectors.cat(i, k));
        }
        if (std::sqrt(resid) > 1e-8 * std::max(afro, 1e-300)) {
            throw ConvergenceFailure("eig: residual " + std::to_string(std::sqrt(resid)) +
                                     " above 1e-8 * ||A||_F for eigenpair " + std::to_string(k));
        }
    }
    return out;
}

Tensor pinv(const Tensor& a) {
    if (a.is_real()) {
        ThinSvd s = svd_thin(a);
        const double cutoff = kSingularValueRelTol * (s.S.empty() ? 0.0 : s.S[0]);
        Tensor p(a.cols(), a.rows());
        // P = sum_k v_k (1/s_k) u_k^T over retained triplets
        for (size_t k = 0; k < s.S.size(); ++k) {
            if (!(s.S[k] > cutoff) || s.S[k] <= 0.0) {
                break;
            }
            const double inv = 1.0 / s.S[k];
            for (int64_t i = 0; i < a.cols(); ++i) {
                const double vi = s.V.at(i, static_cast<int64_t>(k)) * inv;
                for (int64_t j = 0; j < a.rows(); ++j) {
                    p.at(i, j) += vi * s.U.at(j, static_cast<int64_t>(k));
                }
            }
        }
        return p;
    }
    ThinSvdC s = svd_thin_complex(a);
    const double cutoff = kSingularValueRelTol * (s.S.empty() ? 0.0 : s.S[0]);
    Tensor p(a.cols(), a.rows(), Scalar::Complex128);
    for (size_t k = 0; k < s.S.size(); ++k) {
        if (!(s.S[k] > cutoff) || s.S[k] <= 0.0) {
            break;
        }
        const double inv = 1.0 / s.S[k];
        for (int64_t i = 0; i < a.cols(); ++i) {
            const cplx vi = s.V.cat(i, static_cast<int64_t>(k)) * inv;
            for (int64_t j = 0; j < a.rows(); ++j) {
                p.cat(i, j) += vi * std::conj(s.U.cat(j, static_cast<int64_t>(k)));
            }
        }
    }
    return p;
}

Tensor matexp_eigs(const Tensor& omega, double i) {
    if (!omega.is_complex() || omega.cols() != 1) {
        throw ShapeMismatch("matexp_eigs: expected a complex column vector");
    }
    Tensor out(omega.rows(), 1, Scalar::Complex128);
    for (int64_t k = 0; k < omega.rows(); ++k) {
        out.c(k) = std::exp(omega.c(k) * i);
    }
    return out;
}

Tensor solve(const Tensor& a, const Tensor& b) {
    if (a.rows() != a.cols() || a.rows() != b.rows()) {
        throw ShapeMismatch("solve: incompatible shapes " + a.shape_str() + ", " +
                            b.shape_str());
    }
    Tensor lu = a.to_complex();
    Tensor x = b.to_complex();
    std::vector<int> ipiv(static_cast<size_t>(a.rows()));
    int info = LAPACKE_zgesv(LAPACK_ROW_MAJOR, static_cast<int>(a.rows()),
                             static_cast<int>(x.cols()), lu.complex_data(),
                             static_cast<int>(a.cols()), ipiv.data(), x.complex_data(),
                             static_cast<int>(x.cols()));
    if (info > 0) {
        throw DefectiveMatrix("solve: matrix is singular");
    }
    check_lapack(info, "zgesv");
    return x;
}

double cond_2norm(const Tensor& a) {
    std::vector<double> s;
    if (a.is_real()) {
        s = svd_thin(a).S;
    } else {
        s = svd_thin_complex(a).S;
    }
    if (s.empty() || s.back() <= 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return s.front() / s.back();
}

} // namespace koopman

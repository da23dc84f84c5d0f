#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "koopman/kernels.hpp"
#include "koopman/linalg.hpp"
#include "koopman/tensor.hpp"

#include "test_util.hpp"

#include <cmath>

using namespace koopman;
using testutil::random_tensor;

// ============================================================================
// matmul
// ============================================================================

TEST_CASE("matmul identity") {
    Tensor v{{3.0}, {4.0}};
    Tensor out = matmul(Tensor::identity(2), v);
    CHECK(out.at(0, 0) == 3.0);
    CHECK(out.at(1, 0) == 4.0);
}

TEST_CASE("matmul permutation") {
    Tensor p{{0.0, 1.0}, {1.0, 0.0}};
    Tensor v{{1.0}, {2.0}};
    Tensor out = matmul(p, v);
    CHECK(out.at(0, 0) == 2.0);
    CHECK(out.at(1, 0) == 1.0);
}

TEST_CASE("matmul matches triple-loop reference") {
    nets::Rng rng(7);
    Tensor a = random_tensor(3, 4, rng);
    Tensor b = random_tensor(4, 2, rng);
    Tensor c = matmul(a, b);
    for (int64_t i = 0; i < 3; ++i) {
        for (int64_t j = 0; j < 2; ++j) {
            double acc = 0.0;
            for (int64_t k = 0; k < 4; ++k) {
                acc += a.at(i, k) * b.at(k, j);
            }
            CHECK(std::abs(c.at(i, j) - acc) < 1e-12);
        }
    }
}

TEST_CASE("matmul shape mismatch") {
    CHECK_THROWS_AS(matmul(Tensor(2, 3), Tensor(2, 2)), ShapeMismatch);
    CHECK_THROWS_AS(matmul(Tensor(2, 2), Tensor(2, 2, Scalar::Complex128)), ShapeMismatch);
}

TEST_CASE("parallel kernels match serial reference bitwise") {
    nets::Rng rng(11);
    const int64_t m = 37, k = 53, n = 41;
    Tensor a = random_tensor(m, k, rng), b = random_tensor(k, n, rng);
    std::vector<double> c1(static_cast<size_t>(m * n)), c2(c1);
    kernels::matmul_f64(a.real_data(), b.real_data(), c1.data(), m, k, n);
    kernels::serial::matmul_f64(a.real_data(), b.real_data(), c2.data(), m, k, n);
    for (size_t i = 0; i < c1.size(); ++i) {
        CHECK(c1[i] == c2[i]);
    }

    Tensor ac = testutil::random_complex_tensor(19, 23, rng);
    Tensor bc = testutil::random_complex_tensor(23, 17, rng);
    std::vector<cplx> d1(19 * 17), d2(d1);
    kernels::matmul_c128(ac.complex_data(), bc.complex_data(), d1.data(), 19, 23, 17);
    kernels::serial::matmul_c128(ac.complex_data(), bc.complex_data(), d2.data(), 19, 23, 17);
    for (size_t i = 0; i < d1.size(); ++i) {
        CHECK(d1[i] == d2[i]);
    }
}

// ============================================================================
// svd_truncated
// ============================================================================

TEST_CASE("svd of identity") {
    SvdResult s = svd_truncated(Tensor::identity(2), 2);
    CHECK(s.effective_rank == 2);
    CHECK(s.S[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.S[1] == doctest::Approx(1.0).epsilon(1e-12));
    Tensor uvt = matmul(s.U, s.V.transpose());
    CHECK(max_abs_diff(uvt, Tensor::identity(2)) < 1e-10);
}

TEST_CASE("svd truncation of diag(2,1)") {
    Tensor a{{2.0, 0.0}, {0.0, 1.0}};
    SvdResult s = svd_truncated(a, 1);
    CHECK(s.effective_rank == 1);
    CHECK(s.S[0] == doctest::Approx(2.0).epsilon(1e-12));
    // Rank-1 reconstruction is diag(2, 0).
    Tensor recon(2, 2);
    for (int64_t i = 0; i < 2; ++i) {
        for (int64_t j = 0; j < 2; ++j) {
            recon.at(i, j) = s.S[0] * s.U.at(i, 0) * s.V.at(j, 0);
        }
    }
    Tensor expect{{2.0, 0.0}, {0.0, 0.0}};
    CHECK(max_abs_diff(recon, expect) < 1e-12);
}

TEST_CASE("rank-2 truncation equals best rank-2 approximation from full SVD") {
    nets::Rng rng(3);
    Tensor a = random_tensor(4, 4, rng);
    SvdResult s = svd_truncated(a, 2);
    REQUIRE(s.effective_rank == 2);

    // Oracle: full SVD, keep top two triplets, reconstruct.
    ThinSvd full = svd_thin(a);
    Tensor best(4, 4);
    for (int64_t i = 0; i < 4; ++i) {
        for (int64_t j = 0; j < 4; ++j) {
            for (int64_t k = 0; k < 2; ++k) {
                best.at(i, j) +=
                    full.S[static_cast<size_t>(k)] * full.U.at(i, k) * full.V.at(j, k);
            }
        }
    }
    Tensor recon(4, 4);
    for (int64_t i = 0; i < 4; ++i) {
        for (int64_t j = 0; j < 4; ++j) {
            for (int64_t k = 0; k < 2; ++k) {
                recon.at(i, j) += s.S[static_cast<size_t>(k)] * s.U.at(i, k) * s.V.at(j, k);
            }
        }
    }
    CHECK(sub(recon, best).frobenius_norm() < 1e-10);
}

TEST_CASE("svd orthonormality and reconstruction invariants") {
    nets::Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor a = random_tensor(6, 4, rng);
        SvdResult s = svd_truncated(a, 4);
        for (size_t k = 0; k < s.S.size(); ++k) {
            CHECK(s.S[k] > 0.0);
            if (k > 0) {
                CHECK(s.S[k] <= s.S[k - 1]);
            }
        }
        CHECK(max_abs_diff(matmul(s.U.transpose(), s.U), Tensor::identity(s.effective_rank)) <
              1e-10);
        CHECK(max_abs_diff(matmul(s.V.transpose(), s.V), Tensor::identity(s.effective_rank)) <
              1e-10);
        if (s.effective_rank == 4) {
            Tensor recon(6, 4);
            for (int64_t i = 0; i < 6; ++i) {
                for (int64_t j = 0; j < 4; ++j) {
                    for (int64_t k = 0; k < 4; ++k) {
                        recon.at(i, j) +=
                            s.S[static_cast<size_t>(k)] * s.U.at(i, k) * s.V.at(j, k);
                    }
                }
            }
            CHECK(sub(recon, a).frobenius_norm() < 1e-10 * a.frobenius_norm());
        }
    }
}

TEST_CASE("svd rank too large") {
    Tensor a(3, 2);
    a.at(0, 0) = 1.0;
    CHECK_THROWS_AS(svd_truncated(a, 3), RankTooLarge);
    CHECK_THROWS_AS(svd_truncated(a, 0), RankTooLarge);
}

TEST_CASE("svd drops singular values below the relative cutoff") {
    Tensor a{{1.0, 0.0}, {0.0, 1e-14}};
    SvdResult s = svd_truncated(a, 2);
    CHECK(s.effective_rank == 1);
}

// ============================================================================
// eig
// ============================================================================

TEST_CASE("eig of diagonal matrix") {
    Tensor a{{0.9, 0.0}, {0.0, 0.8}};
    EigResult e = eig(a);
    CHECK(std::abs(e.eigenvalues.c(0) - cplx(0.9, 0.0)) < 1e-12);
    CHECK(std::abs(e.eigenvalues.c(1) - cplx(0.8, 0.0)) < 1e-12);
}

TEST_CASE("eig of rotation generator") {
    Tensor a{{0.0, -1.0}, {1.0, 0.0}};
    EigResult e = eig(a);
    // Equal moduli: ties sort by angle ascending, so -i comes first.
    CHECK(std::abs(e.eigenvalues.c(0) - cplx(0.0, -1.0)) < 1e-12);
    CHECK(std::abs(e.eigenvalues.c(1) - cplx(0.0, 1.0)) < 1e-12);
}

TEST_CASE("eig reconstruction W Lambda W^-1") {
    nets::Rng rng(13);
    Tensor a = random_tensor(5, 5, rng);
    EigResult e = eig(a);
    Tensor lam(5, 5, Scalar::Complex128);
    for (int64_t k = 0; k < 5; ++k) {
        lam.cat(k, k) = e.eigenvalues.c(k);
    }
    Tensor winv = pinv(e.eigenvectors);
    Tensor recon = matmul(matmul(e.eigenvectors, lam), winv);
    CHECK(max_abs_diff(recon.real_part(), a) < 1e-8);
    CHECK(recon.imag_part().max_abs() < 1e-8);
}

TEST_CASE("eig ordering and phase are deterministic") {
    nets::Rng rng(17);
    Tensor a = random_tensor(6, 6, rng);
    EigResult e1 = eig(a);
    EigResult e2 = eig(a);
    CHECK(max_abs_diff(e1.eigenvalues, e2.eigenvalues) == 0.0);
    CHECK(max_abs_diff(e1.eigenvectors, e2.eigenvectors) == 0.0);
    for (int64_t k = 1; k < 6; ++k) {
        CHECK(std::abs(e1.eigenvalues.c(k)) <= std::abs(e1.eigenvalues.c(k - 1)) + 1e-15);
    }
    for (int64_t k = 0; k < 6; ++k) {
        double norm = 0.0;
        for (int64_t i = 0; i < 6; ++i) {
            norm += std::norm(e1.eigenvectors.cat(i, k));
        }
        CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-12));
        for (int64_t i = 0; i < 6; ++i) {
            const cplx v = e1.eigenvectors.cat(i, k);
            if (std::abs(v) > 1e-9) {
                CHECK(v.real() > 0.0);
                CHECK(std::abs(v.imag()) < 1e-10);
                break;
            }
        }
    }
}

TEST_CASE("eig rejects defective matrices") {
    Tensor jordan{{1.0, 1.0}, {0.0, 1.0}};
    CHECK_THROWS_AS(eig(jordan), DefectiveMatrix);
}

// ============================================================================
// pinv
// ============================================================================

TEST_CASE("pinv of identity") {
    CHECK(max_abs_diff(pinv(Tensor::identity(3)), Tensor::identity(3)) < 1e-12);
}

TEST_CASE("pinv of singular diagonal") {
    Tensor a{{2.0, 0.0}, {0.0, 0.0}};
    Tensor expect{{0.5, 0.0}, {0.0, 0.0}};
    CHECK(max_abs_diff(pinv(a), expect) < 1e-12);
}

TEST_CASE("pinv Penrose condition A P A = A") {
    nets::Rng rng(19);
    Tensor a = random_tensor(3, 5, rng);
    Tensor p = pinv(a);
    CHECK(max_abs_diff(matmul(matmul(a, p), a), a) < 1e-10);
}

TEST_CASE("pinv satisfies all four Penrose conditions on 100 random cases") {
    nets::Rng rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        const int64_t m = 2 + rng.below(4);
        const int64_t n = 2 + rng.below(4);
        Tensor a = random_tensor(m, n, rng);
        Tensor p = pinv(a);
        CHECK(max_abs_diff(matmul(matmul(a, p), a), a) < 1e-9);
        CHECK(max_abs_diff(matmul(matmul(p, a), p), p) < 1e-9);
        Tensor ap = matmul(a, p);
        Tensor pa = matmul(p, a);
        CHECK(max_abs_diff(ap, ap.transpose()) < 1e-9);
        CHECK(max_abs_diff(pa, pa.transpose()) < 1e-9);
    }
}

TEST_CASE("complex pinv") {
    nets::Rng rng(29);
    Tensor a = testutil::random_complex_tensor(4, 3, rng);
    Tensor p = pinv(a);
    CHECK(max_abs_diff(matmul(matmul(a, p), a), a) < 1e-9);
    Tensor ap = matmul(a, p);
    CHECK(max_abs_diff(ap, ap.hermitian()) < 1e-9);
}

// ============================================================================
// matexp_eigs
// ============================================================================

TEST_CASE("matexp_eigs scalar analytic case") {
    Tensor omega = Tensor::column_c({cplx(std::log(4.0), 0.0)});
    Tensor out = matexp_eigs(omega, 0.5);
    CHECK(std::abs(out.c(0) - cplx(2.0, 0.0)) < 1e-12);
}

TEST_CASE("matexp_eigs at i = 0 is all ones") {
    nets::Rng rng(31);
    Tensor omega = testutil::random_complex_tensor(5, 1, rng);
    Tensor out = matexp_eigs(omega, 0.0);
    for (int64_t k = 0; k < 5; ++k) {
        CHECK(std::abs(out.c(k) - cplx(1.0, 0.0)) < 1e-15);
    }
}

TEST_CASE("matexp_eigs Euler identity") {
    Tensor omega = Tensor::column_c({cplx(0.0, M_PI)});
    Tensor out = matexp_eigs(omega, 1.0);
    CHECK(std::abs(out.c(0) - cplx(-1.0, 0.0)) < 1e-12);
}

// ============================================================================
// Tensor basics
// ============================================================================

TEST_CASE("explicit complex promotion only") {
    Tensor r(2, 2);
    CHECK_THROWS_AS((void)r.c(0), ShapeMismatch);
    Tensor c = r.to_complex();
    CHECK(c.is_complex());
    CHECK_THROWS_AS(add(r, c), ShapeMismatch);
}

TEST_CASE("hermitian transpose") {
    Tensor a(1, 2, Scalar::Complex128);
    a.cat(0, 0) = cplx(1.0, 2.0);
    a.cat(0, 1) = cplx(3.0, -4.0);
    Tensor h = a.hermitian();
    CHECK(h.rows() == 2);
    CHECK(h.cat(0, 0) == cplx(1.0, -2.0));
    CHECK(h.cat(1, 0) == cplx(3.0, 4.0));
}

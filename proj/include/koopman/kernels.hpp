#pragma once

#include <complex>
#include <cstdint>

// Dense compute kernels. The default entry points parallelize with OpenMP;
// kernels::serial holds the plain reference implementations used by the unit
// tests and the bench_kernels tool. Each output element is accumulated in the
// same order in both variants, so results are bit-identical regardless of
// thread count.

namespace koopman::kernels {

using cplx = std::complex<double>;

// c (m x n) = a (m x k) * b (k x n), all row-major
void matmul_f64(const double* a, const double* b, double* c,
                std::int64_t m, std::int64_t k, std::int64_t n);
void matmul_c128(const cplx* a, const cplx* b, cplx* c,
                 std::int64_t m, std::int64_t k, std::int64_t n);

// y = tanh(x) elementwise
void tanh_f64(const double* x, double* y, std::int64_t n);

// out (n x m) = transpose of in (m x n), row-major
void transpose_f64(const double* in, double* out, std::int64_t m, std::int64_t n);

namespace serial {

void matmul_f64(const double* a, const double* b, double* c,
                std::int64_t m, std::int64_t k, std::int64_t n);
void matmul_c128(const cplx* a, const cplx* b, cplx* c,
                 std::int64_t m, std::int64_t k, std::int64_t n);
void tanh_f64(const double* x, double* y, std::int64_t n);
void transpose_f64(const double* in, double* out, std::int64_t m, std::int64_t n);

} // namespace serial

} // namespace koopman::kernels

#include "koopman/kernels.hpp"

#include <cmath>

namespace koopman::kernels {

namespace {
// Below this many multiply-adds the OpenMP fork/join overhead dominates.
constexpr std::int64_t kParallelFlops = 1 << 15;
} // namespace

void matmul_f64(const double* a, const double* b, double* c,
                std::int64_t m, std::int64_t k, std::int64_t n) {
    const bool par = m * k * n >= kParallelFlops;
#pragma omp parallel for if (par) schedule(static)
    for (std::int64_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (std::int64_t j = 0; j < n; ++j) {
            ci[j] = 0.0;
        }
        for (std::int64_t l = 0; l < k; ++l) {
            const double av = ai[l];
            const double* bl = b + l * n;
            for (std::int64_t j = 0; j < n; ++j) {
                ci[j] += av * bl[j];
            }
        }
    }
}

void matmul_c128(const cplx* a, const cplx* b, cplx* c,
                 std::int64_t m, std::int64_t k, std::int64_t n) {
    const bool par = m * k * n >= kParallelFlops / 4;
#pragma omp parallel for if (par) schedule(static)
    for (std::int64_t i = 0; i < m; ++i) {
        const cplx* ai = a + i * k;
        cplx* ci = c + i * n;
        for (std::int64_t j = 0; j < n; ++j) {
            ci[j] = cplx(0.0, 0.0);
        }
        for (std::int64_t l = 0; l < k; ++l) {
            const cplx av = ai[l];
            const cplx* bl = b + l * n;
            for (std::int64_t j = 0; j < n; ++j) {
                ci[j] += av * bl[j];
            }
        }
    }
}

void tanh_f64(const double* x, double* y, std::int64_t n) {
#pragma omp parallel for if (n >= kParallelFlops) schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        y[i] = std::tanh(x[i]);
    }
}

void transpose_f64(const double* in, double* out, std::int64_t m, std::int64_t n) {
#pragma omp parallel for if (m * n >= kParallelFlops) schedule(static)
    for (std::int64_t i = 0; i < m; ++i) {
        for (std::int64_t j = 0; j < n; ++j) {
            out[j * m + i] = in[i * n + j];
        }
    }
}

namespace serial {

void matmul_f64(const double* a, const double* b, double* c,
                std::int64_t m, std::int64_t k, std::int64_t n) {
    for (std::int64_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (std::int64_t j = 0; j < n; ++j) {
            ci[j] = 0.0;
        }
        for (std::int64_t l = 0; l < k; ++l) {
            const double av = ai[l];
            const double* bl = b + l * n;
            for (std::int64_t j = 0; j < n; ++j) {
                ci[j] += av * bl[j];
            }
        }
    }
}

void matmul_c128(const cplx* a, const cplx* b, cplx* c,
                 std::int64_t m, std::int64_t k, std::int64_t n) {
    for (std::int64_t i = 0; i < m; ++i) {
        const cplx* ai = a + i * k;
        cplx* ci = c + i * n;
        for (std::int64_t j = 0; j < n; ++j) {
            ci[j] = cplx(0.0, 0.0);
        }
        for (std::int64_t l = 0; l < k; ++l) {
            const cplx av = ai[l];
            const cplx* bl = b + l * n;
            for (std::int64_t j = 0; j < n; ++j) {
                ci[j] += av * bl[j];
            }
        }
    }
}

void tanh_f64(const double* x, double* y, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) {
        y[i] = std::tanh(x[i]);
    }
}

void transpose_f64(const double* in, double* out, std::int64_t m, std::int64_t n) {
    for (std::int64_t i = 0; i < m; ++i) {
        for (std::int64_t j = 0; j < n; ++j) {
            out[j * m + i] = in[i * n + j];
        }
    }
}

} // namespace serial

} // namespace koopman::kernels

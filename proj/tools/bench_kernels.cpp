// Compares the OpenMP kernels against the serial reference implementations.
// The parallel variants accumulate each output element in the same order as
// the serial ones, so the results must agree bit for bit; this tool checks
// that while timing both.

#include "koopman/kernels.hpp"
#include "koopman/nets.hpp"

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

using koopman::kernels::cplx;

namespace {

double now_s() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

template <typename F>
double time_best_of(int reps, F&& f) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const double t0 = now_s();
        f();
        best = std::min(best, now_s() - t0);
    }
    return best;
}

void fill(std::vector<double>& v, koopman::nets::Rng& rng) {
    for (double& x : v) {
        x = rng.uniform(-1.0, 1.0);
    }
}

} // namespace

int main() {
    std::printf("threads: %d\n\n", omp_get_max_threads());
    std::printf("%-22s %10s %10s %8s %s\n", "kernel", "serial_ms", "omp_ms", "speedup",
                "bitwise");

    koopman::nets::Rng rng(42);
    for (std::int64_t n : {64, 128, 256, 512, 1024}) {
        std::vector<double> a(static_cast<size_t>(n * n)), b(a), c1(a), c2(a);
        fill(a, rng);
        fill(b, rng);

        const double ts = time_best_of(3, [&] {
            koopman::kernels::serial::matmul_f64(a.data(), b.data(), c1.data(), n, n, n);
        });
        const double tp = time_best_of(3, [&] {
            koopman::kernels::matmul_f64(a.data(), b.data(), c2.data(), n, n, n);
        });
        bool same = true;
        for (size_t i = 0; i < c1.size(); ++i) {
            same = same && c1[i] == c2[i];
        }
        char name[64];
        std::snprintf(name, sizeof(name), "matmul_f64 %lldx%lld", static_cast<long long>(n),
                      static_cast<long long>(n));
        std::printf("%-22s %10.3f %10.3f %8.2fx %s\n", name, ts * 1e3, tp * 1e3, ts / tp,
                    same ? "ok" : "MISMATCH");
        if (!same) {
            return 1;
        }
    }

    for (std::int64_t n : {64, 128, 256}) {
        std::vector<cplx> a(static_cast<size_t>(n * n)), b(a), c1(a), c2(a);
        for (auto& z : a) {
            z = cplx(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
        }
        for (auto& z : b) {
            z = cplx(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
        }
        const double ts = time_best_of(3, [&] {
            koopman::kernels::serial::matmul_c128(a.data(), b.data(), c1.data(), n, n, n);
        });
        const double tp = time_best_of(3, [&] {
            koopman::kernels::matmul_c128(a.data(), b.data(), c2.data(), n, n, n);
        });
        bool same = true;
        for (size_t i = 0; i < c1.size(); ++i) {
            same = same && c1[i] == c2[i];
        }
        char name[64];
        std::snprintf(name, sizeof(name), "matmul_c128 %lldx%lld", static_cast<long long>(n),
                      static_cast<long long>(n));
        std::printf("%-22s %10.3f %10.3f %8.2fx %s\n", name, ts * 1e3, tp * 1e3, ts / tp,
                    same ? "ok" : "MISMATCH");
        if (!same) {
            return 1;
        }
    }

    {
        const std::int64_t n = 1 << 22;
        std::vector<double> x(static_cast<size_t>(n)), y1(x), y2(x);
        fill(x, rng);
        const double ts = time_best_of(3, [&] {
            koopman::kernels::serial::tanh_f64(x.data(), y1.data(), n);
        });
        const double tp =
            time_best_of(3, [&] { koopman::kernels::tanh_f64(x.data(), y2.data(), n); });
        bool same = true;
        for (size_t i = 0; i < y1.size(); ++i) {
            same = same && y1[i] == y2[i];
        }
        std::printf("%-22s %10.3f %10.3f %8.2fx %s\n", "tanh_f64 4M", ts * 1e3, tp * 1e3,
                    ts / tp, same ? "ok" : "MISMATCH");
        if (!same) {
            return 1;
        }
    }
    return 0;
}

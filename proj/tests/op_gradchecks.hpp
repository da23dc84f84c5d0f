#pragma once

// Finite-difference oracles for every autodiff op. Shared between the unit
// tests and the acceptance suite (which runs them at 50 instances per op).

#include "koopman/autodiff.hpp"
#include "koopman/linalg.hpp"
#include "koopman/metrics.hpp"
#include "koopman/nets.hpp"

#include "test_util.hpp"

#include <map>
#include <string>

namespace testutil {

namespace ad = koopman::ad;
using koopman::Tensor;

/// Real scalar loss from a complex node: |Re|^2 + 2 |Im|^2 elementwise sums,
/// so both components influence the loss with distinct weights.
inline ad::Var complex_scalarizer(ad::Var z) {
    ad::Var re = ad::real_part(z);
    ad::Var im = ad::real_part(ad::scale(z, koopman::cplx(0.0, -1.0)));
    return ad::add(ad::sum_squares(re), ad::scale(ad::sum_squares(im), 2.0));
}

/// Loss comparing a real node against a fixed constant (gradient 2(x-c)/n).
inline ad::Var against_constant(ad::Tape& tape, ad::Var x, const Tensor& c) {
    return ad::mse(x, tape.leaf(c, false));
}

inline Tensor well_separated_matrix(int64_t n, koopman::nets::Rng& rng) {
    for (int attempt = 0; attempt < 100; ++attempt) {
        Tensor a = random_tensor(n, n, rng);
        try {
            koopman::EigResult e = koopman::eig(a);
            double lmax = 0.0;
            for (int64_t k = 0; k < n; ++k) {
                lmax = std::max(lmax, std::abs(e.eigenvalues.c(k)));
            }
            bool ok = true;
            for (int64_t i = 0; i < n && ok; ++i) {
                for (int64_t j = i + 1; j < n; ++j) {
                    if (std::abs(e.eigenvalues.c(i) - e.eigenvalues.c(j)) < 5e-2 * lmax) {
                        ok = false;
                        break;
                    }
                }
            }
            if (ok) {
                return a;
            }
        } catch (const koopman::Error&) {
        }
    }
    throw koopman::Error("could not generate a well-separated matrix");
}

inline Tensor well_separated_rect(int64_t m, int64_t n, koopman::nets::Rng& rng) {
    for (int attempt = 0; attempt < 100; ++attempt) {
        Tensor a = random_tensor(m, n, rng);
        const auto s = koopman::svd_thin(a).S;
        bool ok = s.back() > 5e-2 * s.front();
        for (size_t k = 1; k < s.size() && ok; ++k) {
            ok = (s[k - 1] - s[k]) > 5e-2 * s.front();
        }
        if (ok) {
            return a;
        }
    }
    throw koopman::Error("could not generate well-separated singular values");
}

/// One finite-difference instance per op; returns max relative error per op
/// name, over `instances` random draws each.
inline std::map<std::string, double> run_op_gradchecks(int instances, uint64_t seed) {
    koopman::nets::Rng rng(seed);
    std::map<std::string, double> worst;
    auto record = [&](const std::string& name, double err) {
        worst[name] = std::max(worst[name], err);
    };

    for (int inst = 0; inst < instances; ++inst) {
        // --- real elementwise / structural ops ---
        {
            Tensor a = random_tensor(3, 4, rng), b = random_tensor(3, 4, rng);
            Tensor c = random_tensor(3, 4, rng);
            record("add", gradcheck_max_rel_err({a, b}, [&](ad::Tape& t, auto& L) {
                       return against_constant(t, ad::add(L[0], L[1]), c);
                   }));
            record("subtract", gradcheck_max_rel_err({a, b}, [&](ad::Tape& t, auto& L) {
                       return against_constant(t, ad::subtract(L[0], L[1]), c);
                   }));
            record("scale", gradcheck_max_rel_err({a}, [&](ad::Tape& t, auto& L) {
                       return against_constant(t, ad::scale(L[0], 1.7), c);
                   }));
            record("transpose", gradcheck_max_rel_err({a}, [&](ad::Tape& t, auto& L) {
                       return against_constant(t, ad::transpose(L[0]), c.transpose());
                   }));
            record("mse", gradcheck_max_rel_err({a, b}, [&](ad::Tape&, auto& L) {
                       return ad::mse(L[0], L[1]);
                   }));
            record("sum_squares", gradcheck_max_rel_err({a}, [&](ad::Tape&, auto& L) {
                       return ad::sum_squares(L[0]);
                   }));
        }
        {
            // l1_mean needs entries bounded away from zero.
            Tensor a(3, 4);
            for (int64_t i = 0; i < a.size(); ++i) {
                const double mag = rng.uniform(0.2, 1.0);
                a[i] = rng.uniform() < 0.5 ? -mag : mag;
            }
            record("l1_mean", gradcheck_max_rel_err({a}, [&](ad::Tape&, auto& L) {
                       return ad::l1_mean(L[0]);
                   }));
        }
        {
            Tensor a = random_tensor(3, 4, rng), b = random_tensor(4, 2, rng);
            Tensor c = random_tensor(3, 2, rng);
            record("matmul", gradcheck_max_rel_err({a, b}, [&](ad::Tape& t, auto& L) {
                       return against_constant(t, ad::matmul(L[0], L[1]), c);
                   }));
        }
        {
            Tensor a = random_tensor(3, 2, rng), b = random_tensor(3, 3, rng);
            Tensor c = random_tensor(3, 5, rng);
            record("concat_columns", gradcheck_max_rel_err({a, b}, [&](ad::Tape& t, auto& L) {
                       return against_constant(t, ad::concat_columns({L[0], L[1]}), c);
                   }));
        }
        {
            Tensor a = random_tensor(3, 6, rng);
            Tensor c = random_tensor(3, 2, rng);
            record("slice_columns", gradcheck_max_rel_err({a}, [&](ad::Tape& t, auto& L) {
                       return against_constant(t, ad::slice_columns(L[0], 2, 4), c);
                   }));
            record("select_columns", gradcheck_max_rel_err({a}, [&](ad::Tape& t, auto& L) {
                       return against_constant(t, ad::select_columns(L[0], {5, 1}), c);
                   }));
        }
        {
            // relu needs entries away from the kink at zero.
            Tensor a(3, 4);
            for (int64_t i = 0; i < a.size(); ++i) {
                const double mag = rng.uniform(0.2, 1.0);
                a[i] = rng.uniform() < 0.5 ? -mag : mag;
            }
            Tensor c = random_tensor(3, 4, rng);
            for (const auto& [name, kind] :
                 std::map<std::string, ad::Activation>{{"tanh", ad::Activation::Tanh},
                                                       {"relu", ad::Activation::Relu},
                                                       {"sigmoid", ad::Activation::Sigmoid}}) {
                record("activation_" + name,
                       gradcheck_max_rel_err({a}, [&, kind](ad::Tape& t, auto& L) {
                           return against_constant(
                               t, ad::elementwise_activation(L[0], kind), c);
                       }));
            }
        }
        {
            Tensor a = random_tensor(3, 4, rng), b = random_tensor(3, 1, rng);
            Tensor c = random_tensor(3, 4, rng);
            record("add_col_broadcast",
                   gradcheck_max_rel_err({a, b}, [&](ad::Tape& t, auto& L) {
                       return against_constant(t, ad::add_col_broadcast(L[0], L[1]), c);
                   }));
        }
        {
            // reciprocal away from zero
            Tensor a(4, 1);
            for (int64_t i = 0; i < 4; ++i) {
                a[i] = rng.uniform(0.5, 2.0);
            }
            Tensor c = random_tensor(4, 1, rng);
            record("reciprocal", gradcheck_max_rel_err({a}, [&](ad::Tape& t, auto& L) {
                       return against_constant(t, ad::reciprocal(L[0]), c);
                   }));
        }
        {
            Tensor a = random_tensor(3, 4, rng), s = random_tensor(4, 1, rng);
            Tensor c = random_tensor(3, 4, rng);
            record("col_scale", gradcheck_max_rel_err({a, s}, [&](ad::Tape& t, auto& L) {
                       return against_constant(t, ad::col_scale(L[0], L[1]), c);
                   }));
        }

        // --- complex ops ---
        {
            Tensor a = random_complex_tensor(3, 3, rng);
            Tensor b = random_complex_tensor(3, 2, rng);
            record("matmul_complex", gradcheck_max_rel_err({a, b}, [&](ad::Tape&, auto& L) {
                       return complex_scalarizer(ad::matmul(L[0], L[1]));
                   }));
            record("scale_complex", gradcheck_max_rel_err({a}, [&](ad::Tape&, auto& L) {
                       return complex_scalarizer(ad::scale(L[0], koopman::cplx(0.8, -0.6)));
                   }));
        }
        {
            Tensor a = random_tensor(3, 2, rng);
            record("to_complex / real_part",
                   gradcheck_max_rel_err({a}, [&](ad::Tape&, auto& L) {
                       ad::Var z = ad::to_complex(L[0]);
                       z = ad::scale(z, koopman::cplx(0.3, 0.9));
                       return ad::sum_squares(ad::real_part(z));
                   }));
        }
        {
            // log of complex values away from the branch cut and zero
            Tensor a(3, 1, koopman::Scalar::Complex128);
            for (int64_t i = 0; i < 3; ++i) {
                a.c(i) = std::polar(rng.uniform(0.5, 1.5), rng.uniform(-2.5, 2.5));
            }
            record("log_elem", gradcheck_max_rel_err({a}, [&](ad::Tape&, auto& L) {
                       return complex_scalarizer(ad::log_elem(L[0]));
                   }));
        }
        {
            Tensor omega(3, 1, koopman::Scalar::Complex128);
            for (int64_t i = 0; i < 3; ++i) {
                omega.c(i) = koopman::cplx(rng.uniform(-0.5, 0.1), rng.uniform(-1.0, 1.0));
            }
            Tensor b = random_complex_tensor(3, 1, rng);
            record("complex_exp_evolve",
                   gradcheck_max_rel_err({omega, b}, [&](ad::Tape&, auto& L) {
                       return complex_scalarizer(
                           ad::complex_exp_evolve(L[0], {0.5, 1.0, 2.5}, L[1]));
                   }));
        }
        {
            Tensor a = random_complex_tensor(4, 1, rng);
            record("reciprocal_complex",
                   gradcheck_max_rel_err({a}, [&](ad::Tape&, auto& L) {
                       return complex_scalarizer(ad::reciprocal(L[0]));
                   }));
            Tensor m = random_complex_tensor(3, 4, rng);
            Tensor s = random_complex_tensor(4, 1, rng);
            record("col_scale_complex",
                   gradcheck_max_rel_err({m, s}, [&](ad::Tape&, auto& L) {
                       return complex_scalarizer(ad::col_scale(L[0], L[1]));
                   }));
        }

        // --- decompositions ---
        {
            Tensor a = well_separated_rect(5, 3, rng);
            Tensor cu = random_tensor(5, 3, rng), cs = random_tensor(3, 1, rng),
                   cv = random_tensor(3, 3, rng);
            record("svd_truncated (full rank, tall)",
                   gradcheck_max_rel_err({a}, [&](ad::Tape& t, auto& L) {
                       ad::SvdVars s = ad::svd_truncated(L[0], 3);
                       return ad::add(
                           against_constant(t, s.U, cu),
                           ad::add(against_constant(t, s.S, cs),
                                   against_constant(t, s.V, cv)));
                   }));
        }
        {
            Tensor a = well_separated_rect(3, 5, rng);
            Tensor cu = random_tensor(3, 2, rng), cs = random_tensor(2, 1, rng),
                   cv = random_tensor(5, 2, rng);
            record("svd_truncated (truncated, wide)",
                   gradcheck_max_rel_err({a}, [&](ad::Tape& t, auto& L) {
                       ad::SvdVars s = ad::svd_truncated(L[0], 2);
                       return ad::add(
                           against_constant(t, s.U, cu),
                           ad::add(against_constant(t, s.S, cs),
                                   against_constant(t, s.V, cv)));
                   }));
        }
        {
            Tensor a = well_separated_matrix(4, rng);
            record("eig (eigenvalues)", gradcheck_max_rel_err({a}, [&](ad::Tape&, auto& L) {
                       return complex_scalarizer(ad::eig(L[0]).eigenvalues);
                   }));
            // Eigenvector gradients through the scale-invariant evolution
            // composite W e^{log(Lambda) i} W^+ y0, the way the pipeline
            // consumes them.
            Tensor y0 = random_tensor(4, 1, rng);
            record("eig (evolution composite)",
                   gradcheck_max_rel_err({a, y0}, [&](ad::Tape&, auto& L) {
                       ad::EigVars e = ad::eig(L[0]);
                       ad::Var omega = ad::log_elem(e.eigenvalues);
                       ad::Var b = ad::matmul(ad::pinv_from_svd(e.eigenvectors),
                                              ad::to_complex(L[1]));
                       ad::Var evo = ad::complex_exp_evolve(omega, {0.5, 1.5}, b);
                       return ad::sum_squares(ad::real_part(ad::matmul(e.eigenvectors, evo)));
                   }));
        }
        {
            Tensor a = well_separated_rect(4, 3, rng);
            Tensor c = random_tensor(3, 4, rng);
            record("pinv_from_svd (real)",
                   gradcheck_max_rel_err({a}, [&](ad::Tape& t, auto& L) {
                       return against_constant(t, ad::pinv_from_svd(L[0]), c);
                   }));
            Tensor z = random_complex_tensor(3, 4, rng);
            record("pinv_from_svd (complex)",
                   gradcheck_max_rel_err({z}, [&](ad::Tape&, auto& L) {
                       return complex_scalarizer(ad::pinv_from_svd(L[0]));
                   }));
        }
    }
    return worst;
}

/// Full StatePred forward graph on a tiny toy problem; FD-checks every
/// encoder/decoder parameter through the complete fit-evolve-decode chain.
inline double statepred_pipeline_gradcheck(uint64_t seed) {
    koopman::nets::Rng rng(seed);
    // 3 snapshots of a 2-feature damped rotation; internal indexes 0,1,2.
    Tensor A{{0.9 * std::cos(0.7), -0.9 * std::sin(0.7)},
             {0.8 * std::sin(0.7), 0.8 * std::cos(0.7)}};
    Tensor X(2, 3);
    Tensor x{{0.7}, {-0.4}};
    for (int64_t j = 0; j < 3; ++j) {
        X.at(0, j) = x.at(0, 0);
        X.at(1, j) = x.at(1, 0);
        x = koopman::matmul(A, x);
    }

    Tensor ew = random_tensor(2, 2, rng, -0.8, 0.8);
    Tensor eb = random_tensor(2, 1, rng, -0.2, 0.2);
    Tensor dw = random_tensor(2, 2, rng, -0.8, 0.8);
    Tensor db = random_tensor(2, 1, rng, -0.2, 0.2);

    const koopman::metrics::LossWeights w{0.1, 1e-3, 1e-2};
    auto build = [&](ad::Tape& tape, std::vector<ad::Var>& L) {
        ad::Var X_ = tape.leaf(X, false);
        ad::Var h = ad::elementwise_activation(
            ad::add_col_broadcast(ad::matmul(L[0], X_), L[1]), ad::Activation::Tanh);
        ad::Var Y = h;
        ad::Var Yprev = ad::slice_columns(Y, 0, 2);
        ad::Var Ynext = ad::slice_columns(Y, 1, 3);
        ad::SvdVars svd = ad::svd_truncated(Yprev, 2);
        ad::Var VS = ad::col_scale(svd.V, ad::reciprocal(svd.S));
        ad::Var M = ad::matmul(Ynext, VS);
        ad::Var Ktil = ad::matmul(ad::transpose(svd.U), M);
        ad::EigVars eg = ad::eig(Ktil);
        ad::Var W = ad::matmul(ad::to_complex(svd.U), eg.eigenvectors);
        ad::Var Omega = ad::log_elem(eg.eigenvalues);
        ad::Var y0c = ad::to_complex(ad::slice_columns(Y, 0, 1));
        ad::Var b = ad::matmul(ad::pinv_from_svd(W), y0c);
        ad::Var E = ad::complex_exp_evolve(Omega, {1.0, 2.0}, b);
        ad::Var Yhat = ad::real_part(ad::matmul(W, E));
        ad::Var Llin = ad::mse(ad::slice_columns(Y, 1, 3), Yhat);
        ad::Var Xhat = ad::add_col_broadcast(ad::matmul(L[2], Y), L[3]);
        ad::Var Lrecon = ad::mse(X_, Xhat);
        ad::Var Xpred = ad::add_col_broadcast(ad::matmul(L[2], Yhat), L[3]);
        ad::Var Lpred = ad::mse(ad::slice_columns(X_, 1, 3), Xpred);
        ad::Var ae = ad::add(ad::sum_squares(L[0]), ad::sum_squares(L[2]));
        ad::Var Kfull = ad::matmul(M, ad::transpose(svd.U));
        ad::Var kreg = ad::l1_mean(Kfull);
        return koopman::metrics::total_loss(Lrecon, Llin, Lpred, ae, kreg, w);
    };
    return gradcheck_max_rel_err({ew, eb, dw, db}, build);
}

} // namespace testutil

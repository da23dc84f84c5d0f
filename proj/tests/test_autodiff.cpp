#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "koopman/autodiff.hpp"

#include "op_gradchecks.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace koopman;
namespace ad = koopman::ad;
using testutil::random_tensor;

TEST_CASE("d/dA tr(A^T A) = 2A") {
    nets::Rng rng(1);
    Tensor a = random_tensor(3, 3, rng);
    ad::Tape tape;
    ad::Var A = tape.leaf(a, true);
    ad::Var loss = ad::sum_squares(A); // tr(A^T A)
    tape.backward(loss);
    CHECK(max_abs_diff(A.grad(), scale(a, 2.0)) < 1e-12);
}

TEST_CASE("mse backward is definitional") {
    nets::Rng rng(2);
    Tensor p = random_tensor(2, 3, rng), q = random_tensor(2, 3, rng);
    ad::Tape tape;
    ad::Var P = tape.leaf(p, false);
    ad::Var Q = tape.leaf(q, true);
    tape.backward(ad::mse(P, Q));
    Tensor expect = scale(sub(q, p), 2.0 / 6.0);
    CHECK(max_abs_diff(Q.grad(), expect) < 1e-12);
}

TEST_CASE("SVD backward: gradient of S[0] matches finite differences") {
    nets::Rng rng(3);
    Tensor a = testutil::well_separated_rect(4, 3, rng);
    const double err = testutil::gradcheck_max_rel_err({a}, [](ad::Tape& t, auto& L) {
        ad::SvdVars s = ad::svd_truncated(L[0], 1);
        // loss = S[0]
        return ad::slice_columns(ad::transpose(s.S), 0, 1);
    });
    CHECK(err < 1e-5);
}

TEST_CASE("constant loss gives zero gradients everywhere") {
    nets::Rng rng(4);
    Tensor a = random_tensor(2, 2, rng);
    ad::Tape tape;
    ad::Var A = tape.leaf(a, true);
    ad::Var c = tape.leaf(Tensor(1, 1), false);
    tape.backward(c);
    CHECK(A.grad().max_abs() == 0.0);
}

TEST_CASE("loss = sum_squares(W) gives 2W") {
    nets::Rng rng(5);
    Tensor w = random_tensor(3, 2, rng);
    ad::Tape tape;
    ad::Var W = tape.leaf(w, true);
    tape.backward(ad::sum_squares(W));
    CHECK(max_abs_diff(W.grad(), scale(w, 2.0)) < 1e-12);
}

TEST_CASE("non-scalar loss is rejected") {
    ad::Tape tape;
    ad::Var A = tape.leaf(Tensor(2, 2), true);
    CHECK_THROWS_AS(tape.backward(A), NonScalarLoss);
    ad::Var z = tape.leaf(Tensor(1, 1, Scalar::Complex128), true);
    CHECK_THROWS_AS(tape.backward(z), NonScalarLoss);
}

TEST_CASE("backward is linear in the loss") {
    nets::Rng rng(6);
    Tensor a = random_tensor(3, 3, rng), b = random_tensor(3, 3, rng);
    ad::Tape tape;
    ad::Var A = tape.leaf(a, true);
    ad::Var B = tape.leaf(b, false);
    ad::Var prod = ad::matmul(A, B);
    ad::Var l1 = ad::sum_squares(prod);
    ad::Var l2 = ad::l1_mean(ad::slice_columns(prod, 0, 2));
    ad::Var combo = ad::add(ad::scale(l1, 0.3), ad::scale(l2, -1.7));

    tape.backward(l1);
    Tensor g1 = A.grad();
    tape.backward(l2);
    Tensor g2 = A.grad();
    tape.backward(combo);
    Tensor gc = A.grad();
    Tensor expect = add(scale(g1, 0.3), scale(g2, -1.7));
    CHECK(max_abs_diff(gc, expect) < 1e-10);
}

TEST_CASE("each backward rule runs at most once per pass") {
    nets::Rng rng(7);
    Tensor a = random_tensor(2, 2, rng);
    ad::Tape tape;
    ad::Var A = tape.leaf(a, true);
    ad::Var x = ad::matmul(A, A); // the same node consumed twice
    ad::Var loss = ad::sum_squares(ad::add(x, x));
    tape.backward(loss);
    for (int64_t i = 0; i < tape.size(); ++i) {
        CHECK(tape.node(i).backward_calls <= 1);
    }
    CHECK(tape.node(loss.idx).backward_calls == 1);
    CHECK(tape.node(x.idx).backward_calls == 1);
}

TEST_CASE("detach blocks gradient flow but keeps the value") {
    nets::Rng rng(8);
    Tensor a = random_tensor(2, 2, rng);
    ad::Tape tape;
    ad::Var A = tape.leaf(a, true);
    ad::Var D = ad::detach(A);
    CHECK(max_abs_diff(D.value(), a) == 0.0); // bit-for-bit
    CHECK_FALSE(D.requires_grad());
    ad::Var loss = ad::sum_squares(D);
    tape.backward(loss);
    CHECK(A.grad().max_abs() == 0.0);
}

TEST_CASE("eig with detach_gradient still lets other paths flow") {
    nets::Rng rng(9);
    Tensor a = testutil::well_separated_matrix(3, rng);
    ad::Tape tape;
    ad::Var A = tape.leaf(a, true);
    ad::EigVars e = ad::eig(A, /*detach_gradient=*/true);
    // Loss mixes the detached eig path with a direct path.
    ad::Var direct = ad::sum_squares(A);
    ad::Var eigpath = testutil::complex_scalarizer(e.eigenvalues);
    tape.backward(ad::add(direct, eigpath));
    CHECK(max_abs_diff(A.grad(), scale(a, 2.0)) < 1e-12); // only the direct path
}

TEST_CASE("DegenerateSpectrum: close singular values are rejected at backward time") {
    // Nearly equal singular values (relative gap < 1e-6).
    Tensor a{{1.0, 0.0}, {0.0, 1.0 + 1e-8}};
    ad::Tape tape;
    ad::Var A = tape.leaf(a, true);
    ad::SvdVars s = ad::svd_truncated(A, 2); // forward is fine
    ad::Var loss = ad::sum_squares(s.U);
    CHECK_THROWS_AS(tape.backward(loss), DegenerateSpectrum);
}

TEST_CASE("DegenerateSpectrum: close eigenvalues are rejected at backward time") {
    Tensor a{{0.5, 0.0}, {0.0, 0.5 + 1e-8}};
    ad::Tape tape;
    ad::Var A = tape.leaf(a, true);
    ad::EigVars e = ad::eig(A);
    ad::Var loss = testutil::complex_scalarizer(e.eigenvalues);
    CHECK_THROWS_AS(tape.backward(loss), DegenerateSpectrum);
}

TEST_CASE("gradient check across all ops (10 instances)") {
    const auto worst = testutil::run_op_gradchecks(10, 12345);
    for (const auto& [name, err] : worst) {
        INFO(name << " rel err " << err);
        CHECK(err <= 1e-4);
    }
}

TEST_CASE("full StatePred pipeline gradient check on the 3-snapshot toy") {
    const double err = testutil::statepred_pipeline_gradcheck(99);
    CHECK(err <= 1e-4);
}

TEST_CASE("gradients of non-participating leaves are zero") {
    nets::Rng rng(10);
    ad::Tape tape;
    ad::Var used = tape.leaf(random_tensor(2, 2, rng), true);
    ad::Var unused = tape.leaf(random_tensor(3, 3, rng), true);
    tape.backward(ad::sum_squares(used));
    CHECK(unused.grad().max_abs() == 0.0);
    CHECK(unused.grad().rows() == 3);
}

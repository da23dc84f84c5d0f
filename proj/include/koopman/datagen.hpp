#pragma once

#include "koopman/data.hpp"
#include "koopman/tensor.hpp"

#include <cstdint>
#include <vector>

namespace koopman::datagen {

/// x1' = mu x1, x2' = lambda (x2 - x1^2) with lambda < mu < 0: trajectories lie
/// on a slow polynomial manifold x2 ~ c x1^2.
struct PolyManifoldParams {
    double mu = -0.05;
    double lambda = -1.0;
    double dt = 0.02;
    int64_t steps = 50; // m; each trajectory has m+1 states
    double box_lo = -0.5;
    double box_hi = 0.5;
    int64_t count = 1;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Closed-form state at time t from (x1_0, x2_0).
/// With c = lambda / (lambda - 2 mu):
///   x1(t) = x1_0 e^{mu t}
///   x2(t) = (x2_0 - c x1_0^2) e^{lambda t} + c x1_0^2 e^{2 mu t}
void poly_manifold_state(const PolyManifoldParams& p, double x1_0, double x2_0, double t,
                         double& x1, double& x2);

/// Exact closed-form trajectories sampled at t = k dt, k = 0..steps; initial
/// states uniform in the box, seeded.
std::vector<Tensor> gen_poly_manifold(const PolyManifoldParams& p);

/// Trajectories x_{i+1} = A x_i (exact repeated multiplication), one per
/// initial state; each trajectory is d x (m+1).
std::vector<Tensor> gen_linear_trajectories(const Tensor& A, const std::vector<Tensor>& x0s,
                                            int64_t m);

/// Snapshot sequence x_i = A^i x0 at indexes t = 0..m.
data::SnapshotSplit gen_linear_snapshots(const Tensor& A, const Tensor& x0, int64_t m);

} // namespace koopman::datagen

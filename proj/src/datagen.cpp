#include "koopman/datagen.hpp"

#include "koopman/errors.hpp"
#include "koopman/nets.hpp"

#include <cmath>

namespace koopman::datagen {

void PolyManifoldParams::validate() const {
    if (!(lambda < mu && mu < 0.0)) {
        throw InvalidParams("PolyManifoldParams: requires lambda < mu < 0");
    }
    if (!(dt > 0.0) || steps < 1 || count < 1) {
        throw InvalidParams("PolyManifoldParams: dt > 0, steps >= 1, count >= 1 required");
    }
    if (!(box_lo < box_hi)) {
        throw InvalidParams("PolyManifoldParams: empty initial-state box");
    }
}

void poly_manifold_state(const PolyManifoldParams& p, double x1_0, double x2_0, double t,
                         double& x1, double& x2) {
    const double c = p.lambda / (p.lambda - 2.0 * p.mu);
    x1 = x1_0 * std::exp(p.mu * t);
    x2 = (x2_0 - c * x1_0 * x1_0) * std::exp(p.lambda * t) +
         c * x1_0 * x1_0 * std::exp(2.0 * p.mu * t);
}

std::vector<Tensor> gen_poly_manifold(const PolyManifoldParams& p) {
    p.validate();
    nets::Rng rng(p.seed);
    std::vector<Tensor> out;
    out.reserve(static_cast<size_t>(p.count));
    for (int64_t j = 0; j < p.count; ++j) {
        const double x1_0 = rng.uniform(p.box_lo, p.box_hi);
        const double x2_0 = rng.uniform(p.box_lo, p.box_hi);
        Tensor traj(2, p.steps + 1);
        for (int64_t k = 0; k <= p.steps; ++k) {
            double x1, x2;
            poly_manifold_state(p, x1_0, x2_0, static_cast<double>(k) * p.dt, x1, x2);
            traj.at(0, k) = x1;
            traj.at(1, k) = x2;
        }
        out.push_back(std::move(traj));
    }
    return out;
}

std::vector<Tensor> gen_linear_trajectories(const Tensor& A, const std::vector<Tensor>& x0s,
                                            int64_t m) {
    if (A.rows() != A.cols()) {
        throw ShapeMismatch("gen_linear_trajectories: A must be square, got " + A.shape_str());
    }
    if (m < 1) {
        throw InvalidParams("gen_linear_trajectories: m >= 1 required");
    }
    std::vector<Tensor> out;
    out.reserve(x0s.size());
    for (const Tensor& x0 : x0s) {
        if (x0.rows() != A.rows() || x0.cols() != 1) {
            throw ShapeMismatch("gen_linear_trajectories: initial state " + x0.shape_str() +
                                " does not match A " + A.shape_str());
        }
        Tensor traj(A.rows(), m + 1);
        Tensor x = x0;
        for (int64_t k = 0; k <= m; ++k) {
            for (int64_t i = 0; i < A.rows(); ++i) {
                traj.at(i, k) = x[i];
            }
            if (k < m) {
                x = matmul(A, x);
            }
        }
        out.push_back(std::move(traj));
    }
    return out;
}

data::SnapshotSplit gen_linear_snapshots(const Tensor& A, const Tensor& x0, int64_t m) {
    std::vector<Tensor> traj = gen_linear_trajectories(A, {x0}, m);
    data::SnapshotSplit split;
    split.X = std::move(traj[0]);
    split.t.resize(static_cast<size_t>(m + 1));
    for (int64_t k = 0; k <= m; ++k) {
        split.t[static_cast<size_t>(k)] = static_cast<double>(k);
    }
    return split;
}

} // namespace koopman::datagen

#pragma once

#include "koopman/linalg.hpp"
#include "koopman/tensor.hpp"

#include <functional>
#include <vector>

namespace koopman::ad {

class Tape;

enum class Activation { Tanh, Relu, Sigmoid, Identity };

/// Handle to a node on a tape. Cheap to copy; owns nothing.
struct Var {
    Tape* tape = nullptr;
    int64_t idx = -1;

    bool valid() const { return tape != nullptr && idx >= 0; }
    const Tensor& value() const;
    /// Gradient accumulated by the last backward() pass; zero tensor of the
    /// value's shape when the node did not participate.
    Tensor grad() const;
    bool requires_grad() const;
};

struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    bool joint = false; // runs unconditionally in backward (multi-output adjoints)
    int backward_calls = 0;
    std::vector<int64_t> parents;
    std::function<void(Tape&, int64_t)> backward;
};

/// Reverse-mode tape: nodes in forward registration order, traversed in the
/// exact reverse for backward. Confined to a single thread; distinct tapes
/// may run in parallel.
class Tape {
  public:
    Var leaf(Tensor value, bool requires_grad = false);

    /// Backpropagate from a real scalar loss. May be called repeatedly on the
    /// same tape; every call starts from zeroed gradients. Each node's
    /// backward rule runs at most once per pass.
    void backward(const Var& loss);

    void clear();
    int64_t size() const { return static_cast<int64_t>(nodes_.size()); }
    Node& node(int64_t i) { return nodes_[static_cast<size_t>(i)]; }
    const Node& node(int64_t i) const { return nodes_[static_cast<size_t>(i)]; }

    Var emplace(Tensor value, bool requires_grad, std::vector<int64_t> parents,
                std::function<void(Tape&, int64_t)> backward, bool joint = false);
    void accumulate(int64_t idx, const Tensor& g);

  private:
    std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Forward ops (each registers its backward rule)
// ---------------------------------------------------------------------------

Var add(Var a, Var b);
Var subtract(Var a, Var b);
Var scale(Var a, double s);
Var scale(Var a, cplx s); // complex nodes only
Var matmul(Var a, Var b);
Var transpose(Var a);
Var concat_columns(const std::vector<Var>& parts);
Var slice_columns(Var a, int64_t j0, int64_t j1); // [j0, j1)
Var select_columns(Var a, std::vector<int64_t> cols);
Var elementwise_activation(Var a, Activation kind);
Var add_col_broadcast(Var a, Var b); // a (m x n) + b (m x 1) per column
Var reciprocal(Var a);
Var col_scale(Var a, Var s); // a (m x n) * diag(s), s (n x 1)

Var mse(Var a, Var b);    // real scalar output
Var l1_mean(Var a);       // mean |a_ij|, real input
Var sum_squares(Var a);   // sum a_ij^2, real input

Var to_complex(Var a);
Var real_part(Var a);
Var log_elem(Var a); // elementwise principal log of a complex node

/// out[k,t] = exp(omega[k] * indexes[t]) * b[k]; omega, b complex vectors.
Var complex_exp_evolve(Var omega, std::vector<double> indexes, Var b);

struct SvdVars {
    Var U;
    Var S; // singular values as a (r x 1) real node
    Var V;
    int64_t effective_rank = 0;
};

/// Differentiable truncated SVD of a real node. The adjoint keeps the full
/// thin spectrum internally (discarded triplets get zero adjoints), so the
/// gradient is exact under truncation. Spectra with retained singular values
/// closer than kSpectrumSeparationTol * S[0] raise DegenerateSpectrum at
/// backward time.
SvdVars svd_truncated(Var a, int64_t rank);

struct EigVars {
    Var eigenvalues;  // complex r x 1
    Var eigenvectors; // complex r x r
};

/// Differentiable eigendecomposition (nonsymmetric adjoint). The eigenvector
/// adjoint is defined for losses invariant to eigenvector scaling, which is
/// how the Koopman pipeline consumes it (W f(Lambda) W^+ products).
/// detach_gradient computes values but blocks gradient flow.
EigVars eig(Var a, bool detach_gradient = false);

/// Moore-Penrose pseudoinverse (real or complex node), Golub-Pereyra adjoint.
Var pinv_from_svd(Var a);

Var detach(Var a);

} // namespace koopman::ad

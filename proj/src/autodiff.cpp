#include "koopman/autodiff.hpp"

#include "koopman/kernels.hpp"

#include <cmath>
#include <utility>

namespace koopman::ad {

namespace {

Tape& same_tape(Var a, Var b, const char* op) {
    if (!a.valid() || !b.valid() || a.tape != b.tape) {
        throw Error(std::string(op) + ": operands live on different tapes");
    }
    return *a.tape;
}

Tape& own_tape(Var a, const char* op) {
    if (!a.valid()) {
        throw Error(std::string(op) + ": invalid node handle");
    }
    return *a.tape;
}

} // namespace

const Tensor& Var::value() const { return tape->node(idx).value; }

Tensor Var::grad() const {
    const Node& n = tape->node(idx);
    if (n.has_grad) {
        return n.grad;
    }
    return Tensor(n.value.rows(), n.value.cols(), n.value.kind());
}

bool Var::requires_grad() const { return tape->node(idx).requires_grad; }

Var Tape::leaf(Tensor value, bool requires_grad) {
    return emplace(std::move(value), requires_grad, {}, nullptr);
}

Var Tape::emplace(Tensor value, bool requires_grad, std::vector<int64_t> parents,
                  std::function<void(Tape&, int64_t)> backward, bool joint) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.parents = std::move(parents);
    n.backward = std::move(backward);
    n.joint = joint;
    nodes_.push_back(std::move(n));
    return Var{this, size() - 1};
}

void Tape::accumulate(int64_t idx, const Tensor& g) {
    Node& n = nodes_[static_cast<size_t>(idx)];
    if (!n.requires_grad) {
        return;
    }
    if (!n.value.same_shape(g) || n.value.kind() != g.kind()) {
        throw ShapeMismatch("Tape::accumulate: gradient " + g.shape_str() +
                            " does not match value " + n.value.shape_str());
    }
    if (!n.has_grad) {
        n.grad = g;
        n.has_grad = true;
    } else {
        for (size_t i = 0; i < n.grad.raw().size(); ++i) {
            n.grad.raw()[i] += g.raw()[i];
        }
    }
}

void Tape::backward(const Var& loss) {
    if (!loss.valid() || loss.tape != this) {
        throw Error("Tape::backward: loss is not on this tape");
    }
    const Node& ln = nodes_[static_cast<size_t>(loss.idx)];
    if (!ln.value.is_real() || ln.value.size() != 1) {
        throw NonScalarLoss("Tape::backward: loss must be a real scalar, got " +
                            ln.value.shape_str());
    }
    for (Node& n : nodes_) {
        n.has_grad = false;
        n.backward_calls = 0;
        n.grad = Tensor();
    }
    if (!ln.requires_grad) {
        return; // loss does not depend on any trainable leaf; all gradients stay zero
    }
    Tensor seed(1, 1);
    seed[0] = 1.0;
    accumulate(loss.idx, seed);

    for (int64_t i = loss.idx; i >= 0; --i) {
        Node& n = nodes_[static_cast<size_t>(i)];
        if (!n.requires_grad || !n.backward) {
            continue;
        }
        if (!n.joint && !n.has_grad) {
            continue;
        }
        ++n.backward_calls;
        n.backward(*this, i);
    }
}

void Tape::clear() { nodes_.clear(); }

// ---------------------------------------------------------------------------
// Arithmetic
// ---------------------------------------------------------------------------

Var add(Var a, Var b) {
    Tape& t = same_tape(a, b, "add");
    Tensor v = koopman::add(a.value(), b.value());
    const bool rg = a.requires_grad() || b.requires_grad();
    auto bw = [pa = a.idx, pb = b.idx](Tape& t, int64_t self) {
        const Tensor& g = t.node(self).grad;
        t.accumulate(pa, g);
        t.accumulate(pb, g);
    };
    return t.emplace(std::move(v), rg, {a.idx, b.idx}, std::move(bw));
}

Var subtract(Var a, Var b) {
    Tape& t = same_tape(a, b, "subtract");
    Tensor v = koopman::sub(a.value(), b.value());
    const bool rg = a.requires_grad() || b.requires_grad();
    auto bw = [pa = a.idx, pb = b.idx](Tape& t, int64_t self) {
        const Tensor& g = t.node(self).grad;
        t.accumulate(pa, g);
        t.accumulate(pb, koopman::scale(g, -1.0));
    };
    return t.emplace(std::move(v), rg, {a.idx, b.idx}, std::move(bw));
}

Var scale(Var a, double s) {
    Tape& t = own_tape(a, "scale");
    Tensor v = koopman::scale(a.value(), s);
    auto bw = [pa = a.idx, s](Tape& t, int64_t self) {
        t.accumulate(pa, koopman::scale(t.node(self).grad, s));
    };
    return t.emplace(std::move(v), a.requires_grad(), {a.idx}, std::move(bw));
}

Var scale(Var a, cplx s) {
    Tape& t = own_tape(a, "scale");
    if (!a.value().is_complex()) {
        throw ShapeMismatch("scale: complex coefficient on a real node; promote first");
    }
    Tensor v = koopman::scale(a.value(), s);
    auto bw = [pa = a.idx, s](Tape& t, int64_t self) {
        t.accumulate(pa, koopman::scale(t.node(self).grad, std::conj(s)));
    };
    return t.emplace(std::move(v), a.requires_grad(), {a.idx}, std::move(bw));
}

Var matmul(Var a, Var b) {
    Tape& t = same_tape(a, b, "matmul");
    Tensor v = koopman::matmul(a.value(), b.value());
    const bool rg = a.requires_grad() || b.requires_grad();
    auto bw = [pa = a.idx, pb = b.idx](Tape& t, int64_t self) {
        const Tensor& g = t.node(self).grad;
        t.accumulate(pa, koopman::matmul(g, t.node(pb).value.hermitian()));
        t.accumulate(pb, koopman::matmul(t.node(pa).value.hermitian(), g));
    };
    return t.emplace(std::move(v), rg, {a.idx, b.idx}, std::move(bw));
}

Var transpose(Var a) {
    Tape& t = own_tape(a, "transpose");
    auto bw = [pa = a.idx](Tape& t, int64_t self) {
        t.accumulate(pa, t.node(self).grad.transpose());
    };
    return t.emplace(a.value().transpose(), a.requires_grad(), {a.idx}, std::move(bw));
}

Var concat_columns(const std::vector<Var>& parts) {
    if (parts.empty()) {
        throw ShapeMismatch("concat_columns: no parts");
    }
    Tape& t = own_tape(parts[0], "concat_columns");
    const int64_t rows = parts[0].value().rows();
    const Scalar kind = parts[0].value().kind();
    int64_t cols = 0;
    bool rg = false;
    for (const Var& p : parts) {
        same_tape(parts[0], p, "concat_columns");
        if (p.value().rows() != rows || p.value().kind() != kind) {
            throw ShapeMismatch("concat_columns: incompatible part " + p.value().shape_str());
        }
        cols += p.value().cols();
        rg = rg || p.requires_grad();
    }
    Tensor v(rows, cols, kind);
    std::vector<int64_t> idxs;
    std::vector<int64_t> offsets;
    int64_t off = 0;
    for (const Var& p : parts) {
        const Tensor& pv = p.value();
        if (kind == Scalar::Real64) {
            for (int64_t i = 0; i < rows; ++i) {
                for (int64_t j = 0; j < pv.cols(); ++j) {
                    v.at(i, off + j) = pv.at(i, j);
                }
            }
        } else {
            for (int64_t i = 0; i < rows; ++i) {
                for (int64_t j = 0; j < pv.cols(); ++j) {
                    v.cat(i, off + j) = pv.cat(i, j);
                }
            }
        }
        idxs.push_back(p.idx);
        offsets.push_back(off);
        off += pv.cols();
    }
    auto bw = [idxs, offsets, kind](Tape& t, int64_t self) {
        const Tensor& g = t.node(self).grad;
        for (size_t k = 0; k < idxs.size(); ++k) {
            const Tensor& pv = t.node(idxs[k]).value;
            Tensor gp(pv.rows(), pv.cols(), kind);
            for (int64_t i = 0; i < pv.rows(); ++i) {
                for (int64_t j = 0; j < pv.cols(); ++j) {
                    if (kind == Scalar::Real64) {
                        gp.at(i, j) = g.at(i, offsets[k] + j);
                    } else {
                        gp.cat(i, j) = g.cat(i, offsets[k] + j);
                    }
                }
            }
            t.accumulate(idxs[k], gp);
        }
    };
    return t.emplace(std::move(v), rg, idxs, std::move(bw));
}

Var slice_columns(Var a, int64_t j0, int64_t j1) {
    Tape& t = own_tape(a, "slice_columns");
    const Tensor& av = a.value();
    if (j0 < 0 || j1 > av.cols() || j0 >= j1) {
        throw ShapeMismatch("slice_columns: range [" + std::to_string(j0) + ", " +
                            std::to_string(j1) + ") out of bounds for " + av.shape_str());
    }
    Tensor v(av.rows(), j1 - j0, av.kind());
    for (int64_t i = 0; i < av.rows(); ++i) {
        for (int64_t j = j0; j < j1; ++j) {
            if (av.is_real()) {
                v.at(i, j - j0) = av.at(i, j);
            } else {
                v.cat(i, j - j0) = av.cat(i, j);
            }
        }
    }
    auto bw = [pa = a.idx, j0](Tape& t, int64_t self) {
        const Tensor& g = t.node(self).grad;
        const Tensor& pv = t.node(pa).value;
        Tensor gp(pv.rows(), pv.cols(), pv.kind());
        for (int64_t i = 0; i < g.rows(); ++i) {
            for (int64_t j = 0; j < g.cols(); ++j) {
                if (gp.is_real()) {
                    gp.at(i, j0 + j) = g.at(i, j);
                } else {
                    gp.cat(i, j0 + j) = g.cat(i, j);
                }
            }
        }
        t.accumulate(pa, gp);
    };
    return t.emplace(std::move(v), a.requires_grad(), {a.idx}, std::move(bw));
}

Var select_columns(Var a, std::vector<int64_t> cols) {
    Tape& t = own_tape(a, "select_columns");
    const Tensor& av = a.value();
    for (int64_t c : cols) {
        if (c < 0 || c >= av.cols()) {
            throw ShapeMismatch("select_columns: column " + std::to_string(c) +
                                " out of bounds for " + av.shape_str());
        }
    }
    Tensor v(av.rows(), static_cast<int64_t>(cols.size()), av.kind());
    for (int64_t i = 0; i < av.rows(); ++i) {
        for (size_t j = 0; j < cols.size(); ++j) {
            if (av.is_real()) {
                v.at(i, static_cast<int64_t>(j)) = av.at(i, cols[j]);
            } else {
                v.cat(i, static_cast<int64_t>(j)) = av.cat(i, cols[j]);
            }
        }
    }
    auto bw = [pa = a.idx, cols](Tape& t, int64_t self) {
        const Tensor& g = t.node(self).grad;
        const Tensor& pv = t.node(pa).value;
        Tensor gp(pv.rows(), pv.cols(), pv.kind());
        for (int64_t i = 0; i < g.rows(); ++i) {
            for (size_t j = 0; j < cols.size(); ++j) {
                if (gp.is_real()) {
                    gp.at(i, cols[j]) += g.at(i, static_cast<int64_t>(j));
                } else {
                    gp.cat(i, cols[j]) += g.cat(i, static_cast<int64_t>(j));
                }
            }
        }
        t.accumulate(pa, gp);
    };
    return t.emplace(std::move(v), a.requires_grad(), {a.idx}, std::move(bw));
}

Var elementwise_activation(Var a, Activation kind) {
    Tape& t = own_tape(a, "elementwise_activation");
    const Tensor& av = a.value();
    if (!av.is_real()) {
        throw ShapeMismatch("elementwise_activation: complex input");
    }
    if (kind == Activation::Identity) {
        return a;
    }
    Tensor v(av.rows(), av.cols());
    switch (kind) {
    case Activation::Tanh:
        kernels::tanh_f64(av.real_data(), v.real_data(), av.size());
        break;
    case Activation::Relu:
        for (int64_t i = 0; i < av.size(); ++i) {
            v[i] = av[i] > 0.0 ? av[i] : 0.0;
        }
        break;
    case Activation::Sigmoid:
        for (int64_t i = 0; i < av.size(); ++i) {
            v[i] = 1.0 / (1.0 + std::exp(-av[i]));
        }
        break;
    case Activation::Identity:
        break;
    }
    auto bw = [pa = a.idx, kind](Tape& t, int64_t self) {
        const Tensor& g = t.node(self).grad;
        const Tensor& y = t.node(self).value;
        const Tensor& x = t.node(pa).value;
        Tensor gp(g.rows(), g.cols());
        switch (kind) {
        case Activation::Tanh:
            for (int64_t i = 0; i < g.size(); ++i) {
                gp[i] = g[i] * (1.0 - y[i] * y[i]);
            }
            break;
        case Activation::Relu:
            for (int64_t i = 0; i < g.size(); ++i) {
                gp[i] = x[i] > 0.0 ? g[i] : 0.0;
            }
            break;
        case Activation::Sigmoid:
            for (int64_t i = 0; i < g.size(); ++i) {
                gp[i] = g[i] * y[i] * (1.0 - y[i]);
            }
            break;
        case Activation::Identity:
            gp = g;
            break;
        }
        t.accumulate(pa, gp);
    };
    return t.emplace(std::move(v), a.requires_grad(), {a.idx}, std::move(bw));
}

Var add_col_broadcast(Var a, Var b) {
    Tape& t = same_tape(a, b, "add_col_broadcast");
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (bv.cols() != 1 || bv.rows() != av.rows() || bv.kind() != av.kind()) {
        throw ShapeMismatch("add_col_broadcast: " + av.shape_str() + " vs " + bv.shape_str());
    }
    Tensor v = av;
    if (av.is_real()) {
        for (int64_t i = 0; i < av.rows(); ++i) {
            for (int64_t j = 0; j < av.cols(); ++j) {
                v.at(i, j) += bv[i];
            }
        }
    } else {
        for (int64_t i = 0; i < av.rows(); ++i) {
            for (int64_t j = 0; j < av.cols(); ++j) {
                v.cat(i, j) += bv.c(i);
            }
        }
    }
    const bool rg = a.requires_grad() || b.requires_grad();
    auto bw = [pa = a.idx, pb = b.idx](Tape& t, int64_t self) {
        const Tensor& g = t.node(self).grad;
        t.accumulate(pa, g);
        Tensor gb(g.rows(), 1, g.kind());
        if (g.is_real()) {
            for (int64_t i = 0; i < g.rows(); ++i) {
                for (int64_t j = 0; j < g.cols(); ++j) {
                    gb[i] += g.at(i, j);
                }
            }
        } else {
            for (int64_t i = 0; i < g.rows(); ++i) {
                for (int64_t j = 0; j < g.cols(); ++j) {
                    gb.c(i) += g.cat(i, j);
                }
            }
        }
        t.accumulate(pb, gb);
    };
    return t.emplace(std::move(v), rg, {a.idx, b.idx}, std::move(bw));
}

Var reciprocal(Var a) {
    Tape& t = own_tape(a, "reciprocal");
    const Tensor& av = a.value();
    Tensor v(av.rows(), av.cols(), av.kind());
    if (av.is_real()) {
        for (int64_t i = 0; i < av.size(); ++i) {
            v[i] = 1.0 / av[i];
        }
    } else {
        for (int64_t i = 0; i < av.size(); ++i) {
            v.c(i) = 1.0 / av.c(i);
        }
    }
    auto bw = [pa = a.idx](Tape& t, int64_t self) {
        const Tensor& g = t.node(self).grad;
        const Tensor& y = t.node(self).value; // y = 1/x, so -1/x^2 = -y^2
        Tensor gp(g.rows(), g.cols(), g.kind());
        if (g.is_real()) {
            for (int64_t i = 0; i < g.size(); ++i) {
                gp[i] = -g[i] * y[i] * y[i];
            }
        } else {
            for (int64_t i = 0; i < g.size(); ++i) {
                gp.c(i) = -g.c(i) * std::conj(y.c(i) * y.c(i));
            }
        }
        t.accumulate(pa, gp);
    };
    return t.emplace(std::move(v), a.requires_grad(), {a.idx}, std::move(bw));
}

Var col_scale(Var a, Var s) {
    Tape& t = same_tape(a, s, "col_scale");
    const Tensor& av = a.value();
    const Tensor& sv = s.value();
    if (sv.cols() != 1 || sv.rows() != av.cols() || sv.kind() != av.kind()) {
        throw ShapeMismatch("col_scale: " + av.shape_str() + " vs scales " + sv.shape_str());
    }
    Tensor v = av;
    if (av.is_real()) {
        for (int64_t i = 0; i < av.rows(); ++i) {
            for (int64_t j = 0; j < av.cols(); ++j) {
                v.at(i, j) *= sv[j];
            }
        }
    } else {
        for (int64_t i = 0; i < av.rows(); ++i) {
            for (int64_t j = 0; j < av.cols(); ++j) {
                v.cat(i, j) *= sv.c(j);
            }
        }
    }
    const bool rg = a.requires_grad() || s.requires_grad();
    auto bw = [pa = a.idx, ps = s.idx](Tape& t, int64_t self) {
        const Tensor& g = t.node(self).grad;
        const Tensor& av = t.node(pa).value;
        const Tensor& sv = t.node(ps).value;
        Tensor ga(av.rows(), av.cols(), av.kind());
        Tensor gs(sv.rows(), 1, sv.kind());
        if (g.is_real()) {
            for (int64_t i = 0; i < av.rows(); ++i) {
                for (int64_t j = 0; j < av.cols(); ++j) {
                    ga.at(i, j) = g.at(i, j) * sv[j];
                    gs[j] += g.at(i, j) * av.at(i, j);
                }
            }
        } else {
            for (int64_t i = 0; i < av.rows(); ++i) {
                for (int64_t j = 0; j < av.cols(); ++j) {
                    ga.cat(i, j) = g.cat(i, j) * std::conj(sv.c(j));
                    gs.c(j) += g.cat(i, j) * std::conj(av.cat(i, j));
                }
            }
        }
        t.accumulate(pa, ga);
        t.accumulate(ps, gs);
    };
    return t.emplace(std::move(v), rg, {a.idx, s.idx}, std::move(bw));
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

Var mse(Var a, Var b) {
    Tape& t = same_tape(a, b, "mse");
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (!av.is_real() || !bv.is_real()) {
        throw ShapeMismatch("mse: complex input");
    }
    if (!av.same_shape(bv)) {
        throw ShapeMismatch("mse: " + av.shape_str() + " vs " + bv.shape_str());
    }
    double acc = 0.0;
    for (int64_t i = 0; i < av.size(); ++i) {
        const double d = av[i] - bv[i];
        acc += d * d;
    }
    Tensor v(1, 1);
    v[0] = acc / static_cast<double>(av.size());
    const bool rg = a.requires_grad() || b.requires_grad();
    auto bw = [pa = a.idx, pb = b.idx](Tape& t, int64_t self) {
        const double c = t.node(self).grad[0];
        const Tensor& av = t.node(pa).value;
        const Tensor& bv = t.node(pb).value;
        const double k = 2.0 * c / static_cast<double>(av.size());
        Tensor ga(av.rows(), av.cols());
        for (int64_t i = 0; i < av.size(); ++i) {
            ga[i] = k * (av[i] - bv[i]);
        }
        t.accumulate(pb, koopman::scale(ga, -1.0));
        t.accumulate(pa, ga);
    };
    return t.emplace(std::move(v), rg, {a.idx, b.idx}, std::move(bw));
}

Var l1_mean(Var a) {
    Tape& t = own_tape(a, "l1_mean");
    const Tensor& av = a.value();
    if (!av.is_real()) {
        throw ShapeMismatch("l1_mean: complex input");
    }
    double acc = 0.0;
    for (int64_t i = 0; i < av.size(); ++i) {
        acc += std::abs(av[i]);
    }
    Tensor v(1, 1);
    v[0] = acc / static_cast<double>(av.size());
    auto bw = [pa = a.idx](Tape& t, int64_t self) {
        const double c = t.node(self).grad[0];
        const Tensor& av = t.node(pa).value;
        const double k = c / static_cast<double>(av.size());
        Tensor ga(av.rows(), av.cols());
        for (int64_t i = 0; i < av.size(); ++i) {
            ga[i] = av[i] > 0.0 ? k : (av[i] < 0.0 ? -k : 0.0);
        }
        t.accumulate(pa, ga);
    };
    return t.emplace(std::move(v), a.requires_grad(), {a.idx}, std::move(bw));
}

Var sum_squares(Var a) {
    Tape& t = own_tape(a, "sum_squares");
    const Tensor& av = a.value();
    if (!av.is_real()) {
        throw ShapeMismatch("sum_squares: complex input");
    }
    double acc = 0.0;
    for (int64_t i = 0; i < av.size(); ++i) {
        acc += av[i] * av[i];
    }
    Tensor v(1, 1);
    v[0] = acc;
    auto bw = [pa = a.idx](Tape& t, int64_t self) {
        const double c = t.node(self).grad[0];
        t.accumulate(pa, koopman::scale(t.node(pa).value, 2.0 * c));
    };
    return t.emplace(std::move(v), a.requires_grad(), {a.idx}, std::move(bw));
}

// ---------------------------------------------------------------------------
// Real <-> complex boundary
// ---------------------------------------------------------------------------

Var to_complex(Var a) {
    Tape& t = own_tape(a, "to_complex");
    auto bw = [pa = a.idx](Tape& t, int64_t self) {
        t.accumulate(pa, t.node(self).grad.real_part());
    };
    return t.emplace(a.value().to_complex(), a.requires_grad(), {a.idx}, std::move(bw));
}

Var real_part(Var a) {
    Tape& t = own_tape(a, "real_part");
    auto bw = [pa = a.idx](Tape& t, int64_t self) {
        t.accumulate(pa, t.node(self).grad.to_complex());
    };
    return t.emplace(a.value().real_part(), a.requires_grad(), {a.idx}, std::move(bw));
}

Var log_elem(Var a) {
    Tape& t = own_tape(a, "log_elem");
    const Tensor& av = a.value();
    if (!av.is_complex()) {
        throw ShapeMismatch("log_elem: expected complex node");
    }
    Tensor v(av.rows(), av.cols(), Scalar::Complex128);
    for (int64_t i = 0; i < av.size(); ++i) {
        v.c(i) = std::log(av.c(i)); // principal branch
    }
    auto bw = [pa = a.idx](Tape& t, int64_t self) {
        const Tensor& g = t.node(self).grad;
        const Tensor& z = t.node(pa).value;
        Tensor gp(g.rows(), g.cols(), Scalar::Complex128);
        for (int64_t i = 0; i < g.size(); ++i) {
            gp.c(i) = g.c(i) * std::conj(1.0 / z.c(i));
        }
        t.accumulate(pa, gp);
    };
    return t.emplace(std::move(v), a.requires_grad(), {a.idx}, std::move(bw));
}

Var complex_exp_evolve(Var omega, std::vector<double> indexes, Var b) {
    Tape& t = same_tape(omega, b, "complex_exp_evolve");
    const Tensor& ov = omega.value();
    const Tensor& bv = b.value();
    if (!ov.is_complex() || !bv.is_complex() || ov.cols() != 1 || bv.cols() != 1 ||
        ov.rows() != bv.rows()) {
        throw ShapeMismatch("complex_exp_evolve: omega " + ov.shape_str() + ", b " +
                            bv.shape_str());
    }
    const int64_t r = ov.rows();
    const int64_t T = static_cast<int64_t>(indexes.size());
    Tensor expvals(r, T, Scalar::Complex128);
    Tensor v(r, T, Scalar::Complex128);
    for (int64_t k = 0; k < r; ++k) {
        for (int64_t j = 0; j < T; ++j) {
            const cplx e = std::exp(ov.c(k) * indexes[static_cast<size_t>(j)]);
            expvals.cat(k, j) = e;
            v.cat(k, j) = e * bv.c(k);
        }
    }
    const bool rg = omega.requires_grad() || b.requires_grad();
    auto bw = [po = omega.idx, pb = b.idx, idx = std::move(indexes),
               expvals](Tape& t, int64_t self) {
        const Tensor& g = t.node(self).grad;
        const Tensor& bv = t.node(pb).value;
        const int64_t r = bv.rows();
        const int64_t T = static_cast<int64_t>(idx.size());
        Tensor go(r, 1, Scalar::Complex128);
        Tensor gb(r, 1, Scalar::Complex128);
        for (int64_t k = 0; k < r; ++k) {
            cplx so(0.0, 0.0), sb(0.0, 0.0);
            for (int64_t j = 0; j < T; ++j) {
                const cplx e = expvals.cat(k, j);
                so += g.cat(k, j) * idx[static_cast<size_t>(j)] * std::conj(e * bv.c(k));
                sb += g.cat(k, j) * std::conj(e);
            }
            go.c(k) = so;
            gb.c(k) = sb;
        }
        t.accumulate(po, go);
        t.accumulate(pb, gb);
    };
    return t.emplace(std::move(v), rg, {omega.idx, b.idx}, std::move(bw));
}

// ---------------------------------------------------------------------------
// Decompositions
// ---------------------------------------------------------------------------

SvdVars svd_truncated(Var a, int64_t rank) {
    Tape& t = own_tape(a, "svd_truncated");
    const Tensor& av = a.value();
    if (!av.is_real()) {
        throw ShapeMismatch("svd_truncated: expected a real node");
    }
    const int64_t m = av.rows(), n = av.cols(), p = std::min(m, n);
    if (rank < 1 || rank > p) {
        throw RankTooLarge("svd_truncated: rank " + std::to_string(rank) + " outside [1, " +
                           std::to_string(p) + "]");
    }
    ThinSvd full = svd_thin(av);
    const double cutoff = kSingularValueRelTol * full.S[0];
    int64_t re = 0;
    while (re < rank && full.S[static_cast<size_t>(re)] > cutoff &&
           full.S[static_cast<size_t>(re)] > 0.0) {
        ++re;
    }

    Tensor Ut(m, re), Vt(n, re), St(re, 1);
    for (int64_t j = 0; j < re; ++j) {
        St[j] = full.S[static_cast<size_t>(j)];
        for (int64_t i = 0; i < m; ++i) {
            Ut.at(i, j) = full.U.at(i, j);
        }
        for (int64_t i = 0; i < n; ++i) {
            Vt.at(i, j) = full.V.at(i, j);
        }
    }

    const bool rg = a.requires_grad();
    SvdVars out;
    out.effective_rank = re;
    out.U = t.emplace(std::move(Ut), rg, {a.idx}, nullptr);
    out.S = t.emplace(std::move(St), rg, {a.idx}, nullptr);
    out.V = t.emplace(std::move(Vt), rg, {a.idx}, nullptr);
    if (!rg) {
        return out;
    }

    // Joint adjoint over (U, S, V). Full internal spectrum: adjoints of the
    // discarded triplets are zero, retained-vs-anything couplings are kept,
    // so the gradient is exact under truncation.
    auto bw = [pa = a.idx, ui = out.U.idx, si = out.S.idx, vi = out.V.idx,
               full = std::move(full), re](Tape& t, int64_t) {
        const Node& un = t.node(ui);
        const Node& sn = t.node(si);
        const Node& vn = t.node(vi);
        if (!un.has_grad && !sn.has_grad && !vn.has_grad) {
            return;
        }
        const int64_t p = static_cast<int64_t>(full.S.size());
        const int64_t m = full.U.rows(), n = full.V.rows();
        const double smax = full.S[0];

        for (int64_t i = 0; i < p; ++i) {
            for (int64_t j = i + 1; j < p; ++j) {
                if (i >= re && j >= re) {
                    continue; // both discarded; their coupling never enters
                }
                if (std::abs(full.S[static_cast<size_t>(i)] -
                             full.S[static_cast<size_t>(j)]) <=
                    kSpectrumSeparationTol * smax) {
                    throw DegenerateSpectrum(
                        "svd backward: singular values " + std::to_string(i) + " and " +
                        std::to_string(j) + " closer than " +
                        std::to_string(kSpectrumSeparationTol) + " * S[0]");
                }
            }
        }

        Tensor gU(m, p), gV(n, p), gS(p, 1);
        if (un.has_grad) {
            for (int64_t i = 0; i < m; ++i) {
                for (int64_t j = 0; j < re; ++j) {
                    gU.at(i, j) = un.grad.at(i, j);
                }
            }
        }
        if (vn.has_grad) {
            for (int64_t i = 0; i < n; ++i) {
                for (int64_t j = 0; j < re; ++j) {
                    gV.at(i, j) = vn.grad.at(i, j);
                }
            }
        }
        if (sn.has_grad) {
            for (int64_t j = 0; j < re; ++j) {
                gS[j] = sn.grad[j];
            }
        }

        const Tensor UtgU = koopman::matmul(full.U.transpose(), gU); // p x p
        const Tensor VtgV = koopman::matmul(full.V.transpose(), gV); // p x p

        // Core = diag(gS) + (F o (UtgU - UtgU^T)) diag(s) + diag(s) (F o (VtgV - VtgV^T))
        // with F_ij = 1/(s_j^2 - s_i^2), zero diagonal.
        Tensor core(p, p);
        for (int64_t i = 0; i < p; ++i) {
            for (int64_t j = 0; j < p; ++j) {
                if (i == j) {
                    core.at(i, i) = gS[i];
                    continue;
                }
                if (i >= re && j >= re) {
                    continue;
                }
                const double si = full.S[static_cast<size_t>(i)];
                const double sj = full.S[static_cast<size_t>(j)];
                const double f = 1.0 / ((sj - si) * (sj + si));
                const double d = UtgU.at(i, j) - UtgU.at(j, i);
                const double e = VtgV.at(i, j) - VtgV.at(j, i);
                core.at(i, j) = f * (d * sj + si * e);
            }
        }
        Tensor abar = koopman::matmul(koopman::matmul(full.U, core), full.V.transpose());

        if (m > p && un.has_grad) {
            // (I - U U^T) gU diag(1/s) V^T, restricted to retained columns
            Tensor proj = koopman::sub(gU, koopman::matmul(full.U, UtgU));
            for (int64_t i = 0; i < m; ++i) {
                for (int64_t j = 0; j < re; ++j) {
                    proj.at(i, j) /= full.S[static_cast<size_t>(j)];
                }
            }
            abar = koopman::add(abar,
                                koopman::matmul(proj, full.V.transpose()));
        }
        if (n > p && vn.has_grad) {
            // U diag(1/s) gV^T (I - V V^T)
            Tensor proj = koopman::sub(gV, koopman::matmul(full.V, VtgV));
            for (int64_t i = 0; i < n; ++i) {
                for (int64_t j = 0; j < re; ++j) {
                    proj.at(i, j) /= full.S[static_cast<size_t>(j)];
                }
            }
            abar = koopman::add(abar, koopman::matmul(full.U, proj.transpose()));
        }
        t.accumulate(pa, abar);
    };
    t.emplace(Tensor(), true, {a.idx}, std::move(bw), /*joint=*/true);
    return out;
}

EigVars eig(Var a, bool detach_gradient) {
    Tape& t = own_tape(a, "eig");
    EigResult r = koopman::eig(a.value());
    const bool rg = a.requires_grad() && !detach_gradient;
    EigVars out;
    out.eigenvalues = t.emplace(std::move(r.eigenvalues), rg, {a.idx}, nullptr);
    out.eigenvectors = t.emplace(std::move(r.eigenvectors), rg, {a.idx}, nullptr);
    if (!rg) {
        return out;
    }
    const bool parent_real = a.value().is_real();
    auto bw = [pa = a.idx, li = out.eigenvalues.idx, wi = out.eigenvectors.idx,
               parent_real](Tape& t, int64_t) {
        const Node& ln = t.node(li);
        const Node& wn = t.node(wi);
        if (!ln.has_grad && !wn.has_grad) {
            return;
        }
        const Tensor& lam = ln.value;
        const Tensor& w = wn.value;
        const int64_t r = lam.rows();

        double lmax = 0.0;
        for (int64_t k = 0; k < r; ++k) {
            lmax = std::max(lmax, std::abs(lam.c(k)));
        }
        for (int64_t i = 0; i < r; ++i) {
            for (int64_t j = i + 1; j < r; ++j) {
                if (std::abs(lam.c(i) - lam.c(j)) <= kSpectrumSeparationTol * lmax) {
                    throw DegenerateSpectrum(
                        "eig backward: eigenvalues " + std::to_string(i) + " and " +
                        std::to_string(j) + " closer than " +
                        std::to_string(kSpectrumSeparationTol) + " * max|lambda|");
                }
            }
        }

        // abar = W^{-H} (diag(gL) + (W^H gW) o conj(F)) W^H, F_jk = 1/(lam_k - lam_j).
        // The zero diagonal of F drops the gauge direction, so the adjoint is the
        // one for losses invariant to eigenvector scaling.
        Tensor M(r, r, Scalar::Complex128);
        if (wn.has_grad) {
            const Tensor WhgW = koopman::matmul(w.hermitian(), wn.grad);
            for (int64_t j = 0; j < r; ++j) {
                for (int64_t k = 0; k < r; ++k) {
                    if (j == k) {
                        continue;
                    }
                    M.cat(j, k) = WhgW.cat(j, k) / std::conj(lam.c(k) - lam.c(j));
                }
            }
        }
        if (ln.has_grad) {
            for (int64_t k = 0; k < r; ++k) {
                M.cat(k, k) += ln.grad.c(k);
            }
        }
        const Tensor wh = w.hermitian();
        Tensor abar = solve(wh, koopman::matmul(M, wh));
        if (parent_real) {
            t.accumulate(pa, abar.real_part());
        } else {
            t.accumulate(pa, abar);
        }
    };
    t.emplace(Tensor(), true, {a.idx}, std::move(bw), /*joint=*/true);
    return out;
}

Var pinv_from_svd(Var a) {
    Tape& t = own_tape(a, "pinv_from_svd");
    Tensor v = pinv(a.value());
    auto bw = [pa = a.idx](Tape& t, int64_t self) {
        const Tensor& g = t.node(self).grad;
        const Tensor& A = t.node(pa).value;
        const Tensor& P = t.node(self).value;
        const Tensor Ph = P.hermitian();
        const Tensor gh = g.hermitian();

        // Golub-Pereyra differential, adjointed:
        // abar = -P^H g P^H + (I - A P) g^H (P P^H) + (P^H P) g^H (I - P A)
        Tensor term1 = koopman::scale(koopman::matmul(koopman::matmul(Ph, g), Ph), -1.0);

        Tensor iap = koopman::matmul(A, P);
        const Tensor eye_m = Tensor::identity(A.rows());
        iap = koopman::sub(A.is_real() ? eye_m : eye_m.to_complex(), iap);
        Tensor term2 = koopman::matmul(koopman::matmul(iap, gh), koopman::matmul(P, Ph));

        Tensor ipa = koopman::matmul(P, A);
        const Tensor eye_n = Tensor::identity(A.cols());
        ipa = koopman::sub(A.is_real() ? eye_n : eye_n.to_complex(), ipa);
        Tensor term3 = koopman::matmul(koopman::matmul(Ph, P), koopman::matmul(gh, ipa));

        t.accumulate(pa, koopman::add(koopman::add(term1, term2), term3));
    };
    return t.emplace(std::move(v), a.requires_grad(), {a.idx}, std::move(bw));
}

Var detach(Var a) {
    Tape& t = own_tape(a, "detach");
    return t.emplace(a.value(), false, {a.idx}, nullptr);
}

} // namespace koopman::ad

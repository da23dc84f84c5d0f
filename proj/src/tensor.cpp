#include "koopman/tensor.hpp"

#include "koopman/kernels.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>

namespace koopman {

namespace log {

Level& level() {
    static Level lvl = Level::Normal;
    return lvl;
}

void warn(const std::string& msg) {
    if (level() != Level::Quiet) {
        std::cerr << "[koopman] warning: " << msg << "\n";
    }
}

void info(const std::string& msg) {
    if (level() == Level::Verbose) {
        std::cerr << "[koopman] " << msg << "\n";
    }
}

} // namespace log

Tensor::Tensor(int64_t rows, int64_t cols, Scalar kind)
    : rows_(rows), cols_(cols), kind_(kind) {
    if (rows < 0 || cols < 0) {
        throw ShapeMismatch("Tensor: negative dimension");
    }
    buf_.assign(static_cast<size_t>(size()) * (is_complex() ? 2 : 1), 0.0);
}

Tensor::Tensor(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = static_cast<int64_t>(rows.size());
    cols_ = rows_ > 0 ? static_cast<int64_t>(rows.begin()->size()) : 0;
    kind_ = Scalar::Real64;
    buf_.reserve(static_cast<size_t>(rows_ * cols_));
    for (const auto& r : rows) {
        if (static_cast<int64_t>(r.size()) != cols_) {
            throw ShapeMismatch("Tensor: ragged initializer");
        }
        buf_.insert(buf_.end(), r.begin(), r.end());
    }
}

Tensor Tensor::identity(int64_t n) {
    Tensor t(n, n);
    for (int64_t i = 0; i < n; ++i) {
        t.at(i, i) = 1.0;
    }
    return t;
}

Tensor Tensor::column(const std::vector<double>& values) {
    Tensor t(static_cast<int64_t>(values.size()), 1);
    t.buf_ = values;
    return t;
}

Tensor Tensor::column_c(const std::vector<cplx>& values) {
    Tensor t(static_cast<int64_t>(values.size()), 1, Scalar::Complex128);
    for (size_t i = 0; i < values.size(); ++i) {
        t.c(static_cast<int64_t>(i)) = values[i];
    }
    return t;
}

Tensor Tensor::from_rows(const std::vector<std::vector<double>>& rows) {
    const int64_t m = static_cast<int64_t>(rows.size());
    const int64_t n = m > 0 ? static_cast<int64_t>(rows[0].size()) : 0;
    Tensor t(m, n);
    for (int64_t i = 0; i < m; ++i) {
        if (static_cast<int64_t>(rows[i].size()) != n) {
            throw ShapeMismatch("Tensor::from_rows: ragged rows");
        }
        for (int64_t j = 0; j < n; ++j) {
            t.at(i, j) = rows[i][j];
        }
    }
    return t;
}

void Tensor::require_real(const char* op) const {
    if (!is_real()) {
        throw ShapeMismatch(std::string(op) + ": tensor is complex, expected real");
    }
}

void Tensor::require_complex(const char* op) const {
    if (!is_complex()) {
        throw ShapeMismatch(std::string(op) + ": tensor is real, expected complex");
    }
}

double& Tensor::at(int64_t i, int64_t j) {
    require_real("at");
    return buf_[static_cast<size_t>(i * cols_ + j)];
}

double Tensor::at(int64_t i, int64_t j) const {
    require_real("at");
    return buf_[static_cast<size_t>(i * cols_ + j)];
}

cplx& Tensor::cat(int64_t i, int64_t j) {
    require_complex("cat");
    return complex_data()[i * cols_ + j];
}

cplx Tensor::cat(int64_t i, int64_t j) const {
    require_complex("cat");
    return complex_data()[i * cols_ + j];
}

double& Tensor::operator[](int64_t i) {
    require_real("operator[]");
    return buf_[static_cast<size_t>(i)];
}

double Tensor::operator[](int64_t i) const {
    require_real("operator[]");
    return buf_[static_cast<size_t>(i)];
}

cplx& Tensor::c(int64_t i) {
    require_complex("c");
    return complex_data()[i];
}

cplx Tensor::c(int64_t i) const {
    require_complex("c");
    return complex_data()[i];
}

double* Tensor::real_data() {
    require_real("real_data");
    return buf_.data();
}

const double* Tensor::real_data() const {
    require_real("real_data");
    return buf_.data();
}

cplx* Tensor::complex_data() {
    require_complex("complex_data");
    return reinterpret_cast<cplx*>(buf_.data());
}

const cplx* Tensor::complex_data() const {
    require_complex("complex_data");
    return reinterpret_cast<const cplx*>(buf_.data());
}

Tensor Tensor::to_complex() const {
    if (is_complex()) {
        return *this;
    }
    Tensor out(rows_, cols_, Scalar::Complex128);
    for (int64_t i = 0; i < size(); ++i) {
        out.c(i) = cplx(buf_[static_cast<size_t>(i)], 0.0);
    }
    return out;
}

Tensor Tensor::real_part() const {
    if (is_real()) {
        return *this;
    }
    Tensor out(rows_, cols_);
    for (int64_t i = 0; i < size(); ++i) {
        out[i] = c(i).real();
    }
    return out;
}

Tensor Tensor::imag_part() const {
    Tensor out(rows_, cols_);
    if (is_complex()) {
        for (int64_t i = 0; i < size(); ++i) {
            out[i] = c(i).imag();
        }
    }
    return out;
}

Tensor Tensor::conj() const {
    if (is_real()) {
        return *this;
    }
    Tensor out = *this;
    for (int64_t i = 0; i < size(); ++i) {
        out.c(i) = std::conj(out.c(i));
    }
    return out;
}

Tensor Tensor::transpose() const {
    Tensor out(cols_, rows_, kind_);
    if (is_real()) {
        kernels::transpose_f64(buf_.data(), out.buf_.data(), rows_, cols_);
    } else {
        for (int64_t i = 0; i < rows_; ++i) {
            for (int64_t j = 0; j < cols_; ++j) {
                out.cat(j, i) = cat(i, j);
            }
        }
    }
    return out;
}

Tensor Tensor::hermitian() const {
    return is_real() ? transpose() : transpose().conj();
}

bool Tensor::all_finite() const {
    for (double v : buf_) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

double Tensor::max_abs() const {
    double m = 0.0;
    if (is_real()) {
        for (double v : buf_) {
            m = std::max(m, std::abs(v));
        }
    } else {
        for (int64_t i = 0; i < size(); ++i) {
            m = std::max(m, std::abs(c(i)));
        }
    }
    return m;
}

double Tensor::frobenius_norm() const {
    double s = 0.0;
    for (double v : buf_) {
        s += v * v; // interleaved re/im sums both squares, which is what we want
    }
    return std::sqrt(s);
}

std::string Tensor::shape_str() const {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "(%lld x %lld %s)", static_cast<long long>(rows_),
                  static_cast<long long>(cols_), is_real() ? "r" : "c");
    return buf;
}

namespace {

void check_same_kind(const Tensor& a, const Tensor& b, const char* op) {
    if (a.kind() != b.kind()) {
        throw ShapeMismatch(std::string(op) + ": mixed scalar kinds " + a.shape_str() +
                            " vs " + b.shape_str() + "; promote explicitly via to_complex()");
    }
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw ShapeMismatch(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                            b.shape_str());
    }
}

} // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_same_kind(a, b, "matmul");
    if (a.cols() != b.rows()) {
        throw ShapeMismatch("matmul: inner dimensions differ, " + a.shape_str() + " * " +
                            b.shape_str());
    }
    Tensor c(a.rows(), b.cols(), a.kind());
    if (a.is_real()) {
        kernels::matmul_f64(a.real_data(), b.real_data(), c.real_data(), a.rows(), a.cols(),
                            b.cols());
    } else {
        kernels::matmul_c128(a.complex_data(), b.complex_data(), c.complex_data(), a.rows(),
                             a.cols(), b.cols());
    }
    return c;
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_kind(a, b, "add");
    check_same_shape(a, b, "add");
    Tensor out = a;
    for (size_t i = 0; i < out.raw().size(); ++i) {
        out.raw()[i] += b.raw()[i];
    }
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_kind(a, b, "sub");
    check_same_shape(a, b, "sub");
    Tensor out = a;
    for (size_t i = 0; i < out.raw().size(); ++i) {
        out.raw()[i] -= b.raw()[i];
    }
    return out;
}

Tensor scale(const Tensor& a, double s) {
    Tensor out = a;
    for (double& v : out.raw()) {
        v *= s;
    }
    return out;
}

Tensor scale(const Tensor& a, cplx s) {
    Tensor out = a.is_complex() ? a : a.to_complex();
    for (int64_t i = 0; i < out.size(); ++i) {
        out.c(i) *= s;
    }
    return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    check_same_kind(a, b, "hadamard");
    check_same_shape(a, b, "hadamard");
    Tensor out = a;
    if (a.is_real()) {
        for (int64_t i = 0; i < out.size(); ++i) {
            out[i] *= b[i];
        }
    } else {
        for (int64_t i = 0; i < out.size(); ++i) {
            out.c(i) *= b.c(i);
        }
    }
    return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    check_same_kind(a, b, "max_abs_diff");
    check_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    if (a.is_real()) {
        for (int64_t i = 0; i < a.size(); ++i) {
            m = std::max(m, std::abs(a[i] - b[i]));
        }
    } else {
        for (int64_t i = 0; i < a.size(); ++i) {
            m = std::max(m, std::abs(a.c(i) - b.c(i)));
        }
    }
    return m;
}

} // namespace koopman

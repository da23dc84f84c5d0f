#pragma once

#include "koopman/errors.hpp"

#include <complex>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace koopman {

using std::int64_t;
using cplx = std::complex<double>;

enum class Scalar { Real64, Complex128 };

/// Dense rank-1/rank-2 array of real64 or complex128 scalars, row-major.
/// A vector is stored as rows x 1. Promotion real -> complex only happens
/// through the explicit to_complex() cast.
class Tensor {
  public:
    Tensor() = default;
    Tensor(int64_t rows, int64_t cols, Scalar kind = Scalar::Real64);

    /// 2-D initializer, real: Tensor{{1,2},{3,4}}
    Tensor(std::initializer_list<std::initializer_list<double>> rows);

    static Tensor identity(int64_t n);
    static Tensor column(const std::vector<double>& values);
    static Tensor column_c(const std::vector<cplx>& values);
    static Tensor from_rows(const std::vector<std::vector<double>>& rows);

    int64_t rows() const { return rows_; }
    int64_t cols() const { return cols_; }
    int64_t size() const { return rows_ * cols_; }
    Scalar kind() const { return kind_; }
    bool is_real() const { return kind_ == Scalar::Real64; }
    bool is_complex() const { return kind_ == Scalar::Complex128; }
    bool empty() const { return size() == 0; }
    bool same_shape(const Tensor& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    double& at(int64_t i, int64_t j);
    double at(int64_t i, int64_t j) const;
    cplx& cat(int64_t i, int64_t j);
    cplx cat(int64_t i, int64_t j) const;

    // Flat element access for vectors / linear scans.
    double& operator[](int64_t i);
    double operator[](int64_t i) const;
    cplx& c(int64_t i);
    cplx c(int64_t i) const;

    double* real_data();
    const double* real_data() const;
    cplx* complex_data();
    const cplx* complex_data() const;

    /// Raw buffer (real: size() doubles; complex: 2*size() doubles, interleaved).
    std::vector<double>& raw() { return buf_; }
    const std::vector<double>& raw() const { return buf_; }

    /// Explicit real64 -> complex128 promotion (zero imaginary parts).
    Tensor to_complex() const;
    Tensor real_part() const;
    Tensor imag_part() const;
    Tensor conj() const;

    Tensor transpose() const;
    /// Conjugate transpose; plain transpose for real tensors.
    Tensor hermitian() const;

    bool all_finite() const;
    double max_abs() const;
    double frobenius_norm() const;

    std::string shape_str() const;

  private:
    void require_real(const char* op) const;
    void require_complex(const char* op) const;

    int64_t rows_ = 0;
    int64_t cols_ = 0;
    Scalar kind_ = Scalar::Real64;
    std::vector<double> buf_;
};

// Elementwise / algebraic helpers. Kinds of both operands must match.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor scale(const Tensor& a, cplx s);
Tensor hadamard(const Tensor& a, const Tensor& b);

/// max_ij |a_ij - b_ij| (kinds must match)
double max_abs_diff(const Tensor& a, const Tensor& b);

} // namespace koopman

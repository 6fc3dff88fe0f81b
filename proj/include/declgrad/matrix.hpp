#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace declgrad {

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct SingularityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConvergenceError : std::runtime_error {
    ConvergenceError(const std::string& msg, double achieved)
        : std::runtime_error(msg), violation(achieved) {}
    double violation;
};

struct DegeneracyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class Vector {
public:
    Vector() = default;
    explicit Vector(std::size_t n, double fill = 0.0) : v_(n, fill) {}
    Vector(std::initializer_list<double> xs) : v_(xs) {}
    explicit Vector(std::vector<double> xs) : v_(std::move(xs)) {}

    std::size_t dim() const { return v_.size(); }
    double& operator[](std::size_t i) { return v_[i]; }
    double operator[](std::size_t i) const { return v_[i]; }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }
    auto begin() { return v_.begin(); }
    auto end() { return v_.end(); }
    auto begin() const { return v_.begin(); }
    auto end() const { return v_.end(); }

private:
    std::vector<double> v_;
};

// Dense row-major matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), v_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> xs)
        : rows_(rows), cols_(cols), v_(xs) {
        if (v_.size() != rows * cols) throw DimensionError("matrix initializer size mismatch");
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double& operator()(std::size_t i, std::size_t j) { return v_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return v_[i * cols_ + j]; }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }
    std::size_t size() const { return v_.size(); }

    static Matrix identity(std::size_t n) {
        Matrix I(n, n);
        for (std::size_t i = 0; i < n; ++i) I(i, i) = 1.0;
        return I;
    }

    static Matrix diag(const Vector& d) {
        Matrix D(d.dim(), d.dim());
        for (std::size_t i = 0; i < d.dim(); ++i) D(i, i) = d[i];
        return D;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> v_;
};

inline void check_same_dim(const Vector& a, const Vector& b, const char* op) {
    if (a.dim() != b.dim()) throw DimensionError(std::string(op) + ": vector dimension mismatch");
}

inline double dot(const Vector& a, const Vector& b) {
    check_same_dim(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vector& a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(const Vector& a) {
    double m = 0.0;
    for (double x : a) m = std::max(m, std::abs(x));
    return m;
}

inline Vector operator+(const Vector& a, const Vector& b) {
    check_same_dim(a, b, "add");
    Vector r(a.dim());
    for (std::size_t i = 0; i < a.dim(); ++i) r[i] = a[i] + b[i];
    return r;
}

inline Vector operator-(const Vector& a, const Vector& b) {
    check_same_dim(a, b, "sub");
    Vector r(a.dim());
    for (std::size_t i = 0; i < a.dim(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline Vector operator*(double c, const Vector& a) {
    Vector r(a.dim());
    for (std::size_t i = 0; i < a.dim(); ++i) r[i] = c * a[i];
    return r;
}

inline Vector normalized(const Vector& a) {
    double n = norm2(a);
    if (n <= 1e-12) throw DomainError("cannot normalize near-zero vector");
    return (1.0 / n) * a;
}

inline Matrix operator+(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError("add: matrix shape mismatch");
    Matrix r(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) r.data()[i] = a.data()[i] + b.data()[i];
    return r;
}

inline Matrix operator-(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError("sub: matrix shape mismatch");
    Matrix r(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) r.data()[i] = a.data()[i] - b.data()[i];
    return r;
}

inline Matrix operator*(double c, const Matrix& a) {
    Matrix r(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) r.data()[i] = c * a.data()[i];
    return r;
}

inline Vector matvec(const Matrix& A, const Vector& x) {
    if (A.cols() != x.dim()) throw DimensionError("matvec: shape mismatch");
    Vector y(A.rows());
    for (std::size_t i = 0; i < A.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < A.cols(); ++j) s += A(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

inline Vector matvec_t(const Matrix& A, const Vector& x) {
    if (A.rows() != x.dim()) throw DimensionError("matvec_t: shape mismatch");
    Vector y(A.cols());
    for (std::size_t i = 0; i < A.rows(); ++i)
        for (std::size_t j = 0; j < A.cols(); ++j) y[j] += A(i, j) * x[i];
    return y;
}

inline Matrix matmul(const Matrix& A, const Matrix& B) {
    if (A.cols() != B.rows()) throw DimensionError("matmul: shape mismatch");
    Matrix C(A.rows(), B.cols());
    for (std::size_t i = 0; i < A.rows(); ++i)
        for (std::size_t k = 0; k < A.cols(); ++k) {
            double aik = A(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < B.cols(); ++j) C(i, j) += aik * B(k, j);
        }
    return C;
}

inline Matrix transpose(const Matrix& A) {
    Matrix T(A.cols(), A.rows());
    for (std::size_t i = 0; i < A.rows(); ++i)
        for (std::size_t j = 0; j < A.cols(); ++j) T(j, i) = A(i, j);
    return T;
}

inline Matrix outer(const Vector& a, const Vector& b) {
    Matrix M(a.dim(), b.dim());
    for (std::size_t i = 0; i < a.dim(); ++i)
        for (std::size_t j = 0; j < b.dim(); ++j) M(i, j) = a[i] * b[j];
    return M;
}

inline double max_abs(const Matrix& A) {
    double m = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) m = std::max(m, std::abs(A.data()[i]));
    return m;
}

inline double frobenius(const Matrix& A) {
    double s = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) s += A.data()[i] * A.data()[i];
    return std::sqrt(s);
}

inline double trace(const Matrix& A) {
    if (A.rows() != A.cols()) throw DimensionError("trace: square matrix required");
    double s = 0.0;
    for (std::size_t i = 0; i < A.rows(); ++i) s += A(i, i);
    return s;
}

// (A + A^T) / 2
inline Matrix symmetrize(const Matrix& A) {
    if (A.rows() != A.cols()) throw DimensionError("symmetrize: square matrix required");
    Matrix S(A.rows(), A.cols());
    for (std::size_t i = 0; i < A.rows(); ++i)
        for (std::size_t j = 0; j < A.cols(); ++j) S(i, j) = 0.5 * (A(i, j) + A(j, i));
    return S;
}

inline Vector flatten(const Matrix& A) {
    Vector v(A.size());
    for (std::size_t i = 0; i < A.size(); ++i) v[i] = A.data()[i];
    return v;
}

inline Matrix reshape(const Vector& v, std::size_t rows, std::size_t cols) {
    if (v.dim() != rows * cols) throw DimensionError("reshape: size mismatch");
    Matrix M(rows, cols);
    for (std::size_t i = 0; i < v.dim(); ++i) M.data()[i] = v[i];
    return M;
}

inline bool all_finite(const Vector& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline bool all_finite(const Matrix& A) {
    for (std::size_t i = 0; i < A.size(); ++i)
        if (!std::isfinite(A.data()[i])) return false;
    return true;
}

}  // namespace declgrad

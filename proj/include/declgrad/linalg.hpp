#pragma once

#include <algorithm>
#include <limits>
#include <numeric>

#include "declgrad/matrix.hpp"
#include "declgrad/rng.hpp"

namespace declgrad {

struct SymEigResult {
    Vector eigenvalues;   // ascending
    Matrix eigenvectors;  // orthonormal columns, eigenvectors[:,k] pairs with eigenvalues[k]
};

// Cyclic Jacobi on the symmetrized input. Converges when the off-diagonal
// Frobenius norm drops below 1e-12 relative to the input scale; capped at
// 100 sweeps.
inline SymEigResult sym_eig(const Matrix& A_in) {
    if (A_in.rows() != A_in.cols()) throw DimensionError("sym_eig: square matrix required");
    const std::size_t n = A_in.rows();
    Matrix A = symmetrize(A_in);
    Matrix Q = Matrix::identity(n);

    const double scale = std::max(frobenius(A), 1e-300);
    const double tol = 1e-12 * scale;

    auto off_norm = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) s += A(i, j) * A(i, j);
        return std::sqrt(2.0 * s);
    };

    int sweep = 0;
    while (off_norm() > tol) {
        if (++sweep > 100) throw ConvergenceError("sym_eig: no convergence after 100 sweeps", off_norm());
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double apq = A(p, q);
                if (std::abs(apq) <= 1e-300) continue;
                double theta = (A(q, q) - A(p, p)) / (2.0 * apq);
                double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                double tau = s / (1.0 + c);

                double app = A(p, p), aqq = A(q, q);
                A(p, p) = app - t * apq;
                A(q, q) = aqq + t * apq;
                A(p, q) = A(q, p) = 0.0;
                for (std::size_t r = 0; r < n; ++r) {
                    if (r != p && r != q) {
                        double arp = A(r, p), arq = A(r, q);
                        A(r, p) = A(p, r) = arp - s * (arq + tau * arp);
                        A(r, q) = A(q, r) = arq + s * (arp - tau * arq);
                    }
                    double qrp = Q(r, p), qrq = Q(r, q);
                    Q(r, p) = qrp - s * (qrq + tau * qrp);
                    Q(r, q) = qrq + s * (qrp - tau * qrq);
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return A(i, i) < A(j, j); });

    SymEigResult res{Vector(n), Matrix(n, n)};
    for (std::size_t k = 0; k < n; ++k) {
        res.eigenvalues[k] = A(order[k], order[k]);
        for (std::size_t r = 0; r < n; ++r) res.eigenvectors(r, k) = Q(r, order[k]);
    }
    return res;
}

namespace detail {

struct LuFactors {
    Matrix lu;
    std::vector<std::size_t> perm;
};

inline LuFactors lu_factor(const Matrix& A) {
    if (A.rows() != A.cols()) throw DimensionError("solve: square matrix required");
    const std::size_t n = A.rows();
    LuFactors f{A, std::vector<std::size_t>(n)};
    std::iota(f.perm.begin(), f.perm.end(), std::size_t{0});
    const double pivot_tol = 1e-12 * std::max(1.0, max_abs(A));
    Matrix& lu = f.lu;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(lu(i, k)) > std::abs(lu(piv, k))) piv = i;
        if (std::abs(lu(piv, k)) <= pivot_tol)
            throw SingularityError("solve: singular to tolerance at pivot column " + std::to_string(k) +
                                   " (|pivot| = " + std::to_string(std::abs(lu(piv, k))) + ")");
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(lu(k, j), lu(piv, j));
            std::swap(f.perm[k], f.perm[piv]);
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            lu(i, k) /= lu(k, k);
            double lik = lu(i, k);
            for (std::size_t j = k + 1; j < n; ++j) lu(i, j) -= lik * lu(k, j);
        }
    }
    return f;
}

inline Vector lu_solve(const LuFactors& f, const Vector& b) {
    const std::size_t n = f.lu.rows();
    if (b.dim() != n) throw DimensionError("solve: rhs dimension mismatch");
    Vector x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[f.perm[i]];
    for (std::size_t i = 1; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) x[i] -= f.lu(i, j) * x[j];
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t j = i + 1; j < n; ++j) x[i] -= f.lu(i, j) * x[j];
        x[i] /= f.lu(i, i);
    }
    return x;
}

}  // namespace detail

inline Vector solve(const Matrix& A, const Vector& b) {
    return detail::lu_solve(detail::lu_factor(A), b);
}

inline Matrix solve(const Matrix& A, const Matrix& B) {
    if (A.rows() != B.rows()) throw DimensionError("solve: rhs rows mismatch");
    auto f = detail::lu_factor(A);
    Matrix X(A.cols(), B.cols());
    for (std::size_t j = 0; j < B.cols(); ++j) {
        Vector b(B.rows());
        for (std::size_t i = 0; i < B.rows(); ++i) b[i] = B(i, j);
        Vector x = detail::lu_solve(f, b);
        for (std::size_t i = 0; i < X.rows(); ++i) X(i, j) = x[i];
    }
    return X;
}

inline Matrix inverse(const Matrix& A) { return solve(A, Matrix::identity(A.rows())); }

// Moore-Penrose pseudo-inverse of a symmetric matrix: eigenvalues with
// |lambda| <= tol * max|lambda| are treated as zero.
inline Matrix pinv_sym(const Matrix& A, double tol = 1e-10) {
    SymEigResult e = sym_eig(A);
    const std::size_t n = A.rows();
    double lmax = 0.0;
    for (double l : e.eigenvalues) lmax = std::max(lmax, std::abs(l));
    Matrix P(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        double l = e.eigenvalues[k];
        if (std::abs(l) <= tol * lmax) continue;
        double inv = 1.0 / l;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                P(i, j) += inv * e.eigenvectors(i, k) * e.eigenvectors(j, k);
    }
    return P;
}

// max|lambda| / min|lambda|; equals the singular-value condition number for
// symmetric matrices.
inline double cond_sym(const Matrix& A) {
    SymEigResult e = sym_eig(A);
    double lmax = 0.0, lmin = std::numeric_limits<double>::infinity();
    for (double l : e.eigenvalues) {
        lmax = std::max(lmax, std::abs(l));
        lmin = std::min(lmin, std::abs(l));
    }
    if (lmin < 1e-12 * lmax)
        throw SingularityError("cond_sym: matrix singular to tolerance (min |lambda| = " +
                               std::to_string(lmin) + ")");
    return lmax / lmin;
}

inline Vector sample_gaussian(Rng& rng, std::size_t n) {
    Vector v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = rng.gaussian();
    return v;
}

inline Matrix random_symmetric(Rng& rng, std::size_t n) {
    Matrix A(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) A(i, j) = A(j, i) = rng.gaussian();
    return A;
}

// H = Q D Q^T with random orthogonal Q and |D_ii| log-uniform in
// [lo, hi]; signs flipped with probability 1/2 when indefinite is set.
inline Matrix random_spectrum_matrix(Rng& rng, std::size_t n, double lo, double hi,
                                     bool indefinite) {
    Matrix Q = sym_eig(random_symmetric(rng, n)).eigenvectors;
    Vector d(n);
    for (std::size_t i = 0; i < n; ++i) {
        double mag = std::exp(rng.uniform_in(std::log(lo), std::log(hi)));
        double sign = (indefinite && rng.uniform() < 0.5) ? -1.0 : 1.0;
        d[i] = sign * mag;
    }
    return matmul(Q, matmul(Matrix::diag(d), transpose(Q)));
}

}  // namespace declgrad

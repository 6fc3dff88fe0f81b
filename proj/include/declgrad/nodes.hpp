#pragma once

#include "declgrad/linalg.hpp"

namespace declgrad::nodes {

struct GradientReport {
    Vector g_exact;
    Vector g_approx;
    double cos_sim;  // <g, ghat> / (|g| |ghat|)
    bool descent;    // cos_sim > 0
    bool defined;    // false when either gradient norm <= 1e-12
};

inline GradientReport make_report(Vector g_exact, Vector g_approx) {
    GradientReport rep{std::move(g_exact), std::move(g_approx), 0.0, false, false};
    double ne = norm2(rep.g_exact), na = norm2(rep.g_approx);
    if (ne > 1e-12 && na > 1e-12) {
        rep.cos_sim = dot(rep.g_exact, rep.g_approx) / (ne * na);
        rep.descent = rep.cos_sim > 0.0;
        rep.defined = true;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Projection onto the unit sphere: y = x / |x|.
// ---------------------------------------------------------------------------

inline Vector sphere_forward(const Vector& x) {
    if (norm2(x) <= 1e-12)
        throw DomainError("sphere projection undefined near the origin");
    return normalized(x);
}

// v^T Dy(x) with Dy(x) = (I - y y^T) / |x|; always orthogonal to y.
inline Vector sphere_backward_exact(const Vector& x, const Vector& v) {
    check_same_dim(x, v, "sphere_backward_exact");
    double n = norm2(x);
    if (n <= 1e-12) throw DomainError("sphere projection undefined near the origin");
    Vector y = (1.0 / n) * x;
    return (1.0 / n) * (v - dot(y, v) * y);
}

// Constraint-ignoring gradient: Dy hat = I.
inline Vector sphere_backward_approx(const Vector& /*x*/, const Vector& v) { return v; }

inline GradientReport sphere_gradient_report(const Vector& x, const Vector& v) {
    return make_report(sphere_backward_exact(x, v), sphere_backward_approx(x, v));
}

// ---------------------------------------------------------------------------
// Entropic optimal transport: minimize <P, M> + (1/gamma) KL(P || r c^T)
// subject to P 1 = r, P^T 1 = c.
// ---------------------------------------------------------------------------

struct TransportPlan {
    Matrix P;
    Vector r;
    Vector c;
    double gamma;
};

inline double marginal_violation(const Matrix& P, const Vector& r, const Vector& c) {
    double worst = 0.0;
    for (std::size_t i = 0; i < P.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < P.cols(); ++j) s += P(i, j);
        worst = std::max(worst, std::abs(s - r[i]));
    }
    for (std::size_t j = 0; j < P.cols(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < P.rows(); ++i) s += P(i, j);
        worst = std::max(worst, std::abs(s - c[j]));
    }
    return worst;
}

// Log-domain Sinkhorn. The kernel is (r c^T) o exp(-gamma M); row and column
// potentials are updated alternately with log-sum-exp reductions.
inline TransportPlan sinkhorn_forward(const Matrix& M, const Vector& r, const Vector& c,
                                      double gamma, double tol = 1e-9,
                                      std::size_t max_iter = 10000) {
    const std::size_t m = M.rows(), n = M.cols();
    if (r.dim() != m || c.dim() != n) throw DimensionError("sinkhorn: marginal dimension mismatch");
    if (gamma <= 0) throw DomainError("sinkhorn: gamma must be positive");
    double sr = 0.0, sc = 0.0;
    for (double x : r) {
        if (x <= 0) throw DomainError("sinkhorn: r must be strictly positive");
        sr += x;
    }
    for (double x : c) {
        if (x <= 0) throw DomainError("sinkhorn: c must be strictly positive");
        sc += x;
    }
    if (std::abs(sr - sc) > 1e-12 * std::max(sr, sc))
        throw DomainError("sinkhorn: marginal sums differ");

    Matrix logK(m, n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            logK(i, j) = std::log(r[i]) + std::log(c[j]) - gamma * M(i, j);

    auto lse_row = [&](std::size_t i, const Vector& g) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, logK(i, j) + g[j]);
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += std::exp(logK(i, j) + g[j] - mx);
        return mx + std::log(s);
    };
    auto lse_col = [&](std::size_t j, const Vector& f) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < m; ++i) mx = std::max(mx, logK(i, j) + f[i]);
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += std::exp(logK(i, j) + f[i] - mx);
        return mx + std::log(s);
    };

    Vector f(m), g(n);
    auto assemble = [&]() {
        Matrix P(m, n);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) P(i, j) = std::exp(f[i] + logK(i, j) + g[j]);
        return P;
    };

    for (std::size_t it = 0; it < max_iter; ++it) {
        for (std::size_t i = 0; i < m; ++i) f[i] = std::log(r[i]) - lse_row(i, g);
        for (std::size_t j = 0; j < n; ++j) g[j] = std::log(c[j]) - lse_col(j, f);
        Matrix P = assemble();
        if (marginal_violation(P, r, c) <= tol) return {std::move(P), r, c, gamma};
    }
    Matrix P = assemble();
    double viol = marginal_violation(P, r, c);
    throw ConvergenceError("sinkhorn: marginal violation " + std::to_string(viol) +
                               " above tolerance after " + std::to_string(max_iter) + " iterations",
                           viol);
}

// Marginal constraint matrix over row-major vec(P): m row-sum rows followed by
// the first n-1 column-sum rows (the last one is redundant and dropped so the
// matrix has full row rank).
inline Matrix ot_constraint_matrix(std::size_t m, std::size_t n) {
    Matrix A(m + n - 1, m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) A(i, i * n + j) = 1.0;
    for (std::size_t j = 0; j + 1 < n; ++j)
        for (std::size_t i = 0; i < m; ++i) A(m + j, i * n + j) = 1.0;
    return A;
}

// Exact loss gradient w.r.t. the cost matrix. With H^-1 = gamma diag(vec P)
// (call it D) the implicit-function gradient specializes to
// g = D A^T (A D A^T)^-1 A D vec(v) - D vec(v).
inline Matrix ot_backward_exact(const TransportPlan& plan, const Matrix& v) {
    const std::size_t m = plan.P.rows(), n = plan.P.cols();
    if (v.rows() != m || v.cols() != n) throw DimensionError("ot_backward_exact: shape mismatch");
    Matrix A = ot_constraint_matrix(m, n);
    const std::size_t p = A.rows(), mn = m * n;

    Vector d(mn);
    for (std::size_t k = 0; k < mn; ++k) d[k] = plan.gamma * plan.P.data()[k];

    Vector dv(mn);
    for (std::size_t k = 0; k < mn; ++k) dv[k] = d[k] * v.data()[k];

    // A D A^T and A D vec(v)
    Matrix S(p, p);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = i; j < p; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < mn; ++k) s += A(i, k) * d[k] * A(j, k);
            S(i, j) = S(j, i) = s;
        }
    Vector rhs = matvec(A, dv);
    Vector z = solve(S, rhs);  // strictly positive P keeps S nonsingular
    Vector atz = matvec_t(A, z);

    Matrix g(m, n);
    for (std::size_t k = 0; k < mn; ++k) g.data()[k] = d[k] * atz[k] - dv[k];
    return g;
}

// Constraint-ignoring gradient: -gamma P o v.
inline Matrix ot_backward_approx(const TransportPlan& plan, const Matrix& v) {
    if (v.rows() != plan.P.rows() || v.cols() != plan.P.cols())
        throw DimensionError("ot_backward_approx: shape mismatch");
    Matrix g(v.rows(), v.cols());
    for (std::size_t k = 0; k < g.size(); ++k)
        g.data()[k] = -plan.gamma * plan.P.data()[k] * v.data()[k];
    return g;
}

inline GradientReport ot_gradient_report(const TransportPlan& plan, const Matrix& v) {
    return make_report(flatten(ot_backward_exact(plan, v)), flatten(ot_backward_approx(plan, v)));
}

// ---------------------------------------------------------------------------
// Eigen decomposition node: y is a unit eigenvector of symmetric X.
// ---------------------------------------------------------------------------

struct EigenPair {
    double value;
    Vector vector;      // unit norm, first nonzero component positive
    std::size_t index;  // position in the ascending spectrum
};

inline Vector fix_eigvec_sign(Vector q) {
    for (double x : q) {
        if (std::abs(x) > 1e-12) {
            if (x < 0)
                for (auto& y : q) y = -y;
            break;
        }
    }
    return q;
}

// Full ascending spectrum with the sign convention applied.
inline std::vector<EigenPair> eigen_forward(const Matrix& X) {
    SymEigResult e = sym_eig(X);
    std::vector<EigenPair> pairs;
    pairs.reserve(e.eigenvalues.dim());
    for (std::size_t k = 0; k < e.eigenvalues.dim(); ++k) {
        Vector q(X.rows());
        for (std::size_t i = 0; i < X.rows(); ++i) q[i] = e.eigenvectors(i, k);
        pairs.push_back({e.eigenvalues[k], fix_eigvec_sign(std::move(q)), k});
    }
    return pairs;
}

inline void require_simple(const std::vector<EigenPair>& pairs, std::size_t index) {
    double scale = 0.0;
    for (const auto& p : pairs) scale = std::max(scale, std::abs(p.value));
    scale = std::max(scale, 1e-300);
    double gap = std::numeric_limits<double>::infinity();
    for (const auto& p : pairs)
        if (p.index != index) gap = std::min(gap, std::abs(p.value - pairs[index].value));
    if (gap <= 1e-8 * scale)
        throw DegeneracyError("eigenvalue " + std::to_string(index) +
                              " is not simple; derivative undefined");
}

namespace detail {

// Apply Q diag(w) Q^T to v using the node's own decomposition.
inline Vector spectral_apply(const SymEigResult& e, const Vector& weights, const Vector& v) {
    Vector coords = matvec_t(e.eigenvectors, v);
    for (std::size_t i = 0; i < coords.dim(); ++i) coords[i] *= weights[i];
    return matvec(e.eigenvectors, coords);
}

inline Matrix rank2_symmetric(const Vector& p, const Vector& y) {
    // -1/2 (p y^T + y p^T)
    Matrix G(p.dim(), p.dim());
    for (std::size_t i = 0; i < p.dim(); ++i)
        for (std::size_t j = 0; j < p.dim(); ++j) G(i, j) = -0.5 * (p[i] * y[j] + p[j] * y[i]);
    return G;
}

}  // namespace detail

// G_ij = v^T D_{X_ij} y with D_{X_ij} y = -1/2 (X - lambda I)^+ (y_j e_i + y_i e_j).
// The pseudo-inverse is applied through the decomposition of X, whose
// eigenvectors also diagonalize X - lambda I.
inline Matrix eigen_backward_exact(const SymEigResult& e, const EigenPair& pair, const Vector& v) {
    const std::size_t m = e.eigenvalues.dim();
    if (v.dim() != m) throw DimensionError("eigen_backward_exact: v dimension mismatch");
    double scale = 0.0;
    for (double l : e.eigenvalues) scale = std::max(scale, std::abs(l));
    Vector weights(m);
    for (std::size_t k = 0; k < m; ++k) {
        double shifted = e.eigenvalues[k] - pair.value;
        weights[k] = (std::abs(shifted) <= 1e-10 * std::max(scale, 1e-300)) ? 0.0 : 1.0 / shifted;
    }
    Vector p = detail::spectral_apply(e, weights, v);
    return detail::rank2_symmetric(p, pair.vector);
}

inline Matrix eigen_backward_exact(const Matrix& X, const EigenPair& pair, const Vector& v) {
    auto pairs = eigen_forward(X);
    require_simple(pairs, pair.index);
    return eigen_backward_exact(sym_eig(X), pair, v);
}

// Constraint-ignoring variant: the shift lambda is dropped and a single X^+
// serves every requested eigenvector.
inline Matrix eigen_backward_approx(const SymEigResult& e, const EigenPair& pair, const Vector& v) {
    const std::size_t m = e.eigenvalues.dim();
    if (v.dim() != m) throw DimensionError("eigen_backward_approx: v dimension mismatch");
    double scale = 0.0;
    for (double l : e.eigenvalues) scale = std::max(scale, std::abs(l));
    Vector weights(m);
    for (std::size_t k = 0; k < m; ++k) {
        double l = e.eigenvalues[k];
        weights[k] = (std::abs(l) <= 1e-10 * std::max(scale, 1e-300)) ? 0.0 : 1.0 / l;
    }
    Vector p = detail::spectral_apply(e, weights, v);
    return detail::rank2_symmetric(p, pair.vector);
}

inline Matrix eigen_backward_approx(const Matrix& X, const EigenPair& pair, const Vector& v) {
    return eigen_backward_approx(sym_eig(X), pair, v);
}

inline GradientReport eigen_gradient_report(const Matrix& X, const EigenPair& pair,
                                            const Vector& v) {
    auto pairs = eigen_forward(X);
    require_simple(pairs, pair.index);
    SymEigResult e = sym_eig(X);
    return make_report(flatten(eigen_backward_exact(e, pair, v)),
                       flatten(eigen_backward_approx(e, pair, v)));
}

}  // namespace declgrad::nodes

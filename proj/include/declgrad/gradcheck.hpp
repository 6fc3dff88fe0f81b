#pragma once

#include <functional>

#include "declgrad/nodes.hpp"

namespace declgrad::gradcheck {

// Central finite differences with per-coordinate step h = scale * max(1, |x_i|).
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                          double scale = 1e-5) {
    Vector g(x.dim());
    for (std::size_t i = 0; i < x.dim(); ++i) {
        double h = scale * std::max(1.0, std::abs(x[i]));
        Vector xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        g[i] = (f(xp) - f(xm)) / (2.0 * h);
    }
    return g;
}

inline double rel_error(const Vector& got, const Vector& want) {
    double num = norm_inf(got - want);
    double den = std::max(norm_inf(want), 1e-12);
    return num / den;
}

// max relative error of the sphere exact backward against finite differences
// of v^T y(x).
inline double check_sphere(const Vector& x, const Vector& v) {
    Vector g = nodes::sphere_backward_exact(x, v);
    Vector fd = fd_gradient([&](const Vector& xx) { return dot(v, nodes::sphere_forward(xx)); }, x);
    return rel_error(g, fd);
}

// Same for the OT node, differencing through the Sinkhorn solve at tight
// tolerance.
inline double check_ot(const Matrix& M, const Matrix& v, const Vector& r, const Vector& c,
                       double gamma) {
    auto plan = nodes::sinkhorn_forward(M, r, c, gamma, 1e-10, 20000);
    Vector g = flatten(nodes::ot_backward_exact(plan, v));
    Vector vvec = flatten(v);
    Vector fd = fd_gradient(
        [&](const Vector& mm) {
            auto p = nodes::sinkhorn_forward(reshape(mm, M.rows(), M.cols()), r, c, gamma, 1e-10,
                                             20000);
            return dot(vvec, flatten(p.P));
        },
        flatten(M));
    return rel_error(g, fd);
}

// Eigen node check: the loss is v^T y_k(X) with the perturbed eigenvector
// sign-aligned to the base solution before taking the inner product.
inline double check_eigen(const Matrix& X, std::size_t index, const Vector& v) {
    auto pairs = nodes::eigen_forward(X);
    nodes::require_simple(pairs, index);
    const nodes::EigenPair& pair = pairs[index];
    SymEigResult e = sym_eig(X);
    Vector g = flatten(nodes::eigen_backward_exact(e, pair, v));
    Vector base = pair.vector;
    Vector fd = fd_gradient(
        [&](const Vector& xx) {
            auto p = nodes::eigen_forward(reshape(xx, X.rows(), X.cols()));
            Vector q = p[index].vector;
            if (dot(q, base) < 0)
                for (auto& y : q) y = -y;
            return dot(v, q);
        },
        flatten(X));
    return rel_error(g, fd);
}

// max over v-columns of |A . Dy(v)| where Dy is the exact OT Jacobian applied
// to unit cost perturbations; the implicit-function form puts every column in
// null(A).
inline double ot_tangency_residual(const nodes::TransportPlan& plan) {
    const std::size_t m = plan.P.rows(), n = plan.P.cols();
    Matrix A = nodes::ot_constraint_matrix(m, n);
    double worst = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            Matrix v(m, n);
            v(i, j) = 1.0;
            Vector col = flatten(nodes::ot_backward_exact(plan, v));
            worst = std::max(worst, norm_inf(matvec(A, col)));
        }
    return worst;
}

}  // namespace declgrad::gradcheck

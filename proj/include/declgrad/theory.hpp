#pragma once

#include "declgrad/linalg.hpp"

namespace declgrad::theory {

struct DescentGapSample {
    double gap;
    bool descent;  // gap >= 0
};

struct McEstimate {
    double mean;
    double stderr_;  // sample sd / sqrt(n)
    std::size_t n_samples;
};

struct SpectrumBounds {
    double max_value;
    double lower_bound;  // 1
    double upper_bound;  // 1/2 + cond(H)/2
};

struct ClosedEigenPair {
    double value;
    Vector vector;  // unit norm
};

struct SignCaseReport {
    double value;
    int expected_sign;  // +1 for lambda < lambda_1, -1 for lambda > lambda_m
    bool holds;
};

namespace detail {

inline void require_nonzero(const Vector& v, const char* name) {
    if (norm2(v) <= 1e-300) throw DomainError(std::string(name) + " must be nonzero");
}

inline void require_nonorthogonal(const Vector& a, const Vector& b) {
    if (std::abs(dot(a, b)) <= 1e-12 * norm2(a) * norm2(b))
        throw DomainError("a and b are orthogonal to tolerance; a^Tb != 0 required");
}

class Welford {
public:
    void add(double x) {
        ++n_;
        double d = x - mean_;
        mean_ += d / static_cast<double>(n_);
        m2_ += d * (x - mean_);
    }
    McEstimate estimate() const {
        if (n_ < 2) throw DomainError("McEstimate requires at least 2 samples");
        double var = m2_ / static_cast<double>(n_ - 1);
        return {mean_, std::sqrt(var / static_cast<double>(n_)), n_};
    }

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

inline double quad_form(const Matrix& G, const Vector& w) {
    double s = 0.0;
    for (std::size_t i = 0; i < G.rows(); ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < G.cols(); ++j) row += G(i, j) * w[j];
        s += w[i] * row;
    }
    return s;
}

}  // namespace detail

// Closed-form eigenpairs of M = ab^T + ba^T: values a^Tb +- |a||b| with
// eigenvectors along |b|a +- |a|b. Collapses to the single nonzero pair when
// a and b are linearly dependent.
inline std::vector<ClosedEigenPair> rank2_sym_eigenpairs(const Vector& a, const Vector& b) {
    check_same_dim(a, b, "rank2_sym_eigenpairs");
    detail::require_nonzero(a, "a");
    detail::require_nonzero(b, "b");
    double na = norm2(a), nb = norm2(b), ab = dot(a, b);

    std::vector<ClosedEigenPair> pairs;
    Vector qplus = norm2(nb * a + na * b) > 1e-12 * na * nb ? Vector(nb * a + na * b) : Vector(a.dim());
    Vector qminus = norm2(nb * a - na * b) > 1e-12 * na * nb ? Vector(nb * a - na * b) : Vector(a.dim());
    if (norm2(qplus) > 0) pairs.push_back({ab + na * nb, normalized(qplus)});
    if (norm2(qminus) > 0) pairs.push_back({ab - na * nb, normalized(qminus)});
    return pairs;
}

// Full m-element spectrum of (ab^T + ba^T) / (2 a^Tb).
inline std::vector<double> scaled_spectrum(const Vector& a, const Vector& b) {
    check_same_dim(a, b, "scaled_spectrum");
    detail::require_nonzero(a, "a");
    detail::require_nonzero(b, "b");
    detail::require_nonorthogonal(a, b);
    double ratio = norm2(a) * norm2(b) / (2.0 * std::abs(dot(a, b)));
    std::vector<double> spec(a.dim(), 0.0);
    spec.front() = 0.5 - ratio;
    spec.back() = 0.5 + ratio;
    if (a.dim() == 1) spec.front() = 1.0;  // rank-1, single eigenvalue
    return spec;
}

// max over unit x of x^T (ab^T / a^Tb) x.
inline double quad_form_max(const Vector& a, const Vector& b) {
    check_same_dim(a, b, "quad_form_max");
    detail::require_nonzero(a, "a");
    detail::require_nonzero(b, "b");
    detail::require_nonorthogonal(a, b);
    return 0.5 + norm2(a) * norm2(b) / (2.0 * std::abs(dot(a, b)));
}

// max over unit w of w^T (a a^T H^-1 / a^T H^-1 a) w, with its universal
// bounds [1, 1/2 + cond(H)/2].
inline SpectrumBounds lin_descent_max(const Matrix& H, const Vector& a) {
    detail::require_nonzero(a, "a");
    Vector hinv_a = solve(H, a);
    if (std::abs(dot(a, hinv_a)) <= 1e-12 * norm2(a) * norm2(hinv_a))
        throw DomainError("a^T H^-1 a vanishes to tolerance");
    SpectrumBounds sb{};
    sb.max_value = quad_form_max(a, hinv_a);
    sb.lower_bound = 1.0;
    sb.upper_bound = 0.5 + 0.5 * cond_sym(H);
    return sb;
}

// Value of v^T (H^-1 - H^-1 a a^T H^-1 / (a^T H^-1 a)) Hhat^-1 v, which equals
// g^T ghat for a single constraint with B = I, C = 0.
inline DescentGapSample descent_gap(const Matrix& H, const Matrix& Hhat, const Vector& a,
                                    const Vector& v) {
    detail::require_nonzero(a, "a");
    Vector hinv_v = solve(H, v);
    Vector hinv_a = solve(H, a);
    Vector hhatinv_v = solve(Hhat, v);
    double denom = dot(a, hinv_a);
    if (std::abs(denom) <= 1e-12 * norm2(a) * norm2(hinv_a))
        throw SingularityError("descent_gap: a^T H^-1 a vanishes to tolerance");
    double gap = dot(hinv_v, hhatinv_v) - dot(hinv_a, v) * dot(hinv_a, hhatinv_v) / denom;
    return {gap, gap >= 0.0};
}

namespace detail {

inline Matrix projection_complement(const Matrix& H, const Matrix& A) {
    const std::size_t m = H.rows();
    const std::size_t p = A.rows();
    if (A.cols() != m) throw DimensionError("constraint matrix has wrong column count");
    if (p > m) throw DomainError("more constraints than variables");
    // rank check on A via Gram spectrum
    SymEigResult gram = sym_eig(matmul(A, transpose(A)));
    if (gram.eigenvalues[0] <= 1e-10 * std::max(gram.eigenvalues[p - 1], 1e-300))
        throw DomainError("constraint matrix is rank deficient");
    Matrix Hinv = inverse(H);
    Matrix AHinv = matmul(A, Hinv);
    Matrix S = matmul(AHinv, transpose(A));  // A H^-1 A^T
    Matrix K = solve(S, AHinv);              // (A H^-1 A^T)^-1 A H^-1
    return Matrix::identity(m) - matmul(transpose(A), K);
}

}  // namespace detail

// Monte-Carlo mean of w^T (I - A^T (A H^-1 A^T)^-1 A H^-1) w, w ~ N(0, I).
inline McEstimate expected_gap_linear_mc(const Matrix& H, const Matrix& A, std::size_t n_samples,
                                         Rng rng) {
    Matrix G = detail::projection_complement(H, A);
    detail::Welford acc;
    for (std::size_t s = 0; s < n_samples; ++s) {
        Vector w = sample_gaussian(rng, H.rows());
        acc.add(detail::quad_form(G, w));
    }
    return acc.estimate();
}

// Exact expectation via the trace identity; evaluates the trace itself rather
// than shortcutting to m - p.
inline double expected_gap_linear_closed(const Matrix& H, const Matrix& A) {
    return trace(detail::projection_complement(H, A));
}

// E[x^T A x] = tr(A Sigma) + mu^T A mu.
inline double quad_expectation(const Matrix& A, const Vector& mu, const Matrix& Sigma) {
    if (A.rows() != A.cols() || A.rows() != mu.dim() || Sigma.rows() != Sigma.cols() ||
        Sigma.rows() != mu.dim())
        throw DimensionError("quad_expectation: shape mismatch");
    return trace(matmul(A, Sigma)) + dot(mu, matvec(A, mu));
}

namespace detail {

inline SymEigResult checked_norm_inputs(const Matrix& Hhat, double lambda, const Vector& y) {
    if (std::abs(norm2(y) - 1.0) > 1e-8) throw DomainError("y must be a unit vector");
    SymEigResult e = sym_eig(Hhat);
    double lmax = 0.0;
    for (double l : e.eigenvalues) lmax = std::max(lmax, std::abs(l));
    for (double l : e.eigenvalues) {
        if (std::abs(l) <= 1e-12 * lmax) throw SingularityError("Hhat is singular to tolerance");
        if (std::abs(l - lambda) <= 1e-9 * std::max(lmax, 1.0))
            throw SingularityError("lambda coincides with an eigenvalue of Hhat");
    }
    return e;
}

}  // namespace detail

// Closed-form E[g^T ghat] for the normalization constraint with H = Hhat - lambda I:
// sum_i (lambda_i - lambda)/lambda_i  -  y^T Hhat^-1 y / y^T H^-1 y.
inline double expected_gap_norm_closed(const Matrix& Hhat, double lambda, const Vector& y) {
    SymEigResult e = detail::checked_norm_inputs(Hhat, lambda, y);
    double sum = 0.0;
    for (double l : e.eigenvalues) sum += (l - lambda) / l;
    Vector qy = matvec_t(e.eigenvectors, y);  // coordinates of y in the eigenbasis
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < qy.dim(); ++i) {
        num += qy[i] * qy[i] / e.eigenvalues[i];
        den += qy[i] * qy[i] / (e.eigenvalues[i] - lambda);
    }
    return sum - num / den;
}

// Monte-Carlo counterpart of expected_gap_norm_closed, sampling
// w^T (Hhat^-1 H - y y^T Hhat^-1 / (y^T H^-1 y)) w over w ~ N(0, I).
inline McEstimate expected_gap_norm_mc(const Matrix& Hhat, double lambda, const Vector& y,
                                       std::size_t n_samples, Rng rng) {
    detail::checked_norm_inputs(Hhat, lambda, y);
    const std::size_t m = Hhat.rows();
    Matrix H = Hhat - lambda * Matrix::identity(m);
    Matrix HhatInv = inverse(Hhat);
    Matrix G = matmul(HhatInv, H);
    Vector hinv_y = solve(H, y);
    double den = dot(y, hinv_y);
    Matrix correction = (1.0 / den) * matmul(outer(y, y), HhatInv);
    G = G - correction;
    detail::Welford acc;
    for (std::size_t s = 0; s < n_samples; ++s) {
        Vector w = sample_gaussian(rng, m);
        acc.add(detail::quad_form(G, w));
    }
    return acc.estimate();
}

// Sign of the expectation in the two definite cases: lambda below the whole
// spectrum gives a nonnegative value, above it a nonpositive one.
inline SignCaseReport norm_sign_case(const Matrix& Hhat, double lambda, const Vector& y) {
    SymEigResult e = detail::checked_norm_inputs(Hhat, lambda, y);
    if (e.eigenvalues[0] <= 0) throw DomainError("Hhat must be positive definite");
    int expected;
    if (lambda < e.eigenvalues[0])
        expected = +1;
    else if (lambda > e.eigenvalues[e.eigenvalues.dim() - 1])
        expected = -1;
    else
        throw DomainError("lambda lies inside the spectrum of Hhat; no sign case applies");
    double value = expected_gap_norm_closed(Hhat, lambda, y);
    bool holds = expected > 0 ? value >= 0.0 : value <= 0.0;
    return {value, expected, holds};
}

}  // namespace declgrad::theory

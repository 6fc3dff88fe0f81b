#pragma once

#include <sstream>
#include <tuple>

#include "declgrad/theory.hpp"

namespace declgrad::verify {

struct CheckResult {
    std::string name;
    bool pass;
    std::string detail;
};

namespace detail {

inline std::string fmt(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

inline Matrix random_spd(Rng& rng, std::size_t m) {
    return random_spectrum_matrix(rng, m, 0.1, 10.0, false);
}

}  // namespace detail

// Worst-case bounds 1 <= max <= 1/2 + cond(H)/2 over random definite H
// (either sign, cond up to 1e4) and random a. The upper bound rests on
// |a^T H^-1 a| >= sigma_min(H^-1) |a|^2, which requires a definite H;
// mixed-sign spectra violate it through near-cancellation of the form.
inline CheckResult check_prop2_bounds(std::size_t trials, std::size_t m, std::uint64_t seed) {
    Rng rng(seed, 2);
    double worst_low = 0.0, worst_high = 0.0;
    bool pass = true;
    for (std::size_t t = 0; t < trials; ++t) {
        Rng sub = rng.substream(t);
        Matrix H = random_spectrum_matrix(sub, m, 1e-2, 1e2, false);
        if (sub.uniform() < 0.5) H = -1.0 * H;
        Vector a = sample_gaussian(sub, m);
        auto sb = theory::lin_descent_max(H, a);
        worst_low = std::max(worst_low, sb.lower_bound - sb.max_value);
        worst_high = std::max(worst_high, sb.max_value - sb.upper_bound);
        if (sb.max_value < sb.lower_bound - 1e-8 || sb.max_value > sb.upper_bound + 1e-8)
            pass = false;
    }
    return {"prop2_bounds", pass,
            "trials=" + std::to_string(trials) + " worst lower-bound slack=" +
                detail::fmt(worst_low) + " worst upper-bound slack=" + detail::fmt(worst_high)};
}

// cond(H) = 1 makes both bounds tight: H = I gives max exactly 1.
inline CheckResult check_prop2_identity(std::size_t m, std::uint64_t seed) {
    Rng rng(seed, 3);
    double worst = 0.0;
    for (std::size_t t = 0; t < 10; ++t) {
        Rng sub = rng.substream(t);
        Vector a = sample_gaussian(sub, m);
        auto sb = theory::lin_descent_max(Matrix::identity(m), a);
        worst = std::max(worst, std::abs(sb.max_value - 1.0));
    }
    return {"prop2_identity", worst <= 1e-10, "max |max - 1| = " + detail::fmt(worst)};
}

// Closed-form eigenpairs of ab^T + ba^T against the numeric eigensolver.
inline CheckResult check_lemma_rank2(std::size_t pairs, std::size_t m, std::uint64_t seed) {
    Rng rng(seed, 4);
    double worst_val = 0.0, worst_vec = 0.0;
    for (std::size_t t = 0; t < pairs; ++t) {
        Rng sub = rng.substream(t);
        Vector a = sample_gaussian(sub, m);
        Vector b = sample_gaussian(sub, m);
        Matrix M = outer(a, b) + outer(b, a);
        auto closed = theory::rank2_sym_eigenpairs(a, b);
        SymEigResult num = sym_eig(M);
        double scale = std::max(norm_inf(num.eigenvalues), 1.0);
        for (const auto& cp : closed) {
            // locate the numeric eigenpair nearest in value
            std::size_t best = 0;
            for (std::size_t k = 1; k < m; ++k)
                if (std::abs(num.eigenvalues[k] - cp.value) <
                    std::abs(num.eigenvalues[best] - cp.value))
                    best = k;
            worst_val = std::max(worst_val, std::abs(num.eigenvalues[best] - cp.value) / scale);
            Vector q(m);
            for (std::size_t i = 0; i < m; ++i) q[i] = num.eigenvectors(i, best);
            worst_vec = std::max(worst_vec, 1.0 - std::abs(dot(q, cp.vector)));
        }
    }
    bool pass = worst_val <= 1e-9 && worst_vec <= 1e-8;
    return {"lemma_rank2", pass,
            "pairs=" + std::to_string(pairs) + " worst eigenvalue err=" + detail::fmt(worst_val) +
                " worst alignment defect=" + detail::fmt(worst_vec)};
}

// Scaled spectrum of (ab^T + ba^T)/(2 a^Tb): matches the numeric spectrum and
// sums to one.
inline CheckResult check_lemma_spectrum(std::size_t pairs, std::size_t m, std::uint64_t seed) {
    Rng rng(seed, 5);
    double worst_match = 0.0, worst_sum = 0.0;
    for (std::size_t t = 0; t < pairs; ++t) {
        Rng sub = rng.substream(t);
        Vector a = sample_gaussian(sub, m);
        Vector b = sample_gaussian(sub, m);
        if (std::abs(dot(a, b)) <= 1e-6 * norm2(a) * norm2(b)) continue;  // lemma precondition
        auto spec = theory::scaled_spectrum(a, b);
        Matrix M = (0.5 / dot(a, b)) * (outer(a, b) + outer(b, a));
        SymEigResult num = sym_eig(M);
        double sum = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            worst_match = std::max(worst_match, std::abs(spec[k] - num.eigenvalues[k]));
            sum += spec[k];
        }
        worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
    }
    bool pass = worst_match <= 1e-9 && worst_sum <= 1e-10;
    return {"lemma_spectrum", pass,
            "worst spectrum mismatch=" + detail::fmt(worst_match) +
                " worst sum defect=" + detail::fmt(worst_sum)};
}

// E[w^T (I - a a^T H^-1 / a^T H^-1 a) w] = m - 1: MC within 3 stderr and the
// closed trace evaluation within 1e-8.
inline CheckResult check_prop3(std::size_t draws, std::size_t samples, std::size_t m,
                               std::uint64_t seed) {
    Rng rng(seed, 6);
    bool pass = true;
    double worst_sigmas = 0.0, worst_closed = 0.0, last_mean = 0.0, last_se = 0.0;
    for (std::size_t t = 0; t < draws; ++t) {
        Rng sub = rng.substream(t);
        Matrix H = detail::random_spd(sub, m);
        Vector a = sample_gaussian(sub, m);
        Matrix A(1, m);
        for (std::size_t j = 0; j < m; ++j) A(0, j) = a[j];
        double closed = theory::expected_gap_linear_closed(H, A);
        worst_closed = std::max(worst_closed, std::abs(closed - static_cast<double>(m - 1)));
        auto mc = theory::expected_gap_linear_mc(H, A, samples, sub.substream(1));
        double sigmas = std::abs(mc.mean - static_cast<double>(m - 1)) / mc.stderr_;
        worst_sigmas = std::max(worst_sigmas, sigmas);
        last_mean = mc.mean;
        last_se = mc.stderr_;
        if (sigmas > 3.0 || worst_closed > 1e-8) pass = false;
    }
    return {"prop3", pass,
            "expect " + std::to_string(m - 1) + ", last mean=" + detail::fmt(last_mean) + " +- " +
                detail::fmt(last_se) + ", worst deviation=" + detail::fmt(worst_sigmas) +
                " sigma, worst closed-form err=" + detail::fmt(worst_closed)};
}

// Multi-constraint extension: expectation m - p for each p.
inline CheckResult check_prop4(std::size_t draws, std::size_t samples, std::size_t m,
                               std::uint64_t seed) {
    Rng rng(seed, 7);
    bool pass = true;
    double worst_sigmas = 0.0, worst_closed = 0.0;
    for (std::size_t p = 1; p < m; ++p) {
        for (std::size_t t = 0; t < draws; ++t) {
            Rng sub = rng.substream(p * 1000 + t);
            Matrix H = detail::random_spd(sub, m);
            Matrix A(p, m);
            for (std::size_t i = 0; i < A.size(); ++i) A.data()[i] = sub.gaussian();
            double expect = static_cast<double>(m - p);
            double closed = theory::expected_gap_linear_closed(H, A);
            worst_closed = std::max(worst_closed, std::abs(closed - expect));
            auto mc = theory::expected_gap_linear_mc(H, A, samples, sub.substream(1));
            worst_sigmas = std::max(worst_sigmas, std::abs(mc.mean - expect) / mc.stderr_);
        }
    }
    if (worst_sigmas > 3.0 || worst_closed > 1e-8) pass = false;
    return {"prop4", pass,
            "p=1.." + std::to_string(m - 1) + ", worst deviation=" + detail::fmt(worst_sigmas) +
                " sigma, worst closed-form err=" + detail::fmt(worst_closed)};
}

// Seber expectation identity E[x^T A x] = tr(A Sigma) + mu^T A mu vs MC.
inline CheckResult check_seber(std::size_t samples, std::size_t m, std::uint64_t seed) {
    Rng rng(seed, 8);
    double worst = 0.0;
    for (std::size_t t = 0; t < 5; ++t) {
        Rng sub = rng.substream(t);
        Matrix A = random_symmetric(sub, m);
        Vector mu = sample_gaussian(sub, m);
        Matrix Sqrt = detail::random_spd(sub, m);
        Matrix Sigma = matmul(Sqrt, transpose(Sqrt));
        double closed = theory::quad_expectation(A, mu, Sigma);
        theory::McEstimate mc{};
        {
            // sample x = mu + Sqrt w
            Rng srng = sub.substream(1);
            double mean = 0.0, m2 = 0.0;
            for (std::size_t s = 0; s < samples; ++s) {
                Vector x = mu + matvec(Sqrt, sample_gaussian(srng, m));
                double q = dot(x, matvec(A, x));
                double d = q - mean;
                mean += d / static_cast<double>(s + 1);
                m2 += d * (q - mean);
            }
            mc.mean = mean;
            mc.stderr_ = std::sqrt(m2 / static_cast<double>(samples - 1) /
                                   static_cast<double>(samples));
        }
        worst = std::max(worst, std::abs(mc.mean - closed) / mc.stderr_);
    }
    return {"seber_quad_expectation", worst <= 3.0,
            "worst deviation=" + detail::fmt(worst) + " sigma"};
}

namespace detail {

// Random (Hhat > 0, lambda, unit y) with lambda outside the spectrum on the
// requested side.
inline std::tuple<Matrix, double, Vector> random_norm_case(Rng& rng, std::size_t m, bool below) {
    Matrix Hhat = random_spd(rng, m);
    SymEigResult e = sym_eig(Hhat);
    double l1 = e.eigenvalues[0], lm = e.eigenvalues[m - 1];
    double lambda = below ? l1 - rng.uniform_in(0.05 * l1, 2.0 * l1)
                          : lm + rng.uniform_in(0.05 * lm, 2.0 * lm);
    Vector y = normalized(sample_gaussian(rng, m));
    return {Hhat, lambda, y};
}

}  // namespace detail

// Normalization-constraint expectation: closed form vs MC per sign regime,
// plus the Hhat = I, lambda = 0 reduction to m - 1.
inline CheckResult check_prop5(std::size_t triples, std::size_t samples, std::size_t m,
                               std::uint64_t seed) {
    Rng rng(seed, 9);
    double worst = 0.0;
    for (int below = 0; below < 2; ++below) {
        for (std::size_t t = 0; t < triples; ++t) {
            Rng sub = rng.substream(static_cast<std::uint64_t>(below) * 100000 + t);
            auto [Hhat, lambda, y] = detail::random_norm_case(sub, m, below == 1);
            double closed = theory::expected_gap_norm_closed(Hhat, lambda, y);
            auto mc = theory::expected_gap_norm_mc(Hhat, lambda, y, samples, sub.substream(1));
            worst = std::max(worst, std::abs(mc.mean - closed) / mc.stderr_);
        }
    }
    Rng irng(seed, 10);
    Vector y = normalized(sample_gaussian(irng, m));
    double identity_case = theory::expected_gap_norm_closed(Matrix::identity(m), 0.0, y);
    bool exact = std::abs(identity_case - static_cast<double>(m - 1)) <= 1e-12;
    return {"prop5", worst <= 3.0 && exact,
            "worst closed-vs-MC deviation=" + detail::fmt(worst) +
                " sigma; identity case=" + detail::fmt(identity_case) + " (expect " +
                std::to_string(m - 1) + ")"};
}

// Sign cases: lambda below the spectrum gives E >= 0, above gives E <= 0.
inline CheckResult check_prop6(std::size_t cases, std::size_t m, std::uint64_t seed) {
    Rng rng(seed, 11);
    bool pass = true;
    double min_below = std::numeric_limits<double>::infinity();
    double max_above = -min_below;
    for (int below = 0; below < 2; ++below) {
        for (std::size_t t = 0; t < cases; ++t) {
            Rng sub = rng.substream(static_cast<std::uint64_t>(below) * 100000 + t);
            auto [Hhat, lambda, y] = detail::random_norm_case(sub, m, below == 1);
            auto rep = theory::norm_sign_case(Hhat, lambda, y);
            if (!rep.holds) pass = false;
            if (below == 1)
                min_below = std::min(min_below, rep.value);
            else
                max_above = std::max(max_above, rep.value);
        }
    }
    return {"prop6", pass,
            "cases=" + std::to_string(cases) + " per side; min value (lambda < l1)=" +
                detail::fmt(min_below) + ", max value (lambda > lm)=" + detail::fmt(max_above)};
}

inline std::vector<CheckResult> run_all(std::size_t samples, std::uint64_t seed,
                                        const std::string& filter = "") {
    std::vector<CheckResult> all;
    auto want = [&](const char* name) {
        return filter.empty() || std::string(name).find(filter) != std::string::npos;
    };
    if (want("prop2_bounds")) all.push_back(check_prop2_bounds(1000, 10, seed));
    if (want("prop2_identity")) all.push_back(check_prop2_identity(10, seed));
    if (want("lemma_rank2")) all.push_back(check_lemma_rank2(200, 8, seed));
    if (want("lemma_spectrum")) all.push_back(check_lemma_spectrum(200, 8, seed));
    if (want("prop3")) all.push_back(check_prop3(20, samples, 10, seed));
    if (want("prop4")) all.push_back(check_prop4(3, samples, 10, seed));
    if (want("seber")) all.push_back(check_seber(std::max<std::size_t>(samples / 10, 100), 5, seed));
    if (want("prop5"))
        all.push_back(check_prop5(50, std::max<std::size_t>(samples / 5, 100), 8, seed));
    if (want("prop6")) all.push_back(check_prop6(100, 8, seed));
    return all;
}

}  // namespace declgrad::verify

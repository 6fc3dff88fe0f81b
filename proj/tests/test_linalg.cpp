#include <doctest.h>

#include "declgrad/linalg.hpp"

using namespace declgrad;

namespace {

double reconstruction_residual(const Matrix& A, const SymEigResult& e) {
    // |A Q - Q Lambda|_max
    Matrix AQ = matmul(symmetrize(A), e.eigenvectors);
    Matrix QL = matmul(e.eigenvectors, Matrix::diag(e.eigenvalues));
    return max_abs(AQ - QL);
}

double orthonormality_defect(const SymEigResult& e) {
    Matrix G = matmul(transpose(e.eigenvectors), e.eigenvectors);
    return max_abs(G - Matrix::identity(G.rows()));
}

}  // namespace

TEST_CASE("sym_eig on identity") {
    auto e = sym_eig(Matrix::identity(3));
    for (std::size_t i = 0; i < 3; ++i) CHECK(e.eigenvalues[i] == doctest::Approx(1.0));
}

TEST_CASE("sym_eig on diag(3,1) sorts ascending") {
    Matrix A(2, 2, {3, 0, 0, 1});
    auto e = sym_eig(A);
    CHECK(e.eigenvalues[0] == doctest::Approx(1.0));
    CHECK(e.eigenvalues[1] == doctest::Approx(3.0));
    CHECK(std::abs(e.eigenvectors(1, 0)) == doctest::Approx(1.0));
    CHECK(std::abs(e.eigenvectors(0, 1)) == doctest::Approx(1.0));
}

TEST_CASE("sym_eig random 6x6 from seed 7 reconstructs") {
    Rng rng(7);
    Matrix A = random_symmetric(rng, 6);
    auto e = sym_eig(A);
    CHECK(reconstruction_residual(A, e) < 1e-9);
    CHECK(orthonormality_defect(e) <= 1e-10);
}

TEST_CASE("sym_eig rejects non-square input") {
    CHECK_THROWS_AS(sym_eig(Matrix(2, 3)), DimensionError);
}

TEST_CASE("sym_eig properties on random symmetric matrices") {
    Rng rng(11);
    for (std::size_t t = 0; t < 100; ++t) {
        Rng sub = rng.substream(t);
        std::size_t n = 2 + static_cast<std::size_t>(sub.uniform() * 11) % 11;
        Matrix A = random_symmetric(sub, n);
        auto e = sym_eig(A);
        CHECK(orthonormality_defect(e) <= 1e-10);
        CHECK(reconstruction_residual(A, e) <= 1e-9 * std::max(max_abs(A), 1.0));
        for (std::size_t i = 0; i + 1 < n; ++i) CHECK(e.eigenvalues[i] <= e.eigenvalues[i + 1]);
    }
}

TEST_CASE("solve identity and diagonal") {
    Vector b{1.0, 2.0};
    Vector x = solve(Matrix::identity(2), b);
    CHECK(x[0] == doctest::Approx(1.0));
    CHECK(x[1] == doctest::Approx(2.0));

    Matrix D(2, 2, {2, 0, 0, 4});
    Vector y = solve(D, Vector{2.0, 8.0});
    CHECK(y[0] == doctest::Approx(1.0));
    CHECK(y[1] == doctest::Approx(2.0));
}

TEST_CASE("solve residual on random SPD 8x8 from seed 3") {
    Rng rng(3);
    Matrix A = random_spectrum_matrix(rng, 8, 0.1, 10.0, false);
    Vector b = sample_gaussian(rng, 8);
    Vector x = solve(A, b);
    Vector r = matvec(A, x) - b;
    CHECK(norm_inf(r) <= 1e-9 * (max_abs(A) * norm_inf(x) + norm_inf(b)));
}

TEST_CASE("solve residual on random indefinite matrices") {
    Rng rng(12);
    for (std::size_t t = 0; t < 20; ++t) {
        Rng sub = rng.substream(t);
        Matrix A = random_spectrum_matrix(sub, 6, 0.1, 10.0, true);
        Vector b = sample_gaussian(sub, 6);
        Vector x = solve(A, b);
        CHECK(norm_inf(matvec(A, x) - b) <= 1e-9 * (max_abs(A) * norm_inf(x) + norm_inf(b)));
    }
}

TEST_CASE("solve names the pivot on singular input") {
    Matrix A(2, 2, {1, 1, 1, 1});
    CHECK_THROWS_WITH_AS(solve(A, Vector{1.0, 1.0}), doctest::Contains("pivot column 1"),
                         SingularityError);
}

TEST_CASE("pinv_sym examples") {
    Matrix D(2, 2, {2, 0, 0, 0});
    Matrix P = pinv_sym(D);
    CHECK(P(0, 0) == doctest::Approx(0.5));
    CHECK(P(1, 1) == doctest::Approx(0.0));

    Matrix I2 = pinv_sym(Matrix::identity(2));
    CHECK(max_abs(I2 - Matrix::identity(2)) < 1e-12);

    // X - lambda_max I for X = diag(3,1): diag(0,-2) -> diag(0,-0.5)
    Matrix S(2, 2, {0, 0, 0, -2});
    Matrix PS = pinv_sym(S);
    CHECK(PS(0, 0) == doctest::Approx(0.0));
    CHECK(PS(1, 1) == doctest::Approx(-0.5));
}

TEST_CASE("pinv_sym satisfies A A+ A = A on random inputs") {
    Rng rng(13);
    for (std::size_t t = 0; t < 20; ++t) {
        Rng sub = rng.substream(t);
        Matrix A = random_spectrum_matrix(sub, 5, 0.1, 10.0, true);
        Matrix P = pinv_sym(A);
        CHECK(max_abs(matmul(A, matmul(P, A)) - A) <= 1e-8 * std::max(max_abs(A), 1.0));
    }
}

TEST_CASE("cond_sym examples") {
    CHECK(cond_sym(Matrix::identity(4)) == doctest::Approx(1.0));
    CHECK(cond_sym(Matrix(2, 2, {4, 0, 0, 1})) == doctest::Approx(4.0));
    CHECK(cond_sym(Matrix(2, 2, {-5, 0, 0, 2})) == doctest::Approx(2.5));
    CHECK(cond_sym(-3.0 * Matrix::identity(5)) == doctest::Approx(1.0));
    CHECK_THROWS_AS(cond_sym(Matrix(2, 2, {1, 0, 0, 0})), SingularityError);
}

TEST_CASE("gaussian sampler moments and determinism") {
    Rng rng(42);
    const std::size_t n = 1000000;
    double mean = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double x = rng.gaussian();
        double d = x - mean;
        mean += d / static_cast<double>(i + 1);
        m2 += d * (x - mean);
    }
    double var = m2 / static_cast<double>(n - 1);
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(var - 1.0) < 0.01);

    Rng a(99), b(99);
    Vector va = sample_gaussian(a, 16), vb = sample_gaussian(b, 16);
    for (std::size_t i = 0; i < 16; ++i) CHECK(va[i] == vb[i]);
}

TEST_CASE("rng substreams differ and are reproducible") {
    Rng base(5);
    Rng r0 = base.substream(0), r1 = base.substream(1);
    Vector a = sample_gaussian(r0, 4), b = sample_gaussian(r1, 4);
    CHECK(norm_inf(a - b) > 1e-6);
    Rng r0b = base.substream(0);
    Vector a2 = sample_gaussian(r0b, 4);
    CHECK(norm_inf(a - a2) == 0.0);
}

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "mmpr/error.hpp"
#include "mmpr/smallmat.hpp"

using namespace mmpr;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Classical RK4 on dx = alpha x + beta y, dy = delta y.
std::array<double, 2> rk4_upper(double alpha, double beta, double delta, double x, double y, double t, double h) {
    const auto steps = static_cast<long>(std::llround(t / h));
    auto f = [&](double xx, double yy) { return std::array<double, 2>{alpha * xx + beta * yy, delta * yy}; };
    for (long s = 0; s < steps; ++s) {
        const auto k1 = f(x, y);
        const auto k2 = f(x + 0.5 * h * k1[0], y + 0.5 * h * k1[1]);
        const auto k3 = f(x + 0.5 * h * k2[0], y + 0.5 * h * k2[1]);
        const auto k4 = f(x + h * k3[0], y + h * k3[1]);
        x += h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]);
        y += h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]);
    }
    return {x, y};
}

Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Matrix m(r, c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) m(i, j) = n(rng);
    return m;
}

}  // namespace

TEST_CASE("cholesky of identity and a 2x2 example", "[smallmat][cholesky]") {
    const auto id = cholesky(SymMatrix(Matrix::identity(2)), 1e-12);
    CHECK(id.factor.matrix() == Matrix::identity(2));
    CHECK(id.degenerate.empty());

    const auto r = cholesky(SymMatrix(Matrix(2, 2, {4, 2, 2, 5})));
    CHECK(r.factor.matrix() == Matrix(2, 2, {2, 0, 1, 2}));
    CHECK(r.degenerate.empty());
    CHECK(r.factor.reconstruct().matrix() == Matrix(2, 2, {4, 2, 2, 5}));
}

TEST_CASE("cholesky reports degenerate pivots and rejects indefinite input", "[smallmat][cholesky]") {
    const auto r = cholesky(SymMatrix(Matrix(2, 2, {1, 0, 0, 0})));
    CHECK(r.factor.matrix() == Matrix(2, 2, {1, 0, 0, 0}));
    REQUIRE(r.degenerate.size() == 1);
    CHECK(r.degenerate[0] == 1);

    const auto zero = cholesky(SymMatrix(2));
    CHECK(zero.degenerate.size() == 2);

    try {
        (void)cholesky(SymMatrix(Matrix(2, 2, {1, 2, 2, 1})));
        FAIL("expected NotPSD");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NotPSD);
    }
}

TEST_CASE("cholesky reconstructs random PD matrices", "[smallmat][cholesky][property]") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t d = 1 + static_cast<std::size_t>(trial % 10);
        const Matrix r = random_matrix(rng, d, d);
        const SymMatrix s(r * r.transpose() + Matrix::identity(d));
        const auto c = cholesky(s);
        REQUIRE(c.degenerate.empty());
        const double rel = (c.factor.reconstruct().matrix() - s.matrix()).frobenius_norm() / s.matrix().frobenius_norm();
        CHECK(rel <= 1e-12);
    }
}

TEST_CASE("triangular solve inverts multiply", "[smallmat]") {
    const LowerTriangular l(Matrix(3, 3, {2, 0, 0, 1, 3, 0, -1, 0.5, 4}));
    std::vector<double> v{1.0, -2.0, 0.25};
    const auto orig = v;
    l.multiply_in_place(v);
    CHECK_THAT(v[0], WithinAbs(2.0, 1e-15));
    CHECK_THAT(v[1], WithinAbs(-5.0, 1e-15));
    CHECK_THAT(v[2], WithinAbs(-1.0 - 1.0 + 1.0, 1e-15));
    l.solve_in_place(v);
    for (std::size_t i = 0; i < 3; ++i) CHECK_THAT(v[i], WithinAbs(orig[i], 1e-14));
}

TEST_CASE("nearest_psd clips negative eigenvalues", "[smallmat][psd]") {
    const SymMatrix id(Matrix::identity(2));
    CHECK(nearest_psd(id, 0.0) == id);

    const SymMatrix neg(Matrix(2, 2, {0, 0, 0, -1}));
    const SymMatrix fixed = nearest_psd(neg, 0.0);
    for (double v : fixed.matrix().data()) CHECK_THAT(v, WithinAbs(0.0, 1e-15));

    // eigenvalues {3, -1}, eigenvectors (1,1)/sqrt2 and (1,-1)/sqrt2: 3 * vv^T
    const SymMatrix indef(Matrix(2, 2, {1, 2, 2, 1}));
    const SymMatrix clipped = nearest_psd(indef, 0.0);
    for (double v : clipped.matrix().data()) CHECK_THAT(v, WithinAbs(1.5, 1e-14));
    CHECK(is_psd(clipped));
    CHECK_FALSE(is_psd(indef));
}

TEST_CASE("symmetric eigendecomposition reconstructs", "[smallmat][psd][property]") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t d = 1 + static_cast<std::size_t>(trial % 10);
        const SymMatrix s(random_matrix(rng, d, d));
        const SymEigen e = symmetric_eigen(s);
        Matrix r(d, d);
        for (std::size_t k = 0; k < d; ++k)
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j) r(i, j) += e.values[k] * e.vectors(i, k) * e.vectors(j, k);
        CHECK((r - s.matrix()).frobenius_norm() <= 1e-12 * std::max(1.0, s.matrix().frobenius_norm()));
        const SymMatrix p = nearest_psd(s, 0.0);
        CHECK(is_psd(p));
    }
}

TEST_CASE("SymMatrix construction symmetrizes", "[smallmat]") {
    const SymMatrix s(Matrix(2, 2, {1, 2, 4, 3}));
    CHECK(s(0, 1) == 3.0);
    CHECK(s(1, 0) == 3.0);
}

TEST_CASE("expm of the upper triangular generator", "[smallmat][expm]") {
    SECTION("decoupled") {
        const auto e = expm_2x2_upper(-1, 0, -5, 1);
        CHECK(e.slow == std::exp(-1.0));
        CHECK(e.fast == std::exp(-5.0));
        CHECK(e.coupling == 0.0);
    }
    SECTION("distinct rates against RK4") {
        const auto e = expm_2x2_upper(-1, 1, -5, 1);
        const auto ref = rk4_upper(-1, 1, -5, 0.0, 1.0, 1.0, 1e-4);
        CHECK_THAT(e.coupling, WithinRel(ref[0], 1e-10));
        CHECK_THAT(e.coupling, WithinAbs(0.090285, 1e-6));
    }
    SECTION("equal rates against RK4") {
        const auto e = expm_2x2_upper(-1, 1, -1, 1);
        const auto ref = rk4_upper(-1, 1, -1, 0.0, 1.0, 1.0, 1e-4);
        CHECK_THAT(e.coupling, WithinRel(ref[0], 1e-10));
        CHECK_THAT(e.coupling, WithinAbs(0.367879, 1e-6));
    }
    SECTION("zero time") {
        const auto e = expm_2x2_upper(-3, 2, -7, 0);
        CHECK(e.slow == 1.0);
        CHECK(e.fast == 1.0);
        CHECK(e.coupling == 0.0);
    }
    CHECK_THROWS_AS(expm_2x2_upper(-1, 1, -1, -0.5), Error);
}

TEST_CASE("expm branch switch is continuous", "[smallmat][expm][property]") {
    for (double alpha : {-5.0, -1.0, -0.1, 0.0, 0.7, 3.0}) {
        for (double t : {0.1, 1.0, 4.0}) {
            const double at = expm_2x2_upper(alpha, 1.0, alpha, t).coupling;
            CHECK_THAT(at, WithinRel(t * std::exp(alpha * t), 1e-15));
            // Both sides of the switch agree with b(alpha, alpha + h) = t e^{alpha t} (1 + h t / 2) + O(h^2).
            const double tol = 1e-8 * std::max(1.0, std::abs(alpha));
            for (double h : {1e-9, 0.99 * tol, 1.01 * tol, 2 * tol}) {
                const double expansion = at * (1.0 + 0.5 * h * t);
                CHECK(std::abs(expm_2x2_upper(alpha, 1.0, alpha + h, t).coupling - expansion) <= 1e-12 * std::abs(at));
            }
        }
    }
}

TEST_CASE("expm semigroup property", "[smallmat][expm][property]") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> rate(-5.0, 1.0);
    std::uniform_real_distribution<double> time(0.0, 2.0);
    for (int trial = 0; trial < 100; ++trial) {
        const double a = rate(rng);
        const double d = trial % 5 == 0 ? a : rate(rng);
        const double b = rate(rng);
        const double t1 = time(rng);
        const double t2 = time(rng);
        const auto lhs = expm_2x2_upper(a, b, d, t1) * expm_2x2_upper(a, b, d, t2);
        const auto rhs = expm_2x2_upper(a, b, d, t1 + t2);
        CHECK_THAT(lhs.slow, WithinAbs(rhs.slow, 1e-12));
        CHECK_THAT(lhs.fast, WithinAbs(rhs.fast, 1e-12));
        CHECK_THAT(lhs.coupling, WithinAbs(rhs.coupling, 1e-12));
    }
}

namespace {

// Forward iteration of A e(k) = B e(k-1) + (b .* eps0) eps^(k-1), one solve per step.
Vector iterate_recursion(const Matrix& a, const Matrix& b_mat, const Vector& b, double eps, const Vector& eps0,
                         const Vector& e0, std::size_t k) {
    Vector e = e0;
    for (std::size_t step = 1; step <= k; ++step) {
        Vector rhs = b_mat * e;
        for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] += b[i] * eps0[i] * std::pow(eps, double(step - 1));
        e = lu_solve(a, rhs);
    }
    return e;
}

}  // namespace

TEST_CASE("linear recursion closed form", "[smallmat][recursion]") {
    const Matrix i1 = Matrix::identity(1);
    const Vector e0{0.0};
    CHECK(solve_linear_recursion(i1, Matrix(1, 1), Vector{1.0}, 0.5, Vector{1.0}, e0, 0) == e0);
    // e(1) = 1, e(2) = 0.5, e(3) = 0.25
    const Vector e3 = solve_linear_recursion(i1, Matrix(1, 1), Vector{1.0}, 0.5, Vector{1.0}, e0, 3);
    CHECK_THAT(e3[0], WithinAbs(0.25, 1e-15));

    const Vector e2 = solve_linear_recursion(2.0 * Matrix::identity(2), Matrix::identity(2), Vector{0, 0}, 1.0,
                                             Vector{0, 0}, Vector{1, 1}, 2);
    CHECK_THAT(e2[0], WithinAbs(0.25, 1e-15));
    CHECK_THAT(e2[1], WithinAbs(0.25, 1e-15));

    CHECK_THROWS_AS(solve_linear_recursion(Matrix(2, 2), Matrix::identity(2), Vector{0, 0}, 1.0, Vector{0, 0},
                                           Vector{1, 1}, 2),
                    Error);
}

TEST_CASE("linear recursion matches forward iteration", "[smallmat][recursion][property]") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<std::size_t> dim(1, 5);
    std::uniform_int_distribution<std::size_t> iters(0, 20);
    std::uniform_real_distribution<double> eps_dist(-1.2, 1.2);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t d = dim(rng);
        const std::size_t k = iters(rng);
        // Well-conditioned A, B scaled so the iteration stays bounded.
        const Matrix a = random_matrix(rng, d, d, 0.2) + Matrix::identity(d);
        const Matrix b = random_matrix(rng, d, d, 0.8 / std::sqrt(double(d)));
        const Matrix vecs = random_matrix(rng, 3, d);
        const Vector bv(vecs.data().begin(), vecs.data().begin() + d);
        const Vector eps0(vecs.data().begin() + d, vecs.data().begin() + 2 * d);
        const Vector e0(vecs.data().begin() + 2 * d, vecs.data().end());
        const double eps = eps_dist(rng);

        const Vector closed = solve_linear_recursion(a, b, bv, eps, eps0, e0, k);
        const Vector direct = iterate_recursion(a, b, bv, eps, eps0, e0, k);
        double diff = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            diff = std::max(diff, std::abs(closed[i] - direct[i]));
            scale = std::max(scale, std::abs(direct[i]));
        }
        CHECK(diff <= 1e-10 * std::max(scale, 1e-300) + 1e-300);
    }
}

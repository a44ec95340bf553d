#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <cmath>

#include "mmpr/engine.hpp"
#include "mmpr/error.hpp"
#include "mmpr/msode.hpp"

using namespace mmpr;

namespace {

MacroAlgebra<double> scalar_algebra() {
    return {[](const double& a, const double& b) { return a + b; }, [](const double& a, const double& b) { return a - b; }};
}

// du/dt = lambda u over subintervals of length h.
Propagators<double, double> scalar_problem(double lambda, double h, bool coarse_exact = false) {
    const double exact = std::exp(lambda * h);
    const double euler = 1.0 + lambda * h;
    return {[exact](const double& u, std::size_t) { return exact * u; },
            [=](const double& u, std::size_t) { return (coarse_exact ? exact : euler) * u; }};
}

Coupling<double, double> identity_coupling() {
    Coupling<double, double> c;
    c.restrict = [](const double& u) { return u; };
    c.match = [](const double& r, const double&, Slot) { return Coupled<double, double>{r, std::nullopt, {}}; };
    c.lift = [](const double& r, Slot) { return Coupled<double, double>{r, std::nullopt, {}}; };
    return c;
}

}  // namespace

TEST_CASE("classical Parareal terminates after N iterations", "[engine][classical]") {
    const auto grid = run_classical(scalar_problem(-1.0, 0.2), scalar_algebra(), 1.0, 5, 5);
    REQUIRE(grid.iterations() == 5);
    REQUIRE(grid.slabs() == 5);
    for (std::size_t k = 0; k <= 5; ++k)
        for (std::size_t n = 0; n <= k; ++n) CHECK(grid.micro[k][n] == grid.reference[n]);
    CHECK(grid.micro[5][5] == grid.reference[5]);
}

TEST_CASE("classical Parareal with an exact coarse solver converges in one iteration", "[engine][classical]") {
    const auto grid = run_classical(scalar_problem(-1.0, 0.2, true), scalar_algebra(), 1.0, 6, 3);
    for (std::size_t n = 0; n <= 6; ++n) CHECK(grid.micro[1][n] == grid.reference[n]);
}

TEST_CASE("first classical iteration improves on the coarse sweep", "[engine][classical]") {
    const auto grid = run_classical(scalar_problem(-1.0, 0.1), scalar_algebra(), 1.0, 10, 1);
    // Oracle: direct sequential computation of both iterations.
    const double f = std::exp(-0.1);
    const double g = 0.9;
    std::vector<double> ref{1.0}, u0{1.0}, u1{1.0};
    for (int n = 0; n < 10; ++n) {
        ref.push_back(f * ref.back());
        u0.push_back(g * u0.back());
    }
    for (int n = 0; n < 10; ++n) u1.push_back(f * u0[n] + g * u1[n] - g * u0[n]);
    double e0 = 0.0, e1 = 0.0;
    for (int n = 1; n <= 10; ++n) {
        e0 = std::max(e0, std::abs(u0[n] - ref[n]));
        e1 = std::max(e1, std::abs(u1[n] - ref[n]));
        CHECK_THAT(grid.micro[1][n], Catch::Matchers::WithinAbs(u1[n], 1e-15));
    }
    const auto table = error_table(grid, [](double u) { return u; });
    CHECK_THAT(table.e_max[0], Catch::Matchers::WithinAbs(e0, 1e-15));
    CHECK_THAT(table.e_max[1], Catch::Matchers::WithinAbs(e1, 1e-15));
    CHECK(table.e_max[1] < table.e_max[0]);
}

TEST_CASE("micro-macro with identity coupling reproduces classical Parareal", "[engine][micro-macro]") {
    const auto prop = scalar_problem(-2.0, 0.3);
    const auto classical = run_classical(prop, scalar_algebra(), 1.5, 8, 8);
    const auto mm = run_micro_macro(prop, identity_coupling(), scalar_algebra(), 1.5, 8, 8);
    CHECK(mm.micro == classical.micro);
    CHECK(mm.macro == classical.macro);
    CHECK(mm.reference == classical.reference);
}

TEST_CASE("fine propagator is called exactly N*K + N times", "[engine]") {
    std::atomic<std::size_t> calls{0};
    auto prop = scalar_problem(-1.0, 0.5);
    auto inner = prop.fine;
    prop.fine = [&calls, inner](const double& u, std::size_t n) {
        ++calls;
        return inner(u, n);
    };
    const auto grid = run_micro_macro(prop, identity_coupling(), scalar_algebra(), 1.0, 7, 4, {3});
    CHECK(calls == 7 * 4 + 7);
    CHECK(grid.fine_calls == 7 * 4 + 7);
    CHECK(grid.events.size() == 7 * 5);
}

TEST_CASE("the fine propagator sees subinterval indices", "[engine]") {
    // Time-dependent fine solver: u' = t u, integrated exactly over [n h, (n + 1) h].
    const double h = 0.1;
    Propagators<double, double> prop{
        [h](const double& u, std::size_t n) {
            const double a = n * h, b = (n + 1) * h;
            return u * std::exp(0.5 * (b * b - a * a));
        },
        [h](const double& u, std::size_t n) { return u * (1.0 + n * h * h); }};
    const auto grid = run_classical(prop, scalar_algebra(), 1.0, 6, 6);
    CHECK_THAT(grid.reference[6], Catch::Matchers::WithinRel(std::exp(0.5 * 0.36), 1e-14));
    CHECK(grid.micro[6] == grid.reference);
}

TEST_CASE("results do not depend on the worker count", "[engine][parallel]") {
    msode::MsOdeParams p;
    p.alpha = -1.0;
    p.delta = -5.0;
    p.beta = 1.0;
    p.alpha_bar = -2.0;
    const auto prob = msode::make_problem(p);
    const auto one = run_micro_macro(prob.propagators, prob.coupling, prob.macro_algebra, prob.initial, 10, 10, {1});
    const auto four = run_micro_macro(prob.propagators, prob.coupling, prob.macro_algebra, prob.initial, 10, 10, {4});
    CHECK(one.micro == four.micro);
    CHECK(one.macro == four.macro);
}

TEST_CASE("propagator failures propagate out of the parallel sweep", "[engine][parallel]") {
    auto prop = scalar_problem(-1.0, 0.5);
    prop.fine = [](const double& u, std::size_t n) {
        if (n == 3) throw Error(ErrorKind::NonFinite, "boom");
        return u;
    };
    CHECK_THROWS_AS(run_classical(prop, scalar_algebra(), 1.0, 6, 2, {4}), Error);
}

TEST_CASE("repaired macro states are carried forward and logged", "[engine][micro-macro]") {
    // A coupling that clamps negative macro values to zero and reports it.
    Coupling<double, double> cpl = identity_coupling();
    cpl.match = [](const double& r, const double&, Slot) {
        Coupled<double, double> c{std::max(r, 0.0), std::nullopt, {}};
        if (r < 0.0) {
            c.repaired = 0.0;
            c.report.psd_repaired = true;
        }
        return c;
    };
    cpl.lift = [m = cpl.match](const double& r, Slot s) { return m(r, r, s); };
    Propagators<double, double> prop{[](const double& u, std::size_t) { return u - 1.0; },
                                     [](const double& u, std::size_t) { return u - 0.5; }};
    const auto grid = run_micro_macro(prop, cpl, scalar_algebra(), 1.0, 4, 2);
    bool any = false;
    for (const auto& ev : grid.events) any = any || ev.report.psd_repaired;
    CHECK(any);
    for (std::size_t k = 0; k <= 2; ++k)
        for (std::size_t n = 0; n <= 4; ++n) CHECK(grid.macro[k][n] == grid.micro[k][n]);
}

TEST_CASE("lifting variant", "[engine][lifting]") {
    SECTION("trivial lift with an exact coarse model converges in one iteration") {
        const auto prop = scalar_problem(-1.0, 0.25, true);
        const auto grid = run_lifting_variant(prop, identity_coupling(), scalar_algebra(), scalar_algebra(), 1.0, 5, 2);
        for (std::size_t n = 0; n <= 5; ++n) CHECK(grid.micro[1][n] == grid.reference[n]);
    }
    SECTION("two-scale ODE terminates after N iterations") {
        msode::MsOdeParams p;
        p.alpha = -1.0;
        p.delta = -5.0;
        p.beta = 1.0;
        p.alpha_bar = -2.0;
        const auto prob = msode::make_problem(p);
        const auto grid = run_lifting_variant(prob.propagators, prob.coupling, prob.macro_algebra, prob.micro_algebra,
                                              prob.initial, 10, 10);
        for (std::size_t n = 0; n <= 10; ++n) {
            CHECK(std::abs(grid.micro[10][n][0] - grid.reference[n][0]) <= 1e-12);
            CHECK(std::abs(grid.micro[10][n][1] - grid.reference[n][1]) <= 1e-12);
        }
    }
    SECTION("decoupled problem with exact reduced rate: slow variable exact after one iteration") {
        msode::MsOdeParams p;
        p.alpha = -1.0;
        p.delta = -5.0;
        p.beta = 0.0;
        p.alpha_bar = -1.0;
        const auto prob = msode::make_problem(p);
        const auto grid = run_lifting_variant(prob.propagators, prob.coupling, prob.macro_algebra, prob.micro_algebra,
                                              prob.initial, 10, 3);
        for (std::size_t n = 0; n <= 10; ++n) CHECK(grid.micro[1][n][0] == grid.reference[n][0]);
    }
    SECTION("micro spaces without addition are rejected") {
        const auto prop = scalar_problem(-1.0, 0.25);
        try {
            (void)run_lifting_variant(prop, identity_coupling(), scalar_algebra(), MacroAlgebra<double>{}, 1.0, 5, 2);
            FAIL("expected Unsupported");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Unsupported);
        }
    }
}

TEST_CASE("error tables", "[engine][errors]") {
    const auto grid = run_classical(scalar_problem(-1.0, 0.2), scalar_algebra(), 2.0, 5, 5);
    const auto table = error_table(grid, [](double u) { return u; });
    REQUIRE(table.e.size() == 6);
    for (double v : table.e[5]) CHECK(v <= 1e-12);
    CHECK(table.e_max[5] <= 1e-12);
    for (const auto& row : table.e) CHECK(row[0] == 0.0);

    IterateGrid<double, double> exact;
    exact.reference = {1.0, 0.5, 0.25};
    exact.micro = {exact.reference, exact.reference};
    const auto zeros = error_table(exact, [](double u) { return u; });
    for (const auto& row : zeros.e)
        for (double v : row) CHECK(v == 0.0);

    // relative: scaled by the sup norm of the reference (2.0 at n = 0)
    const auto rel = relative_error_table(grid, [](double u) { return u; });
    CHECK_THAT(rel.e_max[0], Catch::Matchers::WithinRel(table.e_max[0] / 2.0, 1e-15));
}

#include "mmpr/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include "mmpr/config.hpp"
#include "mmpr/experiments.hpp"
#include "mmpr/mcmoments.hpp"
#include "mmpr/msode.hpp"

namespace mmpr {

namespace {

std::vector<msode::MsOdeParams> ode_cases() {
    std::vector<msode::MsOdeParams> out;
    for (auto [a, d] : {std::pair{-1.0, -1.0}, std::pair{-1.0, -5.0}})
        for (double b : {0.0, 1e-4, 1e-2, 1e-1, 1.0, 2.0}) {
            msode::MsOdeParams p;
            p.alpha = a;
            p.delta = d;
            p.beta = b;
            p.alpha_bar = 2.0 * a;
            out.push_back(p);
        }
    return out;
}

msode::Grid run_ode(const msode::MsOdeParams& p) {
    const auto prob = msode::make_problem(p);
    return run_micro_macro(prob.propagators, prob.coupling, prob.macro_algebra, prob.initial, p.slabs, p.slabs);
}

CheckResult oracle_equivalence() {
    double worst = 0.0;
    for (const auto& p : ode_cases()) {
        const auto grid = run_ode(p);
        const auto measured = msode::measured_errors(grid);
        const auto oracle = msode::error_recursion_oracle(p, measured[0], p.slabs);
        for (std::size_t k = 0; k < oracle.size(); ++k)
            for (std::size_t n = 0; n < oracle[k].size(); ++n)
                for (int c = 0; c < 2; ++c) worst = std::max(worst, std::abs(oracle[k][n][c] - measured[k][n][c]));
    }
    return {"error recursion matches engine", worst <= 1e-12, "max deviation " + format_number(worst)};
}

CheckResult ode_finite_termination() {
    double worst = 0.0;
    for (const auto& p : ode_cases()) {
        const auto grid = run_ode(p);
        for (std::size_t k = 0; k <= p.slabs; ++k)
            for (std::size_t n = 0; n <= k; ++n)
                for (int c = 0; c < 2; ++c) worst = std::max(worst, std::abs(grid.micro[k][n][c] - grid.reference[n][c]));
    }
    return {"ODE finite termination", worst <= 1e-12, "max |U^k_n - U_n| for n <= k: " + format_number(worst)};
}

CheckResult bound_domination(double scale) {
    std::size_t violations = 0;
    for (const auto& p : ode_cases()) {
        const auto grid = run_ode(p);
        const auto err = msode::measured_errors(grid);
        const auto in = msode::BoundInputs::from_run(p, grid);
        for (std::size_t k = 0; k <= p.slabs; ++k) {
            double e = 0.0;
            for (std::size_t n = 1; n < err[k].size(); ++n) e = std::max(e, std::abs(err[k][n][0]));
            const double tol = 1.0 + 1e-9;
            if (e > scale * msode::linear_bound(in, k) * tol) ++violations;
            if (e > scale * msode::superlinear_bound(in, k) * tol) ++violations;
        }
    }
    return {"bounds dominate measured error", violations == 0, std::to_string(violations) + " violations"};
}

CheckResult matching_consistency() {
    std::mt19937_64 gen(11);
    std::normal_distribution<double> z;
    double worst_mean = 0.0, worst_cov = 0.0;
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t d = 1 + trial % 3;
        mc::Ensemble prior(d, 500);
        for (double& v : prior.states) v = z(gen) * (1.0 + std::abs(z(gen)));
        Matrix b(d, d);
        Vector mean(d);
        for (std::size_t i = 0; i < d; ++i) {
            mean[i] = 3.0 * z(gen);
            for (std::size_t j = 0; j < d; ++j) b(i, j) = z(gen);
        }
        const mc::MomentState target(mean, SymMatrix(b * b.transpose() + 0.1 * Matrix::identity(d)));
        const auto s = mc::restrict_ensemble(mc::match(target, prior, mc::RepairPolicy::Clip, {}).ensemble);
        for (std::size_t i = 0; i < d; ++i) worst_mean = std::max(worst_mean, std::abs(s.mean[i] - mean[i]));
        worst_cov = std::max(worst_cov, (s.cov.matrix() - target.cov.matrix()).frobenius_norm() /
                                            std::max(1.0, target.cov.matrix().frobenius_norm()));
    }
    return {"matching reproduces target moments", worst_mean <= 1e-12 && worst_cov <= 1e-8,
            "mean " + format_number(worst_mean) + ", covariance " + format_number(worst_cov)};
}

ExperimentConfig small_sde(std::size_t workers) {
    ExperimentConfig cfg;
    cfg.experiment = Experiment::SdeParareal;
    cfg.t_final = 1.0;
    cfg.n_slabs = 4;
    cfg.particles = 300;
    cfg.reps = 2;
    cfg.seed = 5;
    cfg.workers = workers;
    return cfg;
}

CheckResult sde_finite_termination() {
    const auto r = sde_parareal(small_sde(1));
    double worst = 0.0;
    for (const auto& e : r.errors)
        if (e.k == 4) worst = std::max(worst, e.rel_err);
    return {"SDE finite termination", worst <= 1e-12, "relative error at k = N: " + format_number(worst)};
}

CheckResult determinism() {
    const auto a = sde_parareal(small_sde(1));
    const auto b = sde_parareal(small_sde(3));
    ExperimentConfig ode;
    ode.workers = 1;
    const std::string o1 = ode_convergence_csv(ode_convergence(ode));
    ode.workers = 4;
    const std::string o4 = ode_convergence_csv(ode_convergence(ode));
    const bool same = sde_parareal_err_csv(a) == sde_parareal_err_csv(b) &&
                      sde_parareal_iterates_csv(a) == sde_parareal_iterates_csv(b) &&
                      sde_parareal_diagnostics_csv(a) == sde_parareal_diagnostics_csv(b) && o1 == o4;
    return {"outputs independent of worker count", same, same ? "byte-identical" : "outputs differ"};
}

}  // namespace

std::vector<CheckResult> run_selftest(const SelftestOptions& opts) {
    return {oracle_equivalence(),     ode_finite_termination(), bound_domination(opts.bound_scale),
            matching_consistency(),   sde_finite_termination(), determinism()};
}

bool report(const std::vector<CheckResult>& results, std::ostream& out) {
    bool ok = true;
    for (const auto& r : results) {
        out << (r.pass ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
        ok = ok && r.pass;
    }
    return ok;
}

}  // namespace mmpr

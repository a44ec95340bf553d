#include "mmpr/msode.hpp"

#include <algorithm>
#include <cmath>

#include "mmpr/error.hpp"

namespace mmpr::msode {

double MsOdeParams::fast_rate(double zeta_timescale, double epsilon) {
    if (!(epsilon > 0.0)) throw Error(ErrorKind::InvalidArgument, "epsilon must be positive");
    return zeta_timescale / epsilon;
}

void MsOdeParams::validate() const {
    if (!(dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "dt must be positive");
    if (slabs < 1) throw Error(ErrorKind::InvalidArgument, "need at least one subinterval");
    for (double v : {alpha, beta, delta, alpha_bar, x0, y0})
        if (!std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "ODE parameters must be finite");
}

PropagatorMatrices propagator_matrices(const MsOdeParams& p) {
    return {expm_2x2_upper(p.alpha, p.beta, p.delta, p.dt), std::exp(p.alpha_bar * p.dt)};
}

Vec2 fine_prop(const Vec2& u, const MsOdeParams& p) {
    const UpperTri2x2Exp a = expm_2x2_upper(p.alpha, p.beta, p.delta, p.dt);
    return {a.slow * u[0] + a.coupling * u[1], a.fast * u[1]};
}

double coarse_prop(double x, const MsOdeParams& p) {
    return std::exp(p.alpha_bar * p.dt) * x;
}

Vec2 exact_solution(const MsOdeParams& p, double t) {
    const UpperTri2x2Exp e = expm_2x2_upper(p.alpha, p.beta, p.delta, t);
    return {e.slow * p.x0 + e.coupling * p.y0, e.fast * p.y0};
}

Problem make_problem(const MsOdeParams& p) {
    p.validate();
    const PropagatorMatrices m = propagator_matrices(p);
    Problem prob;
    prob.propagators.fine = [a = m.fine](const Vec2& u, std::size_t) {
        return Vec2{a.slow * u[0] + a.coupling * u[1], a.fast * u[1]};
    };
    prob.propagators.coarse = [g = m.coarse](const double& x, std::size_t) { return g * x; };
    prob.coupling.restrict = [](const Vec2& u) { return restrict_state(u); };
    prob.coupling.match = [](const double& x, const Vec2& prior, Slot) {
        return Coupled<Vec2, double>{match_state(x, prior), std::nullopt, {}};
    };
    prob.coupling.lift = [](const double& x, Slot) {
        return Coupled<Vec2, double>{lift_state(x), std::nullopt, {}};
    };
    prob.macro_algebra.add = [](const double& a, const double& b) { return a + b; };
    prob.macro_algebra.sub = [](const double& a, const double& b) { return a - b; };
    prob.micro_algebra.add = [](const Vec2& a, const Vec2& b) { return Vec2{a[0] + b[0], a[1] + b[1]}; };
    prob.micro_algebra.sub = [](const Vec2& a, const Vec2& b) { return Vec2{a[0] - b[0], a[1] - b[1]}; };
    prob.initial = {p.x0, p.y0};
    return prob;
}

std::vector<std::vector<Vec2>> measured_errors(const Grid& grid) {
    std::vector<std::vector<Vec2>> e;
    for (const auto& row : grid.micro) {
        std::vector<Vec2> r(row.size());
        for (std::size_t n = 0; n < row.size(); ++n) {
            r[n] = {row[n][0] - grid.reference[n][0], row[n][1] - grid.reference[n][1]};
        }
        e.push_back(std::move(r));
    }
    return e;
}

std::vector<std::vector<Vec2>> error_recursion_oracle(const MsOdeParams& p, const std::vector<Vec2>& e0,
                                                      std::size_t iterations) {
    const PropagatorMatrices m = propagator_matrices(p);
    const double f = m.fine.slow;
    const double b = m.fine.coupling;
    const double d = m.fine.fast;
    const double g = m.coarse;

    std::vector<std::vector<Vec2>> e{e0};
    for (std::size_t k = 0; k < iterations; ++k) {
        const auto& prev = e.back();
        std::vector<Vec2> next(prev.size(), Vec2{0.0, 0.0});
        for (std::size_t n = 0; n + 1 < prev.size(); ++n) {
            // (A - B) e^k_n + B e^{k+1}_n
            next[n + 1][0] = (f - g) * prev[n][0] + b * prev[n][1] + g * next[n][0];
            next[n + 1][1] = d * prev[n][1];
        }
        e.push_back(std::move(next));
    }
    return e;
}

double gamma_coefficient(const MsOdeParams& p) {
    return expm_2x2_upper(p.alpha, p.beta, p.delta, p.dt).coupling;
}

BoundInputs BoundInputs::from_run(const MsOdeParams& p, const Grid& grid) {
    const PropagatorMatrices m = propagator_matrices(p);
    BoundInputs in;
    in.slow = m.fine.slow;
    in.coarse = m.coarse;
    in.fast = m.fine.fast;
    in.gamma = gamma_coefficient(p);
    in.slabs = p.slabs;
    const auto& row = grid.micro.at(0);
    for (std::size_t n = 1; n < row.size(); ++n) {
        in.e_x0_max = std::max(in.e_x0_max, std::abs(row[n][0] - grid.reference[n][0]));
        in.e_y0_max = std::max(in.e_y0_max, std::abs(row[n][1] - grid.reference[n][1]));
    }
    return in;
}

namespace {

/// prod_{j=1}^{i} (N - j) / i!
double falling_ratio(std::size_t slabs, std::size_t i) {
    double r = 1.0;
    for (std::size_t j = 1; j <= i; ++j) r *= (static_cast<double>(slabs) - static_cast<double>(j)) / static_cast<double>(j);
    return r;
}

double binomial(std::size_t n, std::size_t k) {
    if (k > n) return 0.0;
    double r = 1.0;
    for (std::size_t j = 1; j <= k; ++j) r *= static_cast<double>(n - k + j) / static_cast<double>(j);
    return r;
}

}  // namespace

double linear_bound(const BoundInputs& in, std::size_t k) {
    if (in.coarse == 1.0) throw Error(ErrorKind::DegenerateBound, "linear bound undefined for G == 1");
    const double ratio = std::abs(in.slow - in.coarse) / (1.0 - in.coarse);
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        sum += std::pow(ratio, static_cast<double>(i)) * std::pow(in.fast, static_cast<double>(k - 1 - i));
    }
    return std::pow(ratio, static_cast<double>(k)) * in.e_x0_max
        + std::abs(in.gamma) / (1.0 - in.coarse) * sum * in.e_y0_max;
}

double bound_amplification(const BoundInputs& in, std::size_t k) {
    const double g = std::abs(in.coarse);
    const double gn = std::pow(g, static_cast<double>(in.slabs));
    if (g < 1.0) return (1.0 - gn) / (1.0 - g);
    return gn * binomial(in.slabs - 1, k);
}

double superlinear_bound(const BoundInputs& in, std::size_t k) {
    if (k > in.slabs) throw Error(ErrorKind::InvalidArgument, "superlinear bound needs k <= N");
    const double diff = std::abs(in.slow - in.coarse);
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        sum += std::pow(diff, static_cast<double>(i)) * falling_ratio(in.slabs, i)
             * std::pow(in.fast, static_cast<double>(k - 1 - i));
    }
    return std::pow(diff, static_cast<double>(k)) * falling_ratio(in.slabs, k) * in.e_x0_max
        + std::abs(in.gamma) * bound_amplification(in, k) * sum * in.e_y0_max;
}

std::vector<double> nontight_bound(const MsOdeParams& p, const std::vector<double>& e0_norms,
                                   std::size_t iterations) {
    const PropagatorMatrices m = propagator_matrices(p);
    const Matrix a(2, 2, {m.fine.slow, m.fine.coupling, 0.0, m.fine.fast});
    const Matrix b(2, 2, {m.coarse, 0.0, 0.0, 0.0});
    const double norm_diff = (a - b).inf_norm();
    const double norm_coarse = b.inf_norm();

    auto row_max = [](const std::vector<double>& r) {
        double v = 0.0;
        for (std::size_t n = 1; n < r.size(); ++n) v = std::max(v, r[n]);
        return v;
    };
    std::vector<double> maxima{row_max(e0_norms)};
    std::vector<double> prev = e0_norms;
    for (std::size_t k = 0; k < iterations; ++k) {
        std::vector<double> next(prev.size(), 0.0);
        for (std::size_t n = 0; n + 1 < prev.size(); ++n) next[n + 1] = norm_diff * prev[n] + norm_coarse * next[n];
        maxima.push_back(row_max(next));
        prev = std::move(next);
    }
    return maxima;
}

double fast_error_bound(const MsOdeParams& p, double e_y0_max, std::size_t k) {
    return std::pow(std::exp(p.delta * p.dt), static_cast<double>(k)) * e_y0_max;
}

}  // namespace mmpr::msode

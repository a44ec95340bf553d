#pragma once

// Two-scale linear test problem
//
//   d/dt [x, y] = [[alpha, beta], [0, delta]] [x, y],
//
// with the reduced model dX/dt = alpha_bar X for the slow variable. The fine
// propagator is the exact flow over one subinterval, the coarse propagator
// the exact flow of the reduced model. Also hosts the error recursion and
// the convergence bounds for micro-macro Parareal on this problem.

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "mmpr/engine.hpp"
#include "mmpr/smallmat.hpp"

namespace mmpr::msode {

using Vec2 = std::array<double, 2>;

struct MsOdeParams {
    double alpha = -1.0;
    double beta = 1.0;
    double delta = -1.0;
    double alpha_bar = -2.0;
    double dt = 1.0;
    std::size_t slabs = 10;
    double x0 = 1.0;
    double y0 = 1.0;

    /// delta = zeta_timescale / epsilon.
    static double fast_rate(double zeta_timescale, double epsilon);
    /// alpha_bar = alpha (1 + zeta_perturb).
    static double perturbed_rate(double alpha, double zeta_perturb) { return alpha * (1.0 + zeta_perturb); }

    /// Hypothesis of the linear/superlinear bounds: alpha < 0 and delta < 0.
    bool bounds_apply() const noexcept { return alpha < 0.0 && delta < 0.0; }
    void validate() const;
};

struct PropagatorMatrices {
    UpperTri2x2Exp fine;  ///< exp(K dt)
    double coarse = 1.0;  ///< exp(alpha_bar dt)
};

PropagatorMatrices propagator_matrices(const MsOdeParams& p);

Vec2 fine_prop(const Vec2& u, const MsOdeParams& p);
double coarse_prop(double x, const MsOdeParams& p);

inline double restrict_state(const Vec2& u) { return u[0]; }
inline Vec2 match_state(double x, const Vec2& prior) { return {x, prior[1]}; }
inline Vec2 lift_state(double x) { return {x, 0.0}; }

/// Closed-form solution at time t from (x0, y0).
Vec2 exact_solution(const MsOdeParams& p, double t);

struct Problem {
    Propagators<Vec2, double> propagators;
    Coupling<Vec2, double> coupling;
    MacroAlgebra<double> macro_algebra;
    MacroAlgebra<Vec2> micro_algebra;
    Vec2 initial;
};

Problem make_problem(const MsOdeParams& p);

using Grid = IterateGrid<Vec2, double>;

/// Error vectors e[k][n] = micro[k][n] - reference[n].
std::vector<std::vector<Vec2>> measured_errors(const Grid& grid);

/// Iterates e^{k+1}_{n+1} = (A - B) e^k_n + B e^{k+1}_n with e^k_0 = 0,
/// starting from the iteration-zero errors e0[n], n = 0..N.
std::vector<std::vector<Vec2>> error_recursion_oracle(const MsOdeParams& p, const std::vector<Vec2>& e0,
                                                      std::size_t iterations);

/// Upper-right entry of exp(K dt).
double gamma_coefficient(const MsOdeParams& p);

struct BoundInputs {
    double slow = 0.0;      ///< F = exp(alpha dt)
    double coarse = 0.0;    ///< G = exp(alpha_bar dt)
    double fast = 0.0;      ///< d = exp(delta dt)
    double gamma = 0.0;
    double e_x0_max = 0.0;  ///< max_n |x^0_n - x_n|
    double e_y0_max = 0.0;  ///< max_n |y^0_n - y_n|
    std::size_t slabs = 0;

    /// Bound inputs with the two zeroth-iterate errors measured from a run.
    static BoundInputs from_run(const MsOdeParams& p, const Grid& grid);
};

/// Throws Error(DegenerateBound) when G == 1.
double linear_bound(const BoundInputs& in, std::size_t k);
double superlinear_bound(const BoundInputs& in, std::size_t k);
/// Amplification constant of the superlinear bound's second term.
double bound_amplification(const BoundInputs& in, std::size_t k);

/// Per-k maxima over n of the scalar recursion
///   E^{k+1}_{n+1} = |A - B| E^k_n + |B| E^{k+1}_n,  E^k_0 = 0,
/// with infinity operator norms, started from e0_norms[n].
std::vector<double> nontight_bound(const MsOdeParams& p, const std::vector<double>& e0_norms,
                                   std::size_t iterations);

/// exp(delta dt)^k e_y0_max.
double fast_error_bound(const MsOdeParams& p, double e_y0_max, std::size_t k);

}  // namespace mmpr::msode

#pragma once

// Monte Carlo / moment-model coupling for multidimensional SDEs
//
//   dX = a(X, Lambda, t) dt + b(X, Lambda, t) dW,   Lambda = E[psi(X)],
//
// Micro state: a particle ensemble advanced by Euler-Maruyama over
// pre-indexed Brownian increments. Macro state: mean and covariance advanced
// by the moment equations obtained from a second-order expansion of the
// drift around the mean.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmpr/engine.hpp"
#include "mmpr/smallmat.hpp"

namespace mmpr::mc {

/// P particles in R^d, row-major.
struct Ensemble {
    std::size_t dim = 0;
    std::vector<double> states;
    // provenance
    std::uint64_t seed = 0;
    std::optional<std::size_t> subinterval;

    Ensemble() = default;
    Ensemble(std::size_t d, std::size_t particles) : dim(d), states(d * particles, 0.0) {}

    std::size_t size() const noexcept { return dim == 0 ? 0 : states.size() / dim; }
    std::span<double> particle(std::size_t p) { return {states.data() + p * dim, dim}; }
    std::span<const double> particle(std::size_t p) const { return {states.data() + p * dim, dim}; }
};

struct SdeModel {
    using Field = std::function<void(std::span<const double> x, std::span<const double> lambda, double t,
                                     std::span<double> out)>;

    std::size_t dim = 0;
    std::size_t noise_dim = 0;
    std::size_t observable_dim = 0;  ///< size of Lambda; 0 disables the mean-field hook

    Field drift;      ///< out: dim
    Field diffusion;  ///< out: dim x noise_dim, row-major
    std::function<void(std::span<const double> x, std::span<double> out)> psi;

    /// Jacobian of the drift at the mean, dim x dim.
    std::function<Matrix(std::span<const double> m, std::span<const double> lambda, double t)> drift_jacobian;
    /// One dim x dim Jacobian per Brownian direction (column of b); empty
    /// callable or empty result means state-independent noise.
    std::function<std::vector<Matrix>(std::span<const double> m, std::span<const double> lambda, double t)>
        diffusion_jacobians;
    /// Row j holds the row-major flattened Hessian of drift component j:
    /// dim x (dim * dim).
    std::function<Matrix(std::span<const double> m)> drift_hessians;

    std::function<Ensemble(std::uint64_t seed, std::size_t particles)> initial_sampler;
};

/// Mean-field observable at a single point (Lambda_E = psi(m)).
std::vector<double> observable_at(const SdeModel& model, std::span<const double> x);
/// Ensemble average of psi; sequential reduction over particles.
std::vector<double> observable_mean(const SdeModel& model, const Ensemble& ens);

/// Brownian increments indexed by (subinterval, step, particle, direction),
/// generated on demand from a counter-based stream. Identical for identical
/// (seed, particles, steps, noise_dim) and independent of evaluation order.
class BrownianTable {
public:
    BrownianTable(std::uint64_t seed, std::size_t particles, std::size_t steps, std::size_t noise_dim,
                  double inner_dt);

    std::uint64_t seed() const noexcept { return seed_; }
    std::size_t particles() const noexcept { return particles_; }
    std::size_t steps() const noexcept { return steps_; }
    std::size_t noise_dim() const noexcept { return noise_dim_; }
    double inner_dt() const noexcept { return inner_dt_; }

    /// Writes the noise_dim increments (already scaled by sqrt(inner_dt)).
    void increments(std::size_t subinterval, std::size_t step, std::size_t particle, std::span<double> out) const;

private:
    std::uint64_t seed_;
    std::size_t particles_;
    std::size_t steps_;
    std::size_t noise_dim_;
    double inner_dt_;
    double scale_;
};

/// Itô Euler-Maruyama over `table.steps()` steps of table.inner_dt() from
/// time t0, using the increments of `subinterval`. Lambda is re-estimated
/// from the ensemble at the start of each step. Throws Error(NonFinite) with
/// the step and particle index on blow-up.
Ensemble em_propagate(const Ensemble& ens, const SdeModel& model, const BrownianTable& table,
                      std::size_t subinterval, double t0, std::size_t workers = 1);

struct MomentState {
    Vector mean;
    SymMatrix cov;
    bool psd = true;

    MomentState() = default;
    MomentState(Vector m, SymMatrix c);

    std::size_t dim() const noexcept { return mean.size(); }
    friend bool operator==(const MomentState& a, const MomentState& b) {
        return a.mean == b.mean && a.cov == b.cov;
    }
};

struct MomentRate {
    Vector mean;
    SymMatrix cov;
};

/// dM/dt = a(M, psi(M), t) + 1/2 H vec(Sigma),
/// dSigma/dt = A1 Sigma + Sigma A1^T + sum_w B1_w Sigma B1_w^T + b b^T.
MomentRate moment_rhs(const MomentState& s, const SdeModel& model, double t);

/// Forward Euler on moment_rhs with `steps` steps of size inner_dt from t0.
MomentState moment_propagate(const MomentState& s, const SdeModel& model, double t0, double inner_dt,
                             std::size_t steps);

/// Sample mean and population (1/P) covariance; two-pass, sequential order.
MomentState restrict_ensemble(const Ensemble& ens);

enum class RepairPolicy {
    Clip,    ///< eigenvalue clipping at 0 for a non-PSD target covariance
    Strict,  ///< Error(UnrepairableCovariance) instead
};

/// Keys the resampling stream of one matching call.
struct ResampleKey {
    std::uint64_t seed = 0;
    std::size_t iteration = 0;
    std::size_t index = 0;
};

struct MatchResult {
    Ensemble ensemble;
    MomentState target;  ///< the target actually matched (after repair)
    bool psd_repaired = false;
    std::vector<std::size_t> resampled;  ///< coordinates redrawn from N(0, 1)
};

/// Y = A (X - E[X]) + M with A = U Q^-1, Sigma = U U^T, Cov[X] = Q Q^T.
/// Coordinates whose pivot in Q is degenerate are redrawn for every
/// particle from the stream keyed by `key` before factoring again.
/// Returns the prior unchanged when the target equals its moments exactly.
MatchResult match(const MomentState& target, const Ensemble& prior, RepairPolicy policy, const ResampleKey& key);

/// Componentwise affine operations; the covariance is re-symmetrized and the
/// PSD flag recomputed.
MomentState moment_add(const MomentState& a, const MomentState& b);
MomentState moment_sub(const MomentState& a, const MomentState& b);
MacroAlgebra<MomentState> moment_algebra();

/// Moment components in the order mean[0..d), then the lower triangle of
/// the covariance row by row: for d = 2 that is M_x, M_y, C_xx, C_xy, C_yy.
std::vector<double> moment_components(const MomentState& s);
std::vector<std::string> moment_component_names(std::size_t dim);

/// dx = (alpha x - x y) dt, dy = (-y + x^2) dt + sigma dW, started from the
/// point mass at (1, 1). No mean-field term.
SdeModel roberts_model(double alpha, double sigma);

/// dX = -theta X dt + sigma dW per coordinate (d independent copies), initial
/// law N(mean0, var0) per coordinate.
SdeModel ou_model(std::size_t dim, double theta, double sigma, double mean0, double var0);

struct PararealSettings {
    double t_final = 10.0;
    std::size_t slabs = 10;
    double inner_dt = 0.02;
    std::size_t particles = 10000;
    std::uint64_t seed = 1;
    std::size_t particle_workers = 1;
    RepairPolicy policy = RepairPolicy::Clip;

    double slab_length() const { return t_final / static_cast<double>(slabs); }
    /// Inner steps per subinterval: round(slab_length / inner_dt), at least 1.
    std::size_t steps_per_slab() const;
};

/// Everything the engine needs for Monte Carlo / moments Parareal on one
/// model: Euler-Maruyama fine propagator, forward-Euler moment coarse
/// propagator, restriction, matching (with its keyed resampling stream) and
/// lifting by matching against the cached initial ensemble.
class McMomentsProblem {
public:
    McMomentsProblem(SdeModel model, PararealSettings settings);

    const SdeModel& model() const noexcept { return model_; }
    const PararealSettings& settings() const noexcept { return settings_; }
    const Ensemble& initial() const noexcept { return initial_; }
    const BrownianTable& table() const noexcept { return table_; }

    Ensemble fine(const Ensemble& ens, std::size_t n) const;
    MomentState coarse(const MomentState& s, std::size_t n) const;

    Propagators<Ensemble, MomentState> propagators() const;
    Coupling<Ensemble, MomentState> coupling() const;

private:
    Coupled<Ensemble, MomentState> couple(const MomentState& target, const Ensemble& prior, Slot slot) const;

    SdeModel model_;
    PararealSettings settings_;
    BrownianTable table_;
    Ensemble initial_;
};

using Grid = IterateGrid<Ensemble, MomentState>;

}  // namespace mmpr::mc

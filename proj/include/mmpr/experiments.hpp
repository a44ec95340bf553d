#pragma once

// The three experiments behind the CLI. Each has a compute function that
// returns plain rows and a runner that writes CSVs plus the resolved config.

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "mmpr/config.hpp"

namespace mmpr {

/// Fills per-experiment defaults (iteration count, sigma list) in place.
ExperimentConfig resolve(ExperimentConfig cfg);

// ---- two-scale ODE convergence and bounds --------------------------------

struct OdeConvergenceRow {
    double alpha, delta, beta;
    std::size_t k;
    double e_meas;  ///< max_n |x^k_n - x_n|
    double bound_linear, bound_superlinear, bound_nontight, bound_min;  ///< NaN where undefined
};

/// The (alpha, delta) x beta grid, narrowed to single values by the
/// optional alpha/delta/beta settings.
std::vector<OdeConvergenceRow> ode_convergence(const ExperimentConfig& cfg);

// ---- Monte Carlo vs moment model trajectories ----------------------------

using Moments5 = std::array<double, 5>;  ///< M_x, M_y, C_xx, C_xy, C_yy

struct MomentTrajectoryRow {
    double t;
    double sigma;
    bool mc;  ///< source: Monte Carlo ensemble or moment model
    Moments5 m;
};

/// Rows ordered by sigma, then time, then source (mc before moment).
std::vector<MomentTrajectoryRow> sde_moments(const ExperimentConfig& cfg);

/// Per sigma (in row order): sup over time of |moment - mc| for M_x and M_y.
struct MeanErrorBySigma {
    double sigma;
    double sup_mx, sup_my;
};
std::vector<MeanErrorBySigma> moment_model_mean_error(const std::vector<MomentTrajectoryRow>& rows);

// ---- Monte Carlo / moments Parareal ------------------------------------

struct PararealErrorRow {
    std::size_t k;
    std::size_t component;  ///< index into Moments5
    double rel_err;         ///< mean over repetitions of sup_n error / sup_n |reference|
};

struct PararealIterateRow {
    std::size_t k, n;
    double t;
    Moments5 m;
};

struct PararealDiagnosticRow {
    std::size_t k, n;
    std::size_t psd_repairs;  ///< summed over repetitions
    std::size_t resampled;    ///< resampled coordinates, summed over repetitions
};

struct SdePararealResult {
    std::vector<PararealErrorRow> errors;
    std::vector<PararealIterateRow> iterates;  ///< first repetition
    std::vector<PararealDiagnosticRow> diagnostics;
};

SdePararealResult sde_parareal(const ExperimentConfig& cfg);

// ---- output --------------------------------------------------------------

std::string ode_convergence_csv(const std::vector<OdeConvergenceRow>& rows);
std::string sde_moments_csv(const std::vector<MomentTrajectoryRow>& rows);
std::string sde_parareal_err_csv(const SdePararealResult& r);
std::string sde_parareal_iterates_csv(const SdePararealResult& r);
std::string sde_parareal_diagnostics_csv(const SdePararealResult& r);

/// Runs the configured experiment and writes its CSVs and `<experiment>.cfg`
/// into cfg.out_dir (created if missing). Returns the written file paths.
std::vector<std::string> run_experiment(const ExperimentConfig& cfg);

}  // namespace mmpr

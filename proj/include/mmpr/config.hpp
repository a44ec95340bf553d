#pragma once

// Experiment configuration: a flat key=value file format shared by the
// CLI flags. Unset optional keys fall back to per-experiment defaults.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mmpr {

enum class Experiment { OdeConvergence, SdeMoments, SdeParareal, Selftest };

std::string_view experiment_name(Experiment e);
std::optional<Experiment> parse_experiment(std::string_view name);

struct ExperimentConfig {
    Experiment experiment = Experiment::OdeConvergence;

    // two-scale ODE; unset alpha/beta/delta sweep the default grid
    std::optional<double> alpha;  ///< also the Roberts drift parameter (default 1)
    std::optional<double> beta;
    std::optional<double> delta;
    std::optional<double> alpha_bar;  ///< default alpha (1 + zeta_perturb)
    double zeta_perturb = 1.0;
    double dt = 1.0;
    double x0 = 1.0;
    double y0 = 1.0;

    // Parareal grid
    std::size_t n_slabs = 10;
    std::optional<std::size_t> iters;  ///< default n_slabs

    // SDE experiments
    double t_final = 10.0;
    std::size_t particles = 100000;
    double inner_dt = 0.02;
    std::vector<double> sigma;  ///< empty: per-experiment default
    std::uint64_t seed = 1;
    std::size_t reps = 20;

    // execution
    std::size_t workers = 1;
    std::string out_dir = ".";

    std::size_t iterations() const { return iters.value_or(n_slabs); }

    /// Throws Error(InvalidArgument) on out-of-range values.
    void validate() const;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// printf("%.17g") equivalent; round-trips every finite double.
std::string format_number(double v);

/// Applies key=value lines ('#' starts a comment) on top of `cfg`.
/// Throws Error(InvalidArgument) on unknown keys or malformed values.
void apply_config_text(ExperimentConfig& cfg, std::string_view text);
void apply_config_file(ExperimentConfig& cfg, const std::string& path);

/// Assigns one key; keys are the long flag names without leading dashes.
void set_config_value(ExperimentConfig& cfg, std::string_view key, std::string_view value);

/// Every set key, one per line, in a fixed order.
std::string serialize_config(const ExperimentConfig& cfg);

}  // namespace mmpr

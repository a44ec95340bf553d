#include "mmpr/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mmpr/config.hpp"
#include "mmpr/error.hpp"
#include "mmpr/experiments.hpp"
#include "mmpr/selftest.hpp"

namespace mmpr {

namespace {

constexpr const char* kValueFlags[] = {"alpha",    "beta",      "delta",     "alpha-bar", "zeta-perturb",
                                       "dt",       "n-slabs",   "iters",     "t-final",   "particles",
                                       "inner-dt", "seed",      "reps",      "workers",   "out-dir"};

struct FlagValues {
    std::map<std::string, std::string> scalars;
    std::vector<std::string> sigma;
    std::string config_path;
    double bound_scale = 1.0;
};

void add_flags(CLI::App* cmd, FlagValues& v) {
    for (const char* name : kValueFlags) cmd->add_option(std::string("--") + name, v.scalars[name]);
    cmd->add_option("--sigma", v.sigma, "noise level(s), comma separated")->delimiter(',');
    cmd->add_option("--config", v.config_path, "key=value file; flags take precedence");
}

ExperimentConfig build_config(Experiment e, const CLI::App* cmd, const FlagValues& v) {
    ExperimentConfig cfg;
    if (!v.config_path.empty()) apply_config_file(cfg, v.config_path);
    cfg.experiment = e;
    for (const char* name : kValueFlags)
        if (cmd->count(std::string("--") + name) > 0) set_config_value(cfg, name, v.scalars.at(name));
    if (cmd->count("--sigma") > 0) {
        std::string joined;
        for (const auto& s : v.sigma) joined += (joined.empty() ? "" : ",") + s;
        set_config_value(cfg, "sigma", joined);
    }
    cfg.validate();
    return cfg;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Micro-macro Parareal experiments"};
    app.require_subcommand(1);
    FlagValues values;
    std::map<Experiment, CLI::App*> cmds;
    cmds[Experiment::OdeConvergence] =
        app.add_subcommand("ode-convergence", "two-scale ODE: measured errors against the convergence bounds");
    cmds[Experiment::SdeMoments] =
        app.add_subcommand("sde-moments", "Monte Carlo ensemble versus moment model, per noise level");
    cmds[Experiment::SdeParareal] =
        app.add_subcommand("sde-parareal", "Monte Carlo / moments Parareal errors and iterates");
    cmds[Experiment::Selftest] = app.add_subcommand("selftest", "fast invariant checks");
    for (auto& [e, cmd] : cmds) add_flags(cmd, values);
    cmds[Experiment::Selftest]->add_option("--mutate-bound-scale", values.bound_scale)->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInvalidConfig;
    }

    try {
        for (const auto& [e, cmd] : cmds) {
            if (!cmd->parsed()) continue;
            const ExperimentConfig cfg = build_config(e, cmd, values);
            if (e == Experiment::Selftest) {
                SelftestOptions opts;
                opts.bound_scale = values.bound_scale;
                return report(run_selftest(opts), out) ? kExitOk : kExitNumericalFailure;
            }
            for (const auto& path : run_experiment(cfg)) out << path << '\n';
            return kExitOk;
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return e.kind() == ErrorKind::InvalidArgument ? kExitInvalidConfig : kExitNumericalFailure;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitInvalidConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitNumericalFailure;
    }
    return kExitInvalidConfig;
}

int run_cli(int argc, const char* const* argv) {
    return run_cli(argc, argv, std::cout, std::cerr);
}

}  // namespace mmpr

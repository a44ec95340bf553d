#include "mmpr/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>

#include "mmpr/error.hpp"
#include "mmpr/mcmoments.hpp"
#include "mmpr/msode.hpp"

namespace mmpr {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::array<std::string_view, 5> kComponents{"M_x", "M_y", "C_xx", "C_xy", "C_yy"};

Moments5 five(const mc::MomentState& s) {
    const auto c = mc::moment_components(s);
    return {c[0], c[1], c[2], c[3], c[4]};
}

std::size_t inner_steps(const ExperimentConfig& cfg) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.t_final / cfg.inner_dt)));
}

template <class... Ts>
void csv_row(std::string& out, const Ts&... fields) {
    bool first = true;
    auto one = [&](const auto& f) {
        if (!first) out.push_back(',');
        first = false;
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_floating_point_v<F>) {
            out += format_number(f);
        } else if constexpr (std::is_integral_v<F>) {
            out += std::to_string(f);
        } else {
            out += f;
        }
    };
    (one(fields), ...);
    out.push_back('\n');
}

void append_moments(std::string& out, const Moments5& m) {
    for (double v : m) {
        out.push_back(',');
        out += format_number(v);
    }
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::InvalidArgument, "cannot write '" + path.string() + "'");
    f << text;
    if (!f) throw Error(ErrorKind::InvalidArgument, "failed writing '" + path.string() + "'");
}

}  // namespace

ExperimentConfig resolve(ExperimentConfig cfg) {
    if (!cfg.iters) cfg.iters = cfg.n_slabs;
    if (cfg.sigma.empty()) {
        if (cfg.experiment == Experiment::SdeParareal) {
            cfg.sigma = {0.5};
        } else if (cfg.experiment == Experiment::SdeMoments) {
            cfg.sigma = {0.1, 0.5, 1.0};
        }
    }
    return cfg;
}

std::vector<OdeConvergenceRow> ode_convergence(const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<std::pair<double, double>> rates;
    for (auto [a, d] : {std::pair{-1.0, -1.0}, std::pair{-1.0, -5.0}}) {
        const std::pair<double, double> r{cfg.alpha.value_or(a), cfg.delta.value_or(d)};
        if (std::find(rates.begin(), rates.end(), r) == rates.end()) rates.push_back(r);
    }
    std::vector<double> betas{0.0, 1e-4, 1e-2, 1e-1, 1.0, 2.0};
    if (cfg.beta) betas = {*cfg.beta};

    const std::size_t iters = cfg.iterations();
    std::vector<OdeConvergenceRow> rows;
    for (auto [alpha, delta] : rates) {
        for (double beta : betas) {
            msode::MsOdeParams p;
            p.alpha = alpha;
            p.beta = beta;
            p.delta = delta;
            p.alpha_bar = cfg.alpha_bar.value_or(msode::MsOdeParams::perturbed_rate(alpha, cfg.zeta_perturb));
            p.dt = cfg.dt;
            p.slabs = cfg.n_slabs;
            p.x0 = cfg.x0;
            p.y0 = cfg.y0;
            const auto prob = msode::make_problem(p);
            const auto grid = run_micro_macro(prob.propagators, prob.coupling, prob.macro_algebra, prob.initial,
                                              p.slabs, iters, {cfg.workers});
            const auto err = msode::measured_errors(grid);
            const auto in = msode::BoundInputs::from_run(p, grid);
            std::vector<double> norms0;
            for (const auto& e : err[0]) norms0.push_back(std::max(std::abs(e[0]), std::abs(e[1])));
            const auto nontight = msode::nontight_bound(p, norms0, iters);

            for (std::size_t k = 0; k <= iters; ++k) {
                OdeConvergenceRow row{alpha, delta, beta, k, 0.0, kNaN, kNaN, nontight[k], kNaN};
                for (std::size_t n = 1; n < err[k].size(); ++n) row.e_meas = std::max(row.e_meas, std::abs(err[k][n][0]));
                if (in.coarse != 1.0) row.bound_linear = msode::linear_bound(in, k);
                if (k <= p.slabs) row.bound_superlinear = msode::superlinear_bound(in, k);
                row.bound_min = std::fmin(row.bound_linear, row.bound_superlinear);
                rows.push_back(row);
            }
        }
    }
    return rows;
}

std::vector<MomentTrajectoryRow> sde_moments(const ExperimentConfig& in) {
    const ExperimentConfig cfg = resolve(in);
    cfg.validate();
    const std::size_t steps = inner_steps(cfg);
    std::vector<MomentTrajectoryRow> rows;
    for (double sigma : cfg.sigma) {
        const mc::SdeModel model = mc::roberts_model(cfg.alpha.value_or(1.0), sigma);
        // one inner step per table subinterval, so every step has its own increments
        const mc::BrownianTable table(cfg.seed, cfg.particles, 1, model.noise_dim, cfg.inner_dt);
        mc::Ensemble ens = model.initial_sampler(cfg.seed, cfg.particles);
        mc::MomentState moments = mc::restrict_ensemble(ens);
        for (std::size_t j = 0;; ++j) {
            const double t = static_cast<double>(j) * cfg.inner_dt;
            rows.push_back({t, sigma, true, five(mc::restrict_ensemble(ens))});
            rows.push_back({t, sigma, false, five(moments)});
            if (j == steps) break;
            ens = mc::em_propagate(ens, model, table, j, t, cfg.workers);
            moments = mc::moment_propagate(moments, model, t, cfg.inner_dt, 1);
        }
    }
    return rows;
}

std::vector<MeanErrorBySigma> moment_model_mean_error(const std::vector<MomentTrajectoryRow>& rows) {
    std::vector<MeanErrorBySigma> out;
    for (std::size_t i = 0; i + 1 < rows.size(); i += 2) {
        const auto& mc_row = rows[i];
        const auto& mm_row = rows[i + 1];
        if (out.empty() || out.back().sigma != mc_row.sigma) out.push_back({mc_row.sigma, 0.0, 0.0});
        out.back().sup_mx = std::max(out.back().sup_mx, std::abs(mm_row.m[0] - mc_row.m[0]));
        out.back().sup_my = std::max(out.back().sup_my, std::abs(mm_row.m[1] - mc_row.m[1]));
    }
    return out;
}

SdePararealResult sde_parareal(const ExperimentConfig& in) {
    const ExperimentConfig cfg = resolve(in);
    cfg.validate();
    const std::size_t slabs = cfg.n_slabs;
    const std::size_t iters = cfg.iterations();

    SdePararealResult result;
    std::vector<std::array<double, 5>> err_sum(iters + 1, std::array<double, 5>{});
    std::map<std::pair<std::size_t, std::size_t>, PararealDiagnosticRow> diag;
    for (std::size_t k = 0; k <= iters; ++k)
        for (std::size_t n = 1; n <= slabs; ++n) diag[{k, n}] = {k, n, 0, 0};

    for (std::size_t r = 0; r < cfg.reps; ++r) {
        mc::PararealSettings set;
        set.t_final = cfg.t_final;
        set.slabs = slabs;
        set.inner_dt = cfg.inner_dt;
        set.particles = cfg.particles;
        set.seed = cfg.seed + r;
        set.particle_workers = std::max<std::size_t>(1, cfg.workers / slabs);
        const mc::McMomentsProblem prob(mc::roberts_model(cfg.alpha.value_or(1.0), cfg.sigma.front()), set);
        const mc::Grid grid = run_micro_macro(prob.propagators(), prob.coupling(), mc::moment_algebra(),
                                              prob.initial(), slabs, iters, {cfg.workers});

        std::vector<Moments5> ref;
        Moments5 ref_sup{};
        for (const auto& e : grid.reference) {
            ref.push_back(five(mc::restrict_ensemble(e)));
            for (std::size_t c = 0; c < 5; ++c) ref_sup[c] = std::max(ref_sup[c], std::abs(ref.back()[c]));
        }
        for (std::size_t k = 0; k <= iters; ++k) {
            Moments5 sup{};
            for (std::size_t n = 0; n <= slabs; ++n) {
                const Moments5 m = five(mc::restrict_ensemble(grid.micro[k][n]));
                for (std::size_t c = 0; c < 5; ++c) sup[c] = std::max(sup[c], std::abs(m[c] - ref[n][c]));
                if (r == 0) result.iterates.push_back({k, n, static_cast<double>(n) * set.slab_length(), m});
            }
            for (std::size_t c = 0; c < 5; ++c) err_sum[k][c] += ref_sup[c] > 0.0 ? sup[c] / ref_sup[c] : sup[c];
        }
        for (const auto& ev : grid.events) {
            auto& d = diag.at({ev.slot.iteration, ev.slot.index});
            d.psd_repairs += ev.report.psd_repaired ? 1 : 0;
            d.resampled += ev.report.resampled;
        }
    }
    for (std::size_t k = 0; k <= iters; ++k)
        for (std::size_t c = 0; c < 5; ++c)
            result.errors.push_back({k, c, err_sum[k][c] / static_cast<double>(cfg.reps)});
    for (const auto& [key, d] : diag) result.diagnostics.push_back(d);
    return result;
}

std::string ode_convergence_csv(const std::vector<OdeConvergenceRow>& rows) {
    std::string out = "alpha,delta,beta,k,e_meas,bound_linear,bound_superlinear,bound_nontight,bound_min\n";
    for (const auto& r : rows)
        csv_row(out, r.alpha, r.delta, r.beta, r.k, r.e_meas, r.bound_linear, r.bound_superlinear, r.bound_nontight,
                r.bound_min);
    return out;
}

std::string sde_moments_csv(const std::vector<MomentTrajectoryRow>& rows) {
    std::string out = "t,sigma,source,M_x,M_y,C_xx,C_xy,C_yy\n";
    for (const auto& r : rows) {
        out += format_number(r.t) + ',' + format_number(r.sigma) + ',' + (r.mc ? "mc" : "moment");
        append_moments(out, r.m);
        out.push_back('\n');
    }
    return out;
}

std::string sde_parareal_err_csv(const SdePararealResult& r) {
    std::string out = "k,component,rel_err_inf_time\n";
    for (const auto& e : r.errors) csv_row(out, e.k, std::string(kComponents[e.component]), e.rel_err);
    return out;
}

std::string sde_parareal_iterates_csv(const SdePararealResult& r) {
    std::string out = "k,n,t,M_x,M_y,C_xx,C_xy,C_yy\n";
    for (const auto& it : r.iterates) {
        out += std::to_string(it.k) + ',' + std::to_string(it.n) + ',' + format_number(it.t);
        append_moments(out, it.m);
        out.push_back('\n');
    }
    return out;
}

std::string sde_parareal_diagnostics_csv(const SdePararealResult& r) {
    std::string out = "k,n,psd_repair,resample\n";
    for (const auto& d : r.diagnostics) csv_row(out, d.k, d.n, d.psd_repairs, d.resampled);
    return out;
}

std::vector<std::string> run_experiment(const ExperimentConfig& in) {
    const ExperimentConfig cfg = resolve(in);
    cfg.validate();
    const std::filesystem::path dir(cfg.out_dir);
    std::filesystem::create_directories(dir);

    std::vector<std::pair<std::string, std::string>> files;
    switch (cfg.experiment) {
        case Experiment::OdeConvergence:
            files.emplace_back("ode_convergence.csv", ode_convergence_csv(ode_convergence(cfg)));
            break;
        case Experiment::SdeMoments:
            files.emplace_back("sde_moments.csv", sde_moments_csv(sde_moments(cfg)));
            break;
        case Experiment::SdeParareal: {
            const auto r = sde_parareal(cfg);
            files.emplace_back("sde_parareal_err.csv", sde_parareal_err_csv(r));
            files.emplace_back("sde_parareal_iterates.csv", sde_parareal_iterates_csv(r));
            files.emplace_back("diagnostics.csv", sde_parareal_diagnostics_csv(r));
            break;
        }
        case Experiment::Selftest:
            throw Error(ErrorKind::InvalidArgument, "selftest writes no experiment outputs");
    }
    files.emplace_back(std::string(experiment_name(cfg.experiment)) + ".cfg", serialize_config(cfg));

    std::vector<std::string> written;
    for (const auto& [name, text] : files) {
        write_file(dir / name, text);
        written.push_back((dir / name).string());
    }
    return written;
}

}  // namespace mmpr

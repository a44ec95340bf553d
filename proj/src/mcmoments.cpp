#include "mmpr/mcmoments.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "mmpr/error.hpp"
#include "mmpr/parallel.hpp"
#include "mmpr/rng.hpp"

namespace mmpr::mc {

std::vector<double> observable_at(const SdeModel& model, std::span<const double> x) {
    std::vector<double> out(model.observable_dim, 0.0);
    if (model.observable_dim > 0) model.psi(x, out);
    return out;
}

std::vector<double> observable_mean(const SdeModel& model, const Ensemble& ens) {
    std::vector<double> acc(model.observable_dim, 0.0);
    if (model.observable_dim == 0 || ens.size() == 0) return acc;
    std::vector<double> buf(model.observable_dim);
    for (std::size_t p = 0; p < ens.size(); ++p) {
        model.psi(ens.particle(p), buf);
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += buf[i];
    }
    for (double& v : acc) v /= static_cast<double>(ens.size());
    return acc;
}

BrownianTable::BrownianTable(std::uint64_t seed, std::size_t particles, std::size_t steps, std::size_t noise_dim,
                             double inner_dt)
    : seed_(seed), particles_(particles), steps_(steps), noise_dim_(noise_dim), inner_dt_(inner_dt),
      scale_(std::sqrt(inner_dt)) {
    if (!(inner_dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "inner time step must be positive");
    if (steps == 0) throw Error(ErrorKind::InvalidArgument, "Brownian table needs at least one step");
}

void BrownianTable::increments(std::size_t subinterval, std::size_t step, std::size_t particle,
                               std::span<double> out) const {
    for (std::size_t w = 0; w < noise_dim_; w += 2) {
        const auto z = gaussian_pair(seed_, stream_word(StreamTag::Brownian, static_cast<std::uint32_t>(w / 2)),
                                     static_cast<std::uint32_t>(subinterval), static_cast<std::uint32_t>(step),
                                     static_cast<std::uint32_t>(particle));
        out[w] = scale_ * z[0];
        if (w + 1 < noise_dim_) out[w + 1] = scale_ * z[1];
    }
}

namespace {

struct StepBuffers {
    std::vector<double> drift;
    std::vector<double> diffusion;
    std::vector<double> dw;

    StepBuffers(std::size_t d, std::size_t nw) : drift(d), diffusion(d * nw), dw(nw) {}
};

void em_step_particle(std::span<double> x, const SdeModel& model, const BrownianTable& table,
                      std::size_t subinterval, std::size_t step, std::size_t particle,
                      std::span<const double> lambda, double t, StepBuffers& buf) {
    const double h = table.inner_dt();
    const std::size_t d = model.dim;
    const std::size_t nw = model.noise_dim;
    model.drift(x, lambda, t, buf.drift);
    model.diffusion(x, lambda, t, buf.diffusion);
    table.increments(subinterval, step, particle, buf.dw);
    for (std::size_t i = 0; i < d; ++i) {
        double v = x[i] + buf.drift[i] * h;
        for (std::size_t w = 0; w < nw; ++w) v += buf.diffusion[i * nw + w] * buf.dw[w];
        if (!std::isfinite(v)) {
            throw Error(ErrorKind::NonFinite, "Euler-Maruyama blow-up at step " + std::to_string(step) +
                                                  ", particle " + std::to_string(particle));
        }
        x[i] = v;
    }
}

}  // namespace

Ensemble em_propagate(const Ensemble& ens, const SdeModel& model, const BrownianTable& table,
                      std::size_t subinterval, double t0, std::size_t workers) {
    if (ens.dim != model.dim) throw Error(ErrorKind::InvalidArgument, "ensemble dimension does not match model");
    if (table.noise_dim() != model.noise_dim || table.particles() != ens.size()) {
        throw Error(ErrorKind::InvalidArgument, "Brownian table shape does not match ensemble/model");
    }
    Ensemble out = ens;
    out.subinterval = subinterval;
    out.seed = table.seed();
    const std::size_t particles = out.size();
    const std::size_t steps = table.steps();
    const double h = table.inner_dt();
    const std::size_t chunks = std::max<std::size_t>(1, std::min(workers, particles));

    if (model.observable_dim == 0) {
        // No coupling between particles: each chunk runs all steps on its own.
        const std::vector<double> lambda;
        parallel_for(chunks, chunks, [&](std::size_t c) {
            StepBuffers buf(model.dim, model.noise_dim);
            const std::size_t begin = particles * c / chunks;
            const std::size_t end = particles * (c + 1) / chunks;
            for (std::size_t p = begin; p < end; ++p) {
                auto x = out.particle(p);
                for (std::size_t s = 0; s < steps; ++s) {
                    em_step_particle(x, model, table, subinterval, s, p, lambda, t0 + static_cast<double>(s) * h, buf);
                }
            }
        });
        return out;
    }

    for (std::size_t s = 0; s < steps; ++s) {
        const std::vector<double> lambda = observable_mean(model, out);
        const double t = t0 + static_cast<double>(s) * h;
        parallel_for(chunks, chunks, [&](std::size_t c) {
            StepBuffers buf(model.dim, model.noise_dim);
            const std::size_t begin = particles * c / chunks;
            const std::size_t end = particles * (c + 1) / chunks;
            for (std::size_t p = begin; p < end; ++p) em_step_particle(out.particle(p), model, table, subinterval, s, p, lambda, t, buf);
        });
    }
    return out;
}

MomentState::MomentState(Vector m, SymMatrix c) : mean(std::move(m)), cov(std::move(c)) {
    if (mean.size() != cov.dim()) throw Error(ErrorKind::InvalidArgument, "mean and covariance dimensions differ");
    psd = is_psd(cov);
}

MomentRate moment_rhs(const MomentState& s, const SdeModel& model, double t) {
    const std::size_t d = model.dim;
    if (s.dim() != d) throw Error(ErrorKind::InvalidArgument, "moment state dimension does not match model");
    const std::vector<double> lambda = observable_at(model, s.mean);
    const Matrix& sigma = s.cov.matrix();

    Vector dm(d);
    model.drift(s.mean, lambda, t, dm);
    if (model.drift_hessians) {
        const Matrix hess = model.drift_hessians(s.mean);
        const Vector curvature = hess * sigma.data();
        for (std::size_t i = 0; i < d; ++i) dm[i] += 0.5 * curvature[i];
    }

    const Matrix a1 = model.drift_jacobian(s.mean, lambda, t);
    Matrix dsigma = a1 * sigma + sigma * a1.transpose();
    if (model.diffusion_jacobians) {
        for (const Matrix& b1 : model.diffusion_jacobians(s.mean, lambda, t)) dsigma = dsigma + b1 * sigma * b1.transpose();
    }
    std::vector<double> bvals(d * model.noise_dim);
    model.diffusion(s.mean, lambda, t, bvals);
    const Matrix b(d, model.noise_dim, std::move(bvals));
    dsigma = dsigma + b * b.transpose();
    return {std::move(dm), SymMatrix(dsigma)};
}

MomentState moment_propagate(const MomentState& s, const SdeModel& model, double t0, double inner_dt,
                             std::size_t steps) {
    if (!(inner_dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "inner time step must be positive");
    Vector mean = s.mean;
    SymMatrix cov = s.cov;
    for (std::size_t k = 0; k < steps; ++k) {
        const MomentRate rate = moment_rhs(MomentState(mean, cov), model, t0 + static_cast<double>(k) * inner_dt);
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += inner_dt * rate.mean[i];
        cov = SymMatrix(cov.matrix() + inner_dt * rate.cov.matrix());
        for (double v : mean)
            if (!std::isfinite(v)) throw Error(ErrorKind::NonFinite, "moment model blow-up at step " + std::to_string(k));
        for (double v : cov.matrix().data())
            if (!std::isfinite(v)) throw Error(ErrorKind::NonFinite, "moment model blow-up at step " + std::to_string(k));
    }
    return MomentState(std::move(mean), std::move(cov));
}

MomentState restrict_ensemble(const Ensemble& ens) {
    const std::size_t particles = ens.size();
    if (particles == 0) throw Error(ErrorKind::EmptyEnsemble, "cannot take moments of an empty ensemble");
    const std::size_t d = ens.dim;
    const double inv = 1.0 / static_cast<double>(particles);

    Vector mean(d, 0.0);
    for (std::size_t p = 0; p < particles; ++p) {
        const auto x = ens.particle(p);
        for (std::size_t i = 0; i < d; ++i) mean[i] += x[i];
    }
    for (double& m : mean) m *= inv;

    Matrix cov(d, d);
    std::vector<double> centered(d);
    for (std::size_t p = 0; p < particles; ++p) {
        const auto x = ens.particle(p);
        for (std::size_t i = 0; i < d; ++i) centered[i] = x[i] - mean[i];
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j <= i; ++j) cov(i, j) += centered[i] * centered[j];
    }
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            cov(i, j) *= inv;
            cov(j, i) = cov(i, j);
        }
    return MomentState(std::move(mean), SymMatrix(cov));
}

MatchResult match(const MomentState& target, const Ensemble& prior, RepairPolicy policy, const ResampleKey& key) {
    const std::size_t particles = prior.size();
    if (particles == 0) throw Error(ErrorKind::EmptyEnsemble, "matching needs a non-empty prior ensemble");
    const std::size_t d = prior.dim;
    if (target.dim() != d) throw Error(ErrorKind::InvalidArgument, "target and ensemble dimensions differ");

    MatchResult result;
    result.target = target;
    if (!is_psd(target.cov)) {
        if (policy == RepairPolicy::Strict) {
            throw Error(ErrorKind::UnrepairableCovariance, "target covariance is not positive semidefinite");
        }
        result.target = MomentState(target.mean, nearest_psd(target.cov, 0.0));
        result.psd_repaired = true;
    }
    const MomentState& goal = result.target;

    MomentState current = restrict_ensemble(prior);
    if (current == goal) {
        result.ensemble = prior;
        return result;
    }

    const LowerTriangular upper_factor = cholesky(goal.cov).factor;
    CholeskyResult prior_factor = cholesky(current.cov);
    Ensemble work = prior;
    if (!prior_factor.degenerate.empty()) {
        result.resampled = prior_factor.degenerate;
        for (std::size_t p = 0; p < particles; ++p) {
            auto x = work.particle(p);
            for (std::size_t j : result.resampled) {
                const auto z = gaussian_pair(key.seed, stream_word(StreamTag::Resample, static_cast<std::uint32_t>(j / 2)),
                                             static_cast<std::uint32_t>(key.iteration),
                                             static_cast<std::uint32_t>(key.index), static_cast<std::uint32_t>(p));
                x[j] = z[j % 2];
            }
        }
        current = restrict_ensemble(work);
        prior_factor = cholesky(current.cov);
        if (!prior_factor.degenerate.empty()) {
            throw Error(ErrorKind::SingularMatrix, "ensemble covariance is still singular after resampling");
        }
    }

    const LowerTriangular& q = prior_factor.factor;
    std::vector<double> z(d);
    for (std::size_t p = 0; p < particles; ++p) {
        auto x = work.particle(p);
        for (std::size_t i = 0; i < d; ++i) z[i] = x[i] - current.mean[i];
        q.solve_in_place(z);
        upper_factor.multiply_in_place(z);
        for (std::size_t i = 0; i < d; ++i) x[i] = z[i] + goal.mean[i];
    }
    result.ensemble = std::move(work);
    return result;
}

MomentState moment_add(const MomentState& a, const MomentState& b) {
    if (a.dim() != b.dim()) throw Error(ErrorKind::InvalidArgument, "moment dimensions differ");
    Vector m(a.dim());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = a.mean[i] + b.mean[i];
    return MomentState(std::move(m), SymMatrix(a.cov.matrix() + b.cov.matrix()));
}

MomentState moment_sub(const MomentState& a, const MomentState& b) {
    if (a.dim() != b.dim()) throw Error(ErrorKind::InvalidArgument, "moment dimensions differ");
    Vector m(a.dim());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = a.mean[i] - b.mean[i];
    return MomentState(std::move(m), SymMatrix(a.cov.matrix() - b.cov.matrix()));
}

MacroAlgebra<MomentState> moment_algebra() {
    return {moment_add, moment_sub};
}

std::vector<double> moment_components(const MomentState& s) {
    std::vector<double> c(s.mean.begin(), s.mean.end());
    for (std::size_t i = 0; i < s.dim(); ++i)
        for (std::size_t j = 0; j <= i; ++j) c.push_back(s.cov(i, j));
    return c;
}

std::vector<std::string> moment_component_names(std::size_t dim) {
    if (dim == 2) return {"M_x", "M_y", "C_xx", "C_xy", "C_yy"};
    std::vector<std::string> names;
    for (std::size_t i = 0; i < dim; ++i) names.push_back("M_" + std::to_string(i + 1));
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j <= i; ++j) names.push_back("C_" + std::to_string(i + 1) + std::to_string(j + 1));
    return names;
}

SdeModel roberts_model(double alpha, double sigma) {
    SdeModel m;
    m.dim = 2;
    m.noise_dim = 1;
    m.observable_dim = 0;
    m.drift = [alpha](std::span<const double> x, std::span<const double>, double, std::span<double> out) {
        out[0] = alpha * x[0] - x[0] * x[1];
        out[1] = -x[1] + x[0] * x[0];
    };
    m.diffusion = [sigma](std::span<const double>, std::span<const double>, double, std::span<double> out) {
        out[0] = 0.0;
        out[1] = sigma;
    };
    m.drift_jacobian = [alpha](std::span<const double> x, std::span<const double>, double) {
        return Matrix(2, 2, {alpha - x[1], -x[0], 2.0 * x[0], -1.0});
    };
    m.drift_hessians = [](std::span<const double>) {
        return Matrix(2, 4, {0.0, -1.0, -1.0, 0.0,  //
                             2.0, 0.0, 0.0, 0.0});
    };
    m.initial_sampler = [](std::uint64_t seed, std::size_t particles) {
        Ensemble e(2, particles);
        for (std::size_t p = 0; p < particles; ++p) {
            e.particle(p)[0] = 1.0;
            e.particle(p)[1] = 1.0;
        }
        e.seed = seed;
        return e;
    };
    return m;
}

SdeModel ou_model(std::size_t dim, double theta, double sigma, double mean0, double var0) {
    SdeModel m;
    m.dim = dim;
    m.noise_dim = dim;
    m.drift = [theta](std::span<const double> x, std::span<const double>, double, std::span<double> out) {
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = -theta * x[i];
    };
    m.diffusion = [dim, sigma](std::span<const double>, std::span<const double>, double, std::span<double> out) {
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t w = 0; w < dim; ++w) out[i * dim + w] = i == w ? sigma : 0.0;
    };
    m.drift_jacobian = [dim, theta](std::span<const double>, std::span<const double>, double) {
        return (-theta) * Matrix::identity(dim);
    };
    m.initial_sampler = [dim, mean0, var0](std::uint64_t seed, std::size_t particles) {
        Ensemble e(dim, particles);
        const double sd = std::sqrt(var0);
        for (std::size_t p = 0; p < particles; ++p) {
            for (std::size_t i = 0; i < dim; ++i) {
                const auto z = gaussian_pair(seed, stream_word(StreamTag::Initial, static_cast<std::uint32_t>(i / 2)),
                                             0, 0, static_cast<std::uint32_t>(p));
                e.particle(p)[i] = mean0 + sd * z[i % 2];
            }
        }
        e.seed = seed;
        return e;
    };
    return m;
}

std::size_t PararealSettings::steps_per_slab() const {
    if (!(inner_dt > 0.0) || !(t_final > 0.0) || slabs == 0) {
        throw Error(ErrorKind::InvalidArgument, "need t_final > 0, inner_dt > 0 and at least one subinterval");
    }
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(slab_length() / inner_dt)));
}

McMomentsProblem::McMomentsProblem(SdeModel model, PararealSettings settings)
    : model_(std::move(model)), settings_(settings),
      table_(settings.seed, settings.particles, settings.steps_per_slab(), model_.noise_dim,
             settings.slab_length() / static_cast<double>(settings.steps_per_slab())),
      initial_(model_.initial_sampler(settings.seed, settings.particles)) {
    if (settings.particles < 2) throw Error(ErrorKind::InvalidArgument, "need at least two particles");
}

Ensemble McMomentsProblem::fine(const Ensemble& ens, std::size_t n) const {
    return em_propagate(ens, model_, table_, n, static_cast<double>(n) * settings_.slab_length(),
                        settings_.particle_workers);
}

MomentState McMomentsProblem::coarse(const MomentState& s, std::size_t n) const {
    return moment_propagate(s, model_, static_cast<double>(n) * settings_.slab_length(), table_.inner_dt(),
                            table_.steps());
}

Coupled<Ensemble, MomentState> McMomentsProblem::couple(const MomentState& target, const Ensemble& prior,
                                                        Slot slot) const {
    MatchResult r = match(target, prior, settings_.policy, {settings_.seed, slot.iteration, slot.index});
    Coupled<Ensemble, MomentState> out{std::move(r.ensemble), std::nullopt, {r.psd_repaired, r.resampled.size()}};
    if (r.psd_repaired) out.repaired = std::move(r.target);
    return out;
}

Propagators<Ensemble, MomentState> McMomentsProblem::propagators() const {
    return {[this](const Ensemble& e, std::size_t n) { return fine(e, n); },
            [this](const MomentState& s, std::size_t n) { return coarse(s, n); }};
}

Coupling<Ensemble, MomentState> McMomentsProblem::coupling() const {
    Coupling<Ensemble, MomentState> c;
    c.restrict = [](const Ensemble& e) { return restrict_ensemble(e); };
    c.match = [this](const MomentState& target, const Ensemble& prior, Slot slot) { return couple(target, prior, slot); };
    c.lift = [this](const MomentState& target, Slot slot) { return couple(target, initial_, slot); };
    return c;
}

}  // namespace mmpr::mc

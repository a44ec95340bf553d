#pragma once

// Parareal drivers over abstract propagators and coupling operators.
//
// Index conventions: micro[k][n] is the iterate at iteration k and time
// index n (0 <= k <= K, 0 <= n <= N). The fine propagator applied to the
// state at time index n advances it over subinterval n, i.e. from t_n to
// t_{n+1}. Within one iteration the N fine propagations run on a worker
// pool; the coarse sweep is sequential.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "mmpr/error.hpp"
#include "mmpr/parallel.hpp"

namespace mmpr {

/// (iteration k, time index n) of the state a coupling operator produces.
struct Slot {
    std::size_t iteration = 0;
    std::size_t index = 0;
};

struct CouplingReport {
    bool psd_repaired = false;
    std::size_t resampled = 0;  ///< coordinates redrawn during matching
};

template <class Micro, class Macro>
struct Coupled {
    Micro micro;
    /// Set when the coupling had to repair the macro state it was given;
    /// the engine then carries the repaired state forward.
    std::optional<Macro> repaired;
    CouplingReport report;
};

template <class Micro, class Macro>
struct Propagators {
    std::function<Micro(const Micro&, std::size_t)> fine;
    std::function<Macro(const Macro&, std::size_t)> coarse;
};

template <class Micro, class Macro>
struct Coupling {
    std::function<Macro(const Micro&)> restrict;
    std::function<Coupled<Micro, Macro>(const Macro&, const Micro&, Slot)> match;
    std::function<Coupled<Micro, Macro>(const Macro&, Slot)> lift;
};

/// Affine structure on a state space; both members may be left empty for a
/// space without one (ensembles), which the lifting variant rejects.
template <class T>
struct MacroAlgebra {
    std::function<T(const T&, const T&)> add;
    std::function<T(const T&, const T&)> sub;

    explicit operator bool() const noexcept { return add && sub; }
};

struct CouplingEvent {
    Slot slot;
    CouplingReport report;
};

template <class Micro, class Macro>
struct IterateGrid {
    std::vector<std::vector<Micro>> micro;  ///< [k][n]
    std::vector<std::vector<Macro>> macro;  ///< [k][n]
    std::vector<Micro> reference;           ///< sequential fine trajectory, [n]
    std::vector<CouplingEvent> events;      ///< one per match/lift call
    std::size_t fine_calls = 0;             ///< includes the N reference calls

    std::size_t iterations() const noexcept { return micro.empty() ? 0 : micro.size() - 1; }
    std::size_t slabs() const noexcept { return reference.empty() ? 0 : reference.size() - 1; }
};

struct RunOptions {
    std::size_t workers = 1;
};

namespace detail {

inline void check_sizes(std::size_t slabs) {
    if (slabs < 1) throw Error(ErrorKind::InvalidArgument, "Parareal needs at least one subinterval");
}

template <class Micro, class Macro>
std::vector<Micro> sequential_reference(const Propagators<Micro, Macro>& prop, const Micro& u0,
                                        std::size_t slabs, std::size_t& calls) {
    std::vector<Micro> ref;
    ref.reserve(slabs + 1);
    ref.push_back(u0);
    for (std::size_t n = 0; n < slabs; ++n) {
        ref.push_back(prop.fine(ref.back(), n));
        ++calls;
    }
    return ref;
}

/// F(U^k_n) for n = 0..N-1, evaluated concurrently.
template <class Micro, class Macro>
std::vector<Micro> fine_sweep(const Propagators<Micro, Macro>& prop, const std::vector<Micro>& row,
                              std::size_t workers, std::size_t& calls) {
    const std::size_t slabs = row.size() - 1;
    std::vector<std::optional<Micro>> out(slabs);
    parallel_for(slabs, workers, [&](std::size_t n) { out[n].emplace(prop.fine(row[n], n)); });
    calls += slabs;
    std::vector<Micro> result;
    result.reserve(slabs);
    for (auto& o : out) result.push_back(std::move(*o));
    return result;
}

}  // namespace detail

/// Classical Parareal on a single state space:
///   U^{k+1}_{n+1} = F(U^k_n) + (C(U^{k+1}_n) - C(U^k_n)).
/// Iteration zero is the sequential coarse sweep. C(U^k_n) is kept from the
/// previous iteration rather than recomputed.
template <class State>
IterateGrid<State, State> run_classical(const Propagators<State, State>& prop, const MacroAlgebra<State>& alg,
                                        const State& u0, std::size_t slabs, std::size_t iterations,
                                        const RunOptions& opts = {}) {
    detail::check_sizes(slabs);
    IterateGrid<State, State> grid;
    grid.reference = detail::sequential_reference(prop, u0, slabs, grid.fine_calls);

    std::vector<State> coarse_prev;
    coarse_prev.reserve(slabs);
    std::vector<State> row{u0};
    for (std::size_t n = 0; n < slabs; ++n) {
        coarse_prev.push_back(prop.coarse(row[n], n));
        row.push_back(coarse_prev.back());
    }
    grid.micro.push_back(row);

    for (std::size_t k = 0; k < iterations; ++k) {
        const std::vector<State> fine = detail::fine_sweep(prop, grid.micro[k], opts.workers, grid.fine_calls);
        std::vector<State> next{u0};
        for (std::size_t n = 0; n < slabs; ++n) {
            State coarse_new = prop.coarse(next[n], n);
            next.push_back(alg.add(fine[n], alg.sub(coarse_new, coarse_prev[n])));
            coarse_prev[n] = std::move(coarse_new);
        }
        grid.micro.push_back(std::move(next));
    }
    grid.macro = grid.micro;
    return grid;
}

/// Micro-macro Parareal with matching. Iteration zero:
///   rho^0_{n+1} = C(rho^0_n),  U^0_{n+1} = L(rho^0_{n+1});
/// then
///   rho^{k+1}_{n+1} = R(F(U^k_n)) + (C(rho^{k+1}_n) - C(rho^k_n)),
///   U^{k+1}_{n+1}   = M(rho^{k+1}_{n+1}, F(U^k_n)).
/// F(U^k_n) is computed once per (k, n) and feeds both updates. The
/// correction is added to R(F(U^k_n)) last so that it vanishes exactly once
/// the coarse inputs stop changing.
template <class Micro, class Macro>
IterateGrid<Micro, Macro> run_micro_macro(const Propagators<Micro, Macro>& prop, const Coupling<Micro, Macro>& cpl,
                                          const MacroAlgebra<Macro>& alg, const Micro& u0, std::size_t slabs,
                                          std::size_t iterations, const RunOptions& opts = {}) {
    detail::check_sizes(slabs);
    IterateGrid<Micro, Macro> grid;
    grid.reference = detail::sequential_reference(prop, u0, slabs, grid.fine_calls);

    const Macro rho0 = cpl.restrict(u0);
    auto accept = [&grid](Coupled<Micro, Macro>&& c, Macro& rho, Slot slot) {
        if (c.repaired) rho = std::move(*c.repaired);
        grid.events.push_back({slot, c.report});
        return std::move(c.micro);
    };

    std::vector<Macro> coarse_prev;
    coarse_prev.reserve(slabs);
    {
        std::vector<Macro> macro_row{rho0};
        std::vector<Micro> micro_row{u0};
        for (std::size_t n = 0; n < slabs; ++n) {
            coarse_prev.push_back(prop.coarse(macro_row[n], n));
            Macro rho = coarse_prev.back();
            const Slot slot{0, n + 1};
            micro_row.push_back(accept(cpl.lift(rho, slot), rho, slot));
            macro_row.push_back(std::move(rho));
        }
        grid.micro.push_back(std::move(micro_row));
        grid.macro.push_back(std::move(macro_row));
    }

    for (std::size_t k = 0; k < iterations; ++k) {
        const std::vector<Micro> fine = detail::fine_sweep(prop, grid.micro[k], opts.workers, grid.fine_calls);
        std::vector<std::optional<Macro>> restricted(slabs);
        parallel_for(slabs, opts.workers, [&](std::size_t n) { restricted[n].emplace(cpl.restrict(fine[n])); });

        std::vector<Macro> macro_row{rho0};
        std::vector<Micro> micro_row{u0};
        for (std::size_t n = 0; n < slabs; ++n) {
            Macro coarse_new = prop.coarse(macro_row[n], n);
            Macro rho = alg.add(*restricted[n], alg.sub(coarse_new, coarse_prev[n]));
            coarse_prev[n] = std::move(coarse_new);
            const Slot slot{k + 1, n + 1};
            micro_row.push_back(accept(cpl.match(rho, fine[n], slot), rho, slot));
            macro_row.push_back(std::move(rho));
        }
        grid.micro.push_back(std::move(micro_row));
        grid.macro.push_back(std::move(macro_row));
    }
    return grid;
}

/// Micro-macro Parareal with lifting of the coarse correction:
///   U^{k+1}_{n+1} = F(U^k_n) + L(C(R(U^{k+1}_n)) - C(R(U^k_n))).
/// Needs addition on the micro space; an empty micro_alg (ensembles) throws
/// Error(Unsupported). Iteration zero is the same as run_micro_macro.
template <class Micro, class Macro>
IterateGrid<Micro, Macro> run_lifting_variant(const Propagators<Micro, Macro>& prop,
                                              const Coupling<Micro, Macro>& cpl, const MacroAlgebra<Macro>& alg,
                                              const MacroAlgebra<Micro>& micro_alg, const Micro& u0,
                                              std::size_t slabs, std::size_t iterations,
                                              const RunOptions& opts = {}) {
    if (!micro_alg) {
        throw Error(ErrorKind::Unsupported, "lifting variant requires a micro state space with addition");
    }
    detail::check_sizes(slabs);
    IterateGrid<Micro, Macro> grid;
    grid.reference = detail::sequential_reference(prop, u0, slabs, grid.fine_calls);

    std::vector<Macro> coarse_prev;
    {
        std::vector<Macro> macro_row{cpl.restrict(u0)};
        std::vector<Micro> micro_row{u0};
        for (std::size_t n = 0; n < slabs; ++n) {
            coarse_prev.push_back(prop.coarse(macro_row[n], n));
            const Slot slot{0, n + 1};
            auto lifted = cpl.lift(coarse_prev.back(), slot);
            grid.events.push_back({slot, lifted.report});
            micro_row.push_back(std::move(lifted.micro));
            macro_row.push_back(cpl.restrict(micro_row.back()));
        }
        grid.micro.push_back(std::move(micro_row));
        grid.macro.push_back(std::move(macro_row));
    }

    for (std::size_t k = 0; k < iterations; ++k) {
        const std::vector<Micro> fine = detail::fine_sweep(prop, grid.micro[k], opts.workers, grid.fine_calls);
        std::vector<Macro> macro_row{cpl.restrict(u0)};
        std::vector<Micro> micro_row{u0};
        for (std::size_t n = 0; n < slabs; ++n) {
            Macro coarse_new = prop.coarse(macro_row[n], n);
            const Slot slot{k + 1, n + 1};
            auto lifted = cpl.lift(alg.sub(coarse_new, coarse_prev[n]), slot);
            grid.events.push_back({slot, lifted.report});
            coarse_prev[n] = std::move(coarse_new);
            micro_row.push_back(micro_alg.add(fine[n], lifted.micro));
            macro_row.push_back(cpl.restrict(micro_row.back()));
        }
        grid.micro.push_back(std::move(micro_row));
        grid.macro.push_back(std::move(macro_row));
    }
    return grid;
}

struct ErrorTable {
    std::vector<std::vector<double>> e;  ///< [k][n]
    std::vector<double> e_max;           ///< [k], maximum over n >= 1
};

/// e[k][n] = |select(micro[k][n]) - select(reference[n])|.
template <class Micro, class Macro, class Select>
ErrorTable error_table(const IterateGrid<Micro, Macro>& grid, Select&& select) {
    ErrorTable table;
    std::vector<double> ref;
    ref.reserve(grid.reference.size());
    for (const auto& r : grid.reference) ref.push_back(select(r));
    for (const auto& row : grid.micro) {
        std::vector<double> e(row.size());
        double m = 0.0;
        for (std::size_t n = 0; n < row.size(); ++n) {
            e[n] = std::abs(select(row[n]) - ref[n]);
            if (n >= 1) m = std::max(m, e[n]);
        }
        table.e.push_back(std::move(e));
        table.e_max.push_back(m);
    }
    return table;
}

/// error_table scaled by the infinity norm over time of the selected
/// reference component (relative error in the sup-over-time sense).
template <class Micro, class Macro, class Select>
ErrorTable relative_error_table(const IterateGrid<Micro, Macro>& grid, Select&& select) {
    ErrorTable table = error_table(grid, select);
    double scale = 0.0;
    for (const auto& r : grid.reference) scale = std::max(scale, std::abs(select(r)));
    if (scale == 0.0) return table;
    for (auto& row : table.e)
        for (double& v : row) v /= scale;
    for (double& v : table.e_max) v /= scale;
    return table;
}

}  // namespace mmpr

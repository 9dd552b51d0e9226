#include "qbspde/solver.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "qbspde/errors.hpp"
#include "qbspde/operators.hpp"
#include "qbspde/parallel.hpp"
#include "qbspde/rng.hpp"

namespace qbspde {

void SolverConfig::validate() const {
    if (picard_max_iters < 1) throw ArgumentError("SolverConfig: picard_max_iters >= 1");
    if (!(picard_tol > 0.0)) throw ArgumentError("SolverConfig: picard_tol > 0");
    if (theta < 0.5 || theta > 1.0) throw ArgumentError("SolverConfig: theta in [0.5, 1]");
    if (clip_bound && !(*clip_bound > 0.0)) throw ArgumentError("SolverConfig: clip_bound > 0");
}

namespace {

double clipped(double v, const std::optional<double>& bound) {
    if (!bound) return v;
    return std::clamp(v, -*bound, *bound);
}

struct StepMatrices {
    BandedMatrix linear;    // divergence operator (unfactored, identity boundary rows)
    BandedMatrix implicit_; // factorized I - theta dt (L_a + noise laplacian)
};

StepMatrices build_step_matrices(const ProblemSpec& spec, const GridStack& grid, double t,
                                 double theta) {
    const double dt = grid.dt();
    const int nw = grid.noise_points();
    const bool lift = spec.mode == CoefficientMode::markovian_lift;
    BandedMatrix L = assemble_divergence_operator(spec, grid, t);
    const int band = L.lower_bandwidth();
    BandedMatrix M(grid.points_per_level(), band, band);

    const double inv_dw2 = grid.noise() ? 1.0 / (grid.noise()->dx() * grid.noise()->dx()) : 0.0;
    for (int s = 0; s < grid.space_points(); ++s) {
        for (int k = 0; k < nw; ++k) {
            const int row = s * nw + k;
            if (grid.is_space_boundary(s)) {
                M.set(row, row, 1.0);
                continue;
            }
            if (lift && (k == 0 || k == nw - 1)) {
                // closure U_ww = 0 at the truncation edge (linear extrapolation)
                const int dir = (k == 0) ? 1 : -1;
                M.set(row, row, 1.0);
                M.set(row, row + dir, -2.0);
                M.set(row, row + 2 * dir, 1.0);
                continue;
            }
            M.set(row, row, 1.0);
            const int c0 = std::max(0, row - band), c1 = std::min(M.size() - 1, row + band);
            for (int c = c0; c <= c1; ++c) {
                const double lv = L.get(row, c);
                if (lv != 0.0) M.add(row, c, -theta * dt * lv);
            }
            if (lift) {
                M.add(row, row, -theta * dt * 0.5 * (-2.0) * inv_dw2);
                M.add(row, row + 1, -theta * dt * 0.5 * inv_dw2);
                M.add(row, row - 1, -theta * dt * 0.5 * inv_dw2);
            }
        }
    }
    M.factorize();
    return StepMatrices{std::move(L), std::move(M)};
}

SolutionField solve_impl(const ProblemSpec& spec, const GridStack& grid, const SolverConfig& cfg) {
    cfg.validate();
    const bool lift = spec.mode == CoefficientMode::markovian_lift;
    if (lift) {
        if (!grid.noise()) throw ArgumentError("markovian lift requires a noise grid");
        if (spec.spatial_dim != 1 || spec.wiener_dim != 1)
            throw ScaleError("markovian lift supports d = d0 = 1");
    }
    const int d = grid.dim();
    const int nw = grid.noise_points();
    const int n = grid.points_per_level();
    const double dt = grid.dt();

    SolutionField field(grid, spec.mode, spec.wiener_dim);

    // terminal datum; Dirichlet compatibility is a structural requirement
    std::array<double, 2> xbuf{};
    for (int s = 0; s < grid.space_points(); ++s) {
        grid.space_coords(s, std::span<double>(xbuf.data(), static_cast<std::size_t>(d)));
        for (int k = 0; k < nw; ++k) {
            const double val =
                spec.phi(std::span<const double>(xbuf.data(), static_cast<std::size_t>(d)),
                         grid.noise_coord(k));
            if (grid.is_space_boundary(s)) {
                if (spec.terminal_compatible && std::abs(val) > 1e-12)
                    throw StructuralError("terminal datum does not vanish on the boundary");
                field.u[field.uidx(grid.n_time(), s, k)] = 0.0;
            } else {
                field.u[field.uidx(grid.n_time(), s, k)] = val;
            }
        }
    }

    std::optional<StepMatrices> cached;
    if (spec.coeffs_time_invariant) cached = build_step_matrices(spec, grid, 0.0, cfg.theta);

    std::vector<double> ustar(static_cast<std::size_t>(n)), unew(static_cast<std::size_t>(n));
    std::vector<double> rhs(static_cast<std::size_t>(n)), expl(static_cast<std::size_t>(n), 0.0);
    std::vector<double> wlap(static_cast<std::size_t>(n), 0.0);
    std::vector<double> qstar(static_cast<std::size_t>(n), 0.0);
    std::vector<double> sig_div, cross;
    std::vector<std::vector<double>> grads(static_cast<std::size_t>(d),
                                           std::vector<double>(static_cast<std::size_t>(n)));

    for (int level = grid.n_time() - 1; level >= 0; --level) {
        const double t_n = grid.time(level);
        StepMatrices fresh = spec.coeffs_time_invariant
                                 ? StepMatrices{BandedMatrix(1, 0, 0), BandedMatrix(1, 0, 0)}
                                 : build_step_matrices(spec, grid, t_n, cfg.theta);
        const StepMatrices& mats = spec.coeffs_time_invariant ? *cached : fresh;

        const auto y = field.level_u(level + 1);

        // (1 - theta) L u^{n+1} on PDE rows
        std::fill(expl.begin(), expl.end(), 0.0);
        if (cfg.theta < 1.0) {
            mats.linear.multiply(y, expl);
            if (lift) {
                apply_noise_laplacian(grid, y, wlap);
                for (int i = 0; i < n; ++i) expl[static_cast<std::size_t>(i)] +=
                    wlap[static_cast<std::size_t>(i)];
            }
            for (int s : grid.boundary_space_indices())
                for (int k = 0; k < nw; ++k) expl[static_cast<std::size_t>(s * nw + k)] = 0.0;
            for (auto& v : expl) v *= (1.0 - cfg.theta);
        }

        // Picard iteration on the nonlinearity
        if (cfg.picard_init == PicardInit::from_next_level)
            std::copy(y.begin(), y.end(), ustar.begin());
        else
            std::fill(ustar.begin(), ustar.end(), 0.0);

        double delta = 0.0;
        bool converged = false;
        for (int it = 0; it < cfg.picard_max_iters; ++it) {
            for (int ax = 0; ax < d; ++ax)
                gradient_x(grid, ustar, ax, grads[static_cast<std::size_t>(ax)]);
            if (lift) {
                gradient_w(grid, ustar, qstar);
                sig_div = apply_sigma_div(spec, grid, t_n, qstar);
            }
            if (d == 2) {
                cross.assign(static_cast<std::size_t>(n), 0.0);
                add_cross_divergence(spec, grid, t_n, ustar, cross);
            }

            for (int s = 0; s < grid.space_points(); ++s) {
                grid.space_coords(s, std::span<double>(xbuf.data(), static_cast<std::size_t>(d)));
                for (int k = 0; k < nw; ++k) {
                    const int node = s * nw + k;
                    if (grid.is_space_boundary(s) || (lift && (k == 0 || k == nw - 1))) {
                        rhs[static_cast<std::size_t>(node)] = 0.0;
                        continue;
                    }
                    std::array<double, 2> p{};
                    for (int ax = 0; ax < d; ++ax)
                        p[static_cast<std::size_t>(ax)] = clipped(
                            grads[static_cast<std::size_t>(ax)][static_cast<std::size_t>(node)],
                            cfg.clip_bound);
                    const double rval =
                        lift ? clipped(qstar[static_cast<std::size_t>(node)], cfg.clip_bound) : 0.0;
                    const double fval = spec.f(
                        t_n, std::span<const double>(xbuf.data(), static_cast<std::size_t>(d)),
                        grid.noise_coord(k),
                        clipped(ustar[static_cast<std::size_t>(node)], cfg.clip_bound),
                        std::span<const double>(p.data(), static_cast<std::size_t>(d)),
                        std::span<const double>(&rval, 1));
                    double g = fval;
                    if (lift) g += sig_div[static_cast<std::size_t>(node)];
                    if (d == 2) g += cross[static_cast<std::size_t>(node)];
                    rhs[static_cast<std::size_t>(node)] =
                        y[static_cast<std::size_t>(node)] + dt * (expl[static_cast<std::size_t>(node)] + g);
                }
            }

            std::copy(rhs.begin(), rhs.end(), unew.begin());
            mats.implicit_.solve(unew);
            // pin the Dirichlet rows (pivoted elimination leaves roundoff there)
            for (int s : grid.boundary_space_indices())
                for (int k = 0; k < nw; ++k) unew[static_cast<std::size_t>(s * nw + k)] = 0.0;

            delta = 0.0;
            for (int i = 0; i < n; ++i)
                delta = std::max(delta, std::abs(unew[static_cast<std::size_t>(i)] -
                                                 ustar[static_cast<std::size_t>(i)]));
            std::swap(ustar, unew);
            if (delta < cfg.picard_tol) {
                converged = true;
                break;
            }
        }
        if (!converged)
            throw ConvergenceError("Picard did not converge at time level " +
                                       std::to_string(level),
                                   delta);
        for (int i = 0; i < n; ++i)
            if (!std::isfinite(ustar[static_cast<std::size_t>(i)]))
                throw BlowupError("non-finite solution value at time level " +
                                  std::to_string(level));

        auto dst = field.level_u(level);
        std::copy(ustar.begin(), ustar.end(), dst.begin());
    }

    if (lift) {
        std::vector<double> qlvl(static_cast<std::size_t>(n));
        for (int level = 0; level <= grid.n_time(); ++level) {
            gradient_w(grid, field.level_u(level), qlvl);
            for (int s = 0; s < grid.space_points(); ++s)
                for (int k = 0; k < nw; ++k)
                    field.q[field.qidx(level, s, k, 0)] = qlvl[static_cast<std::size_t>(s * nw + k)];
        }
        // truncation health: |U_w| at the w edge large relative to the core
        // indicates w_max chosen too small
        double edge = 0.0, core = 0.0;
        const double wmax = grid.noise()->hi;
        for (int level = 0; level <= grid.n_time(); ++level)
            for (int s = 0; s < grid.space_points(); ++s)
                for (int k = 0; k < nw; ++k) {
                    const double qv = std::abs(field.q[field.qidx(level, s, k, 0)]);
                    if (k == 0 || k == nw - 1) edge = std::max(edge, qv);
                    if (std::abs(grid.noise_coord(k)) <= 0.5 * wmax) core = std::max(core, qv);
                }
        field.wmax_warning_mag = edge;
        field.wmax_warning = edge > 4.0 * (core + 1e-300);
    }
    return field;
}

}  // namespace

SolutionField solve_deterministic(const ProblemSpec& spec, const GridStack& grid,
                                  const SolverConfig& cfg) {
    if (spec.mode != CoefficientMode::deterministic)
        throw ArgumentError("solve_deterministic: spec is not in deterministic mode");
    if (grid.noise()) throw ArgumentError("solve_deterministic: grid must not carry a noise axis");
    return solve_impl(spec, grid, cfg);
}

SolutionField solve_markovian_lift(const ProblemSpec& spec, const GridStack& grid,
                                   const SolverConfig& cfg) {
    if (spec.mode != CoefficientMode::markovian_lift)
        throw ArgumentError("solve_markovian_lift: spec is not in markovian_lift mode");
    return solve_impl(spec, grid, cfg);
}

// ---------------------------------------------------------------------------
// Path sampling
// ---------------------------------------------------------------------------

PathSample::PathSample(const SolutionField& field, int n_paths, std::uint64_t seed)
    : field_(field), n_paths_(n_paths) {
    if (n_paths < 0) throw ArgumentError("PathSample: n_paths >= 0");
    const int levels = field.grid.n_time() + 1;
    paths_.assign(static_cast<std::size_t>(n_paths) * static_cast<std::size_t>(levels), 0.0);
    const double sqrt_dt = std::sqrt(field.grid.dt());
    const double wmax = field.grid.noise() ? field.grid.noise()->hi
                                           : std::numeric_limits<double>::infinity();
    std::vector<unsigned char> clamped(static_cast<std::size_t>(std::max(n_paths, 1)), 0);
    Rng root(seed);
    parallel_for_blocks(static_cast<std::size_t>(n_paths), 128,
                        [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            Rng rng = root.derive(0x574945, p);
            double w = 0.0;
            for (int level = 1; level < levels; ++level) {
                w += sqrt_dt * rng.normal();
                paths_[p * static_cast<std::size_t>(levels) + static_cast<std::size_t>(level)] = w;
                if (std::abs(w) > wmax) clamped[p] = 1;
            }
        }
    });
    for (int p = 0; p < n_paths; ++p) clamped_ += clamped[static_cast<std::size_t>(p)];
}

double PathSample::w_at(int path, int level) const {
    return paths_[static_cast<std::size_t>(path) *
                      static_cast<std::size_t>(field_.grid.n_time() + 1) +
                  static_cast<std::size_t>(level)];
}

double PathSample::increment(int path, int level) const {
    return w_at(path, level + 1) - w_at(path, level);
}

double PathSample::interp(int level, int s, double w, bool use_q, int comp) const {
    const GridStack& g = field_.grid;
    if (!g.noise()) {
        return use_q ? field_.q_value(level, s, 0, comp) : field_.u[field_.uidx(level, s, 0)];
    }
    const Axis& wa = *g.noise();
    const double wc = std::clamp(w, wa.lo, wa.hi);
    const double pos = (wc - wa.lo) / wa.dx();
    int j = static_cast<int>(std::floor(pos));
    j = std::clamp(j, 0, wa.n - 2);
    const double frac = pos - j;
    const double v0 = use_q ? field_.q_value(level, s, j, comp) : field_.u[field_.uidx(level, s, j)];
    const double v1 =
        use_q ? field_.q_value(level, s, j + 1, comp) : field_.u[field_.uidx(level, s, j + 1)];
    return v0 + frac * (v1 - v0);
}

double PathSample::u_at(int path, int level, int s) const {
    return interp(level, s, w_at(path, level), false, 0);
}

double PathSample::q_at(int path, int level, int s, int comp) const {
    return interp(level, s, w_at(path, level), true, comp);
}

PathSample sample_random_field(const SolutionField& field, int n_paths, std::uint64_t seed) {
    return PathSample(field, n_paths, seed);
}

}  // namespace qbspde

#include "qbspde/estimates.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "qbspde/errors.hpp"
#include "qbspde/operators.hpp"

namespace qbspde {

namespace {
constexpr int kGridPoints = 1000;
// Largest exponent argument for which exp(x) - expm1(x) = 1 is still
// certifiable to 1e-10 in double precision.
constexpr double kIdentityExpGuard = 12.5;
}

ProofTestFunction::ProofTestFunction(PsiKind kind, double lambda, double M)
    : kind_(kind), lambda_(lambda), M_(M) {
    if (!(lambda > 0.0) || !(M > 0.0))
        throw ArgumentError("ProofTestFunction: lambda, M > 0 required");
    switch (kind) {
        case PsiKind::Psi1:
            lo_ = -M;
            hi_ = M;
            if (2.0 * lambda * M > 700.0) throw RangeError("Psi1: exp range exceeded");
            break;
        case PsiKind::Psi2:
            lo_ = -M;
            hi_ = M;
            if (2.0 * lambda * M > kIdentityExpGuard)
                throw RangeError("Psi2: 2 lambda M too large to certify the identity");
            break;
        case PsiKind::Psi3:
            lo_ = 0.0;
            hi_ = 2.0 * M;
            if (40.0 * lambda * M > kIdentityExpGuard)
                throw RangeError("Psi3: 40 lambda M too large to certify the identity");
            break;
    }
}

double ProofTestFunction::value(double v) const {
    const double l = lambda_;
    switch (kind_) {
        case PsiKind::Psi1:
            if (v <= 0.0) return 0.0;
            return std::expm1(2.0 * l * v) - 2.0 * l * v - 2.0 * l * l * v * v;
        case PsiKind::Psi2: {
            const double av = std::abs(v);
            return 0.5 / (l * l) * (std::expm1(2.0 * l * av) - 2.0 * l * av);
        }
        case PsiKind::Psi3:
            return (std::expm1(20.0 * l * v) - 20.0 * l * v) / (200.0 * l * l);
    }
    return 0.0;
}

double ProofTestFunction::d1(double v) const {
    const double l = lambda_;
    switch (kind_) {
        case PsiKind::Psi1:
            if (v <= 0.0) return 0.0;
            return 2.0 * l * (std::expm1(2.0 * l * v) - 2.0 * l * v);
        case PsiKind::Psi2: {
            const double av = std::abs(v);
            const double mag = std::expm1(2.0 * l * av) / l;
            return v >= 0.0 ? mag : -mag;
        }
        case PsiKind::Psi3:
            return std::expm1(20.0 * l * v) / (10.0 * l);
    }
    return 0.0;
}

double ProofTestFunction::d2(double v) const {
    const double l = lambda_;
    switch (kind_) {
        case PsiKind::Psi1:
            if (v <= 0.0) return 0.0;
            return 4.0 * l * l * std::expm1(2.0 * l * v);
        case PsiKind::Psi2:
            return 2.0 * std::exp(2.0 * l * std::abs(v));
        case PsiKind::Psi3:
            return 2.0 * std::exp(20.0 * l * v);
    }
    return 0.0;
}

void ProofTestFunction::validate_invariants() {
    const double l = lambda_;
    const double span = hi_ - lo_;
    double k1 = 0.0, k2 = 0.0, k3 = 0.0, k4 = 0.0;
    bool sandwich_started = false;
    for (int i = 0; i < kGridPoints; ++i) {
        const double v = lo_ + span * i / (kGridPoints - 1);
        const double val = value(v), dv = d1(v), ddv = d2(v);
        switch (kind_) {
            case PsiKind::Psi1: {
                if (!(val >= 0.0) || !(dv >= 0.0))
                    throw StructuralError("Psi1: nonnegativity violated");
                if (v <= 0.0 && val != 0.0) throw StructuralError("Psi1: not zero for v <= 0");
                if (v > 0.0 && !(val > 0.0)) throw StructuralError("Psi1: zero for v > 0");
                const double vd = v * dv;
                if (!(vd >= 0.0) || vd > 2.0 * (M_ + 3.0) * l * val)
                    throw StructuralError("Psi1: v Psi1' outside [0, 2(M+3) lambda Psi1]");
                if (l * dv - 0.5 * ddv > 0.0)
                    throw StructuralError("Psi1: lambda Psi1' - Psi1''/2 positive");
                break;
            }
            case PsiKind::Psi2: {
                if (!(val >= 0.0)) throw StructuralError("Psi2: negative value");
                if (std::abs(dv) > std::expm1(2.0 * l * M_) / l + 1e-300)
                    throw StructuralError("Psi2: derivative bound violated");
                if (std::abs(0.5 * ddv - l * std::abs(dv) - 1.0) > 1e-10)
                    throw StructuralError("Psi2: identity Psi2''/2 - lambda|Psi2'| = 1 violated");
                if (std::abs(v) > 1e-9 * M_) {
                    const double rv = val / (v * v), rd = std::abs(dv) / std::abs(v);
                    if (!sandwich_started) {
                        k1 = k2 = rv;
                        k3 = k4 = rd;
                        sandwich_started = true;
                    } else {
                        k1 = std::min(k1, rv);
                        k2 = std::max(k2, rv);
                        k3 = std::min(k3, rd);
                        k4 = std::max(k4, rd);
                    }
                }
                break;
            }
            case PsiKind::Psi3: {
                if (!(val >= 0.0) || !(dv >= 0.0)) throw StructuralError("Psi3: not increasing");
                if (std::abs(0.5 * ddv - 10.0 * l * dv - 1.0) > 1e-10)
                    throw StructuralError("Psi3: identity Psi3''/2 - 10 lambda Psi3' = 1 violated");
                break;
            }
        }
    }
    if (kind_ == PsiKind::Psi2) {
        if (std::abs(d1(0.0)) != 0.0) throw StructuralError("Psi2: Psi2'(0) != 0");
        if (!(k1 > 0.0 && k3 > 0.0)) throw StructuralError("Psi2: degenerate sandwich constants");
        sandwich_ = Sandwich{k1, k2, k3, k4};
    }
    if (kind_ == PsiKind::Psi3 && (value(0.0) != 0.0 || d1(0.0) != 0.0))
        throw StructuralError("Psi3: Psi3(0) or Psi3'(0) nonzero");
}

ProofTestFunction ProofTestFunction::make(PsiKind kind, double lambda, double M) {
    ProofTestFunction f(kind, lambda, M);
    f.validate_invariants();
    return f;
}

double linf_bound(double t, double lambda0_sup, double lambda1, double phi_sup, double T) {
    if (t < 0.0 || t > T + 1e-15) throw ArgumentError("linf_bound: t outside [0, T]");
    if (lambda1 < 0.0 || lambda0_sup < 0.0)
        throw ArgumentError("linf_bound: negative envelope constants");
    const double tau = T - t;
    if (lambda1 == 0.0) return lambda0_sup * tau + phi_sup;
    const double growth = std::exp(lambda1 * tau);
    return lambda0_sup / lambda1 * (growth - 1.0) + growth * phi_sup;
}

LinfReport check_linf(const SolutionField& sol, const GrowthEnvelope& env, double phi_sup,
                      double slack) {
    LinfReport rep;
    const GridStack& g = sol.grid;
    for (int level = 0; level <= g.n_time(); ++level) {
        double sup = 0.0;
        for (double v : sol.level_u(level)) sup = std::max(sup, std::abs(v));
        const double bound = linf_bound(g.time(level), env.lambda0_sup, env.lambda1, phi_sup,
                                        g.horizon());
        if (sup > bound + slack) {
            rep.pass = false;
            rep.worst_excess = std::max(rep.worst_excess, sup - bound - slack);
            if (rep.violations.size() < 32)
                rep.violations.push_back(LinfViolation{level, sup, bound});
        }
    }
    return rep;
}

EnergyReport energy_report(const PathSample& samples, double c1_candidate) {
    const SolutionField& f = samples.field();
    const GridStack& g = f.grid;
    const bool deterministic = f.mode == CoefficientMode::deterministic;
    const int n_eval = deterministic ? 1 : samples.n_paths();
    if (n_eval < 1) throw ArgumentError("energy_report: empty sample set");

    std::vector<double> slice(static_cast<std::size_t>(g.space_points()));

    double ux_total = 0.0, q_total = 0.0;
    for (int p = 0; p < n_eval; ++p) {
        double ux_path = 0.0, q_path = 0.0;
        for (int level = 0; level <= g.n_time(); ++level) {
            const double tw = (level == 0 || level == g.n_time()) ? 0.5 * g.dt() : g.dt();
            for (int s = 0; s < g.space_points(); ++s)
                slice[static_cast<std::size_t>(s)] =
                    deterministic ? f.u[f.uidx(level, s, 0)] : samples.u_at(p, level, s);
            GridNorms norms = grid_norms(slice, g);
            ux_path += tw * norms.h1_seminorm * norms.h1_seminorm;
            double qsq = 0.0;
            for (int s = 0; s < g.space_points(); ++s) {
                double qq = 0.0;
                for (int c = 0; c < f.d0; ++c) {
                    const double qv = deterministic ? 0.0 : samples.q_at(p, level, s, c);
                    qq += qv * qv;
                }
                qsq += qq * g.cell_volume(s);
            }
            q_path += tw * qsq;
        }
        ux_total += ux_path;
        q_total += q_path;
    }
    EnergyReport rep;
    rep.ux_sq = ux_total / n_eval;
    rep.q_sq = q_total / n_eval;
    rep.c1_candidate = c1_candidate;
    rep.within_candidate = (rep.ux_sq + rep.q_sq) <= c1_candidate;
    return rep;
}

namespace {

void require_same_grid(const SolutionField& a, const SolutionField& b) {
    const GridStack& ga = a.grid;
    const GridStack& gb = b.grid;
    bool same = ga.dim() == gb.dim() && ga.n_time() == gb.n_time() &&
                ga.noise_points() == gb.noise_points() &&
                std::abs(ga.horizon() - gb.horizon()) < 1e-15;
    for (int ax = 0; same && ax < ga.dim(); ++ax)
        same = ga.space()[static_cast<std::size_t>(ax)].n ==
               gb.space()[static_cast<std::size_t>(ax)].n;
    if (!same) throw ArgumentError("solution fields live on different grids");
}

}  // namespace

ComparisonReport comparison_check(const SolutionField& sol1, const SolutionField& sol2,
                                  double tol) {
    require_same_grid(sol1, sol2);
    ComparisonReport rep;
    for (std::size_t i = 0; i < sol1.u.size(); ++i) {
        const double excess = sol1.u[i] - sol2.u[i] - tol;
        if (excess > 0.0) {
            rep.pass = false;
            ++rep.n_violations;
            rep.max_excess = std::max(rep.max_excess, excess);
        }
    }
    return rep;
}

OdeSupersolutionReport ode_supersolution_check(const SolutionField& sol,
                                               const std::function<double(double, double)>& g,
                                               double zeta_T, double tol) {
    const GridStack& grid = sol.grid;
    const int nt = grid.n_time();
    OdeSupersolutionReport rep;
    rep.zeta.assign(static_cast<std::size_t>(nt + 1), 0.0);
    rep.zeta[static_cast<std::size_t>(nt)] = zeta_T;

    // zeta'(t) = -g(t, zeta); integrate in s = T - t so eta'(s) = g(T-s, eta).
    const double h = grid.dt();
    double eta = zeta_T;
    for (int k = nt - 1; k >= 0; --k) {
        const double s0 = grid.horizon() - grid.time(k + 1);
        auto rhs = [&](double s, double y) { return g(grid.horizon() - s, y); };
        const double k1 = rhs(s0, eta);
        const double k2 = rhs(s0 + 0.5 * h, eta + 0.5 * h * k1);
        const double k3 = rhs(s0 + 0.5 * h, eta + 0.5 * h * k2);
        const double k4 = rhs(s0 + h, eta + h * k3);
        eta += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!std::isfinite(eta) || std::abs(eta) > 1e100)
            throw BlowupError("ode_supersolution_check: zeta blew up at level " +
                              std::to_string(k));
        rep.zeta[static_cast<std::size_t>(k)] = eta;
    }

    for (int level = 0; level <= nt; ++level) {
        double sup = -std::numeric_limits<double>::infinity();
        for (double v : sol.level_u(level)) sup = std::max(sup, v);
        const double excess = sup - rep.zeta[static_cast<std::size_t>(level)] - tol;
        if (excess > 0.0) {
            rep.pass = false;
            rep.max_excess = std::max(rep.max_excess, excess);
        }
    }
    return rep;
}

double ito_identity_residual(const ProblemSpec& spec, const SolutionField& sol,
                             const ProofTestFunction& psi, const PathSample* paths) {
    const GridStack& g = sol.grid;
    if (g.dim() != 1) throw ScaleError("ito_identity_residual: 1-D fields only");
    const bool lift = sol.mode == CoefficientMode::markovian_lift;
    if (lift && (!paths || paths->n_paths() < 1))
        throw ArgumentError("ito_identity_residual: lift fields need path samples");

    // domain guard
    double umin = std::numeric_limits<double>::infinity(), umax = -umin;
    for (double v : sol.u) {
        umin = std::min(umin, v);
        umax = std::max(umax, v);
    }
    if (umin < psi.domain_lo() - 1e-12 || umax > psi.domain_hi() + 1e-12)
        throw DomainError("ito_identity_residual: solution leaves the psi domain");

    const Axis& ax = g.space()[0];
    const int nx = ax.n;
    const double dx = ax.dx();
    const int nt = g.n_time();
    const int n_paths = lift ? paths->n_paths() : 1;

    // slices are purely spatial (evaluated along a path), so the gradient and
    // quadrature run on a noise-free view of the grid
    const GridStack flat({ax}, std::nullopt, g.horizon(), nt);
    std::vector<double> slice(static_cast<std::size_t>(nx)), qslice(static_cast<std::size_t>(nx));
    std::vector<double> grad(static_cast<std::size_t>(nx));
    std::array<double, 1> xbuf{};

    double total = 0.0;
    for (int p = 0; p < n_paths; ++p) {
        double jump = 0.0, quad = 0.0, stoch = 0.0;
        for (int level = 0; level <= nt; ++level) {
            const double t = g.time(level);
            for (int s = 0; s < nx; ++s) {
                slice[static_cast<std::size_t>(s)] =
                    lift ? paths->u_at(p, level, s) : sol.u[sol.uidx(level, s, 0)];
                qslice[static_cast<std::size_t>(s)] = lift ? paths->q_at(p, level, s, 0) : 0.0;
            }
            gradient_x(flat, slice, 0, grad);
            const double wcur = lift ? paths->w_at(p, level) : 0.0;

            // jump term endpoints
            if (level == 0 || level == nt) {
                double integral = 0.0;
                for (int s = 0; s < nx; ++s)
                    integral += psi.value(slice[static_cast<std::size_t>(s)]) * flat.cell_volume(s);
                jump += (level == 0) ? integral : -integral;
            }

            // time-space quadrature of psi' f0 - psi'' u_x f1 - psi'' |q|^2 / 2,
            // flux part in face form (exact discrete summation by parts)
            const double tw = (level == 0 || level == nt) ? 0.5 * g.dt() : g.dt();
            double glevel = 0.0;
            for (int s = 1; s + 1 < nx; ++s) {
                xbuf[0] = ax.coord(s);
                const double uval = slice[static_cast<std::size_t>(s)];
                const double qval = qslice[static_cast<std::size_t>(s)];
                const double f0 = spec.f(
                    t, std::span<const double>(xbuf.data(), 1), wcur, uval,
                    std::span<const double>(&grad[static_cast<std::size_t>(s)], 1),
                    std::span<const double>(&qval, 1));
                glevel += psi.d1(uval) * f0 * flat.cell_volume(s);
                glevel -= 0.5 * psi.d2(uval) * qval * qval * flat.cell_volume(s);
            }
            for (int s = 0; s + 1 < nx; ++s) {
                const double xm = 0.5 * (ax.coord(s) + ax.coord(s + 1));
                xbuf[0] = xm;
                const double a_face =
                    spec.a(t, std::span<const double>(xbuf.data(), 1), wcur)(0, 0);
                const double sg_face =
                    spec.sigma(t, std::span<const double>(xbuf.data(), 1), wcur)(0, 0);
                const double q_face = 0.5 * (qslice[static_cast<std::size_t>(s)] +
                                             qslice[static_cast<std::size_t>(s + 1)]);
                const double flux = a_face *
                                        (slice[static_cast<std::size_t>(s + 1)] -
                                         slice[static_cast<std::size_t>(s)]) / dx +
                                    sg_face * q_face;
                glevel -= flux * (psi.d1(slice[static_cast<std::size_t>(s + 1)]) -
                                  psi.d1(slice[static_cast<std::size_t>(s)]));
            }
            quad += tw * glevel;

            // Ito forward-point stochastic sum
            if (lift && level < nt) {
                double integ = 0.0;
                for (int s = 0; s < nx; ++s)
                    integ += psi.d1(slice[static_cast<std::size_t>(s)]) *
                             qslice[static_cast<std::size_t>(s)] * flat.cell_volume(s);
                stoch += integ * paths->increment(p, level);
            }
        }
        total += jump - quad + stoch;
    }
    return total / n_paths;
}

Power2mReport power2m_contraction(const SolutionField& sol1, const SolutionField& sol2, int m,
                                  const UniquenessAssumptions& ua, double node_tol) {
    if (m < 2) throw ArgumentError("power2m_contraction: m >= 2");
    require_same_grid(sol1, sol2);
    const GridStack& g = sol1.grid;
    const int nt = g.n_time();
    const int nw = g.noise_points();
    const double power = 2.0 * m;

    double domain_vol = 0.0;
    for (int s = 0; s < g.space_points(); ++s) domain_vol += g.cell_volume(s);
    const double floor = domain_vol * std::pow(node_tol, power) + 1e-300;

    Power2mReport rep;
    rep.integrals.assign(static_cast<std::size_t>(nt + 1), 0.0);
    rep.gronwall_bounds.assign(static_cast<std::size_t>(nt + 1), 0.0);

    for (std::size_t i = 0; i < sol1.u.size(); ++i)
        rep.sup_distance = std::max(rep.sup_distance, std::abs(sol1.u[i] - sol2.u[i]));

    for (int level = 0; level <= nt; ++level) {
        // worst over noise slices (the spatial integral is per-omega)
        double worst = 0.0;
        for (int k = 0; k < nw; ++k) {
            double integral = 0.0;
            for (int s = 0; s < g.space_points(); ++s) {
                const double diff =
                    sol1.u[sol1.uidx(level, s, k)] - sol2.u[sol2.uidx(level, s, k)];
                if (diff > 0.0) integral += std::pow(diff, power) * g.cell_volume(s);
            }
            worst = std::max(worst, integral);
        }
        rep.integrals[static_cast<std::size_t>(level)] = worst;
    }

    // trapezoid integral of b over [t_level, T], then e^{2m int b} * terminal
    double b_int = 0.0;
    rep.gronwall_bounds[static_cast<std::size_t>(nt)] =
        rep.integrals[static_cast<std::size_t>(nt)] + floor;
    for (int level = nt - 1; level >= 0; --level) {
        b_int += 0.5 * g.dt() * (ua.b_fn(g.time(level)) + ua.b_fn(g.time(level + 1)));
        rep.gronwall_bounds[static_cast<std::size_t>(level)] =
            std::exp(power * std::max(b_int, 0.0)) * rep.integrals[static_cast<std::size_t>(nt)] +
            floor;
        if (rep.integrals[static_cast<std::size_t>(level)] >
            rep.gronwall_bounds[static_cast<std::size_t>(level)])
            rep.pass = false;
    }
    return rep;
}

}  // namespace qbspde

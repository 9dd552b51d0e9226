#include "qbspde/control.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "qbspde/errors.hpp"
#include "qbspde/mathutil.hpp"
#include "qbspde/parallel.hpp"
#include "qbspde/rng.hpp"
#include "qbspde/transforms.hpp"

namespace qbspde {

void ControlProblem::validate() const {
    if (state_dim != 1) throw ScaleError("ControlProblem: scalar state only at desk scale");
    if (V.empty()) throw ArgumentError("ControlProblem: V must be nonempty");
    if (!b || !sigma_w || !pi_b || !f || !phi)
        throw ArgumentError("ControlProblem: missing evaluators");
    if (!(horizon > 0.0)) throw ArgumentError("ControlProblem: horizon > 0");
}

int StateBins::cell_of(double x) const {
    int c = static_cast<int>(std::floor((x - lo) / width()));
    return std::clamp(c, 0, n - 1);
}

ControlPolicy ControlPolicy::constant(int v_index, int n_time, StateBins bins) {
    ControlPolicy p;
    p.bins = bins;
    p.n_time = n_time;
    p.choice.assign(static_cast<std::size_t>(n_time) * static_cast<std::size_t>(bins.n), v_index);
    return p;
}

int ControlPolicy::control_index(int k, double x) const {
    k = std::clamp(k, 0, n_time - 1);
    return choice[static_cast<std::size_t>(k) * static_cast<std::size_t>(bins.n) +
                  static_cast<std::size_t>(bins.cell_of(x))];
}

PathBundle simulate_sde(const ControlProblem& prob, const ControlPolicy& policy, double t0,
                        double x0, int n_paths, const ControlGrid& grid, std::uint64_t seed) {
    prob.validate();
    if (t0 < 0.0 || t0 > prob.horizon) throw ArgumentError("simulate_sde: t0 outside [0, T]");
    if (n_paths < 0) throw ArgumentError("simulate_sde: n_paths >= 0");

    const int K = grid.n_steps;
    PathBundle out;
    out.tgrid = grid;
    out.n_paths = n_paths;
    out.X.assign(static_cast<std::size_t>(n_paths) * static_cast<std::size_t>(K + 1), 0.0);
    out.dW.assign(static_cast<std::size_t>(n_paths) * static_cast<std::size_t>(K), 0.0);
    out.dB.assign(static_cast<std::size_t>(n_paths) * static_cast<std::size_t>(K), 0.0);
    out.vidx.assign(static_cast<std::size_t>(n_paths) * static_cast<std::size_t>(K), 0);

    const double dt = grid.dt();
    const double sdt = std::sqrt(dt);
    Rng root(seed);
    parallel_for_blocks(static_cast<std::size_t>(n_paths), 128,
                        [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            Rng rng = root.derive(0x534445, p);
            double x = x0;
            out.X[p * static_cast<std::size_t>(K + 1)] = x;
            for (int k = 0; k < K; ++k) {
                const double t = grid.time(k);
                const int vi = policy.control_index(k, x);
                const double v = prob.V[static_cast<std::size_t>(vi)];
                const double dw = sdt * rng.normal();
                const double db = sdt * rng.normal();
                x += prob.b(t, x, v) * dt + prob.sigma_w(t, x) * dw + prob.pi_b(t, x) * db;
                out.X[p * static_cast<std::size_t>(K + 1) + static_cast<std::size_t>(k + 1)] = x;
                out.dW[p * static_cast<std::size_t>(K) + static_cast<std::size_t>(k)] = dw;
                out.dB[p * static_cast<std::size_t>(K) + static_cast<std::size_t>(k)] = db;
                out.vidx[p * static_cast<std::size_t>(K) + static_cast<std::size_t>(k)] = vi;
            }
        }
    });
    return out;
}

namespace {

// Polynomial regression in standardized X; collapses to the sample mean when
// the X column is (numerically) constant.
struct StepRegression {
    double mean_x = 0.0, sd_x = 1.0;
    int degree = 0;
    std::vector<double> beta;

    double eval(double x) const {
        const double z = (x - mean_x) / sd_x;
        double acc = 0.0, pw = 1.0;
        for (int d = 0; d <= degree; ++d) {
            acc += beta[static_cast<std::size_t>(d)] * pw;
            pw *= z;
        }
        return acc;
    }
};

StepRegression fit_regression(std::span<const double> x, std::span<const double> y, int degree) {
    const int n = static_cast<int>(x.size());
    StepRegression reg;
    double mean = 0.0;
    for (double xi : x) mean += xi;
    mean /= n;
    double var = 0.0;
    for (double xi : x) var += (xi - mean) * (xi - mean);
    var /= std::max(n - 1, 1);
    reg.mean_x = mean;
    reg.sd_x = std::sqrt(var);
    if (reg.sd_x < 1e-12) {
        reg.sd_x = 1.0;
        reg.degree = 0;
        double my = 0.0;
        for (double yi : y) my += yi;
        reg.beta = {my / n};
        return reg;
    }
    reg.degree = degree;
    const int p = degree + 1;
    std::vector<double> design(static_cast<std::size_t>(n) * static_cast<std::size_t>(p));
    for (int i = 0; i < n; ++i) {
        const double z = (x[static_cast<std::size_t>(i)] - mean) / reg.sd_x;
        double pw = 1.0;
        for (int d = 0; d < p; ++d) {
            design[static_cast<std::size_t>(i * p + d)] = pw;
            pw *= z;
        }
    }
    reg.beta = least_squares(design, n, p, y);
    return reg;
}

double driver_eval(const ControlProblem& prob, double t, double x, double y, double zt, double zb,
                   double v) {
    return prob.f(t, x, y, zt, zb, v);
}

}  // namespace

BsdeResult solve_cost_bsde(const ControlProblem& prob, const ControlPolicy& policy,
                           const PathBundle& paths, int regression_basis_degree) {
    prob.validate();
    (void)policy;  // the applied control indices ride on the path bundle
    const int K = paths.tgrid.n_steps;
    const int n = paths.n_paths;
    if (n < 1) throw ArgumentError("solve_cost_bsde: no paths");
    const double dt = paths.tgrid.dt();
    const bool transform = prob.exp_transform_lambda.has_value();
    const double lam = transform ? *prob.exp_transform_lambda : 0.0;

    BsdeResult res;
    res.Y.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(K + 1), 0.0);
    auto Y = [&](int p, int k) -> double& {
        return res.Y[static_cast<std::size_t>(p) * static_cast<std::size_t>(K + 1) +
                     static_cast<std::size_t>(k)];
    };

    std::vector<double> xk(static_cast<std::size_t>(n)), target(static_cast<std::size_t>(n));
    std::vector<double> zt_target(static_cast<std::size_t>(n)), zb_target(static_cast<std::size_t>(n));

    if (transform) {
        // linear equation for chi = e^{lambda Y}; Y recovered through the
        // scalar inverse transform
        std::vector<double> chi(static_cast<std::size_t>(n));
        for (int p = 0; p < n; ++p)
            chi[static_cast<std::size_t>(p)] =
                std::exp(lam * prob.phi(paths.x_at(p, K)));
        for (int p = 0; p < n; ++p) Y(p, K) = prob.phi(paths.x_at(p, K));
        for (int k = K - 1; k >= 0; --k) {
            for (int p = 0; p < n; ++p) xk[static_cast<std::size_t>(p)] = paths.x_at(p, k);
            StepRegression reg = fit_regression(xk, chi, regression_basis_degree);
            for (int p = 0; p < n; ++p) {
                const double cond = std::max(reg.eval(xk[static_cast<std::size_t>(p)]), 1e-300);
                chi[static_cast<std::size_t>(p)] = cond;
                Y(p, k) = exp_inverse_value(cond - 1.0, lam);
            }
        }
        double acc = 0.0;
        for (int p = 0; p < n; ++p) acc += Y(p, 0);
        res.y0 = acc / n;
        return res;
    }

    for (int p = 0; p < n; ++p) Y(p, K) = prob.phi(paths.x_at(p, K));
    for (int k = K - 1; k >= 0; --k) {
        const double t = paths.tgrid.time(k);
        for (int p = 0; p < n; ++p) {
            xk[static_cast<std::size_t>(p)] = paths.x_at(p, k);
            const double ynext = Y(p, k + 1);
            target[static_cast<std::size_t>(p)] = ynext;
            zt_target[static_cast<std::size_t>(p)] =
                ynext * paths.dW[static_cast<std::size_t>(p) * static_cast<std::size_t>(K) +
                                 static_cast<std::size_t>(k)] / dt;
            zb_target[static_cast<std::size_t>(p)] =
                ynext * paths.dB[static_cast<std::size_t>(p) * static_cast<std::size_t>(K) +
                                 static_cast<std::size_t>(k)] / dt;
        }
        StepRegression rey = fit_regression(xk, target, regression_basis_degree);
        StepRegression rezt = fit_regression(xk, zt_target, regression_basis_degree);
        StepRegression rezb = fit_regression(xk, zb_target, regression_basis_degree);
        for (int p = 0; p < n; ++p) {
            const double x = xk[static_cast<std::size_t>(p)];
            const double ey = rey.eval(x);
            const double zt = rezt.eval(x);
            const double zb = rezb.eval(x);
            const int vi = paths.vidx[static_cast<std::size_t>(p) * static_cast<std::size_t>(K) +
                                      static_cast<std::size_t>(k)];
            const double v = prob.V[static_cast<std::size_t>(vi)];
            double ystar = ey;  // one inner Picard pass on the y-argument
            ystar = ey + driver_eval(prob, t, x, ystar, zt, zb, v) * dt;
            Y(p, k) = ey + driver_eval(prob, t, x, ystar, zt, zb, v) * dt;
        }
    }
    double acc = 0.0;
    for (int p = 0; p < n; ++p) acc += Y(p, 0);
    res.y0 = acc / n;
    return res;
}

double cost_functional(const ControlProblem& prob, const ControlPolicy& policy, double t0,
                       double x0, int n_paths, int n_steps, int degree, std::uint64_t seed) {
    ControlGrid grid{t0, prob.horizon, n_steps};
    PathBundle paths = simulate_sde(prob, policy, t0, x0, n_paths, grid, seed);
    return solve_cost_bsde(prob, policy, paths, degree).y0;
}

double DPResult::value_at(int level, double x) const {
    const int nb = bins.n;
    const double xc = std::clamp(x, bins.center(0), bins.center(nb - 1));
    const double pos = (xc - bins.center(0)) / bins.width();
    const auto row = [&](int c) {
        return value[static_cast<std::size_t>(level) * static_cast<std::size_t>(nb) +
                     static_cast<std::size_t>(c)];
    };
    int c = static_cast<int>(std::floor(pos));
    c = std::clamp(c, 0, nb - 2);
    const double frac = pos - c;
    if (nb < 4) return row(c) + frac * (row(c + 1) - row(c));
    // 4-point Lagrange: linear interpolation bias compounds over the backward
    // sweep, so cubic accuracy matters at coarse bin counts
    const int c0 = std::clamp(c - 1, 0, nb - 4);
    const double s = pos - c0;  // in [0, 3]
    double acc = 0.0;
    for (int j = 0; j < 4; ++j) {
        double w = 1.0;
        for (int m = 0; m < 4; ++m)
            if (m != j) w *= (s - m) / (j - m);
        acc += w * row(c0 + j);
    }
    return acc;
}

DPResult value_bruteforce(const ControlProblem& prob, double t0, double x0, const StateBins& bins,
                          const ControlGrid& grid, int quad_points) {
    prob.validate();
    (void)t0;
    (void)x0;
    const int K = grid.n_steps;
    const int nb = bins.n;
    const long budget = static_cast<long>(prob.V.size()) * K * nb;
    if (budget > 50000)
        throw ScaleError("value_bruteforce: |V| * n_t * n_bins = " + std::to_string(budget) +
                         " exceeds the feasibility budget");

    const GaussHermite gh = gauss_hermite_normal(quad_points);
    const double dt = grid.dt();

    DPResult dp;
    dp.bins = bins;
    dp.tgrid = grid;
    dp.value.assign(static_cast<std::size_t>(K + 1) * static_cast<std::size_t>(nb), 0.0);
    dp.policy.assign(static_cast<std::size_t>(K) * static_cast<std::size_t>(nb), 0);

    for (int c = 0; c < nb; ++c)
        dp.value[static_cast<std::size_t>(K) * static_cast<std::size_t>(nb) +
                 static_cast<std::size_t>(c)] = prob.phi(bins.center(c));

    for (int k = K - 1; k >= 0; --k) {
        const double t = grid.time(k);
        const bool terminal_step = (k + 1 == K);
        for (int c = 0; c < nb; ++c) {
            const double x = bins.center(c);
            const double sig = prob.sigma_w(t, x);
            const double pib = prob.pi_b(t, x);
            const double s2 = sig * sig + pib * pib;
            const double s = std::sqrt(s2);
            double best = std::numeric_limits<double>::infinity();
            int best_v = 0;
            for (std::size_t vi = 0; vi < prob.V.size(); ++vi) {
                const double v = prob.V[vi];
                const double drift = prob.b(t, x, v) * dt;
                double ey = 0.0, eys = 0.0;
                for (int qn = 0; qn < quad_points; ++qn) {
                    const double shock = s * std::sqrt(dt) * gh.nodes[static_cast<std::size_t>(qn)];
                    // the terminal datum is known in closed form; interpolating
                    // its binned samples would dominate the bias
                    const double val = terminal_step ? prob.phi(x + drift + shock)
                                                     : dp.value_at(k + 1, x + drift + shock);
                    ey += gh.weights[static_cast<std::size_t>(qn)] * val;
                    eys += gh.weights[static_cast<std::size_t>(qn)] * val * shock;
                }
                // E[. dW | combined shock] projections
                const double zt = s2 > 0.0 ? sig / s2 * eys / dt : 0.0;
                const double zb = s2 > 0.0 ? pib / s2 * eys / dt : 0.0;
                double ystar = ey;
                ystar = ey + prob.f(t, x, ystar, zt, zb, v) * dt;
                const double cand = ey + prob.f(t, x, ystar, zt, zb, v) * dt;
                if (cand < best) {
                    best = cand;
                    best_v = static_cast<int>(vi);
                }
            }
            dp.value[static_cast<std::size_t>(k) * static_cast<std::size_t>(nb) +
                     static_cast<std::size_t>(c)] = best;
            dp.policy[static_cast<std::size_t>(k) * static_cast<std::size_t>(nb) +
                      static_cast<std::size_t>(c)] = best_v;
        }
    }
    return dp;
}

double backward_semigroup(const ControlProblem& prob, int v_index, double t0, double x0,
                          double delta, int n_steps, const std::function<double(double)>& eta,
                          int n_paths, int degree, std::uint64_t seed) {
    prob.validate();
    if (delta < 0.0 || t0 + delta > prob.horizon + 1e-12)
        throw ArgumentError("backward_semigroup: delta outside [0, T - t]");
    if (delta == 0.0) return eta(x0);

    ControlGrid grid{t0, t0 + delta, n_steps};
    StateBins dummy{x0 - 1.0, x0 + 1.0, 1};
    ControlPolicy pol = ControlPolicy::constant(v_index, n_steps, dummy);
    PathBundle paths = simulate_sde(prob, pol, t0, x0, n_paths, grid, seed);

    // same backward pass as the cost BSDE with terminal eta(X)
    ControlProblem sub = prob;
    sub.phi = eta;
    sub.horizon = t0 + delta;
    return solve_cost_bsde(sub, pol, paths, degree).y0;
}

double dpp_check(const ControlProblem& prob, const DPResult& dp, int k0, double x, int m,
                 int n_paths, int degree, std::uint64_t seed) {
    prob.validate();
    if (k0 < 0 || k0 + m > dp.tgrid.n_steps) throw ArgumentError("dpp_check: window outside grid");
    const double lhs = dp.value_at(k0, x);
    if (m == 0) return 0.0;

    long combos = 1;
    for (int i = 0; i < m; ++i) {
        combos *= static_cast<long>(prob.V.size());
        if (combos > 256) throw ScaleError("dpp_check: control enumeration too large");
    }

    auto eta = [&](double xv) { return dp.value_at(k0 + m, xv); };

    double rhs = std::numeric_limits<double>::infinity();
    for (long seq = 0; seq < combos; ++seq) {
        // open-loop sequence encoded base-|V|
        ControlGrid grid{dp.tgrid.time(k0), dp.tgrid.time(k0 + m), m};
        StateBins dummy{x - 1.0, x + 1.0, 1};
        ControlPolicy pol;
        pol.bins = dummy;
        pol.n_time = m;
        pol.choice.resize(static_cast<std::size_t>(m));
        long rem = seq;
        for (int k = 0; k < m; ++k) {
            pol.choice[static_cast<std::size_t>(k)] =
                static_cast<int>(rem % static_cast<long>(prob.V.size()));
            rem /= static_cast<long>(prob.V.size());
        }
        PathBundle paths = simulate_sde(prob, pol, grid.t0, x, n_paths, grid, seed);
        ControlProblem sub = prob;
        sub.phi = eta;
        sub.horizon = grid.t1;
        rhs = std::min(rhs, solve_cost_bsde(sub, pol, paths, degree).y0);
    }
    return std::abs(lhs - rhs);
}

SolutionField solve_hjb(const ControlProblem& prob, const Box& domain, int nx, int nt,
                        const SolverConfig& cfg) {
    prob.validate();
    ProblemSpec spec;
    spec.spatial_dim = 1;
    spec.wiener_dim = 1;
    spec.domain = domain;
    spec.horizon = prob.horizon;
    spec.mode = CoefficientMode::deterministic;
    spec.coeffs_time_invariant = false;  // sigma/pi may vary in (t, x)
    const auto sig = prob.sigma_w;
    const auto pib = prob.pi_b;
    spec.a = [sig, pib](double t, std::span<const double> x, double) {
        const double s = sig(t, x[0]);
        const double p = pib(t, x[0]);
        return Mat::scalar(0.5 * (s * s + p * p));
    };
    spec.sigma = [](double, std::span<const double>, double) {
        Mat m(1, 1);
        return m;
    };
    const auto f = prob.f;
    const auto b = prob.b;
    const std::vector<double> V = prob.V;
    spec.f = [f, b, sig, pib, V](double t, std::span<const double> x, double, double v,
                                 std::span<const double> p, std::span<const double>) {
        const double grad = p.empty() ? 0.0 : p[0];
        const double zt = grad * sig(t, x[0]);
        const double zb = grad * pib(t, x[0]);
        double best = std::numeric_limits<double>::infinity();
        for (double vc : V)
            best = std::min(best, f(t, x[0], v, zt, zb, vc) + b(t, x[0], vc) * grad);
        return best;
    };
    const auto phi = prob.phi;
    spec.phi = [phi](std::span<const double> x, double) { return phi(x[0]); };

    std::array<int, 1> npts{nx};
    GridStack grid = GridStack::from_box(domain, std::span<const int>(npts.data(), 1),
                                         prob.horizon, nt);
    return solve_deterministic(spec, grid, cfg);
}

}  // namespace qbspde

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "qbspde/grid.hpp"
#include "qbspde/solver.hpp"

namespace qbspde {

/// Controlled scalar diffusion dX = b(t, X, v) dt + sigma(t, X) dW + pi(t, X) dB
/// with a recursive cost driven by the BSDE generator f(t, x, y, zt, zb, v),
/// terminal phi, and a finite admissible control set V.
struct ControlProblem {
    int state_dim = 1;  // scalar state at desk scale
    std::function<double(double t, double x, double v)> b;
    std::function<double(double t, double x)> sigma_w;
    std::function<double(double t, double x)> pi_b;
    std::function<double(double t, double x, double y, double zt, double zb, double v)> f;
    std::function<double(double x)> phi;
    std::vector<double> V;
    double lipschitz_L = 1.0;    // declared Lipschitz constant of (b, sigma, pi)
    double coeff_bound = 1e6;    // declared sup bound on the coefficients
    double horizon = 1.0;
    /// When set, the cost BSDE is solved through the exponential change of
    /// variables with this lambda (for drivers quadratic in z), reusing the
    /// scalar transform maps.
    std::optional<double> exp_transform_lambda;

    void validate() const;
};

struct StateBins {
    double lo = -1.0, hi = 1.0;
    int n = 1;
    double width() const { return (hi - lo) / n; }
    int cell_of(double x) const;
    double center(int c) const { return lo + (c + 0.5) * width(); }
};

/// Piecewise-constant feedback policy: (time interval, state cell) -> index
/// into V. Total on the time grid by construction.
struct ControlPolicy {
    StateBins bins;
    int n_time = 1;
    std::vector<int> choice;  // n_time * bins.n

    static ControlPolicy constant(int v_index, int n_time, StateBins bins);
    int control_index(int k, double x) const;
};

struct ControlGrid {
    double t0 = 0.0;
    double t1 = 1.0;
    int n_steps = 1;
    double dt() const { return (t1 - t0) / n_steps; }
    double time(int k) const { return t0 + k * dt(); }
};

/// Euler-Maruyama paths with independent W and B increments; per-path derived
/// seeds keep results identical for any worker count.
struct PathBundle {
    ControlGrid tgrid;
    int n_paths = 0;
    std::vector<double> X;    // n_paths x (K+1)
    std::vector<double> dW;   // n_paths x K
    std::vector<double> dB;   // n_paths x K
    std::vector<int> vidx;    // n_paths x K

    double x_at(int p, int k) const {
        return X[static_cast<std::size_t>(p) * static_cast<std::size_t>(tgrid.n_steps + 1) +
                 static_cast<std::size_t>(k)];
    }
};

PathBundle simulate_sde(const ControlProblem& prob, const ControlPolicy& policy, double t0,
                        double x0, int n_paths, const ControlGrid& grid, std::uint64_t seed);

struct BsdeResult {
    std::vector<double> Y;  // n_paths x (K+1)
    double y0 = 0.0;        // value at the initial time (regression at the start)
};

/// Backward least-squares Monte Carlo along given paths: Z estimated by
/// regressing Y_{k+1} dW/dt (and dB/dt) on a polynomial basis in X, Y updated
/// with one inner Picard pass. Quadratic drivers may route through the
/// exponential pre-transform configured on the problem.
BsdeResult solve_cost_bsde(const ControlProblem& prob, const ControlPolicy& policy,
                           const PathBundle& paths, int regression_basis_degree);

/// J(t, x; policy) = Y_t of the cost BSDE, by simulate + backward regression.
double cost_functional(const ControlProblem& prob, const ControlPolicy& policy, double t0,
                       double x0, int n_paths, int n_steps, int degree, std::uint64_t seed);

struct DPResult {
    StateBins bins;
    ControlGrid tgrid;
    std::vector<double> value;  // (K+1) x nbins
    std::vector<int> policy;    // K x nbins
    double value_at(int level, double x) const;  // linear interpolation in x
};

/// Backward dynamic programming over binned state: at each step the control
/// minimizing the one-step backward-semigroup value is chosen per cell. The
/// one-step conditional expectations (and the Z projections) are evaluated
/// with Gauss-Hermite quadrature on the combined noise, so the table is
/// deterministic. Feasibility guard: |V| * n_steps * n_bins <= 50000.
DPResult value_bruteforce(const ControlProblem& prob, double t0, double x0,
                          const StateBins& bins, const ControlGrid& grid, int quad_points = 21);

/// One-interval backward semigroup G[eta]: BSDE solve over [t0, t0+delta]
/// under a constant control, terminal eta(X_{t0+delta}), by simulation and
/// regression. delta = 0 returns eta(x0).
double backward_semigroup(const ControlProblem& prob, int v_index, double t0, double x0,
                          double delta, int n_steps, const std::function<double(double)>& eta,
                          int n_paths, int degree, std::uint64_t seed);

/// |LHS - RHS| of the dynamic programming identity at (level k0, x): LHS is
/// the DP value, RHS the minimum over enumerated per-step control sequences
/// of the Monte Carlo semigroup applied to the DP value at level k0 + m.
double dpp_check(const ControlProblem& prob, const DPResult& dp, int k0, double x, int m,
                 int n_paths, int degree, std::uint64_t seed);

/// Markovian deterministic-coefficient specialization of the stochastic HJB
/// equation: backward IMEX solve with the pointwise minimum over V evaluated
/// explicitly, reusing the PDE solver with driver
///   min_v { f(t, x, u, (p sigma, p pi), v) + b(t, x, v) p }.
SolutionField solve_hjb(const ControlProblem& prob, const Box& domain, int nx, int nt,
                        const SolverConfig& cfg);

}  // namespace qbspde

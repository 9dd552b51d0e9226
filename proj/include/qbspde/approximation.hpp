#pragma once

#include <functional>
#include <vector>

#include "qbspde/estimates.hpp"
#include "qbspde/solver.hpp"

namespace qbspde {

/// C2 cutoff in the transformed variable: exactly 1 on
/// [e^{-2 l M}, e^{2 l M}], exactly 0 outside [e^{-2 l (M+1)}, e^{2 l (M+1)}],
/// quintic smoothstep across the transition bands.
class CutoffPsi {
public:
    CutoffPsi(double lambda, double M);

    double operator()(double z) const;

    double lambda() const { return lambda_; }
    double M() const { return M_; }
    double lo_outer() const { return lo_out_; }
    double lo_inner() const { return lo_in_; }
    double hi_inner() const { return hi_in_; }
    double hi_outer() const { return hi_out_; }

private:
    double lambda_, M_, lo_out_, lo_in_, hi_in_, hi_out_;
};

CutoffPsi build_cutoff(double lambda, double M);

/// Scalar-state generator on (v, p, r) (desk scale d = d0 = 1).
using VprFn = std::function<double(double v, double p, double r)>;

struct SearchGrid {
    double v_radius = 10.0;
    double pr_radius = 10.0;
    int points_per_axis = 41;
};

/// Lipschitz regularization F^n(xi) = max over grid zeta (and the query point
/// itself) of [F(zeta) - n |xi - zeta|_1] + 2^{-n}. The sequence is
/// n-Lipschitz up to grid slack, dominates F, decreases in n at every point,
/// and converges to F + 2^{-n} on the grid. Base values are cached on the
/// grid at construction; the base must be bounded above there.
class LipschitzApprox {
public:
    LipschitzApprox(const VprFn& base, int n, SearchGrid grid);

    int n() const { return n_; }
    double offset() const { return offset_; }
    double operator()(double v, double p, double r) const;

private:
    VprFn base_;
    int n_;
    double offset_;
    SearchGrid grid_;
    std::vector<double> axis_v_, axis_pr_;
    std::vector<double> cache_;      // (v, p, r) grid values of the base
    std::vector<double> r0_cache_;   // max over r of cache - n |r| (fast path for r = 0)
};

LipschitzApprox sup_convolution(const VprFn& F, int n, const SearchGrid& grid);

/// Clamp of the driver into the quadratic-growth envelope at level gamma(M):
/// fhat = clamp(f, -(lambda0 + lambda1 |v| + gamma(M)(|p|^2+|r|^2)), +same).
DriverFn truncate_generator(const DriverFn& f, const GrowthEnvelope& env, double M);

struct MonotoneRow {
    int n = 0;
    double sup_distance = 0.0;       // sup |u^n - u^N|
    double monotonicity_defect = 0.0;  // max(0, max(u^{n+1} - u^n)), last row 0
    bool sandwich_ok = true;         // forward-transformed iterate inside the band
};

struct MonotoneSequenceResult {
    std::vector<SolutionField> iterates;
    std::vector<MonotoneRow> rows;
    double M = 0.0;       // a-priori sup bound used by the cutoff
    double lambda = 0.0;  // envelope constant of the strengthened bound
};

/// The monotone existence scheme, assembled in order: forward 2-lambda
/// transform of the driver, cutoff, Lipschitz regularization F^n, inverse
/// transform, backward solve, for n = 1..N. Reports per-n sup-distance to
/// the final iterate and the monotonicity defect. Constant-coefficient
/// scalar problems only (the regularization grid lives on (v, p, r)).
MonotoneSequenceResult monotone_solve_sequence(const ProblemSpec& spec, const GrowthEnvelope& env,
                                               double phi_sup, const GridStack& grid,
                                               const SolverConfig& cfg, int N,
                                               bool skip_cutoff = false);

}  // namespace qbspde

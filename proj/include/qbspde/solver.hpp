#pragma once

#include <cstdint>
#include <optional>

#include "qbspde/grid.hpp"

namespace qbspde {

enum class PicardInit { from_next_level, zero };

struct SolverConfig {
    int picard_max_iters = 50;
    double picard_tol = 1e-10;        // sup-norm stopping threshold
    double theta = 1.0;               // implicit weight on the linear part, in [1/2, 1]
    std::optional<double> clip_bound; // optional clamp of the (v, p, r) arguments of f
    PicardInit picard_init = PicardInit::from_next_level;

    void validate() const;
};

/// Backward IMEX march for the deterministic-coefficient problem (q == 0):
/// at each step solve (I - theta dt L) u^n = u^{n+1} + dt [(1-theta) L u^{n+1}
/// + f(t_n, x, u*, u*_x, 0)], Picard-iterating u* until the sup-change drops
/// below picard_tol. Boundary rows are pinned to zero.
SolutionField solve_deterministic(const ProblemSpec& spec, const GridStack& grid,
                                  const SolverConfig& cfg);

/// Same march on the (x, w) grid for coefficients depending on the current
/// Wiener value: the pair (u, q) comes from one deterministic solve of the
/// lifted equation, with q the central w-derivative of the solution.
/// Homogeneous Dirichlet in x, second-order extrapolation closure in w.
SolutionField solve_markovian_lift(const ProblemSpec& spec, const GridStack& grid,
                                   const SolverConfig& cfg);

/// Wiener trajectories on the solution's time grid with lazy linear
/// interpolation of u and q along each path. Deterministic given the seed
/// and independent of the worker count.
class PathSample {
public:
    PathSample(const SolutionField& field, int n_paths, std::uint64_t seed);

    int n_paths() const { return n_paths_; }
    int clamped_paths() const { return clamped_; }
    const SolutionField& field() const { return field_; }

    double w_at(int path, int level) const;
    double increment(int path, int level) const;  // W_{level+1} - W_{level}
    double u_at(int path, int level, int s) const;
    double q_at(int path, int level, int s, int comp = 0) const;

private:
    const SolutionField& field_;
    int n_paths_;
    int clamped_ = 0;
    std::vector<double> paths_;  // n_paths x (nt+1), unclamped values

    double interp(int level, int s, double w, bool use_q, int comp) const;
};

PathSample sample_random_field(const SolutionField& field, int n_paths, std::uint64_t seed);

}  // namespace qbspde

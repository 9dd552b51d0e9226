#pragma once

#include <span>
#include <vector>

#include "qbspde/grid.hpp"
#include "qbspde/mathutil.hpp"

namespace qbspde {

/// Bandwidth of operators acting on one flattened level vector
/// (space x noise, noise fastest).
int level_bandwidth(const GridStack& grid);

/// Strides of the flattened level vector along each space axis.
std::vector<int> axis_strides(const GridStack& grid);

/// Discrete map u -> (a u_x)_x in conservative flux form: at an interior node,
/// [a_{i+1/2}(u_{i+1}-u_i) - a_{i-1/2}(u_i-u_{i-1})]/dx^2 per axis with
/// arithmetic-mean half-node coefficients. Rows for boundary space nodes
/// enforce identity (Dirichlet). Off-diagonal a^{ij} (d=2) is not part of
/// this map; see add_cross_divergence.
BandedMatrix assemble_divergence_operator(const ProblemSpec& spec, const GridStack& grid, double t);

/// Central-difference divergence of sigma q summed over noise components;
/// zero contribution at boundary rows. q is sized points_per_level * d0.
std::vector<double> apply_sigma_div(const ProblemSpec& spec, const GridStack& grid, double t,
                                    std::span<const double> q);

/// Adds the d=2 cross-derivative part (a^{12} u_y)_x + (a^{21} u_x)_y by
/// central differences into out (interior rows only). No-op for d=1.
void add_cross_divergence(const ProblemSpec& spec, const GridStack& grid, double t,
                          std::span<const double> u, std::span<double> out);

/// Spatial gradient along one axis: central differences at interior nodes,
/// second-order one-sided at boundary nodes and at nodes adjacent to the
/// boundary.
void gradient_x(const GridStack& grid, std::span<const double> level_u, int axis,
                std::span<double> out);

/// Noise-axis derivative (the lift's q): central in w, second-order one-sided
/// at the truncation edges. Requires a noise axis.
void gradient_w(const GridStack& grid, std::span<const double> level_u, std::span<double> out);

/// (1/2) u_ww at interior noise nodes, zero at the w edges. No-op without a
/// noise axis.
void apply_noise_laplacian(const GridStack& grid, std::span<const double> level_u,
                           std::span<double> out);

}  // namespace qbspde

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "qbspde/core_spec.hpp"

namespace qbspde {

struct Axis {
    int n = 0;
    double lo = 0.0, hi = 1.0;
    double dx() const { return (hi - lo) / (n - 1); }
    double coord(int i) const { return lo + i * dx(); }
};

/// Space grid (Dirichlet), optional noise-coordinate grid for the lift, and
/// the backward time grid. Immutable after construction.
class GridStack {
public:
    GridStack(std::vector<Axis> space, std::optional<Axis> noise, double horizon, int n_time);

    static GridStack from_box(const Box& box, std::span<const int> n_per_axis, double horizon,
                              int n_time);

    const std::vector<Axis>& space() const { return space_; }
    const std::optional<Axis>& noise() const { return noise_; }
    int dim() const { return static_cast<int>(space_.size()); }

    double horizon() const { return horizon_; }
    int n_time() const { return n_time_; }
    double dt() const { return horizon_ / n_time_; }
    double time(int level) const { return level * dt(); }

    int space_points() const { return space_points_; }
    int noise_points() const { return noise_ ? noise_->n : 1; }
    int points_per_level() const { return space_points() * noise_points(); }

    /// Flattened space index (row-major over axes); noise index runs fastest
    /// in full-level indexing: node = s * noise_points() + k.
    int space_index(std::span<const int> multi) const;
    void space_coords(int s, std::span<double> out) const;
    double noise_coord(int k) const { return noise_ ? noise_->coord(k) : 0.0; }

    bool is_space_boundary(int s) const { return boundary_mask_[static_cast<std::size_t>(s)] != 0; }
    const std::vector<int>& boundary_space_indices() const { return boundary_indices_; }
    const std::vector<int>& interior_space_indices() const { return interior_indices_; }

    /// Dual-cell volume of space node s (dx per axis, halved at boundary).
    double cell_volume(int s) const;

private:
    std::vector<Axis> space_;
    std::optional<Axis> noise_;
    double horizon_;
    int n_time_;
    int space_points_;
    std::vector<unsigned char> boundary_mask_;
    std::vector<int> boundary_indices_, interior_indices_;
};

/// Discrete (u, q) pair over (time, space[, noise]). u(level=nt) holds the
/// sampled terminal datum; boundary space nodes carry exact zeros at every
/// level. In deterministic mode q is identically zero and left unallocated.
struct SolutionField {
    GridStack grid;
    CoefficientMode mode = CoefficientMode::deterministic;
    int d0 = 1;
    std::vector<double> u;  // (nt+1) * space * noise
    std::vector<double> q;  // (nt+1) * space * noise * d0 (lift mode only)
    bool wmax_warning = false;
    double wmax_warning_mag = 0.0;

    SolutionField(GridStack g, CoefficientMode m, int d0_);

    std::size_t level_stride() const {
        return static_cast<std::size_t>(grid.points_per_level());
    }
    std::size_t uidx(int level, int s, int k) const {
        return static_cast<std::size_t>(level) * level_stride() +
               static_cast<std::size_t>(s) * static_cast<std::size_t>(grid.noise_points()) +
               static_cast<std::size_t>(k);
    }
    std::size_t qidx(int level, int s, int k, int comp) const {
        return uidx(level, s, k) * static_cast<std::size_t>(d0) + static_cast<std::size_t>(comp);
    }

    std::span<double> level_u(int level) {
        return std::span<double>(u).subspan(static_cast<std::size_t>(level) * level_stride(),
                                            level_stride());
    }
    std::span<const double> level_u(int level) const {
        return std::span<const double>(u).subspan(static_cast<std::size_t>(level) * level_stride(),
                                                  level_stride());
    }
    double q_value(int level, int s, int k, int comp) const {
        return q.empty() ? 0.0 : q[qidx(level, s, k, comp)];
    }

    /// Max |u| over boundary space nodes across all levels (Dirichlet defect).
    double boundary_defect() const;
};

struct GridNorms {
    double sup = 0.0;
    double l2 = 0.0;
    double h1_seminorm = 0.0;
};

/// Discrete sup / L2 / H1-seminorm of one spatial slice (fixed time and noise
/// index): l2 uses dual-cell volumes, the seminorm uses forward differences.
GridNorms grid_norms(std::span<const double> values, const GridStack& grid);

}  // namespace qbspde

#include "qbspde/grid.hpp"

#include <algorithm>
#include <cmath>

#include "qbspde/errors.hpp"

namespace qbspde {

GridStack::GridStack(std::vector<Axis> space, std::optional<Axis> noise, double horizon,
                     int n_time)
    : space_(std::move(space)), noise_(std::move(noise)), horizon_(horizon), n_time_(n_time) {
    if (space_.empty() || space_.size() > 2)
        throw ArgumentError("GridStack: 1 or 2 space axes supported");
    for (const Axis& ax : space_) {
        if (ax.n < 3) throw ArgumentError("GridStack: n_x must be >= 3");
        if (!(ax.hi > ax.lo)) throw ArgumentError("GridStack: axis needs hi > lo");
    }
    if (noise_) {
        if (noise_->n < 3) throw ArgumentError("GridStack: n_w must be >= 3");
        if (!(noise_->hi > 0.0) || noise_->lo != -noise_->hi)
            throw ArgumentError("GridStack: noise axis must be [-w_max, w_max] with w_max > 0");
    }
    if (!(horizon_ > 0.0) || n_time_ < 1) throw ArgumentError("GridStack: need T > 0, n_t >= 1");

    space_points_ = 1;
    for (const Axis& ax : space_) space_points_ *= ax.n;
    boundary_mask_.assign(static_cast<std::size_t>(space_points_), 0);
    for (int s = 0; s < space_points_; ++s) {
        int rem = s;
        bool boundary = false;
        for (int a = dim() - 1; a >= 0; --a) {
            const int i = rem % space_[static_cast<std::size_t>(a)].n;
            rem /= space_[static_cast<std::size_t>(a)].n;
            if (i == 0 || i == space_[static_cast<std::size_t>(a)].n - 1) boundary = true;
        }
        boundary_mask_[static_cast<std::size_t>(s)] = boundary ? 1 : 0;
        (boundary ? boundary_indices_ : interior_indices_).push_back(s);
    }
}

GridStack GridStack::from_box(const Box& box, std::span<const int> n_per_axis, double horizon,
                              int n_time) {
    if (static_cast<int>(n_per_axis.size()) != box.dim())
        throw ArgumentError("GridStack::from_box: axis count mismatch");
    std::vector<Axis> axes;
    for (int a = 0; a < box.dim(); ++a)
        axes.push_back(Axis{n_per_axis[static_cast<std::size_t>(a)],
                            box.lo[static_cast<std::size_t>(a)],
                            box.hi[static_cast<std::size_t>(a)]});
    return GridStack(std::move(axes), std::nullopt, horizon, n_time);
}

int GridStack::space_index(std::span<const int> multi) const {
    int s = 0;
    for (int a = 0; a < dim(); ++a) s = s * space_[static_cast<std::size_t>(a)].n +
                                        multi[static_cast<std::size_t>(a)];
    return s;
}

void GridStack::space_coords(int s, std::span<double> out) const {
    int rem = s;
    for (int a = dim() - 1; a >= 0; --a) {
        const Axis& ax = space_[static_cast<std::size_t>(a)];
        out[static_cast<std::size_t>(a)] = ax.coord(rem % ax.n);
        rem /= ax.n;
    }
}

double GridStack::cell_volume(int s) const {
    double vol = 1.0;
    int rem = s;
    for (int a = dim() - 1; a >= 0; --a) {
        const Axis& ax = space_[static_cast<std::size_t>(a)];
        const int i = rem % ax.n;
        rem /= ax.n;
        vol *= (i == 0 || i == ax.n - 1) ? 0.5 * ax.dx() : ax.dx();
    }
    return vol;
}

SolutionField::SolutionField(GridStack g, CoefficientMode m, int d0_)
    : grid(std::move(g)), mode(m), d0(d0_) {
    const std::size_t total =
        static_cast<std::size_t>(grid.n_time() + 1) * static_cast<std::size_t>(grid.points_per_level());
    u.assign(total, 0.0);
    if (mode == CoefficientMode::markovian_lift)
        q.assign(total * static_cast<std::size_t>(d0), 0.0);
}

double SolutionField::boundary_defect() const {
    double worst = 0.0;
    for (int level = 0; level <= grid.n_time(); ++level)
        for (int s : grid.boundary_space_indices())
            for (int k = 0; k < grid.noise_points(); ++k)
                worst = std::max(worst, std::abs(u[uidx(level, s, k)]));
    return worst;
}

GridNorms grid_norms(std::span<const double> values, const GridStack& grid) {
    if (static_cast<int>(values.size()) != grid.space_points())
        throw ArgumentError("grid_norms: slice size mismatch");
    GridNorms out;
    double l2sq = 0.0;
    for (int s = 0; s < grid.space_points(); ++s) {
        out.sup = std::max(out.sup, std::abs(values[static_cast<std::size_t>(s)]));
        l2sq += values[static_cast<std::size_t>(s)] * values[static_cast<std::size_t>(s)] *
                grid.cell_volume(s);
    }
    out.l2 = std::sqrt(l2sq);

    // Forward differences along each axis; face weight = dx * transverse cell sizes.
    double h1sq = 0.0;
    const auto& axes = grid.space();
    if (grid.dim() == 1) {
        const Axis& ax = axes[0];
        for (int i = 0; i + 1 < ax.n; ++i) {
            const double diff = (values[static_cast<std::size_t>(i + 1)] -
                                 values[static_cast<std::size_t>(i)]) / ax.dx();
            h1sq += diff * diff * ax.dx();
        }
    } else {
        const Axis& ax0 = axes[0];
        const Axis& ax1 = axes[1];
        auto val = [&](int i, int j) { return values[static_cast<std::size_t>(i * ax1.n + j)]; };
        for (int i = 0; i + 1 < ax0.n; ++i)
            for (int j = 0; j < ax1.n; ++j) {
                const double diff = (val(i + 1, j) - val(i, j)) / ax0.dx();
                const double wj = (j == 0 || j == ax1.n - 1) ? 0.5 * ax1.dx() : ax1.dx();
                h1sq += diff * diff * ax0.dx() * wj;
            }
        for (int i = 0; i < ax0.n; ++i)
            for (int j = 0; j + 1 < ax1.n; ++j) {
                const double diff = (val(i, j + 1) - val(i, j)) / ax1.dx();
                const double wi = (i == 0 || i == ax0.n - 1) ? 0.5 * ax0.dx() : ax0.dx();
                h1sq += diff * diff * wi * ax1.dx();
            }
    }
    out.h1_seminorm = std::sqrt(h1sq);
    return out;
}

}  // namespace qbspde

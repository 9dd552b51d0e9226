#include "qbspde/operators.hpp"

#include <array>
#include <cmath>

#include "qbspde/errors.hpp"

namespace qbspde {

namespace {

// Nodal values of a^{aa} (and neighbours) are cached per call; evaluators are
// the dominant cost at desk scale.
struct NodalCoeffs {
    int d = 1;
    std::vector<double> diag;  // per (space, noise, axis)
    double at(int s, int k, int axis, int nw, int d_) const {
        return diag[(static_cast<std::size_t>(s) * static_cast<std::size_t>(nw) +
                     static_cast<std::size_t>(k)) * static_cast<std::size_t>(d_) +
                    static_cast<std::size_t>(axis)];
    }
};

NodalCoeffs cache_diag_coeffs(const ProblemSpec& spec, const GridStack& grid, double t) {
    const int d = grid.dim();
    const int nw = grid.noise_points();
    NodalCoeffs c;
    c.d = d;
    c.diag.resize(static_cast<std::size_t>(grid.space_points()) * static_cast<std::size_t>(nw) *
                  static_cast<std::size_t>(d));
    std::array<double, 2> xbuf{};
    for (int s = 0; s < grid.space_points(); ++s) {
        grid.space_coords(s, std::span<double>(xbuf.data(), static_cast<std::size_t>(d)));
        for (int k = 0; k < nw; ++k) {
            const Mat a = spec.a(t, std::span<const double>(xbuf.data(), static_cast<std::size_t>(d)),
                                 grid.noise_coord(k));
            for (int ax = 0; ax < d; ++ax)
                c.diag[(static_cast<std::size_t>(s) * static_cast<std::size_t>(nw) +
                        static_cast<std::size_t>(k)) * static_cast<std::size_t>(d) +
                       static_cast<std::size_t>(ax)] = a(ax, ax);
        }
    }
    return c;
}

}  // namespace

int level_bandwidth(const GridStack& grid) {
    const auto strides = axis_strides(grid);
    int band = grid.noise() ? 2 : 1;  // closure rows reach two noise nodes
    for (int s : strides) band = std::max(band, s);
    return band;
}

std::vector<int> axis_strides(const GridStack& grid) {
    const int d = grid.dim();
    std::vector<int> strides(static_cast<std::size_t>(d), grid.noise_points());
    for (int a = d - 2; a >= 0; --a)
        strides[static_cast<std::size_t>(a)] =
            strides[static_cast<std::size_t>(a + 1)] * grid.space()[static_cast<std::size_t>(a + 1)].n;
    return strides;
}

BandedMatrix assemble_divergence_operator(const ProblemSpec& spec, const GridStack& grid,
                                          double t) {
    if (t < 0.0 || t > grid.horizon() + 1e-12)
        throw ArgumentError("assemble_divergence_operator: t outside [0, T]");
    const int d = grid.dim();
    const int nw = grid.noise_points();
    const int band = level_bandwidth(grid);
    const auto strides = axis_strides(grid);
    BandedMatrix L(grid.points_per_level(), band, band);

    const NodalCoeffs coeffs = cache_diag_coeffs(spec, grid, t);

    for (int s = 0; s < grid.space_points(); ++s) {
        for (int k = 0; k < nw; ++k) {
            const int row = s * nw + k;
            if (grid.is_space_boundary(s)) {
                L.set(row, row, 1.0);
                continue;
            }
            for (int ax = 0; ax < d; ++ax) {
                const Axis& axis = grid.space()[static_cast<std::size_t>(ax)];
                const double inv_dx2 = 1.0 / (axis.dx() * axis.dx());
                const int up = s + (strides[static_cast<std::size_t>(ax)] / nw);
                const int dn = s - (strides[static_cast<std::size_t>(ax)] / nw);
                const double a_here = coeffs.at(s, k, ax, nw, d);
                const double a_up = coeffs.at(up, k, ax, nw, d);
                const double a_dn = coeffs.at(dn, k, ax, nw, d);
                const double a_plus = 0.5 * (a_here + a_up);
                const double a_minus = 0.5 * (a_here + a_dn);
                L.add(row, row, -(a_plus + a_minus) * inv_dx2);
                L.add(row, row + strides[static_cast<std::size_t>(ax)], a_plus * inv_dx2);
                L.add(row, row - strides[static_cast<std::size_t>(ax)], a_minus * inv_dx2);
            }
        }
    }
    return L;
}

std::vector<double> apply_sigma_div(const ProblemSpec& spec, const GridStack& grid, double t,
                                    std::span<const double> q) {
    const int d = grid.dim();
    const int d0 = spec.wiener_dim;
    const int nw = grid.noise_points();
    const int n = grid.points_per_level();
    if (static_cast<int>(q.size()) != n * d0)
        throw ArgumentError("apply_sigma_div: q size mismatch");
    const auto strides = axis_strides(grid);

    // sigma^{ak} q^k cached per (node, axis)
    std::vector<double> flux(static_cast<std::size_t>(n) * static_cast<std::size_t>(d), 0.0);
    std::array<double, 2> xbuf{};
    for (int s = 0; s < grid.space_points(); ++s) {
        grid.space_coords(s, std::span<double>(xbuf.data(), static_cast<std::size_t>(d)));
        for (int k = 0; k < nw; ++k) {
            const int node = s * nw + k;
            const Mat sg = spec.sigma(
                t, std::span<const double>(xbuf.data(), static_cast<std::size_t>(d)),
                grid.noise_coord(k));
            for (int ax = 0; ax < d; ++ax) {
                double v = 0.0;
                for (int c = 0; c < d0; ++c)
                    v += sg(ax, c) * q[static_cast<std::size_t>(node) * static_cast<std::size_t>(d0) +
                                       static_cast<std::size_t>(c)];
                flux[static_cast<std::size_t>(node) * static_cast<std::size_t>(d) +
                     static_cast<std::size_t>(ax)] = v;
            }
        }
    }

    std::vector<double> out(static_cast<std::size_t>(n), 0.0);
    for (int s = 0; s < grid.space_points(); ++s) {
        if (grid.is_space_boundary(s)) continue;
        for (int k = 0; k < nw; ++k) {
            const int node = s * nw + k;
            double div = 0.0;
            for (int ax = 0; ax < d; ++ax) {
                const Axis& axis = grid.space()[static_cast<std::size_t>(ax)];
                const int stride = strides[static_cast<std::size_t>(ax)];
                div += (flux[static_cast<std::size_t>(node + stride) * static_cast<std::size_t>(d) +
                             static_cast<std::size_t>(ax)] -
                        flux[static_cast<std::size_t>(node - stride) * static_cast<std::size_t>(d) +
                             static_cast<std::size_t>(ax)]) /
                       (2.0 * axis.dx());
            }
            out[static_cast<std::size_t>(node)] = div;
        }
    }
    return out;
}

void add_cross_divergence(const ProblemSpec& spec, const GridStack& grid, double t,
                          std::span<const double> u, std::span<double> out) {
    if (grid.dim() < 2) return;
    const Axis& ax0 = grid.space()[0];
    const Axis& ax1 = grid.space()[1];
    const int n1 = ax1.n;
    auto at = [&](int i, int j) { return u[static_cast<std::size_t>(i * n1 + j)]; };
    std::array<double, 2> xbuf{};
    auto a12 = [&](int i, int j) {
        xbuf[0] = ax0.coord(i);
        xbuf[1] = ax1.coord(j);
        return spec.a(t, std::span<const double>(xbuf.data(), 2), 0.0)(0, 1);
    };
    // (a12 u_y)_x + (a12 u_x)_y, both by nested central differences.
    for (int i = 1; i + 1 < ax0.n; ++i)
        for (int j = 1; j + 1 < n1; ++j) {
            auto uy = [&](int ii) {
                return (at(ii, j + 1) - at(ii, j - 1)) / (2.0 * ax1.dx());
            };
            auto ux = [&](int jj) {
                return (at(i + 1, jj) - at(i - 1, jj)) / (2.0 * ax0.dx());
            };
            double v = (a12(i + 1, j) * uy(i + 1) - a12(i - 1, j) * uy(i - 1)) / (2.0 * ax0.dx());
            v += (a12(i, j + 1) * ux(j + 1) - a12(i, j - 1) * ux(j - 1)) / (2.0 * ax1.dx());
            out[static_cast<std::size_t>(i * n1 + j)] += v;
        }
}

void gradient_x(const GridStack& grid, std::span<const double> level_u, int axis,
                std::span<double> out) {
    const int d = grid.dim();
    if (axis < 0 || axis >= d) throw ArgumentError("gradient_x: bad axis");
    const Axis& ax = grid.space()[static_cast<std::size_t>(axis)];
    const int nw = grid.noise_points();
    const int stride = axis_strides(grid)[static_cast<std::size_t>(axis)];
    const double dx = ax.dx();
    const int n_ax = ax.n;

    const int n = grid.points_per_level();
    for (int node = 0; node < n; ++node) {
        const int s = node / nw;
        int rem = s;
        int idx_along = 0;
        for (int a = d - 1; a >= 0; --a) {
            const int ia = rem % grid.space()[static_cast<std::size_t>(a)].n;
            rem /= grid.space()[static_cast<std::size_t>(a)].n;
            if (a == axis) idx_along = ia;
        }
        const auto u = [&](int off) { return level_u[static_cast<std::size_t>(node + off * stride)]; };
        double g;
        if (n_ax < 5) {
            if (idx_along == 0)
                g = (u(1) - u(0)) / dx;
            else if (idx_along == n_ax - 1)
                g = (u(0) - u(-1)) / dx;
            else
                g = (u(1) - u(-1)) / (2.0 * dx);
        } else if (idx_along == 0 || idx_along == 1) {
            g = (-3.0 * u(0) + 4.0 * u(1) - u(2)) / (2.0 * dx);
        } else if (idx_along == n_ax - 1 || idx_along == n_ax - 2) {
            g = (3.0 * u(0) - 4.0 * u(-1) + u(-2)) / (2.0 * dx);
        } else {
            g = (u(1) - u(-1)) / (2.0 * dx);
        }
        out[static_cast<std::size_t>(node)] = g;
    }
}

void gradient_w(const GridStack& grid, std::span<const double> level_u, std::span<double> out) {
    if (!grid.noise()) throw ArgumentError("gradient_w: grid has no noise axis");
    const int nw = grid.noise_points();
    const double dw = grid.noise()->dx();
    for (int s = 0; s < grid.space_points(); ++s) {
        const int base = s * nw;
        for (int k = 0; k < nw; ++k) {
            const auto u = [&](int kk) { return level_u[static_cast<std::size_t>(base + kk)]; };
            double g;
            if (k == 0)
                g = (-3.0 * u(0) + 4.0 * u(1) - u(2)) / (2.0 * dw);
            else if (k == nw - 1)
                g = (3.0 * u(nw - 1) - 4.0 * u(nw - 2) + u(nw - 3)) / (2.0 * dw);
            else
                g = (u(k + 1) - u(k - 1)) / (2.0 * dw);
            out[static_cast<std::size_t>(base + k)] = g;
        }
    }
}

void apply_noise_laplacian(const GridStack& grid, std::span<const double> level_u,
                           std::span<double> out) {
    if (!grid.noise()) return;
    const int nw = grid.noise_points();
    const double inv_dw2 = 1.0 / (grid.noise()->dx() * grid.noise()->dx());
    for (int s = 0; s < grid.space_points(); ++s) {
        const int base = s * nw;
        out[static_cast<std::size_t>(base)] = 0.0;
        out[static_cast<std::size_t>(base + nw - 1)] = 0.0;
        for (int k = 1; k + 1 < nw; ++k)
            out[static_cast<std::size_t>(base + k)] =
                0.5 * (level_u[static_cast<std::size_t>(base + k + 1)] -
                       2.0 * level_u[static_cast<std::size_t>(base + k)] +
                       level_u[static_cast<std::size_t>(base + k - 1)]) * inv_dw2;
    }
}

}  // namespace qbspde

#include "qbspde/approximation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "qbspde/errors.hpp"
#include "qbspde/transforms.hpp"

namespace qbspde {

namespace {

// C2 quintic smoothstep on [0, 1].
double smoothstep(double t) {
    t = std::clamp(t, 0.0, 1.0);
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0);
}

}  // namespace

CutoffPsi::CutoffPsi(double lambda, double M) : lambda_(lambda), M_(M) {
    if (!(lambda > 0.0) || !(M > 0.0)) throw ArgumentError("CutoffPsi: lambda, M > 0");
    if (2.0 * lambda * (M + 1.0) > 700.0) throw RangeError("CutoffPsi: exp range exceeded");
    lo_out_ = std::exp(-2.0 * lambda * (M + 1.0));
    lo_in_ = std::exp(-2.0 * lambda * M);
    hi_in_ = std::exp(2.0 * lambda * M);
    hi_out_ = std::exp(2.0 * lambda * (M + 1.0));
}

double CutoffPsi::operator()(double z) const {
    if (z <= lo_out_ || z >= hi_out_) return 0.0;
    if (z >= lo_in_ && z <= hi_in_) return 1.0;
    if (z < lo_in_) return smoothstep((z - lo_out_) / (lo_in_ - lo_out_));
    return 1.0 - smoothstep((z - hi_in_) / (hi_out_ - hi_in_));
}

CutoffPsi build_cutoff(double lambda, double M) { return CutoffPsi(lambda, M); }

LipschitzApprox::LipschitzApprox(const VprFn& base, int n, SearchGrid grid)
    : base_(base), n_(n), offset_(std::pow(2.0, -n)), grid_(grid) {
    if (n < 1) throw ArgumentError("LipschitzApprox: n >= 1");
    const int m = grid_.points_per_axis;
    if (m < 3) throw ArgumentError("LipschitzApprox: need at least 3 grid points per axis");
    axis_v_.resize(static_cast<std::size_t>(m));
    axis_pr_.resize(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        axis_v_[static_cast<std::size_t>(i)] = -grid_.v_radius + 2.0 * grid_.v_radius * i / (m - 1);
        axis_pr_[static_cast<std::size_t>(i)] =
            -grid_.pr_radius + 2.0 * grid_.pr_radius * i / (m - 1);
    }
    cache_.resize(static_cast<std::size_t>(m) * static_cast<std::size_t>(m) *
                  static_cast<std::size_t>(m));
    r0_cache_.resize(static_cast<std::size_t>(m) * static_cast<std::size_t>(m));
    constexpr double kSupSentinel = 1e12;
    for (int iv = 0; iv < m; ++iv)
        for (int ip = 0; ip < m; ++ip) {
            double collapsed = -std::numeric_limits<double>::infinity();
            for (int ir = 0; ir < m; ++ir) {
                const double val = base(axis_v_[static_cast<std::size_t>(iv)],
                                        axis_pr_[static_cast<std::size_t>(ip)],
                                        axis_pr_[static_cast<std::size_t>(ir)]);
                if (!(val < kSupSentinel))
                    throw ArgumentError(
                        "sup_convolution: base unbounded above on the search grid");
                cache_[(static_cast<std::size_t>(iv) * static_cast<std::size_t>(m) +
                        static_cast<std::size_t>(ip)) * static_cast<std::size_t>(m) +
                       static_cast<std::size_t>(ir)] = val;
                collapsed = std::max(collapsed,
                                     val - n_ * std::abs(axis_pr_[static_cast<std::size_t>(ir)]));
            }
            r0_cache_[static_cast<std::size_t>(iv) * static_cast<std::size_t>(m) +
                      static_cast<std::size_t>(ip)] = collapsed;
        }
}

double LipschitzApprox::operator()(double v, double p, double r) const {
    const int m = grid_.points_per_axis;
    double best = base_(v, p, r);  // query point itself: keeps F^n >= F off-grid
    if (r == 0.0) {
        for (int iv = 0; iv < m; ++iv) {
            const double dv = n_ * std::abs(v - axis_v_[static_cast<std::size_t>(iv)]);
            for (int ip = 0; ip < m; ++ip) {
                const double cand =
                    r0_cache_[static_cast<std::size_t>(iv) * static_cast<std::size_t>(m) +
                              static_cast<std::size_t>(ip)] -
                    dv - n_ * std::abs(p - axis_pr_[static_cast<std::size_t>(ip)]);
                best = std::max(best, cand);
            }
        }
        return best + offset_;
    }
    for (int iv = 0; iv < m; ++iv) {
        const double dv = n_ * std::abs(v - axis_v_[static_cast<std::size_t>(iv)]);
        for (int ip = 0; ip < m; ++ip) {
            const double dp = dv + n_ * std::abs(p - axis_pr_[static_cast<std::size_t>(ip)]);
            const double* row = &cache_[(static_cast<std::size_t>(iv) * static_cast<std::size_t>(m) +
                                         static_cast<std::size_t>(ip)) * static_cast<std::size_t>(m)];
            for (int ir = 0; ir < m; ++ir) {
                const double cand =
                    row[ir] - dp - n_ * std::abs(r - axis_pr_[static_cast<std::size_t>(ir)]);
                best = std::max(best, cand);
            }
        }
    }
    return best + offset_;
}

LipschitzApprox sup_convolution(const VprFn& F, int n, const SearchGrid& grid) {
    return LipschitzApprox(F, n, grid);
}

DriverFn truncate_generator(const DriverFn& f, const GrowthEnvelope& env, double M) {
    if (!(M > 0.0)) throw ArgumentError("truncate_generator: M > 0");
    const double gamma_M = env.gamma(M);
    const ScalarField lambda0 = env.lambda0;
    const double lambda1 = env.lambda1;
    return [f, lambda0, lambda1, gamma_M](double t, std::span<const double> x, double w, double v,
                                          std::span<const double> p, std::span<const double> r) {
        double z2 = 0.0;
        for (double pi : p) z2 += pi * pi;
        for (double ri : r) z2 += ri * ri;
        const double bound = lambda0(t, x, w) + lambda1 * std::abs(v) + gamma_M * z2;
        return std::clamp(f(t, x, w, v, p, r), -bound, bound);
    };
}

MonotoneSequenceResult monotone_solve_sequence(const ProblemSpec& spec, const GrowthEnvelope& env,
                                               double phi_sup, const GridStack& grid,
                                               const SolverConfig& cfg, int N,
                                               bool skip_cutoff) {
    if (N < 1) throw ArgumentError("monotone_solve_sequence: N >= 1");
    if (spec.spatial_dim != 1 || spec.mode != CoefficientMode::deterministic)
        throw ScaleError("monotone_solve_sequence: scalar deterministic problems only");
    if (!(env.lambda > 0.0))
        throw ArgumentError("monotone_solve_sequence: envelope lambda > 0 required");

    const double lambda = env.lambda;
    const double two_l = 2.0 * lambda;
    const double M = linf_bound(0.0, env.lambda0_sup, env.lambda1, phi_sup, grid.horizon());
    const CutoffPsi cutoff(lambda, M);

    // Coefficients frozen at a reference point; the regularization grid lives
    // on (v, p, r) only.
    std::array<double, 1> xref{0.5 * (spec.domain.lo[0] + spec.domain.hi[0])};
    const Mat a_ref = spec.a(0.0, std::span<const double>(xref.data(), 1), 0.0);
    const Mat s_ref = spec.sigma(0.0, std::span<const double>(xref.data(), 1), 0.0);
    const double a0 = a_ref(0, 0);
    const double s0 = s_ref.cols > 0 ? s_ref(0, 0) : 0.0;
    const DriverFn base_f = spec.f;

    // transformed generator with cutoff:
    //   F(v,p,r) = 2l(v+1) f(ln(v+1)/2l, p/(2l(v+1)), r/(2l(v+1)))
    //              - (2a p^2 + 2 sigma p r + r^2) / (2(v+1)),  multiplied by psi(v+1)
    VprFn F_tilde = [=](double v, double p, double r) {
        const double z = v + 1.0;
        const double psi_z = skip_cutoff ? 1.0 : cutoff(z);
        if (psi_z == 0.0) return 0.0;
        if (!(z > 0.0)) return 0.0;  // outside the transform domain the cutoff vanishes anyway
        const double u = std::log(z) / two_l;
        const double pu = p / (two_l * z);
        const double ru = r / (two_l * z);
        const double fval = base_f(0.0, std::span<const double>(xref.data(), 1), 0.0, u,
                                   std::span<const double>(&pu, 1),
                                   std::span<const double>(&ru, 1));
        const double quad = 2.0 * a0 * p * p + 2.0 * s0 * p * r + r * r;
        return psi_z * (two_l * z * fval - quad / (2.0 * z));
    };

    SearchGrid sgrid;
    sgrid.v_radius = std::max(2.0 * M, 10.0);
    sgrid.pr_radius = 10.0;

    MonotoneSequenceResult result;
    result.M = M;
    result.lambda = lambda;

    for (int n = 1; n <= N; ++n) {
        LipschitzApprox Fn = sup_convolution(F_tilde, n, sgrid);
        ProblemSpec spec_n = spec;
        const MatrixField a_fn = spec.a;
        const MatrixField s_fn = spec.sigma;
        spec_n.f = [Fn, two_l, lambda, a_fn, s_fn](double t, std::span<const double> x, double w,
                                                   double v, std::span<const double> p,
                                                   std::span<const double> r) {
            const double e = std::exp(two_l * v);
            const double pv = p.empty() ? 0.0 : p[0];
            const double rv = r.empty() ? 0.0 : r[0];
            const double Fval = Fn(e - 1.0, two_l * e * pv, two_l * e * rv);
            const Mat am = a_fn(t, x, w);
            const Mat sm = s_fn(t, x, w);
            const double s00 = sm.cols > 0 ? sm(0, 0) : 0.0;
            return Fval / (two_l * e) +
                   lambda * (2.0 * am(0, 0) * pv * pv + 2.0 * s00 * pv * rv + rv * rv);
        };
        result.iterates.push_back(solve_deterministic(spec_n, grid, cfg));
    }

    const SolutionField& last = result.iterates.back();
    const double v_lo = std::exp(-two_l * (M + 1.0)) - 1.0;
    const double v_hi = std::exp(two_l * (M + 1.0));
    for (int n = 1; n <= N; ++n) {
        const SolutionField& cur = result.iterates[static_cast<std::size_t>(n - 1)];
        MonotoneRow row;
        row.n = n;
        for (std::size_t i = 0; i < cur.u.size(); ++i) {
            row.sup_distance = std::max(row.sup_distance, std::abs(cur.u[i] - last.u[i]));
            const double v = exp_forward_value(cur.u[i], two_l);
            if (v < v_lo - 1e-8 || v > v_hi + 1e-8) row.sandwich_ok = false;
            if (n < N) {
                const double next = result.iterates[static_cast<std::size_t>(n)].u[i];
                row.monotonicity_defect = std::max(row.monotonicity_defect, next - cur.u[i]);
            }
        }
        row.monotonicity_defect = std::max(row.monotonicity_defect, 0.0);
        result.rows.push_back(row);
    }
    return result;
}

}  // namespace qbspde

#include "qbspde/core_spec.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include "qbspde/errors.hpp"
#include "qbspde/parallel.hpp"
#include "qbspde/rng.hpp"

namespace qbspde {

namespace {

constexpr double kEigTol = 1e-12;

struct SamplePoint {
    double t = 0.0;
    std::array<double, 3> x{};
    double w = 0.0;
};

SamplePoint draw_point(const ProblemSpec& spec, Rng rng) {
    SamplePoint pt;
    pt.t = rng.uniform(0.0, spec.horizon);
    for (int k = 0; k < spec.domain.dim(); ++k)
        pt.x[static_cast<std::size_t>(k)] =
            rng.uniform(spec.domain.lo[static_cast<std::size_t>(k)],
                        spec.domain.hi[static_cast<std::size_t>(k)]);
    if (spec.mode == CoefficientMode::markovian_lift)
        pt.w = rng.normal() * std::sqrt(std::max(pt.t, 1e-12));
    return pt;
}

std::string describe(const SamplePoint& pt) {
    std::string s = "t=" + std::to_string(pt.t) + " x=(";
    s += std::to_string(pt.x[0]);
    s += ")";
    return s;
}

}  // namespace

SuperparabolicReport validate_superparabolic(const ProblemSpec& spec, int n_samples,
                                             std::uint64_t seed) {
    if (n_samples < 1) throw ArgumentError("validate_superparabolic: n_samples must be >= 1");
    if (!spec.a || !spec.sigma) throw ArgumentError("validate_superparabolic: missing evaluators");

    const int d = spec.spatial_dim;
    const std::size_t n = static_cast<std::size_t>(n_samples);
    struct PerSample {
        double kappa = 0.0, K = 0.0;
        bool violated = false;
        SampleViolation v;
    };
    std::vector<PerSample> results(n);
    std::mutex fail_mutex;
    std::string structural_failure;

    Rng root(seed);
    parallel_for_blocks(n, 256, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const SamplePoint pt = draw_point(spec, root.derive(0x5350, i));
            std::span<const double> x(pt.x.data(), static_cast<std::size_t>(d));
            Mat a = spec.a(pt.t, x, pt.w);
            Mat sg = spec.sigma(pt.t, x, pt.w);
            if (a.rows != d || a.cols != d || sg.rows != d) {
                std::scoped_lock lk(fail_mutex);
                structural_failure = "coefficient shape mismatch at sample " + describe(pt);
                return;
            }
            if (!a.all_finite() || !sg.all_finite() || a.max_abs() > spec.coefficient_bound ||
                sg.max_abs() > spec.coefficient_bound) {
                std::scoped_lock lk(fail_mutex);
                structural_failure = "coefficient unbounded at sample " + describe(pt);
                return;
            }
            if (!a.is_symmetric(0.0)) {
                std::scoped_lock lk(fail_mutex);
                structural_failure = "a not symmetric at sample " + describe(pt);
                return;
            }
            const Mat two_a = a.scaled(2.0);
            const Mat gap = two_a - sg * sg.transposed();
            const auto eig_gap = symmetric_eigenvalues(gap);
            const auto eig_2a = symmetric_eigenvalues(two_a);
            PerSample& out = results[i];
            out.kappa = eig_gap.front();
            out.K = eig_2a.back();
            if (eig_gap.front() <= kEigTol) {
                out.violated = true;
                out.v = SampleViolation{pt.t, pt.x, pt.w, eig_gap.front(),
                                        "nonpositive eigenvalue of 2a - sigma sigma*"};
            }
        }
    });
    if (!structural_failure.empty()) throw StructuralError(structural_failure);

    SuperparabolicReport rep;
    rep.kappa_est = results.front().kappa;
    rep.K_est = results.front().K;
    for (const auto& r : results) {
        rep.kappa_est = std::min(rep.kappa_est, r.kappa);
        rep.K_est = std::max(rep.K_est, r.K);
        if (r.violated) rep.violations.push_back(r.v);
    }
    return rep;
}

double mu0(double kappa, double K) {
    if (!(kappa > 0.0) || !(K > 0.0)) throw ArgumentError("mu0: constants must be positive");
    if (kappa > K) throw ArgumentError("mu0: requires kappa <= K");
    return kappa / (1.0 + 2.0 * K);
}

double coercivity_gap(const Mat& a, const Mat& sigma, std::span<const double> p,
                      std::span<const double> r, double mu0_value) {
    const int d = a.rows;
    const int d0 = sigma.cols;
    if (a.cols != d || static_cast<int>(p.size()) != d || sigma.rows != d ||
        static_cast<int>(r.size()) != d0)
        throw ArgumentError("coercivity_gap: dimension mismatch");

    double quad = 0.0, cross = 0.0, p2 = 0.0, r2 = 0.0;
    for (int i = 0; i < d; ++i) {
        p2 += p[static_cast<std::size_t>(i)] * p[static_cast<std::size_t>(i)];
        for (int j = 0; j < d; ++j)
            quad += a(i, j) * p[static_cast<std::size_t>(i)] * p[static_cast<std::size_t>(j)];
        for (int k = 0; k < d0; ++k)
            cross += sigma(i, k) * p[static_cast<std::size_t>(i)] * r[static_cast<std::size_t>(k)];
    }
    for (int k = 0; k < d0; ++k) r2 += r[static_cast<std::size_t>(k)] * r[static_cast<std::size_t>(k)];
    return 2.0 * quad + 2.0 * cross + r2 - mu0_value * (p2 + r2);
}

namespace {

SpotCheckReport run_spot_check(
    const ProblemSpec& spec, int n_samples, std::uint64_t seed, std::uint64_t tag,
    const std::function<double(const SamplePoint&, Rng&)>& margin_fn) {
    if (n_samples < 1) throw ArgumentError("spot check: n_samples must be >= 1");
    const std::size_t n = static_cast<std::size_t>(n_samples);
    std::vector<double> margins(n, 0.0);
    std::vector<SamplePoint> points(n);
    Rng root(seed);
    parallel_for_blocks(n, 256, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            Rng rng = root.derive(tag, i);
            points[i] = draw_point(spec, rng);
            margins[i] = margin_fn(points[i], rng);
        }
    });
    SpotCheckReport rep;
    rep.n_samples = n_samples;
    rep.worst_margin = margins.front();
    for (std::size_t i = 0; i < n; ++i) {
        rep.worst_margin = std::max(rep.worst_margin, margins[i]);
        if (margins[i] > 0.0) {
            ++rep.n_violations;
            if (rep.violations.size() < 16)
                rep.violations.push_back(SampleViolation{points[i].t, points[i].x, points[i].w,
                                                         margins[i], "bound exceeded"});
        }
    }
    return rep;
}

// Draw the driver arguments (v, p, r) with heavy-ish tails so envelope
// violations near the quadratic regime are not missed.
void draw_vpr(Rng& rng, int d, int d0, double scale, double& v, std::array<double, 3>& p,
              std::array<double, 3>& r) {
    v = rng.normal() * scale;
    for (int i = 0; i < d; ++i) p[static_cast<std::size_t>(i)] = rng.normal() * 3.0;
    for (int k = 0; k < d0; ++k) r[static_cast<std::size_t>(k)] = rng.normal() * 3.0;
}

}  // namespace

SpotCheckReport envelope_spot_check(const ProblemSpec& spec, const GrowthEnvelope& env,
                                    int n_samples, std::uint64_t seed) {
    const int d = spec.spatial_dim, d0 = spec.wiener_dim;
    return run_spot_check(spec, n_samples, seed, 0x454e56, [&](const SamplePoint& pt, Rng& rng) {
        double v;
        std::array<double, 3> p{}, r{};
        draw_vpr(rng, d, d0, 2.0, v, p, r);
        std::span<const double> x(pt.x.data(), static_cast<std::size_t>(d));
        std::span<const double> ps(p.data(), static_cast<std::size_t>(d));
        std::span<const double> rs(r.data(), static_cast<std::size_t>(d0));
        double p2 = 0.0, r2 = 0.0;
        for (int i = 0; i < d; ++i) p2 += p[static_cast<std::size_t>(i)] * p[static_cast<std::size_t>(i)];
        for (int k = 0; k < d0; ++k) r2 += r[static_cast<std::size_t>(k)] * r[static_cast<std::size_t>(k)];
        const double bound = env.lambda0(pt.t, x, pt.w) + env.lambda1 * std::abs(v) +
                             env.gamma(std::abs(v)) * (p2 + r2);
        return std::abs(spec.f(pt.t, x, pt.w, v, ps, rs)) - bound;
    });
}

namespace {

constexpr double kFdStep = 1e-5;

double fd_partial(const ProblemSpec& spec, const SamplePoint& pt, double v,
                  std::array<double, 3> p, std::array<double, 3> r, int which, int comp) {
    const int d = spec.spatial_dim, d0 = spec.wiener_dim;
    std::span<const double> x(pt.x.data(), static_cast<std::size_t>(d));
    auto eval = [&](double vv, const std::array<double, 3>& pp, const std::array<double, 3>& rr) {
        return spec.f(pt.t, x, pt.w, vv,
                      std::span<const double>(pp.data(), static_cast<std::size_t>(d)),
                      std::span<const double>(rr.data(), static_cast<std::size_t>(d0)));
    };
    if (which == 0)  // f_u
        return (eval(v + kFdStep, p, r) - eval(v - kFdStep, p, r)) / (2.0 * kFdStep);
    if (which == 1) {  // f_p component
        auto hi = p, lo = p;
        hi[static_cast<std::size_t>(comp)] += kFdStep;
        lo[static_cast<std::size_t>(comp)] -= kFdStep;
        return (eval(v, hi, r) - eval(v, lo, r)) / (2.0 * kFdStep);
    }
    auto hi = r, lo = r;  // f_r component
    hi[static_cast<std::size_t>(comp)] += kFdStep;
    lo[static_cast<std::size_t>(comp)] -= kFdStep;
    return (eval(v, p, hi) - eval(v, p, lo)) / (2.0 * kFdStep);
}

}  // namespace

SpotCheckReport uniqueness_envelope_check(const ProblemSpec& spec, const UniquenessAssumptions& ua,
                              int n_samples, std::uint64_t seed) {
    const int d = spec.spatial_dim, d0 = spec.wiener_dim;
    return run_spot_check(spec, n_samples, seed, 0x483300, [&](const SamplePoint& pt, Rng& rng) {
        const double v = rng.uniform(-ua.M, ua.M);
        std::array<double, 3> p{}, r{};
        double dummy;
        draw_vpr(rng, d, d0, 0.0, dummy, p, r);
        std::span<const double> x(pt.x.data(), static_cast<std::size_t>(d));
        double z2 = 0.0;
        for (int i = 0; i < d; ++i) z2 += p[static_cast<std::size_t>(i)] * p[static_cast<std::size_t>(i)];
        for (int k = 0; k < d0; ++k) z2 += r[static_cast<std::size_t>(k)] * r[static_cast<std::size_t>(k)];
        const double fval =
            spec.f(pt.t, x, pt.w, v, std::span<const double>(p.data(), static_cast<std::size_t>(d)),
                   std::span<const double>(r.data(), static_cast<std::size_t>(d0)));
        const double value_margin = std::abs(fval) - (ua.l(pt.t) + ua.Lambda * z2);

        double fz2 = 0.0;
        for (int i = 0; i < d; ++i) {
            const double g = fd_partial(spec, pt, v, p, r, 1, i);
            fz2 += g * g;
        }
        for (int k = 0; k < d0; ++k) {
            const double g = fd_partial(spec, pt, v, p, r, 2, k);
            fz2 += g * g;
        }
        const double grad_margin =
            std::sqrt(fz2) - (ua.k(pt.t) + ua.Lambda * std::sqrt(z2)) - 1e-7;
        return std::max(value_margin, grad_margin);
    });
}

SpotCheckReport dissipativity_spot_check(const ProblemSpec& spec, const UniquenessAssumptions& ua,
                              int n_samples, std::uint64_t seed) {
    const int d = spec.spatial_dim, d0 = spec.wiener_dim;
    return run_spot_check(spec, n_samples, seed, 0x483400, [&](const SamplePoint& pt, Rng& rng) {
        const double v = rng.uniform(-ua.M, ua.M);
        std::array<double, 3> p{}, r{};
        double dummy;
        draw_vpr(rng, d, d0, 0.0, dummy, p, r);
        const double fu = fd_partial(spec, pt, v, p, r, 0, 0);
        double fz2 = 0.0;
        for (int i = 0; i < d; ++i) {
            const double g = fd_partial(spec, pt, v, p, r, 1, i);
            fz2 += g * g;
        }
        for (int k = 0; k < d0; ++k) {
            const double g = fd_partial(spec, pt, v, p, r, 2, k);
            fz2 += g * g;
        }
        return fu + ua.a_const * fz2 - ua.b_fn(pt.t) - 1e-7;
    });
}

bool envelope_self_consistent(const GrowthEnvelope& env, const ProblemSpec& spec, int n_samples,
                              std::uint64_t seed) {
    Rng root(seed);
    double prev_arg = 0.0, prev_val = env.gamma(0.0);
    for (int i = 0; i < n_samples; ++i) {
        Rng rng = root.derive(0x47414d, static_cast<std::uint64_t>(i));
        const double arg = prev_arg + rng.uniform(0.0, 0.5);
        const double val = env.gamma(arg);
        if (val < prev_val - 1e-14) return false;
        prev_arg = arg;
        prev_val = val;

        const SamplePoint pt = draw_point(spec, rng.derive(1, 0));
        std::span<const double> x(pt.x.data(), static_cast<std::size_t>(spec.spatial_dim));
        if (env.lambda0(pt.t, x, pt.w) > env.lambda0_sup + 1e-12) return false;
    }
    return true;
}

}  // namespace qbspde

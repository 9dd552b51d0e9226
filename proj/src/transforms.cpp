#include "qbspde/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "qbspde/errors.hpp"

namespace qbspde {

namespace {
constexpr double kExpGuard = 700.0;  // double-precision exp range
constexpr int kMarginGridPoints = 1000;
}

ExpTransform::ExpTransform(double lam) : lambda(lam) {
    if (!(lam > 0.0)) throw ArgumentError("ExpTransform: lambda > 0 required");
}

double exp_forward_value(double u, double lambda) {
    if (std::abs(lambda * u) > kExpGuard)
        throw RangeError("exp_forward: lambda*|u| exceeds the exp range guard");
    return std::expm1(lambda * u);
}

double exp_inverse_value(double v, double lambda) {
    if (!(v > -1.0)) throw DomainError("exp_inverse: v <= -1");
    return std::log1p(v) / lambda;
}

FieldPair exp_forward(std::span<const double> u, std::span<const double> q, double lambda) {
    if (!(lambda > 0.0)) throw ArgumentError("exp_forward: lambda > 0");
    if (!q.empty() && q.size() != u.size()) throw ArgumentError("exp_forward: size mismatch");
    double sup = 0.0;
    for (double x : u) sup = std::max(sup, std::abs(x));
    if (lambda * sup > kExpGuard) throw RangeError("exp_forward: lambda*sup|u| > 700");

    FieldPair out;
    out.first.resize(u.size());
    out.second.resize(q.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double e = std::exp(lambda * u[i]);
        out.first[i] = e - 1.0;
        if (!q.empty()) out.second[i] = lambda * e * q[i];
    }
    return out;
}

FieldPair exp_inverse(std::span<const double> v, std::span<const double> r, double lambda) {
    if (!(lambda > 0.0)) throw ArgumentError("exp_inverse: lambda > 0");
    if (!r.empty() && r.size() != v.size()) throw ArgumentError("exp_inverse: size mismatch");
    FieldPair out;
    out.first.resize(v.size());
    out.second.resize(r.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!(v[i] > -1.0))
            throw DomainError("exp_inverse: v <= -1 at node " + std::to_string(i));
        out.first[i] = std::log1p(v[i]) / lambda;
        if (!r.empty()) out.second[i] = r[i] / (lambda * (v[i] + 1.0));
    }
    return out;
}

DriverFn transform_driver(const ScalarField& F, double lambda, const ProblemSpec& spec) {
    if (!(lambda > 0.0)) throw ArgumentError("transform_driver: lambda > 0");
    const MatrixField a = spec.a;
    const MatrixField sigma = spec.sigma;
    return [F, lambda, a, sigma](double t, std::span<const double> x, double w, double v,
                                 std::span<const double> p, std::span<const double> r) {
        const Mat am = a(t, x, w);
        const Mat sm = sigma(t, x, w);
        double quad = 0.0, cross = 0.0, r2 = 0.0;
        for (int i = 0; i < am.rows; ++i)
            for (int j = 0; j < am.cols; ++j)
                quad += am(i, j) * p[static_cast<std::size_t>(i)] * p[static_cast<std::size_t>(j)];
        for (int i = 0; i < sm.rows; ++i)
            for (int k = 0; k < sm.cols && k < static_cast<int>(r.size()); ++k)
                cross += sm(i, k) * p[static_cast<std::size_t>(i)] * r[static_cast<std::size_t>(k)];
        for (double rk : r) r2 += rk * rk;
        return std::exp(-lambda * v) * F(t, x, w) / lambda +
               lambda * (quad + cross + 0.5 * r2);
    };
}

UniquenessTransform::UniquenessTransform(double beta, double B, double M)
    : beta_(beta), B_(B), M_(M) {
    if (!(beta > 0.0)) throw ArgumentError("UniquenessTransform: beta > 0");
    if (!(B > 1.0)) throw ArgumentError("UniquenessTransform: B > 1");
    if (!(M > 0.0)) throw ArgumentError("UniquenessTransform: M > 0");
    if (beta * M > kExpGuard / 4.0)
        throw RangeError("UniquenessTransform: beta*M too large for double range");
}

double UniquenessTransform::phi(double s) const {
    const double c = B_ * std::exp(beta_ * M_) - 1.0;
    return std::log((c * std::exp(beta_ * B_ * s) + 1.0) / (c + 1.0)) / beta_;
}

double UniquenessTransform::phi_inverse(double u) const {
    const double c = B_ * std::exp(beta_ * M_) - 1.0;
    const double num = B_ * std::exp(beta_ * (u + M_)) - 1.0;
    if (!(num > 0.0)) throw DomainError("UniquenessTransform::phi_inverse: argument too small");
    return std::log(num / c) / (beta_ * B_);
}

double UniquenessTransform::w(double u) const { return B_ - std::exp(-beta_ * (u + M_)); }
double UniquenessTransform::w_prime(double u) const { return beta_ * std::exp(-beta_ * (u + M_)); }
double UniquenessTransform::w_second(double u) const {
    return -beta_ * beta_ * std::exp(-beta_ * (u + M_));
}

UniquenessTransform uniqueness_phi(double beta, double B, double M) {
    UniquenessTransform tr(beta, B, M);
    // construction-time invariants: phi(0) = 0 and the sign pattern on [-M, M]
    if (std::abs(tr.phi(0.0)) > 1e-14)
        throw StructuralError("uniqueness_phi: phi(0) != 0");
    for (int i = 0; i < kMarginGridPoints; ++i) {
        const double u = -M + 2.0 * M * i / (kMarginGridPoints - 1);
        if (!(tr.w(u) > 0.0) || !(tr.w_prime(u) > 0.0) || !(tr.w_second(u) < 0.0))
            throw StructuralError("uniqueness_phi: sign pattern of (w, w', w'') violated");
    }
    return tr;
}

namespace {

double margin_expression(const UniquenessTransform& tr, double mu0_value, double Lambda,
                         double u) {
    const double w = tr.w(u);
    const double wp = tr.w_prime(u);
    const double ws = tr.w_second(u);
    const double ratio = wp / w;
    return 0.5 * mu0_value * ws / w + 2.0 * Lambda * ratio + ratio * ratio;
}

}  // namespace

double negativity_margin(const UniquenessTransform& tr, double mu0_value, double Lambda) {
    const double M = tr.M();
    double worst = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < kMarginGridPoints; ++i) {
        const double u = -M + 2.0 * M * i / (kMarginGridPoints - 1);
        worst = std::max(worst, margin_expression(tr, mu0_value, Lambda, u));
    }
    return worst;
}

BetaBResult choose_beta_B(double mu0_value, double Lambda, double M) {
    if (mu0_value < 0.0 || Lambda < 0.0 || !(M > 0.0))
        throw ArgumentError("choose_beta_B: need mu0 >= 0, Lambda >= 0, M > 0");

    constexpr int kBetaPoints = 61, kBPoints = 61;
    constexpr double kTarget = -1e-6;
    double best_raw = std::numeric_limits<double>::infinity();

    for (int ib = 0; ib < kBetaPoints; ++ib) {
        const double beta =
            std::pow(10.0, -2.0 + 6.0 * ib / (kBetaPoints - 1));  // [1e-2, 1e4]
        if (beta * M > kExpGuard / 4.0) continue;                  // outside double range
        for (int jb = 0; jb < kBPoints; ++jb) {
            const double B = std::pow(10.0, 1e-6 + 4.0 * jb / (kBPoints - 1));  // (1, 1e4]
            UniquenessTransform tr(beta, B, M);
            const double du = 2.0 * M / (kMarginGridPoints - 1);
            double margin = -std::numeric_limits<double>::infinity();
            double deriv_bound = 0.0, prev = 0.0;
            for (int i = 0; i < kMarginGridPoints; ++i) {
                const double u = -M + du * i;
                const double g = margin_expression(tr, mu0_value, Lambda, u);
                margin = std::max(margin, g);
                if (i > 0) deriv_bound = std::max(deriv_bound, std::abs(g - prev) / du);
                prev = g;
            }
            // continuum certificate: grid max plus derivative-bound slack
            const double certified = margin + 0.5 * deriv_bound * du;
            best_raw = std::min(best_raw, margin);
            if (certified <= kTarget) return BetaBResult{beta, B, margin};
        }
    }
    throw SearchFailure("choose_beta_B: no (beta, B) pair certifies negativity", best_raw);
}

}  // namespace qbspde

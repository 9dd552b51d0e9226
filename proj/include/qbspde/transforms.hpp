#pragma once

#include <functional>
#include <span>
#include <vector>

#include "qbspde/core_spec.hpp"

namespace qbspde {

/// Exponential change of variables u = (1/lambda) ln(v+1), q = r/(lambda(v+1)).
struct ExpTransform {
    double lambda = 1.0;
    explicit ExpTransform(double lam);
};

/// Scalar forward map: v = e^{lambda u} - 1 (guards lambda*|u| <= 700).
double exp_forward_value(double u, double lambda);
/// Scalar inverse map: u = ln(v+1)/lambda; requires v > -1.
double exp_inverse_value(double v, double lambda);

struct FieldPair {
    std::vector<double> first;   // u or v
    std::vector<double> second;  // q or r (may be empty)
};

/// Pointwise forward transform of a (u, q) field pair: v = e^{lu}-1,
/// r = l e^{lu} q. Throws RangeError when lambda*sup|u| > 700.
FieldPair exp_forward(std::span<const double> u, std::span<const double> q, double lambda);

/// Pointwise inverse: u = ln(v+1)/l, q = r/(l(v+1)). Throws DomainError
/// naming the first node with v <= -1.
FieldPair exp_inverse(std::span<const double> v, std::span<const double> r, double lambda);

/// Driver produced by the exponential change of variables from a source term
/// F(t,x): f(t,x,v,p,r) = (1/l) e^{-l v} F(t,x) + l (a p.p + sigma p.r + |r|^2/2),
/// with a and sigma read from the problem. Solving the linear equation with
/// source F and then applying exp_inverse solves the equation with this driver.
DriverFn transform_driver(const ScalarField& F, double lambda, const ProblemSpec& spec);

/// The increasing change of variables u = phi(u~) used for uniqueness:
/// phi(s) = (1/beta) ln[((B e^{beta M} - 1) e^{beta B s} + 1)/(B e^{beta M})],
/// with w(u) = phi'(phi^{-1}(u)) = B - e^{-beta(u+M)} in closed form.
class UniquenessTransform {
public:
    UniquenessTransform(double beta, double B, double M);

    double beta() const { return beta_; }
    double B() const { return B_; }
    double M() const { return M_; }

    double phi(double s) const;
    double phi_inverse(double u) const;
    double w(double u) const;        // B - e^{-beta(u+M)}
    double w_prime(double u) const;  // beta e^{-beta(u+M)}
    double w_second(double u) const; // -beta^2 e^{-beta(u+M)}

private:
    double beta_, B_, M_;
};

UniquenessTransform uniqueness_phi(double beta, double B, double M);

/// Max over a 1000-point grid of u in [-M, M] of
/// (mu0/2)(w''/w) + 2 Lambda (w'/w) + (w'/w)^2. A negative return certifies
/// the uniqueness condition with delta = -(returned value).
double negativity_margin(const UniquenessTransform& tr, double mu0_value, double Lambda);

struct BetaBResult {
    double beta = 0.0;
    double B = 0.0;
    double margin = 0.0;
};

/// Row-major logarithmic grid search over beta in [1e-2, 1e4] and
/// B in (1, 1e4]; returns the first pair whose grid margin plus a Lipschitz
/// slack stays <= -1e-6. Throws SearchFailure (carrying the best margin)
/// when no pair certifies.
BetaBResult choose_beta_B(double mu0_value, double Lambda, double M);

}  // namespace qbspde

#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "qbspde/core_spec.hpp"
#include "qbspde/solver.hpp"

namespace qbspde {

enum class PsiKind { Psi1, Psi2, Psi3 };

/// The exponential test functions used by the energy and comparison
/// arguments, with closed-form derivatives:
///   Psi1 on [-M, M]:  e^{2 l v} - (1 + 2 l v + 2 l^2 v^2) for v >= 0, 0 below;
///   Psi2 on [-M, M]:  (1/2) l^{-2} [e^{2 l |v|} - (1 + 2 l |v|)] (even);
///   Psi3 on [0, 2M]:  (1/(200 l^2)) (e^{20 l v} - 20 l v - 1).
/// Construction validates every displayed property on a 1000-point grid of
/// the domain and rejects parameters whose exponentials are too large for the
/// identities to be certified in double precision.
class ProofTestFunction {
public:
    static ProofTestFunction make(PsiKind kind, double lambda, double M);

    PsiKind kind() const { return kind_; }
    double lambda() const { return lambda_; }
    double M() const { return M_; }
    double domain_lo() const { return lo_; }
    double domain_hi() const { return hi_; }

    double value(double v) const;
    double d1(double v) const;
    double d2(double v) const;

    struct Sandwich {
        double k1 = 0.0, k2 = 0.0, k3 = 0.0, k4 = 0.0;
    };
    /// Quadratic sandwich constants (Psi2 only): k1 v^2 <= Psi2 <= k2 v^2,
    /// k3 |v| <= |Psi2'| <= k4 |v| on the domain.
    const std::optional<Sandwich>& sandwich() const { return sandwich_; }

private:
    ProofTestFunction(PsiKind kind, double lambda, double M);
    void validate_invariants();

    PsiKind kind_;
    double lambda_, M_, lo_, hi_;
    std::optional<Sandwich> sandwich_;
};

/// Closed-form a-priori sup bound
///   xi(t) = (lambda0_sup/lambda1)(e^{lambda1 (T-t)} - 1) + e^{lambda1 (T-t)} phi_sup,
/// with the lambda1 -> 0 limit lambda0_sup (T-t) + phi_sup.
double linf_bound(double t, double lambda0_sup, double lambda1, double phi_sup, double T);

struct LinfViolation {
    int level = 0;
    double sup = 0.0;
    double bound = 0.0;
};

struct LinfReport {
    bool pass = true;
    double worst_excess = 0.0;
    std::vector<LinfViolation> violations;
};

/// Per time level verifies sup_x |u| <= xi(t) + slack.
LinfReport check_linf(const SolutionField& sol, const GrowthEnvelope& env, double phi_sup,
                      double slack);

struct EnergyReport {
    double ux_sq = 0.0;  // E int_0^T int_D |u_x|^2
    double q_sq = 0.0;   // E int_0^T int_D |q|^2
    double c1_candidate = 0.0;
    bool within_candidate = true;
};

/// Monte Carlo estimate of the gradient/martingale energy; deterministic
/// fields are evaluated once (all paths coincide).
EnergyReport energy_report(const PathSample& samples, double c1_candidate);

struct ComparisonReport {
    bool pass = true;
    double max_excess = 0.0;  // max over nodes of (u1 - u2 - tol)+
    int n_violations = 0;
};

/// Nodewise u1 <= u2 + tol across all levels; grids must match.
ComparisonReport comparison_check(const SolutionField& sol1, const SolutionField& sol2,
                                  double tol);

struct OdeSupersolutionReport {
    bool pass = true;
    double max_excess = 0.0;
    std::vector<double> zeta;  // per time level
};

/// Integrates zeta'(t) = -g(t, zeta) backward from zeta(T) = zeta_T with RK4
/// on the solution's time grid and checks u(t, x) <= zeta(t) + tol.
OdeSupersolutionReport ode_supersolution_check(const SolutionField& sol,
                                               const std::function<double(double, double)>& g,
                                               double zeta_T, double tol);

/// Discrete residual of the pathwise identity for psi(u): the jump of the
/// psi-integral between t = 0 and t = T minus the time-space quadrature of
/// [psi'(u) f0 - psi''(u) u_x f1 - (1/2) psi''(u) |q|^2] plus the sampled
/// stochastic term, averaged over paths. f0 is the driver value, f1 the flux
/// a u_x + sigma q; the flux part is evaluated in face form so the spatial
/// summation-by-parts is exact and the residual isolates the time
/// discretization error. 1-D fields only.
double ito_identity_residual(const ProblemSpec& spec, const SolutionField& sol,
                             const ProofTestFunction& psi, const PathSample* paths);

struct Power2mReport {
    bool pass = true;
    double sup_distance = 0.0;            // max |u1 - u2| over all nodes
    std::vector<double> integrals;        // int_D [(u1-u2)^+]^{2m} per level
    std::vector<double> gronwall_bounds;  // e^{2m int_t^T b} * terminal integral + floor
};

/// Discrete 2m-power difference estimate: checks that the positive-part
/// power integral stays under its Gronwall projection from the terminal
/// level, to a nodewise tolerance node_tol.
Power2mReport power2m_contraction(const SolutionField& sol1, const SolutionField& sol2, int m,
                                  const UniquenessAssumptions& ua, double node_tol);

}  // namespace qbspde

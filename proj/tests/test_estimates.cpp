#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qbspde/errors.hpp"
#include "qbspde/estimates.hpp"
#include "qbspde/presets.hpp"
#include "qbspde/solver.hpp"

using namespace qbspde;

namespace {

constexpr double kPi = 3.14159265358979323846;

GridStack grid_1d(const Preset& p, int nx, int nt) {
    return GridStack({Axis{nx, p.spec.domain.lo[0], p.spec.domain.hi[0]}}, std::nullopt,
                     p.spec.horizon, nt);
}

}  // namespace

TEST_CASE("test-function family invariants hold at shipped parameters") {
    const ProofTestFunction p1 = ProofTestFunction::make(PsiKind::Psi1, 1.0, 1.0);
    const ProofTestFunction p2 = ProofTestFunction::make(PsiKind::Psi2, 1.0, 1.0);
    const ProofTestFunction p3 = ProofTestFunction::make(PsiKind::Psi3, 0.25, 1.0);

    CHECK(p1.value(-0.5) == 0.0);
    CHECK(p1.value(0.5) > 0.0);
    CHECK(p2.d1(0.0) == 0.0);
    CHECK(p3.value(0.0) == 0.0);
    CHECK(p3.d1(0.0) == 0.0);

    // identity spot checks at off-grid points
    for (double v : {0.137, 0.512, 0.993}) {
        CHECK(std::abs(0.5 * p2.d2(v) - 1.0 * std::abs(p2.d1(v)) - 1.0) <= 1e-10);
        CHECK(std::abs(0.5 * p3.d2(v) - 10.0 * 0.25 * p3.d1(v) - 1.0) <= 1e-10);
    }

    // sandwich constants for Psi2 bracket the quadratic behavior
    REQUIRE(p2.sandwich().has_value());
    const auto sw = *p2.sandwich();
    CHECK(sw.k1 == doctest::Approx(1.0).epsilon(5e-3));
    CHECK(sw.k3 == doctest::Approx(2.0).epsilon(5e-3));
    CHECK(sw.k2 >= sw.k1);
    CHECK(sw.k4 >= sw.k3);
}

TEST_CASE("test-function construction rejects unverifiable parameters") {
    // Psi1's product inequality needs lambda (M+3) large enough
    CHECK_THROWS_AS(ProofTestFunction::make(PsiKind::Psi1, 0.05, 1.0), StructuralError);
    // Psi3's identity drowns in roundoff for large exponents
    CHECK_THROWS_AS(ProofTestFunction::make(PsiKind::Psi3, 2.0, 1.0), RangeError);
    CHECK_THROWS_AS(ProofTestFunction::make(PsiKind::Psi2, -1.0, 1.0), ArgumentError);
}

TEST_CASE("a-priori sup bound is nonincreasing and continuous in t") {
    const double T = 1.0;
    double prev = linf_bound(0.0, 0.7, 1.2, 0.4, T);
    for (int i = 1; i <= 500; ++i) {
        const double t = T * i / 500.0;
        const double cur = linf_bound(t, 0.7, 1.2, 0.4, T);
        CHECK(cur <= prev + 1e-15);
        CHECK(std::abs(cur - prev) <= 5.0 * (T / 500.0) * (0.7 + 1.2 * prev));  // Lipschitz
        prev = cur;
    }
    CHECK(prev == doctest::Approx(0.4).epsilon(1e-14));  // xi(T) = phi_sup
}

TEST_CASE("a-priori sup bound closed form") {
    CHECK(linf_bound(1.0, 1.0, 1.0, 0.3, 1.0) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(linf_bound(0.25, 0.0, 2.0, 0.5, 1.0) ==
          doctest::Approx(std::exp(2.0 * 0.75) * 0.5).epsilon(1e-14));
    CHECK(linf_bound(0.0, 1.0, 1.0, 0.0, 1.0) ==
          doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-12));
    // lambda1 -> 0 limit
    CHECK(linf_bound(0.0, 0.7, 0.0, 0.2, 1.0) == doctest::Approx(0.9).epsilon(1e-14));
    CHECK_THROWS_AS(linf_bound(2.0, 1.0, 1.0, 0.0, 1.0), ArgumentError);
}

TEST_CASE("sup-bound check passes solver output and flags an adversarial field") {
    const Preset p = get_preset("heat_eigenmode");
    SolverConfig cfg;
    GridStack grid = grid_1d(p, 51, 50);
    SolutionField sol = solve_deterministic(p.spec, grid, cfg);
    CHECK(check_linf(sol, p.envelope, p.phi_sup, 1e-6).pass);

    SolutionField zero(grid, CoefficientMode::deterministic, 1);
    CHECK(check_linf(zero, p.envelope, p.phi_sup, 0.0).pass);

    SolutionField bad(grid, CoefficientMode::deterministic, 1);
    for (int level = 0; level <= grid.n_time(); ++level)
        for (int s : grid.interior_space_indices())
            bad.u[bad.uidx(level, s, 0)] =
                linf_bound(grid.time(level), 0.0, 0.0, p.phi_sup, grid.horizon()) + 1.0;
    const auto rep = check_linf(bad, p.envelope, p.phi_sup, 1e-3);
    CHECK_FALSE(rep.pass);
    CHECK(rep.worst_excess > 0.9);
}

TEST_CASE("energy matches the analytic eigenmode integral within one percent") {
    const Preset p = get_preset("heat_eigenmode");
    SolverConfig cfg;
    SolutionField sol = solve_deterministic(p.spec, grid_1d(p, 101, 200), cfg);
    PathSample trivial(sol, 1, 1);
    const EnergyReport er = energy_report(trivial, 1.0);
    const double analytic = 0.5 * (1.0 - std::exp(-kPi * kPi * p.spec.horizon));
    CHECK(er.ux_sq == doctest::Approx(analytic).epsilon(0.01));
    CHECK(er.q_sq == 0.0);
    CHECK(er.within_candidate);
}

TEST_CASE("energy on the zero field is zero") {
    GridStack grid({Axis{21, 0.0, 1.0}}, std::nullopt, 0.5, 10);
    SolutionField zero(grid, CoefficientMode::deterministic, 1);
    PathSample trivial(zero, 1, 1);
    const EnergyReport er = energy_report(trivial, 1.0);
    CHECK(er.ux_sq == 0.0);
    CHECK(er.q_sq == 0.0);
}

TEST_CASE("energy estimate is stable under doubling the path count") {
    const Preset p = get_preset("lifted_linear_w");
    SolverConfig cfg;
    GridStack grid({Axis{41, 0.0, 1.0}}, Axis{31, -p.default_wmax, p.default_wmax},
                   p.spec.horizon, 60);
    SolutionField sol = solve_markovian_lift(p.spec, grid, cfg);
    PathSample a(sol, 400, 10);
    PathSample b(sol, 800, 10);
    const EnergyReport ra = energy_report(a, 1e9);
    const EnergyReport rb = energy_report(b, 1e9);
    // crude pooled scale: per-path spread of the energy functional
    const double scale = (ra.ux_sq + ra.q_sq) + 1e-12;
    CHECK(std::abs((ra.ux_sq + ra.q_sq) - (rb.ux_sq + rb.q_sq)) <= 0.25 * scale);
}

TEST_CASE("comparison check on ordered pairs") {
    const Preset p = get_preset("heat_eigenmode");
    SolverConfig cfg;
    GridStack grid = grid_1d(p, 41, 40);
    SolutionField base = solve_deterministic(p.spec, grid, cfg);

    CHECK(comparison_check(base, base, 0.0).pass);

    Preset sourced = p;
    sourced.spec.f = [](double, std::span<const double>, double, double, std::span<const double>,
                        std::span<const double>) { return 1.0; };
    SolutionField bigger = solve_deterministic(sourced.spec, grid, cfg);
    CHECK(comparison_check(base, bigger, 1e-8).pass);
    CHECK_FALSE(comparison_check(bigger, base, 1e-8).pass);

    Preset doubled = p;
    doubled.spec.phi = [](std::span<const double> x, double) {
        return 2.0 * std::sin(kPi * x[0]);
    };
    SolutionField two = solve_deterministic(doubled.spec, grid, cfg);
    CHECK(comparison_check(base, two, 1e-8).pass);

    // transitivity on the reported verdicts
    CHECK(comparison_check(base, bigger, 1e-8).pass);
    SolutionField biggest = bigger;
    for (auto& v : biggest.u) v += 0.1;
    CHECK(comparison_check(bigger, biggest, 1e-8).pass);
    CHECK(comparison_check(base, biggest, 2e-8).pass);
}

TEST_CASE("comparison check rejects mismatched grids") {
    const Preset p = get_preset("heat_eigenmode");
    SolverConfig cfg;
    SolutionField a = solve_deterministic(p.spec, grid_1d(p, 21, 10), cfg);
    SolutionField b = solve_deterministic(p.spec, grid_1d(p, 31, 10), cfg);
    CHECK_THROWS_AS(comparison_check(a, b, 0.0), ArgumentError);
}

TEST_CASE("ODE supersolution check") {
    const Preset p = get_preset("heat_eigenmode");
    SolverConfig cfg;
    GridStack grid = grid_1d(p, 51, 200);
    SolutionField sol = solve_deterministic(p.spec, grid, cfg);

    // constant supersolution from the terminal sup (maximum principle)
    auto zero_g = [](double, double) { return 0.0; };
    CHECK(ode_supersolution_check(sol, zero_g, p.phi_sup, 1e-9).pass);

    // the linear right-hand side reproduces the closed-form envelope
    const double lam0 = 0.8, lam1 = 1.3;
    auto lin_g = [lam0, lam1](double, double z) { return lam1 * z + lam0; };
    const auto rep = ode_supersolution_check(sol, lin_g, p.phi_sup, 1e-9);
    for (int level = 0; level <= grid.n_time(); ++level) {
        const double xi = linf_bound(grid.time(level), lam0, lam1, p.phi_sup, grid.horizon());
        CHECK(std::abs(rep.zeta[static_cast<std::size_t>(level)] - xi) <= 1e-8);
    }

    SolutionField zero(grid, CoefficientMode::deterministic, 1);
    CHECK(ode_supersolution_check(zero, zero_g, 0.5, 0.0).pass);
}

TEST_CASE("pathwise identity residual vanishes on the zero field") {
    GridStack grid({Axis{31, 0.0, 1.0}}, std::nullopt, 0.5, 20);
    SolutionField zero(grid, CoefficientMode::deterministic, 1);
    const Preset p = get_preset("heat_eigenmode");
    const ProofTestFunction psi = ProofTestFunction::make(PsiKind::Psi2, 1.0, 0.5);
    CHECK(ito_identity_residual(p.spec, zero, psi, nullptr) == 0.0);
}

TEST_CASE("identity residual decays at first order in the time step") {
    for (const char* name : {"heat_eigenmode", "cole_hopf"}) {
        const Preset p = get_preset(name);
        SolverConfig cfg;
        const int nt = 100;
        SolutionField coarse = solve_deterministic(p.spec, grid_1d(p, 101, nt), cfg);
        SolutionField fine = solve_deterministic(p.spec, grid_1d(p, 101, 2 * nt), cfg);
        const ProofTestFunction psi =
            ProofTestFunction::make(PsiKind::Psi2, 1.0, 1.1 * p.phi_sup + 0.1);
        const double rc = std::abs(ito_identity_residual(p.spec, coarse, psi, nullptr));
        const double rf = std::abs(ito_identity_residual(p.spec, fine, psi, nullptr));
        INFO(name, ": coarse ", rc, " fine ", rf);
        const double ratio = rc / rf;
        CHECK(ratio >= 1.5);
        CHECK(ratio <= 3.0);
    }
}

TEST_CASE("identity residual is path-count independent for deterministic fields") {
    const Preset p = get_preset("heat_eigenmode");
    SolverConfig cfg;
    SolutionField sol = solve_deterministic(p.spec, grid_1d(p, 51, 50), cfg);
    const ProofTestFunction psi = ProofTestFunction::make(PsiKind::Psi2, 1.0, 1.2);
    const double r1 = ito_identity_residual(p.spec, sol, psi, nullptr);
    PathSample paths(sol, 64, 9);
    const double r2 = ito_identity_residual(p.spec, sol, psi, &paths);
    CHECK(r1 == r2);  // q == 0 kills the stochastic term; paths are ignored
}

TEST_CASE("identity residual guards the psi domain") {
    const Preset p = get_preset("heat_eigenmode");
    SolverConfig cfg;
    SolutionField sol = solve_deterministic(p.spec, grid_1d(p, 31, 20), cfg);
    const ProofTestFunction tiny = ProofTestFunction::make(PsiKind::Psi2, 1.0, 0.2);
    CHECK_THROWS_AS(ito_identity_residual(p.spec, sol, tiny, nullptr), DomainError);
}

TEST_CASE("2m-power difference estimate") {
    const Preset p = get_preset("cole_hopf");
    SolverConfig c1;
    c1.picard_tol = 1e-11;
    SolverConfig c2 = c1;
    c2.picard_init = PicardInit::zero;
    GridStack grid = grid_1d(p, 51, 80);
    SolutionField a = solve_deterministic(p.spec, grid, c1);
    SolutionField b = solve_deterministic(p.spec, grid, c2);

    UniquenessAssumptions ua;
    ua.b_fn = [](double) { return 1.0; };

    const auto same = power2m_contraction(a, a, 2, ua, 0.0);
    CHECK(same.pass);
    for (double v : same.integrals) CHECK(v == 0.0);
    CHECK(same.sup_distance == 0.0);

    const auto rep2 = power2m_contraction(a, b, 2, ua, 10.0 * c1.picard_tol);
    const auto rep8 = power2m_contraction(a, b, 8, ua, 10.0 * c1.picard_tol);
    CHECK(rep2.sup_distance <= 10.0 * c1.picard_tol);
    CHECK(rep2.pass == rep8.pass);
    CHECK(rep2.pass);
}

TEST_CASE("energy report rejects an empty sample set") {
    const Preset p = get_preset("lifted_linear_w");
    SolverConfig cfg;
    GridStack grid({Axis{21, 0.0, 1.0}}, Axis{11, -p.default_wmax, p.default_wmax},
                   p.spec.horizon, 10);
    SolutionField sol = solve_markovian_lift(p.spec, grid, cfg);
    PathSample none(sol, 0, 1);
    CHECK_THROWS_AS(energy_report(none, 1.0), ArgumentError);
}

TEST_CASE("identity residual on a lift field stays small") {
    const Preset p = get_preset("lifted_linear_w");
    SolverConfig cfg;
    GridStack grid({Axis{51, 0.0, 1.0}}, Axis{41, -p.default_wmax, p.default_wmax},
                   p.spec.horizon, 100);
    SolutionField sol = solve_markovian_lift(p.spec, grid, cfg);
    const ProofTestFunction psi = ProofTestFunction::make(PsiKind::Psi2, 1.0, 2.8);
    PathSample paths(sol, 1000, 42);
    const double r = ito_identity_residual(p.spec, sol, psi, &paths);
    CHECK(std::abs(r) <= 0.01);  // time-discretization plus Monte Carlo noise
}

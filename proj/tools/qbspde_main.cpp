#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "qbspde/approximation.hpp"
#include "qbspde/control.hpp"
#include "qbspde/errors.hpp"
#include "qbspde/estimates.hpp"
#include "qbspde/field_io.hpp"
#include "qbspde/presets.hpp"
#include "qbspde/report.hpp"
#include "qbspde/rng.hpp"
#include "qbspde/solver.hpp"
#include "qbspde/transforms.hpp"

using nlohmann::json;
using namespace qbspde;

namespace {

struct RunConfig {
    std::string preset = "heat_eigenmode";
    json preset_params = json::object();
    int nx = 0, nt = 0, nw = 0;
    double wmax = 0.0;
    double theta = 1.0;
    double picard_tol = 1e-10;
    std::uint64_t seed = 12345;
    std::string out;
    std::string check = "linf";
    std::string filter;
    int N = 6;
    int npaths = 10000;
    int nbins = 50;
    int degree = 3;
    double c1 = 1.0;

    json to_json() const {
        json j;
        j["preset"] = preset;
        j["params"] = preset_params;
        j["nx"] = nx;
        j["nt"] = nt;
        j["nw"] = nw;
        j["wmax"] = wmax;
        j["theta"] = theta;
        j["picard_tol"] = picard_tol;
        j["seed"] = seed;
        j["out"] = out;
        j["check"] = check;
        j["N"] = N;
        j["npaths"] = npaths;
        j["nbins"] = nbins;
        j["degree"] = degree;
        j["c1"] = c1;
        return j;
    }
};

void apply_config_file(RunConfig& cfg, const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read config file: " + path);
    json j;
    is >> j;
    if (j.contains("preset")) cfg.preset = j["preset"].get<std::string>();
    if (j.contains("params")) cfg.preset_params = j["params"];
    if (j.contains("filter")) cfg.filter = j["filter"].get<std::string>();
    if (j.contains("nx")) cfg.nx = j["nx"].get<int>();
    if (j.contains("nt")) cfg.nt = j["nt"].get<int>();
    if (j.contains("nw")) cfg.nw = j["nw"].get<int>();
    if (j.contains("wmax")) cfg.wmax = j["wmax"].get<double>();
    if (j.contains("theta")) cfg.theta = j["theta"].get<double>();
    if (j.contains("picard_tol")) cfg.picard_tol = j["picard_tol"].get<double>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("out")) cfg.out = j["out"].get<std::string>();
    if (j.contains("check")) cfg.check = j["check"].get<std::string>();
    if (j.contains("N")) cfg.N = j["N"].get<int>();
    if (j.contains("npaths")) cfg.npaths = j["npaths"].get<int>();
    if (j.contains("nbins")) cfg.nbins = j["nbins"].get<int>();
    if (j.contains("degree")) cfg.degree = j["degree"].get<int>();
    if (j.contains("c1")) cfg.c1 = j["c1"].get<double>();
}

GridStack grid_for(const Preset& p, const RunConfig& c) {
    const int nx = c.nx > 0 ? c.nx : p.default_nx;
    const int nt = c.nt > 0 ? c.nt : p.default_nt;
    std::vector<Axis> axes;
    for (int a = 0; a < p.spec.domain.dim(); ++a)
        axes.push_back(Axis{nx, p.spec.domain.lo[static_cast<std::size_t>(a)],
                            p.spec.domain.hi[static_cast<std::size_t>(a)]});
    std::optional<Axis> noise;
    if (p.spec.mode == CoefficientMode::markovian_lift) {
        const int nw = c.nw > 0 ? c.nw : (p.default_nw > 0 ? p.default_nw : 41);
        const double wmax =
            c.wmax > 0.0 ? c.wmax
                         : (p.default_wmax > 0.0 ? p.default_wmax : 5.0 * std::sqrt(p.spec.horizon));
        noise = Axis{nw, -wmax, wmax};
    }
    return GridStack(std::move(axes), noise, p.spec.horizon, nt);
}

SolverConfig solver_cfg(const RunConfig& c) {
    SolverConfig s;
    s.theta = c.theta;
    s.picard_tol = c.picard_tol;
    return s;
}

SolutionField run_solve(const Preset& p, const RunConfig& c) {
    const GridStack grid = grid_for(p, c);
    return p.spec.mode == CoefficientMode::markovian_lift
               ? solve_markovian_lift(p.spec, grid, solver_cfg(c))
               : solve_deterministic(p.spec, grid, solver_cfg(c));
}

void emit(const Report& rep) { std::cout << rep.to_json().dump(2) << "\n"; }

int finish(Report& rep, std::chrono::steady_clock::time_point start) {
    rep.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    emit(rep);
    return rep.all_pass() ? 0 : 1;
}

int cmd_solve(const RunConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    Report rep;
    rep.command = "solve";
    rep.config_hash = config_hash(cfg.to_json());
    const Preset p = make_preset(cfg.preset, cfg.preset_params);
    SolutionField field = run_solve(p, cfg);
    if (!cfg.out.empty()) write_field(field, cfg.out);
    rep.add("dirichlet_boundary", field.boundary_defect() == 0.0, field.boundary_defect(), 0.0);
    if (field.mode == CoefficientMode::markovian_lift)
        rep.add("wmax_adequate", !field.wmax_warning, field.wmax_warning_mag, 0.0);
    return finish(rep, start);
}

int cmd_transform_check(const RunConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    Report rep;
    rep.command = "transform-check";
    rep.config_hash = config_hash(cfg.to_json());
    const Preset p = make_preset(cfg.preset, cfg.preset_params);
    if (!(p.cole_hopf_lambda > 0.0))
        throw ArgumentError("preset has no exponential-transform route: " + cfg.preset);
    const double lambda = p.cole_hopf_lambda;

    // round trip on seeded positive fields
    Rng rng(cfg.seed);
    double roundtrip_err = 0.0;
    std::vector<double> v(257), r(257);
    for (auto& x : v) x = std::exp(rng.normal());
    for (auto& x : r) x = rng.normal();
    FieldPair uq = exp_inverse(v, r, lambda);
    FieldPair back = exp_forward(uq.first, uq.second, lambda);
    for (std::size_t i = 0; i < v.size(); ++i) {
        roundtrip_err = std::max(roundtrip_err, std::abs(back.first[i] - v[i]));
        roundtrip_err = std::max(roundtrip_err, std::abs(back.second[i] - r[i]));
    }

    // direct quadratic solve vs back-transformed linear solve
    SolutionField direct = run_solve(p, cfg);
    Preset linear = p;
    linear.spec = cole_hopf_linear_route(p);
    SolutionField vfield = run_solve(linear, cfg);
    double equivalence_err = 0.0;
    for (std::size_t i = 0; i < direct.u.size(); ++i)
        equivalence_err = std::max(
            equivalence_err, std::abs(direct.u[i] - exp_inverse_value(vfield.u[i], lambda)));

    // uniqueness-transform certificate at the preset's coercivity constant
    const SuperparabolicReport sp = validate_superparabolic(p.spec, 200, cfg.seed);
    const double mu = mu0(sp.kappa_est, sp.K_est);
    double margin = 0.0, beta = 0.0, B = 0.0;
    bool certified = false;
    try {
        const BetaBResult bb = choose_beta_B(mu, 0.5, 0.35);
        margin = bb.margin;
        beta = bb.beta;
        B = bb.B;
        certified = margin <= -1e-6;
    } catch (const SearchFailure& e) {
        margin = e.best_margin;
    }

    rep.add("roundtrip_err", roundtrip_err <= 1e-12, roundtrip_err, 1e-12);
    rep.add("equivalence_err", equivalence_err <= 1e-2, equivalence_err, 1e-2);
    rep.add("margin", certified, margin, -1e-6);
    rep.add("beta", certified, beta, 0.0);
    rep.add("B", certified, B, 0.0);
    return finish(rep, start);
}

UniquenessAssumptions generic_assumptions(const Preset& p) {
    UniquenessAssumptions ua;
    ua.M = 2.0 * p.phi_sup + 1.0;
    ua.l = [sup = p.envelope.lambda0_sup + p.envelope.lambda1 * 3.0](double) { return sup + 1.0; };
    ua.l_sup = p.envelope.lambda0_sup + 1.0;
    ua.k = [](double) { return 1.0; };
    ua.Lambda = std::max(1.0, p.envelope.lambda);
    ua.l_eps = [](double, double) { return 1.0; };
    ua.a_const = 1.0;
    ua.b_fn = [](double) { return 1.0; };
    return ua;
}

int cmd_estimate(const RunConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    Report rep;
    rep.command = "estimate:" + cfg.check;
    rep.config_hash = config_hash(cfg.to_json());
    const Preset p = make_preset(cfg.preset, cfg.preset_params);

    if (cfg.check == "linf") {
        SolutionField sol = run_solve(p, cfg);
        LinfReport lr = check_linf(sol, p.envelope, p.phi_sup, 1e-3);
        rep.add("linf_bound", lr.pass, lr.worst_excess, 0.0);
    } else if (cfg.check == "energy") {
        SolutionField sol = run_solve(p, cfg);
        PathSample paths(sol, sol.mode == CoefficientMode::markovian_lift ? cfg.npaths : 1,
                         cfg.seed);
        EnergyReport er = energy_report(paths, cfg.c1);
        rep.add("energy_within_c1", er.within_candidate, er.ux_sq + er.q_sq, cfg.c1);
        rep.add("ux_sq", true, er.ux_sq, 0.0);
        rep.add("q_sq", true, er.q_sq, 0.0);
    } else if (cfg.check == "comparison") {
        SolutionField sol1 = run_solve(p, cfg);
        Preset bigger = p;
        const DriverFn base = p.spec.f;
        bigger.spec.f = [base](double t, std::span<const double> x, double w, double v,
                               std::span<const double> pp, std::span<const double> rr) {
            return base(t, x, w, v, pp, rr) + 1.0;
        };
        SolutionField sol2 = run_solve(bigger, cfg);
        ComparisonReport cr = comparison_check(sol1, sol2, 1e-8);
        rep.add("comparison", cr.pass, cr.max_excess, 1e-8);
    } else if (cfg.check == "ito") {
        RunConfig coarse = cfg;
        RunConfig fine = cfg;
        fine.nt = 2 * (cfg.nt > 0 ? cfg.nt : p.default_nt);
        SolutionField sol_c = run_solve(p, coarse);
        SolutionField sol_f = run_solve(p, fine);
        double m2 = 0.0;
        for (double uv : sol_c.u) m2 = std::max(m2, std::abs(uv));
        ProofTestFunction psi = ProofTestFunction::make(PsiKind::Psi2, 1.0, 1.05 * m2 + 0.1);
        const double rc = std::abs(ito_identity_residual(p.spec, sol_c, psi, nullptr));
        const double rf = std::abs(ito_identity_residual(p.spec, sol_f, psi, nullptr));
        const double ratio = rc / std::max(rf, 1e-300);
        rep.add("ito_residual_ratio", ratio >= 1.5 && ratio <= 3.0, ratio, 1.5);
        rep.add("ito_residual_coarse", true, rc, 0.0);
    } else if (cfg.check == "power2m") {
        SolverConfig s1 = solver_cfg(cfg);
        SolverConfig s2 = s1;
        s2.picard_init = PicardInit::zero;
        const GridStack grid = grid_for(p, cfg);
        SolutionField a = solve_deterministic(p.spec, grid, s1);
        SolutionField b = solve_deterministic(p.spec, grid, s2);
        Power2mReport pr = power2m_contraction(a, b, 2, generic_assumptions(p),
                                               10.0 * cfg.picard_tol);
        rep.add("power2m_gronwall", pr.pass, pr.sup_distance, 10.0 * cfg.picard_tol);
        rep.add("sup_distance", pr.sup_distance <= 10.0 * cfg.picard_tol, pr.sup_distance,
                10.0 * cfg.picard_tol);
    } else if (cfg.check == "psi") {
        bool ok = true;
        double measured = 0.0;
        try {
            (void)ProofTestFunction::make(PsiKind::Psi1, 1.0, 1.0);
            ProofTestFunction p2 = ProofTestFunction::make(PsiKind::Psi2, 1.0, 1.0);
            (void)ProofTestFunction::make(PsiKind::Psi3, 0.25, 1.0);
            measured = p2.sandwich()->k1;
        } catch (const std::exception&) {
            ok = false;
        }
        rep.add("psi_family_invariants", ok, measured, 0.0);
    } else {
        throw ArgumentError("unknown check: " + cfg.check);
    }
    return finish(rep, start);
}

int cmd_approx(const RunConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    Report rep;
    rep.command = "approx";
    rep.config_hash = config_hash(cfg.to_json());
    RunConfig local = cfg;
    if (local.nx == 0) local.nx = 41;
    if (local.nt == 0) local.nt = 40;
    const Preset p = make_preset(cfg.preset, cfg.preset_params);
    const GridStack grid = grid_for(p, local);
    MonotoneSequenceResult seq = monotone_solve_sequence(p.spec, p.envelope, p.phi_sup, grid,
                                                         solver_cfg(local), cfg.N);
    json table = json::array();
    double worst_defect = 0.0;
    bool distances_monotone = true, sandwich = true;
    for (std::size_t i = 0; i < seq.rows.size(); ++i) {
        const MonotoneRow& row = seq.rows[i];
        json r;
        r["n"] = row.n;
        r["sup_distance"] = row.sup_distance;
        r["monotonicity_defect"] = row.monotonicity_defect;
        table.push_back(r);
        worst_defect = std::max(worst_defect, row.monotonicity_defect);
        sandwich = sandwich && row.sandwich_ok;
        if (i + 1 < seq.rows.size() &&
            seq.rows[i + 1].sup_distance > row.sup_distance + 1e-12)
            distances_monotone = false;
    }
    rep.add("monotonicity_defect", worst_defect <= 1e-8, worst_defect, 1e-8);
    rep.add("sup_distance_nonincreasing", distances_monotone, 0.0, 0.0);
    rep.add("sandwich_bounds", sandwich, seq.M, 0.0);
    rep.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json doc = rep.to_json();
    doc["table"] = table;
    std::cout << doc.dump(2) << "\n";
    return rep.all_pass() ? 0 : 1;
}

int cmd_control(const RunConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    Report rep;
    rep.command = "control";
    rep.config_hash = config_hash(cfg.to_json());
    const Preset p = make_preset(cfg.preset, cfg.preset_params);
    if (!p.control) throw ArgumentError("preset has no control problem: " + cfg.preset);
    const ControlProblem& prob = *p.control;
    const double x0 = p.control_x0;

    StateBins bins{p.spec.domain.lo[0], p.spec.domain.hi[0], cfg.nbins};
    ControlGrid tgrid{0.0, prob.horizon, 20};
    DPResult dp = value_bruteforce(prob, 0.0, x0, bins, tgrid);
    const double value_dp = dp.value_at(0, x0);

    SolverConfig scfg = solver_cfg(cfg);
    SolutionField hjb = solve_hjb(prob, p.spec.domain, cfg.nx > 0 ? cfg.nx : p.default_nx,
                                  cfg.nt > 0 ? cfg.nt : p.default_nt, scfg);
    // interpolate the HJB field at x0 on level 0
    const Axis& ax = hjb.grid.space()[0];
    const double pos = (x0 - ax.lo) / ax.dx();
    const int i0 = std::clamp(static_cast<int>(std::floor(pos)), 0, ax.n - 2);
    const double frac = pos - i0;
    const double value_hjb = hjb.u[hjb.uidx(0, i0, 0)] * (1.0 - frac) +
                             hjb.u[hjb.uidx(0, i0 + 1, 0)] * frac;

    const double defect = dpp_check(prob, dp, 0, x0, 2, cfg.npaths, cfg.degree, cfg.seed);
    const double scale = std::max(1.0, std::abs(value_dp));
    const double xi0 = linf_bound(0.0, p.envelope.lambda0_sup, p.envelope.lambda1, p.phi_sup,
                                  prob.horizon);

    json results;
    results["value_hjb"] = value_hjb;
    results["value_bruteforce"] = value_dp;
    results["dpp_defect"] = defect;
    results["bound_check"] = std::abs(value_dp) <= xi0 + 1e-3;

    rep.add("hjb_vs_bruteforce", std::abs(value_hjb - value_dp) / scale <= 0.02,
            std::abs(value_hjb - value_dp) / scale, 0.02);
    rep.add("dpp_defect", defect / scale <= 0.02, defect / scale, 0.02);
    rep.add("value_bounded", std::abs(value_dp) <= xi0 + 1e-3, std::abs(value_dp), xi0 + 1e-3);
    rep.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json doc = rep.to_json();
    doc["results"] = results;
    std::cout << doc.dump(2) << "\n";
    return rep.all_pass() ? 0 : 1;
}

int cmd_list_presets(const RunConfig& cfg) {
    for (const PresetInfo& info : list_presets(cfg.filter)) {
        std::cout << info.name << " - " << info.description;
        if (!info.tags.empty()) {
            std::cout << " [";
            for (std::size_t i = 0; i < info.tags.size(); ++i)
                std::cout << (i ? "," : "") << info.tags[i];
            std::cout << "]";
        }
        std::cout << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"quadratic backward SPDE toolkit"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string config_path;

    // config file first, flags win on conflict
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--config") config_path = argv[i + 1];
    try {
        if (!config_path.empty()) apply_config_file(cfg, config_path);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file (flags win on conflict)");
        sub->add_option("--preset", cfg.preset, "preset name");
        sub->add_option("--nx", cfg.nx, "space nodes per axis");
        sub->add_option("--nt", cfg.nt, "time steps");
        sub->add_option("--nw", cfg.nw, "noise nodes (lift)");
        sub->add_option("--wmax", cfg.wmax, "noise truncation half-width");
        sub->add_option("--theta", cfg.theta, "implicit weight in [0.5, 1]");
        sub->add_option("--picard-tol", cfg.picard_tol, "Picard stopping tolerance");
        sub->add_option("--seed", cfg.seed, "master seed");
    };

    CLI::App* solve = app.add_subcommand("solve", "backward solve of a preset problem");
    add_common(solve);
    solve->add_option("--out", cfg.out, "output path (.csv or binary)");

    CLI::App* tcheck = app.add_subcommand("transform-check",
                                          "exponential-transform round trip and equivalence");
    add_common(tcheck);

    CLI::App* est = app.add_subcommand("estimate", "a-priori estimate verifiers");
    add_common(est);
    est->add_option("--check", cfg.check, "linf | energy | comparison | ito | power2m | psi");
    est->add_option("--npaths", cfg.npaths, "paths for stochastic checks");
    est->add_option("--c1", cfg.c1, "energy bound candidate");

    CLI::App* approx = app.add_subcommand("approx", "monotone approximation sequence");
    add_common(approx);
    approx->add_option("--N", cfg.N, "number of regularization levels");

    CLI::App* control = app.add_subcommand("control", "stochastic control cross-validation");
    add_common(control);
    control->add_option("--npaths", cfg.npaths, "Monte Carlo paths");
    control->add_option("--nbins", cfg.nbins, "state bins for dynamic programming");
    control->add_option("--degree", cfg.degree, "regression basis degree");

    CLI::App* listp = app.add_subcommand("list-presets", "catalog listing");
    listp->add_option("--filter", cfg.filter, "substring filter");

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed()) return cmd_solve(cfg);
        if (tcheck->parsed()) return cmd_transform_check(cfg);
        if (est->parsed()) return cmd_estimate(cfg);
        if (approx->parsed()) return cmd_approx(cfg);
        if (control->parsed()) return cmd_control(cfg);
        if (listp->parsed()) return cmd_list_presets(cfg);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const ArgumentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return std::string(e.what()).rfind("unknown preset", 0) == 0 ? 2 : 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}

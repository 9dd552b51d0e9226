#include "qbspde/presets.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <map>

#include "qbspde/errors.hpp"

namespace qbspde {

namespace {

using nlohmann::json;

constexpr double kPi = 3.14159265358979323846;

double param(const json& p, const char* key, double fallback) {
    if (p.contains(key)) return p.at(key).get<double>();
    return fallback;
}

MatrixField constant_a(double value) {
    return [value](double, std::span<const double> x, double) {
        Mat m(static_cast<int>(x.size()), static_cast<int>(x.size()));
        for (int i = 0; i < m.rows; ++i) m(i, i) = value;
        return m;
    };
}

MatrixField zero_sigma(int d, int d0) {
    return [d, d0](double, std::span<const double>, double) { return Mat(d, d0); };
}

DriverFn zero_driver() {
    return [](double, std::span<const double>, double, double, std::span<const double>,
              std::span<const double>) { return 0.0; };
}

GrowthEnvelope envelope_const(double lambda0, double lambda1, double gamma_const, double lambda) {
    GrowthEnvelope env;
    env.lambda0 = [lambda0](double, std::span<const double>, double) { return lambda0; };
    env.lambda0_sup = lambda0;
    env.lambda0_l2 = lambda0;  // unit-measure box presets
    env.lambda1 = lambda1;
    env.gamma = [gamma_const](double) { return gamma_const; };
    env.lambda = lambda;
    return env;
}

Preset make_heat_eigenmode(const json& p) {
    Preset pr;
    pr.name = "heat_eigenmode";
    pr.description = "separable heat equation, terminal sin(pi x), closed-form decay";
    pr.tags = {"deterministic", "linear", "oracle"};
    const double a = param(p, "a", 0.5);
    const double T = param(p, "T", 0.1);
    const double amp = param(p, "amplitude", 1.0);
    pr.spec.spatial_dim = 1;
    pr.spec.wiener_dim = 1;
    pr.spec.domain = Box{{0.0}, {1.0}};
    pr.spec.horizon = T;
    pr.spec.a = constant_a(a);
    pr.spec.sigma = zero_sigma(1, 1);
    pr.spec.f = zero_driver();
    pr.spec.phi = [amp](std::span<const double> x, double) { return amp * std::sin(kPi * x[0]); };
    pr.envelope = envelope_const(0.0, 0.0, 0.0, 1.0);
    pr.phi_sup = amp;
    pr.default_nx = 101;
    pr.default_nt = 200;
    return pr;
}

Preset make_cole_hopf(const json& p, bool monotone_flavor) {
    Preset pr;
    pr.name = monotone_flavor ? "monotone_seq" : "cole_hopf";
    pr.description = monotone_flavor
                         ? "quadratic-gradient equation staged for the monotone scheme"
                         : "quadratic-gradient equation with an exact linear companion route";
    pr.tags = {"deterministic", "quadratic"};
    const double lambda = param(p, "lambda", 1.0);
    const double T = param(p, "T", 0.5);
    const double amp = param(p, "amplitude", 0.5);
    pr.spec.spatial_dim = 1;
    pr.spec.wiener_dim = 1;
    pr.spec.domain = Box{{0.0}, {1.0}};
    pr.spec.horizon = T;
    pr.spec.a = constant_a(0.5);
    pr.spec.sigma = zero_sigma(1, 1);
    pr.spec.f = [lambda](double, std::span<const double>, double, double,
                         std::span<const double> grad, std::span<const double>) {
        double p2 = 0.0;
        for (double g : grad) p2 += g * g;
        return 0.5 * lambda * p2;
    };
    pr.spec.phi = [amp](std::span<const double> x, double) { return amp * std::sin(kPi * x[0]); };
    pr.cole_hopf_lambda = lambda;
    // kappa = K = 1 for these coefficients, so mu0 = 1/3 and the gradient
    // coefficient lambda/2 sits at (3 lambda / 2) mu0.
    const double lambda1 = monotone_flavor ? param(p, "lambda1", 0.2) : 0.0;
    pr.envelope = envelope_const(0.0, lambda1, 0.5 * lambda, 1.5 * lambda);
    pr.phi_sup = amp;
    pr.default_nx = 101;
    pr.default_nt = 400;
    return pr;
}

Preset make_lifted_linear_w(const json& p) {
    Preset pr;
    pr.name = "lifted_linear_w";
    pr.description = "noise-linear terminal datum solved through the Markovian lift";
    pr.tags = {"lift", "linear", "oracle"};
    const double T = param(p, "T", 0.25);
    pr.spec.spatial_dim = 1;
    pr.spec.wiener_dim = 1;
    pr.spec.domain = Box{{0.0}, {1.0}};
    pr.spec.horizon = T;
    pr.spec.mode = CoefficientMode::markovian_lift;
    pr.spec.a = constant_a(0.5);
    pr.spec.sigma = zero_sigma(1, 1);
    pr.spec.f = zero_driver();
    pr.spec.phi = [](std::span<const double> x, double w) { return w * std::sin(kPi * x[0]); };
    pr.default_nx = 101;
    pr.default_nt = 200;
    pr.default_nw = 41;
    pr.default_wmax = 5.0 * std::sqrt(T);
    pr.envelope = envelope_const(0.0, 0.0, 0.0, 1.0);
    pr.phi_sup = pr.default_wmax;  // sup over the truncated noise range
    return pr;
}

Preset make_control_markov(const json& p) {
    Preset pr;
    pr.name = "control_markov";
    pr.description = "bang-bang drift control with Gaussian-bump terminal cost";
    pr.tags = {"control", "hjb"};
    const double T = param(p, "T", 0.25);
    const double L = param(p, "L", 2.0);
    const double A = param(p, "A", 0.8);
    const double s_bump = param(p, "bump_width", 0.3);
    const double sigma = param(p, "sigma", 0.35);
    const double pi_load = param(p, "pi", 0.25);
    const double ca = param(p, "control_cost", 0.05);
    const double cb = param(p, "y_coupling", 0.1);
    const double cq = param(p, "z_quadratic", 0.2);
    const double bdrift = param(p, "drift_gain", 1.0);

    ControlProblem cp;
    cp.horizon = T;
    cp.V = {-1.0, 0.0, 1.0};
    cp.b = [bdrift](double, double, double v) { return bdrift * v; };
    cp.sigma_w = [sigma](double, double) { return sigma; };
    cp.pi_b = [pi_load](double, double) { return pi_load; };
    cp.f = [ca, cb, cq](double, double, double y, double zt, double, double v) {
        return ca * std::abs(v) + cb * y + cq * zt * zt;
    };
    cp.phi = [A, s_bump, L](double x) {
        const double core = A * std::exp(-x * x / (2.0 * s_bump * s_bump));
        return core * (1.0 - (x / L) * (x / L));
    };
    cp.lipschitz_L = bdrift + 1.0;
    pr.control = cp;
    pr.control_x0 = 0.0;

    // matching HJB spec (for the a-priori bound checks)
    pr.spec.spatial_dim = 1;
    pr.spec.wiener_dim = 1;
    pr.spec.domain = Box{{-L}, {L}};
    pr.spec.horizon = T;
    pr.spec.a = constant_a(0.5 * (sigma * sigma + pi_load * pi_load));
    pr.spec.sigma = zero_sigma(1, 1);
    const auto fj = cp.f;
    const auto bj = cp.b;
    const std::vector<double> V = cp.V;
    pr.spec.f = [fj, bj, sigma, pi_load, V](double t, std::span<const double> x, double, double v,
                                            std::span<const double> grad,
                                            std::span<const double>) {
        const double g = grad.empty() ? 0.0 : grad[0];
        double best = std::numeric_limits<double>::infinity();
        for (double vc : V)
            best = std::min(best, fj(t, x[0], v, g * sigma, g * pi_load, vc) + bj(t, x[0], vc) * g);
        return best;
    };
    const auto phi = cp.phi;
    pr.spec.phi = [phi](std::span<const double> x, double) { return phi(x[0]); };
    pr.envelope = envelope_const(0.3, cb, 1.1, 2.0);
    pr.phi_sup = A;
    pr.default_nx = 201;
    pr.default_nt = 200;
    return pr;
}

Preset make_bsde_gauss(const json& p) {
    Preset pr;
    pr.name = "bsde_gauss";
    pr.description = "driverless cost with linear terminal; Gaussian closed form";
    pr.tags = {"control", "oracle"};
    const double T = param(p, "T", 0.5);
    ControlProblem cp;
    cp.horizon = T;
    cp.V = {0.0};
    const double mu = param(p, "mu", 0.1);
    const double sigma = param(p, "sigma", 0.3);
    const double pi_load = param(p, "pi", 0.2);
    cp.b = [mu](double, double, double) { return mu; };
    cp.sigma_w = [sigma](double, double) { return sigma; };
    cp.pi_b = [pi_load](double, double) { return pi_load; };
    cp.f = [](double, double, double, double, double, double) { return 0.0; };
    cp.phi = [](double x) { return 2.0 * x + 1.0; };
    pr.control = cp;
    pr.spec.horizon = T;
    pr.envelope = envelope_const(0.0, 0.0, 0.0, 1.0);
    return pr;
}

Preset make_bsde_quadratic(const json& p) {
    Preset pr;
    pr.name = "bsde_quadratic";
    pr.description = "cost driver quadratic in the W-martingale term; single noise source";
    pr.tags = {"control", "quadratic"};
    const double T = param(p, "T", 0.5);
    const double c = param(p, "c", 0.25);
    const double sigma = param(p, "sigma", 0.4);
    ControlProblem cp;
    cp.horizon = T;
    cp.V = {0.0};
    cp.b = [](double, double, double) { return 0.0; };
    cp.sigma_w = [sigma](double, double) { return sigma; };
    cp.pi_b = [](double, double) { return 0.0; };  // keeps the B-martingale term zero
    cp.f = [c](double, double, double, double zt, double, double) { return c * zt * zt; };
    cp.phi = [](double x) { return std::tanh(x); };
    cp.exp_transform_lambda = 2.0 * c;
    pr.control = cp;
    pr.spec.horizon = T;
    pr.envelope = envelope_const(0.0, 0.0, 0.0, 1.0);
    return pr;
}

// super-parabolic coefficient presets (validation targets; f = 0, phi = 0)
Preset make_sp(int index) {
    Preset pr;
    pr.name = "sp" + std::string(index < 10 ? "0" : "") + std::to_string(index);
    pr.tags = {"coefficients"};
    pr.spec.domain = Box{{0.0}, {1.0}};
    pr.spec.horizon = 1.0;
    pr.spec.f = zero_driver();
    pr.spec.phi = [](std::span<const double>, double) { return 0.0; };
    pr.envelope = envelope_const(0.0, 0.0, 0.0, 1.0);
    auto box2 = Box{{0.0, 0.0}, {1.0, 1.0}};
    switch (index) {
        case 1:
            pr.description = "constant scalar diffusion, no martingale loading";
            pr.spec.a = constant_a(0.5);
            pr.spec.sigma = zero_sigma(1, 1);
            break;
        case 2:
            pr.description = "constant scalar diffusion with constant loading";
            pr.spec.a = constant_a(1.0);
            pr.spec.sigma = [](double, std::span<const double>, double) {
                Mat m(1, 1);
                m(0, 0) = 0.5;
                return m;
            };
            break;
        case 3:
            pr.description = "trigonometric scalar diffusion";
            pr.spec.a = [](double t, std::span<const double> x, double) {
                return Mat::scalar(0.5 * (1.5 + 0.5 * std::sin(kPi * x[0]) * std::cos(t)));
            };
            pr.spec.sigma = zero_sigma(1, 1);
            break;
        case 4:
            pr.description = "loading-dominated diffusion built above sigma sigma*";
            pr.spec.a = [](double, std::span<const double> x, double) {
                const double s = 0.6 + 0.2 * std::sin(2.0 * kPi * x[0]);
                return Mat::scalar(0.5 * (s * s + 0.9));
            };
            pr.spec.sigma = [](double, std::span<const double> x, double) {
                Mat m(1, 1);
                m(0, 0) = 0.6 + 0.2 * std::sin(2.0 * kPi * x[0]);
                return m;
            };
            break;
        case 5: {
            pr.description = "anisotropic diagonal diffusion in two dimensions";
            pr.spec.spatial_dim = 2;
            pr.spec.domain = box2;
            const std::array<double, 2> diag{1.0, 0.5};
            pr.spec.a = [diag](double, std::span<const double>, double) {
                return Mat::diag(std::span<const double>(diag.data(), 2));
            };
            pr.spec.sigma = zero_sigma(2, 1);
            break;
        }
        case 6:
            pr.description = "full symmetric two-dimensional diffusion";
            pr.spec.spatial_dim = 2;
            pr.spec.domain = box2;
            pr.spec.a = [](double, std::span<const double>, double) {
                Mat m(2, 2);
                m(0, 0) = 1.0;
                m(0, 1) = m(1, 0) = 0.2;
                m(1, 1) = 0.8;
                return m;
            };
            pr.spec.sigma = zero_sigma(2, 1);
            break;
        case 7:
            pr.description = "two-component martingale loading in one dimension";
            pr.spec.wiener_dim = 2;
            pr.spec.a = constant_a(0.6);
            pr.spec.sigma = [](double, std::span<const double>, double) {
                Mat m(1, 2);
                m(0, 0) = 0.3;
                m(0, 1) = 0.4;
                return m;
            };
            break;
        case 8:
            pr.description = "two-dimensional state with rank-one loading";
            pr.spec.spatial_dim = 2;
            pr.spec.domain = box2;
            pr.spec.a = [](double, std::span<const double>, double) {
                Mat m(2, 2);
                m(0, 0) = 0.5 * (0.16 + 0.6);
                m(0, 1) = m(1, 0) = 0.5 * 0.12;
                m(1, 1) = 0.5 * (0.09 + 0.6);
                return m;
            };
            pr.spec.sigma = [](double, std::span<const double>, double) {
                Mat m(2, 1);
                m(0, 0) = 0.4;
                m(1, 0) = 0.3;
                return m;
            };
            break;
        case 9:
            pr.description = "noise-dependent scalar diffusion (lift coefficients)";
            pr.spec.mode = CoefficientMode::markovian_lift;
            pr.spec.a = [](double, std::span<const double>, double w) {
                return Mat::scalar(0.5 * (1.0 + 0.3 * std::tanh(w)));
            };
            pr.spec.sigma = zero_sigma(1, 1);
            break;
        case 10:
            pr.description = "rotated anisotropic diffusion with partial loading";
            pr.spec.spatial_dim = 2;
            pr.spec.domain = box2;
            pr.spec.a = [](double, std::span<const double> x, double) {
                const double th = 0.3 * std::sin(kPi * x[0]);
                const double c = std::cos(th), s = std::sin(th);
                // R diag(0.6, 0.3) R^T
                Mat m(2, 2);
                m(0, 0) = 0.6 * c * c + 0.3 * s * s;
                m(1, 1) = 0.6 * s * s + 0.3 * c * c;
                m(0, 1) = m(1, 0) = (0.6 - 0.3) * s * c;
                return m;
            };
            pr.spec.sigma = [](double, std::span<const double>, double) {
                Mat m(2, 1);
                m(0, 0) = 0.4;
                return m;
            };
            break;
        default:
            throw ArgumentError("make_sp: index 1..10");
    }
    return pr;
}

using Factory = std::function<Preset(const json&)>;

const std::map<std::string, Factory>& factories() {
    static const std::map<std::string, Factory> table = [] {
        std::map<std::string, Factory> t;
        t["heat_eigenmode"] = [](const json& p) { return make_heat_eigenmode(p); };
        t["cole_hopf"] = [](const json& p) { return make_cole_hopf(p, false); };
        t["monotone_seq"] = [](const json& p) { return make_cole_hopf(p, true); };
        t["lifted_linear_w"] = [](const json& p) { return make_lifted_linear_w(p); };
        t["control_markov"] = [](const json& p) { return make_control_markov(p); };
        t["bsde_gauss"] = [](const json& p) { return make_bsde_gauss(p); };
        t["bsde_quadratic"] = [](const json& p) { return make_bsde_quadratic(p); };
        for (int i = 1; i <= 10; ++i) {
            const std::string name = "sp" + std::string(i < 10 ? "0" : "") + std::to_string(i);
            t[name] = [i](const json&) { return make_sp(i); };
        }
        return t;
    }();
    return table;
}

}  // namespace

Preset get_preset(const std::string& name) { return make_preset(name, json::object()); }

Preset make_preset(const std::string& name, const nlohmann::json& params) {
    const auto& table = factories();
    auto it = table.find(name);
    if (it == table.end()) throw ArgumentError("unknown preset: " + name);
    return it->second(params);
}

Preset load_preset_json(const nlohmann::json& doc) {
    if (!doc.contains("preset")) throw ArgumentError("preset document missing \"preset\" key");
    return make_preset(doc.at("preset").get<std::string>(),
                       doc.value("params", nlohmann::json::object()));
}

std::vector<PresetInfo> list_presets(const std::string& filter) {
    std::vector<PresetInfo> out;
    for (const auto& [name, factory] : factories()) {
        Preset p = factory(nlohmann::json::object());
        if (!filter.empty() && name.find(filter) == std::string::npos &&
            p.description.find(filter) == std::string::npos)
            continue;
        out.push_back(PresetInfo{name, p.description, p.tags});
    }
    return out;
}

ProblemSpec cole_hopf_linear_route(const Preset& preset) {
    if (!(preset.cole_hopf_lambda > 0.0))
        throw ArgumentError("preset has no exponential-transform companion");
    const double lambda = preset.cole_hopf_lambda;
    ProblemSpec linear = preset.spec;
    linear.f = zero_driver();
    const TerminalFn phi = preset.spec.phi;
    linear.phi = [phi, lambda](std::span<const double> x, double w) {
        return std::expm1(lambda * phi(x, w));
    };
    return linear;
}

}  // namespace qbspde

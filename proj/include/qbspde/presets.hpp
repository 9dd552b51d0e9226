#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qbspde/control.hpp"
#include "qbspde/core_spec.hpp"

namespace qbspde {

/// A named, parameterized problem instance: the PDE spec plus its declared
/// growth envelope, transform constants, grid defaults, and (for the control
/// family) the controlled-SDE problem. Coefficients come from a fixed catalog
/// of forms (constants, separable trigonometric fields, the control example);
/// arbitrary code-as-config is not supported.
struct Preset {
    std::string name;
    std::string description;
    std::vector<std::string> tags;

    ProblemSpec spec;
    GrowthEnvelope envelope;
    double phi_sup = 0.0;

    /// Exponential-transform constant for the linear companion route
    /// (quadratic-gradient presets); 0 when not applicable.
    double cole_hopf_lambda = 0.0;

    std::optional<ControlProblem> control;
    double control_x0 = 0.0;

    int default_nx = 101;
    int default_nt = 200;
    int default_nw = 0;      // 0: no noise axis
    double default_wmax = 0.0;
};

struct PresetInfo {
    std::string name;
    std::string description;
    std::vector<std::string> tags;
};

/// Catalog lookup; throws ArgumentError for unknown names.
Preset get_preset(const std::string& name);

/// Same, with numeric parameter overrides per the preset family.
Preset make_preset(const std::string& name, const nlohmann::json& params);

/// Loads {"preset": name, "params": {...}} documents.
Preset load_preset_json(const nlohmann::json& doc);

/// Substring-filtered listing (empty filter: full catalog).
std::vector<PresetInfo> list_presets(const std::string& filter = "");

/// The linear companion problem of a quadratic-gradient preset: source-free
/// equation for v with terminal e^{lambda phi} - 1; applying the inverse
/// exponential transform to its solution solves the preset's own equation.
ProblemSpec cole_hopf_linear_route(const Preset& preset);

}  // namespace qbspde

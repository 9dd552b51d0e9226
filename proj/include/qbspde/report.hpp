#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace qbspde {

inline constexpr const char* kVersion = "0.1.0";

struct CheckVerdict {
    std::string name;
    bool pass = false;
    double measured = 0.0;
    double threshold = 0.0;
};

/// Machine-readable run report: command echo, stable config hash, one verdict
/// per check, wall-clock. Two runs with identical config and seed differ only
/// in the wall_seconds field.
struct Report {
    std::string command;
    std::string config_hash;
    std::vector<CheckVerdict> checks;
    double wall_seconds = 0.0;

    void add(const std::string& name, bool pass, double measured, double threshold);
    bool all_pass() const;
    nlohmann::json to_json() const;
};

std::uint64_t fnv1a(const std::string& bytes);
std::string config_hash(const nlohmann::json& config);

}  // namespace qbspde

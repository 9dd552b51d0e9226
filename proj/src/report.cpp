#include "qbspde/report.hpp"

#include <cstdio>

namespace qbspde {

void Report::add(const std::string& name, bool pass, double measured, double threshold) {
    checks.push_back(CheckVerdict{name, pass, measured, threshold});
}

bool Report::all_pass() const {
    for (const auto& c : checks)
        if (!c.pass) return false;
    return true;
}

nlohmann::json Report::to_json() const {
    nlohmann::json j;
    j["command"] = command;
    j["config_hash"] = config_hash;
    j["version"] = kVersion;
    j["checks"] = nlohmann::json::array();
    for (const auto& c : checks) {
        nlohmann::json cj;
        cj["name"] = c.name;
        cj["pass"] = c.pass;
        cj["measured"] = c.measured;
        cj["threshold"] = c.threshold;
        j["checks"].push_back(cj);
    }
    j["all_pass"] = all_pass();
    j["wall_seconds"] = wall_seconds;
    return j;
}

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string config_hash(const nlohmann::json& config) {
    // nlohmann::json::dump emits object keys sorted, so the digest is stable
    // across runs with equal configuration.
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(config.dump())));
    return buf;
}

}  // namespace qbspde

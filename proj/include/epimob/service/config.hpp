#pragma once

#include "epimob/policy/policy.hpp"
#include "epimob/risk/epidemic_params.hpp"
#include "epimob/risk/poi.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace epimob::service {

// One what-if request: which data set, which epidemic and risk parameters,
// which policies, how many repetitions.
struct SimulationConfig {
    std::string name;
    std::string dataset_id;
    EpidemicParams params;
    risk::RiskConfig risk;
    std::vector<policy::PolicySpec> policies;
    policy::DistrictTable districts; // merged over the data set's own districts
    int m = 100;

    // Shape checks; field paths are absolute ("/policies/1/days").
    void validate() const;

    // Canonical JSON without the display name.
    nlohmann::json canonical() const;
    // SHA-256 of canonical().dump(); equal for configs that must give equal results.
    std::string fingerprint() const;
};

void to_json(nlohmann::json& j, const SimulationConfig& c);
// Throws InvalidInput with an absolute field path; unknown top-level keys are rejected.
void from_json(const nlohmann::json& j, SimulationConfig& c);

// Parses text and maps JSON syntax errors to InvalidInput.
nlohmann::json parse_json_body(const std::string& text);

} // namespace epimob::service

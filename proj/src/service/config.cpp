#include "epimob/service/config.hpp"

#include "epimob/error.hpp"
#include "epimob/hash.hpp"

#include <set>

namespace epimob::service {

namespace {

const std::set<std::string> kKeys{"name", "dataset_id", "params", "risk", "policies", "districts", "m"};

// Re-raises an error from a nested document with an absolute path.
[[noreturn]] void rethrow_under(const std::string& prefix, const InvalidInput& e) {
    throw InvalidInput(e.what(), prefix + e.field());
}

nlohmann::json districts_json(const policy::DistrictTable& t) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [name, poly] : t) {
        nlohmann::json ring = nlohmann::json::array();
        for (const auto& v : poly.ring()) ring.push_back({v.lat, v.lon});
        j[name] = std::move(ring);
    }
    return j;
}

} // namespace

void SimulationConfig::validate() const {
    if (dataset_id.empty()) throw InvalidInput("dataset_id must not be empty", "/dataset_id");
    if (m < 2) throw InvalidInput("m must be at least 2", "/m");
    params.validate();
    try {
        risk.validate();
    } catch (const InvalidInput& e) {
        rethrow_under("/risk", e);
    }
    for (std::size_t i = 0; i < policies.size(); ++i) {
        try {
            policies[i].validate();
        } catch (const InvalidInput& e) {
            rethrow_under("/policies/" + std::to_string(i), e);
        }
    }
}

nlohmann::json SimulationConfig::canonical() const {
    // nlohmann::json keeps object keys sorted, so dump() is canonical.
    return {{"dataset_id", dataset_id}, {"params", params},  {"risk", risk},
            {"policies", policies},     {"districts", districts_json(districts)}, {"m", m}};
}

std::string SimulationConfig::fingerprint() const { return sha256_hex(canonical().dump()); }

void to_json(nlohmann::json& j, const SimulationConfig& c) {
    j = c.canonical();
    j["name"] = c.name;
}

void from_json(const nlohmann::json& j, SimulationConfig& c) {
    if (!j.is_object()) throw InvalidInput("simulation config must be a JSON object", "");
    for (const auto& [key, v] : j.items())
        if (!kKeys.count(key)) throw InvalidInput("unknown field '" + key + "'", "/" + key);
    c = SimulationConfig{};
    if (!j.contains("dataset_id") || !j["dataset_id"].is_string())
        throw InvalidInput("dataset_id must be a string", "/dataset_id");
    c.dataset_id = j["dataset_id"].get<std::string>();
    if (j.contains("name")) {
        if (!j["name"].is_string()) throw InvalidInput("name must be a string", "/name");
        c.name = j["name"].get<std::string>();
    }
    if (j.contains("m")) {
        if (!j["m"].is_number_integer()) throw InvalidInput("m must be an integer", "/m");
        c.m = j["m"].get<int>();
    }
    if (j.contains("params")) c.params = j["params"].get<EpidemicParams>();
    if (j.contains("risk")) {
        try {
            c.risk = j["risk"].get<risk::RiskConfig>();
        } catch (const InvalidInput& e) {
            rethrow_under("/risk", e);
        }
    }
    if (j.contains("policies")) {
        if (!j["policies"].is_array()) throw InvalidInput("policies must be a list", "/policies");
        for (std::size_t i = 0; i < j["policies"].size(); ++i) {
            try {
                c.policies.push_back(j["policies"][i].get<policy::PolicySpec>());
            } catch (const InvalidInput& e) {
                rethrow_under("/policies/" + std::to_string(i), e);
            } catch (const nlohmann::json::exception& e) {
                throw InvalidInput(e.what(), "/policies/" + std::to_string(i));
            }
        }
    }
    if (j.contains("districts")) {
        try {
            c.districts = policy::parse_district_table(j["districts"]);
        } catch (const InvalidInput& e) {
            rethrow_under("/districts", e);
        }
    }
    c.validate();
}

nlohmann::json parse_json_body(const std::string& text) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidInput(std::string("malformed JSON: ") + e.what(), "");
    }
}

} // namespace epimob::service

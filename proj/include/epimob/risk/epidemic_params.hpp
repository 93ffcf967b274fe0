#pragma once

#include <json.hpp>

#include <cstdint>

namespace epimob {

// Rates are per day; the engine scales them by step / 86400.
struct EpidemicParams {
    double beta_global = 0.302;
    double sigma = 0.2;
    double gamma = 0.1;
    int i0 = 10;
    int step = 300;
    std::uint64_t rng_seed = 42;

    // Throws InvalidInput naming the field.
    void validate() const;
    double step_days() const { return static_cast<double>(step) / 86400.0; }

    friend bool operator==(const EpidemicParams&, const EpidemicParams&) = default;
};

void to_json(nlohmann::json& j, const EpidemicParams& p);
void from_json(const nlohmann::json& j, EpidemicParams& p);

} // namespace epimob

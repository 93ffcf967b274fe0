#include "epimob/risk/epidemic_params.hpp"

#include "epimob/error.hpp"

namespace epimob {

void EpidemicParams::validate() const {
    if (!(beta_global >= 0.0)) throw InvalidInput("beta_global must be non-negative", "/params/beta_global");
    if (!(sigma >= 0.0)) throw InvalidInput("sigma must be non-negative", "/params/sigma");
    if (!(gamma >= 0.0)) throw InvalidInput("gamma must be non-negative", "/params/gamma");
    if (i0 < 1) throw InvalidInput("i0 must be at least 1", "/params/i0");
    if (step <= 0 || 86400 % step != 0) throw InvalidInput("step must divide one day", "/params/step");
}

void to_json(nlohmann::json& j, const EpidemicParams& p) {
    j = nlohmann::json{{"beta_global", p.beta_global}, {"sigma", p.sigma}, {"gamma", p.gamma},
                       {"i0", p.i0},                   {"step", p.step},   {"rng_seed", p.rng_seed}};
}

void from_json(const nlohmann::json& j, EpidemicParams& p) {
    if (!j.is_object()) throw InvalidInput("params must be an object", "/params");
    auto number = [&](const char* key, double& out) {
        if (!j.contains(key)) return;
        if (!j[key].is_number()) throw InvalidInput(std::string(key) + " must be a number", std::string("/params/") + key);
        out = j[key].get<double>();
    };
    auto integer = [&](const char* key, auto& out) {
        if (!j.contains(key)) return;
        if (!j[key].is_number_integer())
            throw InvalidInput(std::string(key) + " must be an integer", std::string("/params/") + key);
        out = j[key].get<std::remove_reference_t<decltype(out)>>();
    };
    number("beta_global", p.beta_global);
    number("sigma", p.sigma);
    number("gamma", p.gamma);
    integer("i0", p.i0);
    integer("step", p.step);
    integer("rng_seed", p.rng_seed);
    for (const auto& [key, v] : j.items()) {
        if (key != "beta_global" && key != "sigma" && key != "gamma" && key != "i0" && key != "step" && key != "rng_seed")
            throw InvalidInput("unknown field '" + key + "'", "/params/" + key);
    }
    p.validate();
}

} // namespace epimob

#include "bsid/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace bsid {

using nlohmann::json;

NoiseSpec NoiseConfig::spec(Index n) const {
    NoiseSpec s{sigma_w * MatrixXd::Identity(n, n), sigma_z, parse_noise_family(family), rate, centered};
    s.validate(n);
    return s;
}

InputDesign InputConfig::design(Index p) const {
    switch (parse_input_kind(kind)) {
        case InputKind::gaussian_isotropic: return InputDesign::gaussian(p);
        case InputKind::bounded_sphere: return beta ? InputDesign::sphere(p, *beta) : InputDesign::sphere(p);
        case InputKind::fixed_sequence: break;
    }
    throw ConfigError("input kind fixed_sequence is not available in experiment configs");
}

std::vector<Index> ExperimentConfig::default_T_grid() {
    std::vector<Index> grid;
    for (Index T = 100; T <= 1600; T += 50) grid.push_back(T);
    return grid;
}

ExperimentConfig ExperimentConfig::validation_default() {
    ExperimentConfig c;
    c.n = 2;
    c.p = 1;
    c.rho_values = {0.5};
    c.L_values = {2};
    c.T_values = {200};
    c.trials = 200;
    c.noise = NoiseConfig{"gaussian", 1.0, true, 0.1, 0.5};
    c.output_path = "validation.json";
    return c;
}

void ExperimentConfig::validate() const {
    const auto fail = [](const std::string& what) { throw ConfigError("config: " + what); };
    if (n < 1 || p < 1) fail("n and p must be >= 1");
    if (trials < 1) fail("trials must be >= 1");
    if (rho_values.empty() || L_values.empty() || T_values.empty())
        fail("rho_values, L_values and T_values must be non-empty");
    for (double r : rho_values)
        if (!(r > 0.0 && r < 1.0)) fail("rho_values must lie in (0, 1)");
    for (Index L : L_values)
        if (L < 1) fail("L_values must be >= 1");
    const Index L_max = *std::max_element(L_values.begin(), L_values.end());
    for (Index T : T_values)
        if (T <= L_max) fail("every T must exceed max(L_values)");
    if (!(delta > 0.0 && delta < 1.0)) fail("delta must lie in (0, 1)");
    if (model != "random_diagonal" && model != "nilpotent") fail("model must be random_diagonal or nilpotent");
    if (bound_rho && !(*bound_rho > 0.0 && *bound_rho < 1.0)) fail("bound_rho must lie in (0, 1)");
    if (!(m4 > 0.0)) fail("m4 must be positive");
    if (mc_draws < 2 || m4_directions < 1 || m4_samples < 2 || prediction_trials < 0 || prediction_draws < 2)
        fail("Monte Carlo sizes must be positive");
    try {
        (void)noise.spec(n);
        (void)input.design(p);
    } catch (const ParameterError& e) {
        fail(e.what());
    }
}

json to_json(const ExperimentConfig& c) {
    json j{{"n", c.n},
           {"p", c.p},
           {"rho_values", c.rho_values},
           {"L_values", c.L_values},
           {"T_values", c.T_values},
           {"trials", c.trials},
           {"noise",
            {{"family", c.noise.family},
             {"rate", c.noise.rate},
             {"centered", c.noise.centered},
             {"sigma_w", c.noise.sigma_w},
             {"sigma_z", c.noise.sigma_z}}},
           {"input", {{"kind", c.input.kind}}},
           {"delta", c.delta},
           {"base_seed", c.base_seed},
           {"output_path", c.output_path},
           {"model", c.model},
           {"m4", c.m4},
           {"mc_draws", c.mc_draws},
           {"m4_directions", c.m4_directions},
           {"m4_samples", c.m4_samples},
           {"prediction_trials", c.prediction_trials},
           {"prediction_draws", c.prediction_draws}};
    if (c.input.beta) j["input"]["beta"] = *c.input.beta;
    if (c.bound_rho) j["bound_rho"] = *c.bound_rho;
    return j;
}

ExperimentConfig config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
    static const char* known[] = {"n", "p", "rho_values", "L_values", "T_values", "trials", "noise", "input",
                                  "delta", "base_seed", "output_path", "model", "bound_rho", "m4",
                                  "mc_draws", "m4_directions", "m4_samples", "prediction_trials",
                                  "prediction_draws"};
    for (const auto& item : j.items())
        if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return item.key() == k; }) ==
            std::end(known))
            throw ConfigError("config: unknown field '" + item.key() + "'");

    ExperimentConfig c;
    try {
        const auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) j.at(key).get_to(field);
        };
        get("n", c.n);
        get("p", c.p);
        get("rho_values", c.rho_values);
        get("L_values", c.L_values);
        get("T_values", c.T_values);
        get("trials", c.trials);
        get("delta", c.delta);
        get("base_seed", c.base_seed);
        get("output_path", c.output_path);
        get("model", c.model);
        get("m4", c.m4);
        get("mc_draws", c.mc_draws);
        get("m4_directions", c.m4_directions);
        get("m4_samples", c.m4_samples);
        get("prediction_trials", c.prediction_trials);
        get("prediction_draws", c.prediction_draws);
        if (j.contains("bound_rho") && !j.at("bound_rho").is_null()) c.bound_rho = j.at("bound_rho").get<double>();
        if (j.contains("noise")) {
            const json& nj = j.at("noise");
            if (nj.contains("family")) nj.at("family").get_to(c.noise.family);
            if (nj.contains("rate")) nj.at("rate").get_to(c.noise.rate);
            if (nj.contains("centered")) nj.at("centered").get_to(c.noise.centered);
            if (nj.contains("sigma_w")) nj.at("sigma_w").get_to(c.noise.sigma_w);
            if (nj.contains("sigma_z")) nj.at("sigma_z").get_to(c.noise.sigma_z);
        }
        if (j.contains("input")) {
            const json& ij = j.at("input");
            if (ij.contains("kind")) ij.at("kind").get_to(c.input.kind);
            if (ij.contains("beta") && !ij.at("beta").is_null()) c.input.beta = ij.at("beta").get<double>();
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return config_from_json(j);
}

}  // namespace bsid

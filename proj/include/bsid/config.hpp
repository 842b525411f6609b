#pragma once

#include "bsid/simulate.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bsid {

// Malformed or inconsistent experiment configuration.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NoiseConfig {
    std::string family = "exponential";
    double rate = 1.0;
    bool centered = true;
    double sigma_w = 1.0;  // process noise covariance is sigma_w * I
    double sigma_z = 1.0;

    NoiseSpec spec(Index n) const;
    bool operator==(const NoiseConfig&) const = default;
};

struct InputConfig {
    std::string kind = "gaussian_isotropic";
    std::optional<double> beta;

    InputDesign design(Index p) const;
    bool operator==(const InputConfig&) const = default;
};

struct ExperimentConfig {
    Index n = 5;
    Index p = 3;
    std::vector<double> rho_values{0.5, 0.99};
    std::vector<Index> L_values{12, 50};
    std::vector<Index> T_values = default_T_grid();
    Index trials = 20;
    NoiseConfig noise;
    InputConfig input;
    double delta = 0.1;
    std::uint64_t base_seed = 1;
    std::string output_path = "results.csv";

    // "random_diagonal" or "nilpotent" (strictly lower-triangular A).
    std::string model = "random_diagonal";
    // Decay rate used by the bounds; defaults to (1 + spectral_radius(A)) / 2.
    std::optional<double> bound_rho;
    // Fourth-moment constant for the persistence-of-excitation requirement.
    double m4 = 9.0;
    // Monte Carlo sizes for the validation suite.
    Index mc_draws = 200'000;
    Index m4_directions = 100;
    Index m4_samples = 100'000;
    Index prediction_trials = 20;
    Index prediction_draws = 10'000;

    static std::vector<Index> default_T_grid();  // 100:50:1600
    static ExperimentConfig validation_default();

    // Throws ConfigError on violated invariants.
    void validate() const;
    bool operator==(const ExperimentConfig&) const = default;
};

nlohmann::json to_json(const ExperimentConfig& c);
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace bsid

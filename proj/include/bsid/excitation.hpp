#pragma once

#include "bsid/markov_estimator.hpp"

#include <cstdint>
#include <string_view>

namespace bsid {

enum class PERegime { bounded_a, fourth_moment_b };
std::string_view to_string(PERegime r);
PERegime parse_pe_regime(std::string_view s);

struct PECertificate {
    double lambda_min = 0.0;
    double threshold = 0.0;       // (T - L) / 4
    bool passed = false;          // lambda_min >= threshold
    PERegime regime = PERegime::fourth_moment_b;
    Index required_samples = 0;   // smallest admissible T - L
    Index required_T = 0;         // L + required_samples
    bool meets_requirement = false;
    double gamma1 = 0.0;
    double gamma2 = 0.0;
    double delta = 0.0;
};

// Smallest eigenvalue of a PSD Gram matrix; round-off negatives are clamped to 0.
double min_eig_gram(const MatrixXd& gram);
double min_eig_design(const DesignSystem& design);

// Smallest integer T - L meeting the sample-size condition with explicit constants:
//   bounded_a:       8 (L+1) beta^4 L (log(2(L+1)/delta) + p^2 L log 9)
//   fourth_moment_b: 32 (L+1) m4 (log(2(L+1)/delta) + p^2 L log(1 + 16 p^2 L / delta))
// `scale` is beta for bounded_a and m4 for fourth_moment_b.
Index pe_required_samples(Index p, Index L, double delta, PERegime regime, double scale);

// Two-sided version for bounded inputs at a general eps in (0,1): the event
// lambda_min >= (1-eps)^2 (T-L) holds w.p. 1 - delta once T - L reaches this value.
Index pe_required_samples_two_sided(Index p, Index L, double delta, double beta, double eps);

PECertificate pe_certificate(const DesignSystem& design, double delta, PERegime regime, double scale);

struct M4Estimate {
    double max_estimate = 0.0;
    Index argmax = 0;
    VectorXd estimates;   // per direction
    VectorXd std_errors;  // per direction
    MatrixXd directions;  // p^2 L x n_directions, unit columns
};

// Monte Carlo E[(v' (ubar (x) u))^4] over unit directions v, with ubar and u
// built from L+1 independent draws of the input design.
M4Estimate estimate_m4(const InputDesign& inputs, Index L, Index n_directions, Index n_samples,
                       std::uint64_t seed);
M4Estimate estimate_m4(const InputDesign& inputs, Index L, const MatrixXd& directions, Index n_samples,
                       std::uint64_t seed);

}  // namespace bsid

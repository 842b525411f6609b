#pragma once

#include "bsid/sysmodel.hpp"

#include <cstdint>
#include <optional>
#include <string_view>

namespace bsid {

enum class NoiseFamily { gaussian, exponential };

struct NoiseSpec {
    MatrixXd sigma_w;       // process-noise covariance, n x n PSD
    double sigma_z = 0.0;   // measurement-noise standard deviation
    NoiseFamily family = NoiseFamily::gaussian;
    double rate = 1.0;      // exponential rate lambda
    bool centered = true;   // subtract the exponential mean 1/lambda

    // Throws ParameterError unless sigma_w is n x n, symmetric and PSD (tolerance 1e-10).
    void validate(Index n) const;

    static NoiseSpec none(Index n) { return {MatrixXd::Zero(n, n), 0.0}; }
    static NoiseSpec isotropic(Index n, double var_w, double sigma_z,
                               NoiseFamily family = NoiseFamily::gaussian) {
        return {var_w * MatrixXd::Identity(n, n), sigma_z, family};
    }
};

// One draw of Exp(rate), shifted by -1/rate when centered.
double sample_exponential(Rng& rng, double rate, bool centered);

// Draws w_t and z_t for a given spec. Both families are standardized to unit
// variance and then scaled: w = sigma_w^{1/2} s, z = sigma_z s.
class NoiseSampler {
public:
    NoiseSampler(const NoiseSpec& spec, Index n);
    VectorXd process(Rng& rng) const;
    double measurement(Rng& rng) const;
    const MatrixXd& sqrt_sigma_w() const { return sqrt_sigma_w_; }

private:
    double standard(Rng& rng) const;

    NoiseSpec spec_;
    MatrixXd sqrt_sigma_w_;
};

enum class InputKind { gaussian_isotropic, bounded_sphere, fixed_sequence };

struct InputDesign {
    InputKind kind = InputKind::gaussian_isotropic;
    Index p = 1;
    std::optional<double> beta;  // norm bound; sphere radius for bounded_sphere
    MatrixXd sequence;           // p x count, only for fixed_sequence

    static InputDesign gaussian(Index p) { return {InputKind::gaussian_isotropic, p, {}, {}}; }
    static InputDesign sphere(Index p) { return sphere(p, std::sqrt(double(p))); }
    static InputDesign sphere(Index p, double radius) {
        return {InputKind::bounded_sphere, p, radius, {}};
    }
    static InputDesign fixed(MatrixXd seq) {
        const Index p = seq.rows();
        return {InputKind::fixed_sequence, p, {}, std::move(seq)};
    }

    void validate() const;
    // p x count matrix of inputs; fixed sequences return their leading columns.
    MatrixXd draw(Index count, Rng& rng) const;
};

struct Diagnostics {
    MatrixXd x;  // n x (T+1), x_0 = 0
    MatrixXd w;  // n x (T+1)
    VectorXd z;  // T+1
};

struct Trajectory {
    MatrixXd u;  // p x (T+1)
    VectorXd y;  // T+1
    std::optional<Diagnostics> diag;

    Index T() const { return y.size() - 1; }
    Index p() const { return u.rows(); }
};

// A = diag(U[0, rho]), B ~ N(0, 1/n), C ~ N(0, 1/p), entrywise i.i.d.
Model random_model(Index n, Index p, double rho, std::uint64_t seed);

// Strictly lower-triangular A with N(0, 1/n) entries (A^n = 0); B and C as above.
Model random_nilpotent_model(Index n, Index p, std::uint64_t seed);

// Inputs and noise come from independent streams derived from the seed, so
// re-running with a fixed input sequence and a new seed resamples only noise.
Trajectory simulate(const Model& model, const NoiseSpec& noise, const InputDesign& inputs,
                    Index T, std::uint64_t seed, bool diagnostics = false);
Trajectory simulate(const Model& model, const NoiseSpec& noise, const MatrixXd& inputs,
                    std::uint64_t seed, bool diagnostics = false);

std::string_view to_string(NoiseFamily f);
std::string_view to_string(InputKind k);
NoiseFamily parse_noise_family(std::string_view s);
InputKind parse_input_kind(std::string_view s);

}  // namespace bsid

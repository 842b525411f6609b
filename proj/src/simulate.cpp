#include "bsid/simulate.hpp"

#include <cmath>

namespace bsid {

namespace {

constexpr std::uint64_t kInputStream = 1;
constexpr std::uint64_t kNoiseStream = 2;

MatrixXd psd_sqrt(const MatrixXd& s) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(s);
    const VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

void NoiseSpec::validate(Index n) const {
    require(sigma_w.rows() == n && sigma_w.cols() == n, "noise: sigma_w must be n x n");
    const double scale = std::max(1.0, sigma_w.cwiseAbs().maxCoeff());
    require((sigma_w - sigma_w.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale,
            "noise: sigma_w must be symmetric");
    if (n > 0) {
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(sigma_w, Eigen::EigenvaluesOnly);
        require(es.eigenvalues().minCoeff() >= -1e-10 * scale, "noise: sigma_w must be PSD");
    }
    require(std::isfinite(sigma_z) && sigma_z >= 0.0, "noise: sigma_z must be nonnegative");
    require(family != NoiseFamily::exponential || (std::isfinite(rate) && rate > 0.0),
            "noise: exponential rate must be positive");
}

double sample_exponential(Rng& rng, double rate, bool centered) {
    std::exponential_distribution<double> exp(rate);
    const double x = exp(rng);
    return centered ? x - 1.0 / rate : x;
}

NoiseSampler::NoiseSampler(const NoiseSpec& spec, Index n) : spec_(spec) {
    spec_.validate(n);
    sqrt_sigma_w_ = psd_sqrt(0.5 * (spec_.sigma_w + spec_.sigma_w.transpose()));
}

double NoiseSampler::standard(Rng& rng) const {
    if (spec_.family == NoiseFamily::gaussian) {
        std::normal_distribution<double> normal;
        return normal(rng);
    }
    return spec_.rate * sample_exponential(rng, spec_.rate, spec_.centered);
}

VectorXd NoiseSampler::process(Rng& rng) const {
    VectorXd s(sqrt_sigma_w_.rows());
    for (Index i = 0; i < s.size(); ++i) s(i) = standard(rng);
    return sqrt_sigma_w_ * s;
}

double NoiseSampler::measurement(Rng& rng) const { return spec_.sigma_z * standard(rng); }

void InputDesign::validate() const {
    require(p >= 1, "inputs: p must be >= 1");
    if (kind == InputKind::bounded_sphere)
        require(beta && *beta > 0.0, "inputs: bounded_sphere needs a positive radius");
    if (kind == InputKind::fixed_sequence)
        require(sequence.rows() == p, "inputs: fixed sequence must have p rows");
}

MatrixXd InputDesign::draw(Index count, Rng& rng) const {
    validate();
    require(count >= 0, "inputs: negative count");
    if (kind == InputKind::fixed_sequence) {
        require(sequence.cols() >= count, "inputs: fixed sequence too short");
        return sequence.leftCols(count);
    }
    std::normal_distribution<double> normal;
    MatrixXd u(p, count);
    for (Index t = 0; t < count; ++t) {
        for (Index i = 0; i < p; ++i) u(i, t) = normal(rng);
        if (kind == InputKind::bounded_sphere) {
            const double norm = u.col(t).norm();
            if (norm > 0.0) u.col(t) *= *beta / norm;
        }
    }
    return u;
}

Model random_model(Index n, Index p, double rho, std::uint64_t seed) {
    require(n >= 1 && p >= 1, "random_model: n and p must be >= 1");
    require(rho > 0.0 && rho < 1.0, "random_model: rho must lie in (0, 1)");
    Rng rng(seed);
    std::uniform_real_distribution<double> unif(0.0, rho);
    std::normal_distribution<double> normal;
    Model m{MatrixXd::Zero(n, n), MatrixXd(n, p), MatrixXd(p, n)};
    for (Index i = 0; i < n; ++i) m.A(i, i) = unif(rng);
    const double sb = 1.0 / std::sqrt(double(n));
    const double sc = 1.0 / std::sqrt(double(p));
    for (Index j = 0; j < p; ++j)
        for (Index i = 0; i < n; ++i) m.B(i, j) = sb * normal(rng);
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < p; ++i) m.C(i, j) = sc * normal(rng);
    return m;
}

Model random_nilpotent_model(Index n, Index p, std::uint64_t seed) {
    require(n >= 1 && p >= 1, "random_nilpotent_model: n and p must be >= 1");
    Rng rng(seed);
    std::normal_distribution<double> normal;
    const double sa = 1.0 / std::sqrt(double(n));
    Model m{MatrixXd::Zero(n, n), MatrixXd(n, p), MatrixXd(p, n)};
    for (Index j = 0; j < n; ++j)
        for (Index i = j + 1; i < n; ++i) m.A(i, j) = sa * normal(rng);
    for (Index j = 0; j < p; ++j)
        for (Index i = 0; i < n; ++i) m.B(i, j) = sa * normal(rng);
    const double sc = 1.0 / std::sqrt(double(p));
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < p; ++i) m.C(i, j) = sc * normal(rng);
    return m;
}

Trajectory simulate(const Model& model, const NoiseSpec& noise, const MatrixXd& inputs,
                    std::uint64_t seed, bool diagnostics) {
    model.validate();
    require(inputs.rows() == model.p(), "simulate: inputs must have p rows");
    require(inputs.cols() >= 2, "simulate: need T >= 1");
    const NoiseSampler sampler(noise, model.n());
    const Index n = model.n(), steps = inputs.cols();

    Rng rng(derive_seed(seed, kNoiseStream));
    Trajectory traj{inputs, VectorXd(steps), std::nullopt};
    Diagnostics d;
    if (diagnostics) d = {MatrixXd(n, steps), MatrixXd(n, steps), VectorXd(steps)};

    VectorXd x = VectorXd::Zero(n);
    for (Index t = 0; t < steps; ++t) {
        const VectorXd w = sampler.process(rng);
        const double z = sampler.measurement(rng);
        traj.y(t) = inputs.col(t).dot(model.C * x) + z;
        if (diagnostics) {
            d.x.col(t) = x;
            d.w.col(t) = w;
            d.z(t) = z;
        }
        x = model.A * x + model.B * inputs.col(t) + w;
    }
    if (diagnostics) traj.diag = std::move(d);
    return traj;
}

Trajectory simulate(const Model& model, const NoiseSpec& noise, const InputDesign& inputs,
                    Index T, std::uint64_t seed, bool diagnostics) {
    require(T >= 1, "simulate: need T >= 1");
    require(inputs.p == model.p(), "simulate: input dimension does not match model");
    Rng rng(derive_seed(seed, kInputStream));
    return simulate(model, noise, inputs.draw(T + 1, rng), seed, diagnostics);
}

std::string_view to_string(NoiseFamily f) {
    return f == NoiseFamily::gaussian ? "gaussian" : "exponential";
}

std::string_view to_string(InputKind k) {
    switch (k) {
        case InputKind::gaussian_isotropic: return "gaussian_isotropic";
        case InputKind::bounded_sphere: return "bounded_sphere";
        case InputKind::fixed_sequence: return "fixed_sequence";
    }
    return "unknown";
}

NoiseFamily parse_noise_family(std::string_view s) {
    if (s == "gaussian") return NoiseFamily::gaussian;
    if (s == "exponential") return NoiseFamily::exponential;
    throw ParameterError("unknown noise family: " + std::string(s));
}

InputKind parse_input_kind(std::string_view s) {
    if (s == "gaussian_isotropic") return InputKind::gaussian_isotropic;
    if (s == "bounded_sphere") return InputKind::bounded_sphere;
    if (s == "fixed_sequence") return InputKind::fixed_sequence;
    throw ParameterError("unknown input kind: " + std::string(s));
}

}  // namespace bsid

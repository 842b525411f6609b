#include "bsid/excitation.hpp"

#include <cmath>
#include <limits>

namespace bsid {

namespace {

Index ceil_to_index(double x) {
    if (!(x < 9.0e18)) return std::numeric_limits<Index>::max();
    return Index(std::ceil(x));
}

void check_delta(double delta) { require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)"); }

}  // namespace

std::string_view to_string(PERegime r) {
    return r == PERegime::bounded_a ? "bounded_a" : "fourth_moment_b";
}

PERegime parse_pe_regime(std::string_view s) {
    if (s == "bounded_a" || s == "a") return PERegime::bounded_a;
    if (s == "fourth_moment_b" || s == "b") return PERegime::fourth_moment_b;
    throw ParameterError("unknown PE regime: " + std::string(s));
}

double min_eig_gram(const MatrixXd& gram) {
    if (gram.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram, Eigen::EigenvaluesOnly);
    return std::max(es.eigenvalues()(0), 0.0);
}

double min_eig_design(const DesignSystem& design) {
    if (design.U_tilde.rows() < design.U_tilde.cols()) return 0.0;
    return min_eig_gram(design.U_tilde.transpose() * design.U_tilde);
}

Index pe_required_samples_two_sided(Index p, Index L, double delta, double beta, double eps) {
    require(p >= 1 && L >= 1, "pe_required_samples: p and L must be >= 1");
    check_delta(delta);
    require(beta > 0.0, "pe_required_samples: beta must be positive");
    require(eps > 0.0 && eps < 1.0, "pe_required_samples: eps must lie in (0, 1)");
    const double l = double(L), d = double(p * p) * l;
    const double b4 = std::pow(beta, 4);
    return ceil_to_index(2.0 * (l + 1.0) * l * b4 / (eps * eps) *
                         (std::log(2.0 * (l + 1.0) / delta) + d * std::log(9.0)));
}

Index pe_required_samples(Index p, Index L, double delta, PERegime regime, double scale) {
    require(p >= 1 && L >= 1, "pe_required_samples: p and L must be >= 1");
    check_delta(delta);
    require(scale > 0.0, "pe_required_samples: beta / m4 must be positive");
    if (regime == PERegime::bounded_a) return pe_required_samples_two_sided(p, L, delta, scale, 0.5);
    const double l = double(L), d = double(p * p) * l;
    return ceil_to_index(32.0 * (l + 1.0) * scale *
                         (std::log(2.0 * (l + 1.0) / delta) + d * std::log(1.0 + 16.0 * d / delta)));
}

PECertificate pe_certificate(const DesignSystem& design, double delta, PERegime regime, double scale) {
    PECertificate c;
    c.regime = regime;
    c.delta = delta;
    const Index p = design.p, L = design.L;
    const double d = double(p * p * L);
    if (regime == PERegime::bounded_a) {
        c.gamma1 = std::pow(scale, 4) * double(L);
        c.gamma2 = 1.0;
    } else {
        c.gamma1 = scale;
        c.gamma2 = std::log(1.0 + 16.0 * d / delta);
    }
    c.lambda_min = min_eig_design(design);
    c.threshold = double(design.T - L) / 4.0;
    c.passed = c.lambda_min >= c.threshold;
    c.required_samples = pe_required_samples(p, L, delta, regime, scale);
    c.required_T = c.required_samples == std::numeric_limits<Index>::max() ? c.required_samples
                                                                          : L + c.required_samples;
    c.meets_requirement = design.T - L >= c.required_samples;
    return c;
}

M4Estimate estimate_m4(const InputDesign& inputs, Index L, Index n_directions, Index n_samples,
                       std::uint64_t seed) {
    require(n_directions >= 1, "estimate_m4: need at least one direction");
    const Index dim = inputs.p * inputs.p * L;
    Rng rng(derive_seed(seed, 0xd1));
    std::normal_distribution<double> normal;
    MatrixXd dirs(dim, n_directions);
    for (Index j = 0; j < n_directions; ++j) {
        for (Index i = 0; i < dim; ++i) dirs(i, j) = normal(rng);
        dirs.col(j).normalize();
    }
    return estimate_m4(inputs, L, dirs, n_samples, seed);
}

M4Estimate estimate_m4(const InputDesign& inputs, Index L, const MatrixXd& directions, Index n_samples,
                       std::uint64_t seed) {
    inputs.validate();
    require(L >= 1, "estimate_m4: L must be >= 1");
    require(n_samples >= 1 && directions.cols() >= 1, "estimate_m4: need samples and directions");
    const Index p = inputs.p, dim = p * p * L, k = directions.cols();
    require(directions.rows() == dim, "estimate_m4: directions must have p^2 L rows");

    MatrixXd dirs = directions;
    for (Index j = 0; j < k; ++j) {
        const double nrm = dirs.col(j).norm();
        require(nrm > 0.0, "estimate_m4: zero direction");
        dirs.col(j) /= nrm;
    }

    Rng rng(derive_seed(seed, 0x5a));
    const bool fixed = inputs.kind == InputKind::fixed_sequence;
    if (fixed) require(inputs.sequence.cols() >= 1, "estimate_m4: empty fixed sequence");
    Index cursor = 0;
    const auto window = [&]() -> MatrixXd {
        if (!fixed) return inputs.draw(L + 1, rng);
        MatrixXd w(p, L + 1);
        for (Index j = 0; j <= L; ++j) w.col(j) = inputs.sequence.col((cursor++) % inputs.sequence.cols());
        return w;
    };

    // Covariates are generated in blocks and projected onto all directions.
    constexpr Index block = 4096;
    VectorXd sum4 = VectorXd::Zero(k), sum8 = VectorXd::Zero(k);
    MatrixXd X(block, dim);
    for (Index start = 0; start < n_samples; start += block) {
        const Index rows = std::min(block, n_samples - start);
        for (Index r = 0; r < rows; ++r) {
            const MatrixXd w = window();
            // Column 0 is the current input, columns 1..L the past window, most recent first.
            const VectorXd ubar = Eigen::Map<const VectorXd>(w.data() + p, p * L);
            X.row(r) = kron(ubar, w.col(0)).transpose();
        }
        const MatrixXd s = X.topRows(rows) * dirs;
        const MatrixXd s4 = s.array().square().square().matrix();
        sum4 += s4.colwise().sum().transpose();
        sum8 += s4.array().square().matrix().colwise().sum().transpose();
    }

    M4Estimate est;
    est.directions = std::move(dirs);
    const double N = double(n_samples);
    est.estimates = sum4 / N;
    const VectorXd var = (sum8 / N - est.estimates.cwiseAbs2()).cwiseMax(0.0) * (N / std::max(N - 1.0, 1.0));
    est.std_errors = (var / N).cwiseSqrt();
    est.max_estimate = est.estimates.maxCoeff(&est.argmax);
    return est;
}

}  // namespace bsid

#include "oracles.hpp"

#include "bsid/markov_estimator.hpp"

#include <doctest.h>

#include <cmath>

using namespace bsid;

namespace {

Model scalar_model(double a, double b, double c) {
    return {MatrixXd::Constant(1, 1, a), MatrixXd::Constant(1, 1, b), MatrixXd::Constant(1, 1, c)};
}

// Effective noise zeta_t = y_t - u_t' G ubar_{t-1} for t = L+1..T.
VectorXd effective_noise(const Trajectory& tr, const MatrixXd& G, Index L) {
    VectorXd z(tr.T() - L);
    for (Index t = L + 1; t <= tr.T(); ++t) {
        double det = 0;
        for (Index k = 0; k < L; ++k)
            det += tr.u.col(t).dot(G.middleCols(k * tr.p(), tr.p()) * tr.u.col(t - 1 - k));
        z(t - L - 1) = tr.y(t) - det;
    }
    return z;
}

}  // namespace

TEST_CASE("design row for p = 1, L = 2") {
    const MatrixXd u = (MatrixXd(1, 4) << 1, 2, 3, 4).finished();
    const VectorXd y = (VectorXd(4) << 0.1, 0.2, 0.3, 0.4).finished();
    const DesignSystem d = build_design(u, y, 2);
    REQUIRE(d.U_tilde.rows() == 1);
    CHECK(d.U_tilde(0, 0) == 12.0);
    CHECK(d.U_tilde(0, 1) == 8.0);
    CHECK(d.y(0) == 0.4);
}

TEST_CASE("design rows: shape, zero inputs and Kronecker norm identity") {
    Rng rng(1);
    const MatrixXd u = InputDesign::gaussian(2).draw(31, rng);
    const DesignSystem d = build_design(u, VectorXd::Zero(31), 3);
    CHECK(d.U_tilde.rows() == 30 - 3);
    CHECK(d.U_tilde.cols() == 4 * 3);
    for (Index t = 4; t <= 30; ++t) {
        double ubar_sq = 0;
        for (Index k = 0; k < 3; ++k) ubar_sq += u.col(t - 1 - k).squaredNorm();
        CHECK(d.U_tilde.row(t - 4).squaredNorm() == doctest::Approx(ubar_sq * u.col(t).squaredNorm()));
    }
    CHECK(build_design(MatrixXd::Zero(2, 10), VectorXd::Zero(10), 2).U_tilde.norm() == 0.0);
    CHECK_THROWS_AS(build_design(u.leftCols(4), VectorXd::Zero(4), 3), ParameterError);
}

TEST_CASE("vec convention: u' G ubar equals the design row times vec(G)") {
    Rng rng(2);
    const MatrixXd G = MatrixXd::Random(3, 3 * 4);
    const MatrixXd u = InputDesign::gaussian(3).draw(9, rng);
    const DesignSystem d = build_design(u, VectorXd::Zero(9), 4);
    for (Index t = 5; t <= 8; ++t) {
        double direct = 0;
        for (Index k = 0; k < 4; ++k) direct += u.col(t).dot(G.middleCols(3 * k, 3) * u.col(t - 1 - k));
        CHECK(d.U_tilde.row(t - 5).dot(vec(G)) == doctest::Approx(direct));
    }
}

TEST_CASE("zero target gives zero estimate") {
    Rng rng(3);
    const MatrixXd u = InputDesign::gaussian(2).draw(60, rng);
    const EstimateReport rep = estimate_markov(build_design(u, VectorXd::Zero(60), 2));
    CHECK(rep.G_hat.norm() == 0.0);
}

TEST_CASE("full-rank estimate satisfies the normal equations") {
    const Model m = random_model(3, 2, 0.7, 4);
    const Trajectory tr = simulate(m, NoiseSpec::isotropic(3, 0.5, 0.5), InputDesign::gaussian(2), 300, 4);
    const DesignSystem d = build_design(tr, 4);
    const EstimateReport rep = estimate_markov(d);
    REQUIRE(rep.solver_mode == SolverMode::full_rank);
    const VectorXd rhs = d.U_tilde.transpose() * d.y;
    CHECK((rep.gram * vec(rep.G_hat) - rhs).norm() <= 1e-8 * rhs.norm());
    CHECK(rep.residual_norm == doctest::Approx((d.y - d.U_tilde * vec(rep.G_hat)).norm()));
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(rep.gram);
    CHECK(rep.lambda_min == doctest::Approx(es.eigenvalues()(0)));
}

TEST_CASE("underdetermined systems use the minimum-norm interpolant") {
    Rng rng(5);
    const MatrixXd u = InputDesign::gaussian(2).draw(14, rng);
    VectorXd y(14);
    for (Index i = 0; i < 14; ++i) y(i) = std::normal_distribution<double>()(rng);
    const DesignSystem d = build_design(u, y, 3);  // 10 rows, 12 columns
    REQUIRE(d.U_tilde.rows() < d.U_tilde.cols());
    const EstimateReport rep = estimate_markov(d);
    CHECK(rep.solver_mode == SolverMode::min_norm);
    CHECK(rep.residual_norm <= 1e-8);
    // Oracle: SVD least-squares solve returns the minimum-norm solution.
    const VectorXd ref = d.U_tilde.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(d.y);
    CHECK((vec(rep.G_hat) - ref).norm() <= 1e-9 * (1 + ref.norm()));
}

TEST_CASE("exact recovery on a nilpotent noiseless system") {
    const Model m = random_nilpotent_model(3, 2, 6);
    const Trajectory tr = simulate(m, NoiseSpec::none(3), InputDesign::gaussian(2), 3 + 2 * 4 * 3, 6);
    const EstimateReport rep = estimate_markov(build_design(tr, 3));
    CHECK(rep.solver_mode == SolverMode::full_rank);
    CHECK((rep.G_hat - oracle::markov(m.A, m.B, m.C, 3)).norm() <= 1e-8);
}

TEST_CASE("regression identity with the effective noise") {
    const Model m = random_model(3, 2, 0.8, 7);
    const Trajectory tr = simulate(m, NoiseSpec::isotropic(3, 0.3, 0.2), InputDesign::gaussian(2), 400, 7);
    const Index L = 5;
    const DesignSystem d = build_design(tr, L);
    const EstimateReport rep = estimate_markov(d);
    const MatrixXd G = oracle::markov(m.A, m.B, m.C, L);
    const VectorXd zeta = effective_noise(tr, G, L);
    const VectorXd expected = rep.gram.ldlt().solve(d.U_tilde.transpose() * zeta);
    CHECK((vec(rep.G_hat) - vec(G) - expected).norm() <= 1e-8 * (1 + expected.norm()));
}

TEST_CASE("ellipsoidal error") {
    const Model m = random_model(2, 2, 0.5, 8);
    const Trajectory tr = simulate(m, NoiseSpec::isotropic(2, 1, 1), InputDesign::gaussian(2), 80, 8);
    const DesignSystem d = build_design(tr, 3);
    const MatrixXd G = oracle::markov(m.A, m.B, m.C, 3);
    CHECK(ellipsoidal_error(G, G, d) == 0.0);
    const MatrixXd G_hat = G + MatrixXd::Random(2, 6) * 0.1;
    const VectorXd delta = vec(MatrixXd(G_hat - G));
    const MatrixXd V = d.U_tilde.transpose() * d.U_tilde;
    CHECK(ellipsoidal_error(G_hat, G, d) == doctest::Approx(std::sqrt(delta.dot(V * delta))).epsilon(1e-9));

    DesignSystem iso{MatrixXd::Identity(4, 4), VectorXd::Zero(4), 1, 5, 2};
    const MatrixXd a = MatrixXd::Random(2, 2), b = MatrixXd::Random(2, 2);
    CHECK(ellipsoidal_error(a, b, iso) == doctest::Approx((a - b).norm()));
}

TEST_CASE("bound terms and data-dependent bound on a scalar system") {
    // a = 0.5, b = c = 1, Sigma_w = 1, sigma_z = 1, beta = 1, L = 4, T = 100, delta = 0.1, rho = 0.75
    const Model m = scalar_model(0.5, 1.0, 1.0);
    const NoiseSpec noise = NoiseSpec::isotropic(1, 1.0, 1.0);
    const BoundTerms t = bound_terms(m, noise, 4, 1.0, 0.1, 0.75);

    const double a = 0.5, rho = 0.75, phi = 1.0, L = 4, beta = 1, delta = 0.1;
    const double F2 = 1 + a * a + std::pow(a, 4) + std::pow(a, 6);
    const double cal2 = std::pow(a, 8);
    const double gram = 1.0 / (1 - a * a);
    const double decay = 1 + phi * std::pow(rho, L) / (1 - rho);
    const double Xi = 1.0 + 3 * F2 * beta * beta * L * decay + 2 * gram * cal2 * beta * beta * phi / (1 - rho);
    CHECK(t.phi == doctest::Approx(phi).epsilon(1e-14));
    CHECK(t.K == doctest::Approx(1.0));
    CHECK(t.sigma_w_sq == doctest::Approx(F2 * decay).epsilon(1e-12));
    CHECK(t.sigma_e_sq == doctest::Approx(gram * cal2 * phi / (1 - rho)).epsilon(1e-12));
    CHECK(t.Xi == doctest::Approx(Xi).epsilon(1e-12));

    const double expected =
        std::sqrt(L * Xi / delta) + beta * beta * phi * std::pow(rho, L) / (1 - rho) * std::sqrt(100.0 - L);
    const DataDependentBound b = bound_data_dependent(t, 1, 100, 4.0);
    CHECK(std::abs(b.ellipsoidal - expected) <= 1e-12 * expected);
    CHECK(b.frobenius == doctest::Approx(expected / 2.0).epsilon(1e-12));
    CHECK(bound_data_dependent(t, 1, 100, 0.0).frobenius == std::numeric_limits<double>::infinity());
}

TEST_CASE("bound scaling and limits") {
    const Model m = random_model(3, 2, 0.6, 9);
    const NoiseSpec noise = NoiseSpec::isotropic(3, 0.5, 0.5);
    const BoundTerms t1 = bound_terms(m, noise, 6, 2.0, 0.1);
    BoundTerms t2 = t1;
    t2.delta = 0.2;
    const DataDependentBound b1 = bound_data_dependent(t1, 2, 200, 10.0);
    const DataDependentBound b2 = bound_data_dependent(t2, 2, 200, 10.0);
    CHECK(b1.variance_term / b2.variance_term == doctest::Approx(std::sqrt(2.0)));
    CHECK(b1.bias_term == b2.bias_term);

    const BoundTerms direct = bound_terms(m, noise, 6, 3.0, 0.1);
    const BoundTerms rescaled = with_beta(t1, 3.0);
    CHECK(rescaled.Xi == doctest::Approx(direct.Xi).epsilon(1e-14));

    // Noiseless limit with a long window.
    const BoundTerms quiet = bound_terms(m, NoiseSpec::none(3), 200, 1.0, 0.1, 0.75);
    CHECK(bound_data_dependent(quiet, 2, 400, 1.0).ellipsoidal <= 1e-15);
}

TEST_CASE("input norm bound rules") {
    const MatrixXd u = (MatrixXd(2, 3) << 3, 0, 1, 4, 1, 1).finished();
    CHECK(input_norm_bound(u) == doctest::Approx(5.0));
    CHECK(input_norm_bound(u, BetaRule::log_surrogate, 0.1) == doctest::Approx(std::sqrt(2 * std::log(2 / 0.1))));
}

TEST_CASE("choose_L agrees with an exhaustive scan") {
    const Model m = random_model(2, 1, 0.9, 10);
    const NoiseSpec noise = NoiseSpec::isotropic(2, 1.0, 1.0);
    const Index T = 10'000;
    const double delta = 0.1, beta = 3.0;
    const double rho = (1 + spectral_radius(m.A)) / 2;
    const double phi = transient_factor(m.A, rho);
    const double Bn = m.B.norm(), Cn = m.C.norm();  // vectors here: spectral = Euclidean

    // Independent evaluation of the inequality at each L.
    const auto holds = [&](Index L) {
        const MatrixXd F = [&] {
            MatrixXd out(1, 2 * L), CAk = m.C;
            for (Index k = 0; k < L; ++k) {
                out.middleCols(2 * k, 2) = CAk;
                CAk = CAk * m.A;
            }
            return out;
        }();
        MatrixXd CAL = m.C;
        for (Index k = 0; k < L; ++k) CAL = CAL * m.A;
        MatrixXd gram = MatrixXd::Zero(2, 2), Ak = MatrixXd::Identity(2, 2);
        for (int k = 0; k < 5000; ++k) {
            gram += Ak * Ak.transpose();
            Ak = Ak * m.A;
        }
        const double g = gram.jacobiSvd().singularValues()(0);
        const double decay = 1 + phi * std::pow(rho, L) / (1 - rho);
        const double Xi = 1.0 + 3 * F.squaredNorm() * beta * beta * L * decay +
                          2 * g * CAL.squaredNorm() * beta * beta * phi / (1 - rho);
        const double lhs = 2 * beta * beta * Bn * Cn * phi * std::pow(rho, L) / (1 - rho);
        return lhs <= std::sqrt(L * Xi / (delta * double(T - L)));
    };
    Index expected = -1;
    for (Index L = 4; L <= 200; L += 2)
        if (holds(L)) {
            expected = L;
            break;
        }
    const ChooseLResult r = choose_L(m, noise, T, delta, beta);
    REQUIRE(expected > 0);
    CHECK(r.feasible);
    CHECK(r.L == expected);
}

TEST_CASE("choose_L edge cases") {
    Model m = random_model(2, 2, 0.5, 11);
    m.A.setZero();
    const NoiseSpec noise = NoiseSpec::isotropic(2, 1.0, 1.0);
    const ChooseLResult r = choose_L(m, noise, 5000, 0.1, 2.0, 1e-3);
    CHECK(r.feasible);
    CHECK(r.L == 4);

    const Model slow = random_model(3, 2, 0.95, 12);
    const NoiseSpec slow_noise = NoiseSpec::isotropic(3, 1.0, 1.0);
    Index last = 0;
    for (const Index T : {200, 1000, 5000, 20000, 100000}) {
        const ChooseLResult c = choose_L(slow, slow_noise, T, 0.1, 2.0);
        if (c.feasible) {
            CHECK(c.L >= last);
            last = c.L;
        }
    }

    // Too few samples for any even L >= 2n.
    const ChooseLResult short_run = choose_L(slow, slow_noise, 6, 0.1, 2.0);
    CHECK_FALSE(short_run.feasible);
    CHECK(short_run.binding_term.rfind("sample size", 0) == 0);
    // Bias grows like beta^2 and the noise level like beta.
    const ChooseLResult biased = choose_L(slow, slow_noise, 200, 0.1, 1e4, std::nullopt, 6);
    CHECK_FALSE(biased.feasible);
    CHECK(biased.bias > biased.noise_level);
    CHECK(biased.binding_term.rfind("truncation bias", 0) == 0);
}

TEST_CASE("prediction") {
    const Model m = random_nilpotent_model(3, 2, 13);
    const MatrixXd G = oracle::markov(m.A, m.B, m.C, 3);
    Rng rng(13);
    const MatrixXd u = InputDesign::gaussian(2).draw(41, rng);
    const Trajectory tr = simulate(m, NoiseSpec::none(3), u, 13);
    // Predict y_40 from inputs u_0..u_39 and u_40.
    const Prediction p = predict(G, u.leftCols(40), u.col(40));
    CHECK(p.y_hat == doctest::Approx(tr.y(40)).epsilon(1e-12));
    CHECK(predict(G, u.leftCols(40), VectorXd::Zero(2)).y_hat == 0.0);
}

TEST_CASE("prediction bound is omitted for a singular design") {
    const Model m = random_model(2, 2, 0.5, 14);
    Rng rng(14);
    const MatrixXd u = InputDesign::gaussian(2).draw(8, rng);
    const Trajectory tr = simulate(m, NoiseSpec::isotropic(2, 1, 1), u, 14);
    const DesignSystem d = build_design(tr, 3);
    const EstimateReport rep = estimate_markov(d);
    const Prediction p = predict(rep.G_hat, u, u.col(0), m, NoiseSpec::isotropic(2, 1, 1), d, 5.0);
    CHECK_FALSE(p.mse_bound.has_value());
    CHECK_FALSE(p.note.empty());
}

TEST_CASE("prediction MSE bound holds against Monte Carlo") {
    const Index n = 2, p = 1, L = 3, T = 120;
    const Model m = random_model(n, p, 0.5, 15);
    const double var_w = 0.2, sigma_z = 0.3;
    const NoiseSpec noise = NoiseSpec::isotropic(n, var_w, sigma_z);
    const Trajectory tr = simulate(m, noise, InputDesign::gaussian(p), T, 15);
    const DesignSystem d = build_design(tr, L);
    const EstimateReport rep = estimate_markov(d);
    const VectorXd u_next = VectorXd::Constant(1, 0.8);
    const double beta = std::max(input_norm_bound(tr.u), u_next.norm());
    const Prediction pred = predict(rep.G_hat, tr.u, u_next, m, noise, d, beta);
    REQUIRE(pred.mse_bound);

    Rng rng(16);
    std::normal_distribution<double> normal;
    double mean = 0;
    std::vector<Eigen::RowVectorXd> h;
    Eigen::RowVectorXd row = u_next.transpose() * m.C;
    for (Index k = T; k >= 0; --k) {
        mean += row.dot(m.B * tr.u.col(k));
        h.push_back(row);
        row = row * m.A;
    }
    const int draws = 100'000;
    double se = 0;
    for (int dd = 0; dd < draws; ++dd) {
        double y = mean + sigma_z * normal(rng);
        for (const auto& hk : h) {
            if (hk.norm() < 1e-15) break;
            y += std::sqrt(var_w) * (hk(0) * normal(rng) + hk(1) * normal(rng));
        }
        se += (y - pred.y_hat) * (y - pred.y_hat);
    }
    CHECK(se / draws <= *pred.mse_bound);
}

TEST_CASE("effective noise autocovariance matches the output-noise oracle") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        Rng rng(seed);
        std::uniform_int_distribution<int> dim(1, 3), len(1, 4);
        const Index n = dim(rng), p = dim(rng), L = len(rng);
        const Model m = random_model(n, p, 0.8, seed + 100);
        MatrixXd S = MatrixXd::Random(n, n);
        S = S * S.transpose() + 0.1 * MatrixXd::Identity(n, n);
        const NoiseSpec noise{S, 0.4};
        const Index T = 3 * L + 6;
        const MatrixXd u = InputDesign::gaussian(p).draw(T + 1, rng);
        for (Index a = L; a <= T - 1; ++a) {
            for (Index b = L; b <= T - 1; ++b) {
                const double r = effective_noise_autocov(m, noise, u, a, b, L);
                CHECK(r == doctest::Approx(oracle::noise_output_cov(m.A, m.C, S, 0.4, u, a, b)).epsilon(1e-10));
                CHECK(r == doctest::Approx(effective_noise_autocov(m, noise, u, b, a, L)).epsilon(1e-10));
            }
        }
    }
}

TEST_CASE("effective noise autocovariance special cases") {
    const Model m = random_model(2, 1, 0.7, 17);
    Rng rng(17);
    const MatrixXd u = InputDesign::gaussian(1).draw(12, rng);
    const NoiseSpec meas_only{MatrixXd::Zero(2, 2), 0.6};
    for (Index a = 2; a <= 10; ++a)
        for (Index b = 2; b <= 10; ++b)
            CHECK(effective_noise_autocov(m, meas_only, u, a, b, 2) ==
                  doctest::Approx(a == b ? 0.36 : 0.0));

    Model zero_a = m;
    zero_a.A.setZero();
    const NoiseSpec noisy = NoiseSpec::isotropic(2, 1.0, 0.0);
    // With A = 0 only the most recent process noise reaches the output.
    CHECK(effective_noise_autocov(zero_a, noisy, u, 3, 5, 2) == doctest::Approx(0.0));
    CHECK_THROWS_AS(effective_noise_autocov(m, noisy, u, 1, 3, 2), ParameterError);
    CHECK_THROWS_AS(effective_noise_autocov(m, noisy, u, 3, 11, 2), ParameterError);
}

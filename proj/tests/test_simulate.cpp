#include "oracles.hpp"

#include "bsid/simulate.hpp"

#include <doctest.h>

#include <cmath>

using namespace bsid;

TEST_CASE("scalar recursion with x_{t+1} = u_t") {
    const Model m{MatrixXd::Zero(1, 1), MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1)};
    const MatrixXd u = (MatrixXd(1, 3) << 1, 2, 3).finished();
    const Trajectory tr = simulate(m, NoiseSpec::none(1), u, 0);
    REQUIRE(tr.T() == 2);
    CHECK(tr.y(0) == 0.0);
    CHECK(tr.y(1) == 2.0);
    CHECK(tr.y(2) == 6.0);
}

TEST_CASE("zero inputs annihilate the output when sigma_z = 0") {
    const Model m = random_model(3, 2, 0.8, 1);
    const NoiseSpec noise{MatrixXd::Identity(3, 3), 0.0};
    const Trajectory tr = simulate(m, noise, MatrixXd::Zero(2, 30), 5);
    CHECK(tr.y.cwiseAbs().maxCoeff() == 0.0);
    const Trajectory quiet = simulate(m, NoiseSpec::none(3), MatrixXd::Zero(2, 30), 5);
    CHECK(quiet.y.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("diagnostics satisfy the recursion exactly") {
    const Model m = random_model(4, 3, 0.9, 2);
    for (const NoiseFamily family : {NoiseFamily::gaussian, NoiseFamily::exponential}) {
        const NoiseSpec noise = NoiseSpec::isotropic(4, 0.5, 0.3, family);
        const Trajectory tr = simulate(m, noise, InputDesign::gaussian(3), 200, 7, true);
        REQUIRE(tr.diag);
        const Diagnostics& d = *tr.diag;
        CHECK(d.x.col(0).norm() == 0.0);
        double rx = 0, ry = 0;
        for (Index t = 0; t <= tr.T(); ++t) {
            ry = std::max(ry, std::abs(tr.y(t) - tr.u.col(t).dot(m.C * d.x.col(t)) - d.z(t)));
            if (t < tr.T())
                rx = std::max(rx, (d.x.col(t + 1) - m.A * d.x.col(t) - m.B * tr.u.col(t) - d.w.col(t)).norm());
        }
        CHECK(rx <= 1e-12);
        CHECK(ry <= 1e-12);
    }
}

TEST_CASE("noise-free simulation matches the output oracle") {
    const Model m = random_model(3, 2, 0.7, 8);
    Rng rng(2);
    const MatrixXd u = InputDesign::gaussian(2).draw(40, rng);
    const Trajectory tr = simulate(m, NoiseSpec::none(3), u, 1);
    CHECK((tr.y - oracle::noiseless_outputs(m.A, m.B, m.C, u)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("simulate is deterministic and separates input and noise streams") {
    const Model m = random_model(2, 2, 0.5, 3);
    const NoiseSpec noise = NoiseSpec::isotropic(2, 1.0, 1.0);
    const Trajectory a = simulate(m, noise, InputDesign::gaussian(2), 50, 11);
    const Trajectory b = simulate(m, noise, InputDesign::gaussian(2), 50, 11);
    CHECK(a.u == b.u);
    CHECK(a.y == b.y);
    const Trajectory c = simulate(m, noise, a.u, 12);
    CHECK(c.u == a.u);
    CHECK(c.y != a.y);
}

TEST_CASE("simulate rejects inconsistent dimensions") {
    const Model m = random_model(2, 2, 0.5, 3);
    CHECK_THROWS_AS(simulate(m, NoiseSpec::none(2), MatrixXd::Zero(3, 10), 1), ParameterError);
    CHECK_THROWS_AS(simulate(m, NoiseSpec::none(3), MatrixXd::Zero(2, 10), 1), ParameterError);
    CHECK_THROWS_AS(simulate(m, NoiseSpec::none(2), InputDesign::gaussian(2), 0, 1), ParameterError);
}

TEST_CASE("noise spec validation") {
    NoiseSpec s = NoiseSpec::isotropic(2, 1.0, 0.5);
    CHECK_NOTHROW(s.validate(2));
    s.sigma_w(0, 1) = 0.3;
    CHECK_THROWS_AS(s.validate(2), ParameterError);
    s.sigma_w = (MatrixXd(2, 2) << 1, 2, 2, 1).finished();
    CHECK_THROWS_AS(s.validate(2), ParameterError);
    CHECK_THROWS_AS(NoiseSpec::isotropic(2, 1.0, -1.0).validate(2), ParameterError);
}

TEST_CASE("centered exponential draws have mean 0 and variance 1/rate^2") {
    const double rate = 2.5;
    const int draws = 1'000'000;
    Rng rng(42);
    double sum = 0, sum_sq = 0;
    for (int i = 0; i < draws; ++i) {
        const double x = sample_exponential(rng, rate, true);
        sum += x;
        sum_sq += x * x;
    }
    const double mean = sum / draws;
    const double var = sum_sq / draws - mean * mean;
    CHECK(std::abs(mean) <= 4.0 * std::sqrt(var / draws));
    CHECK(std::abs(var - 1.0 / (rate * rate)) <= 0.05 / (rate * rate));
}

TEST_CASE("raw exponential draws keep their mean") {
    Rng rng(5);
    double sum = 0;
    for (int i = 0; i < 200'000; ++i) sum += sample_exponential(rng, 2.0, false);
    CHECK(sum / 200'000 == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("standardized noise has the requested covariance") {
    const MatrixXd S = (MatrixXd(2, 2) << 2.0, 0.6, 0.6, 1.0).finished();
    const NoiseSampler sampler(NoiseSpec{S, 0.7, NoiseFamily::exponential, 3.0, true}, 2);
    Rng rng(6);
    const int draws = 400'000;
    MatrixXd acc = MatrixXd::Zero(2, 2);
    double zz = 0;
    for (int i = 0; i < draws; ++i) {
        const VectorXd w = sampler.process(rng);
        acc += w * w.transpose();
        const double z = sampler.measurement(rng);
        zz += z * z;
    }
    acc /= draws;
    CHECK((acc - S).cwiseAbs().maxCoeff() <= 0.05);
    CHECK(zz / draws == doctest::Approx(0.49).epsilon(0.03));
}

TEST_CASE("input designs") {
    Rng rng(10);
    const MatrixXd g = InputDesign::gaussian(3).draw(200'000, rng);
    const MatrixXd cov = g * g.transpose() / double(g.cols());
    CHECK((cov - MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() <= 0.02);
    CHECK(g.rowwise().mean().cwiseAbs().maxCoeff() <= 0.01);

    const MatrixXd s = InputDesign::sphere(3).draw(200'000, rng);
    CHECK((s.colwise().norm().array() - std::sqrt(3.0)).abs().maxCoeff() <= 1e-12);
    const MatrixXd scov = s * s.transpose() / double(s.cols());
    CHECK((scov - MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() <= 0.02);

    const MatrixXd seq = MatrixXd::Random(2, 5);
    CHECK(InputDesign::fixed(seq).draw(4, rng) == seq.leftCols(4));
    CHECK_THROWS_AS(InputDesign::fixed(seq).draw(6, rng), ParameterError);
}

TEST_CASE("enum round trips") {
    for (const auto f : {NoiseFamily::gaussian, NoiseFamily::exponential}) CHECK(parse_noise_family(to_string(f)) == f);
    for (const auto k : {InputKind::gaussian_isotropic, InputKind::bounded_sphere, InputKind::fixed_sequence})
        CHECK(parse_input_kind(to_string(k)) == k);
    CHECK_THROWS_AS(parse_noise_family("cauchy"), ParameterError);
}

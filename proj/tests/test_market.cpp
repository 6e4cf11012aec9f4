#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "levyrisk/market.hpp"

using namespace levyrisk;

namespace {

MarketModel diffusion_model(double mu, double sigma, double T = 1.0, int steps = 100) {
    MarketModel m;
    m.T = T;
    m.n_steps = steps;
    m.mu = mu;
    m.sigma = sigma;
    return m;
}

} // namespace

TEST_CASE("brownian increments have the defining moments") {
    const MarketModel model = diffusion_model(0.0, 0.2, 1.0, 1);
    const PathEnsemble paths = simulate(model, 100000, 42);
    const double dt = paths.dt();
    const double mean = paths.dB.mean();
    const double var = (paths.dB.array() - mean).square().mean();
    // se of the sample variance of N(0, dt) is dt sqrt(2/n)
    CHECK(std::abs(mean) <= 3.0 * std::sqrt(dt / 100000.0));
    CHECK(std::abs(var - dt) <= 3.0 * dt * std::sqrt(2.0 / 100000.0));
}

TEST_CASE("zero-intensity atoms never jump") {
    MarketModel model = diffusion_model(0.0, 0.2);
    model.atoms.push_back({1.0, 0.0, Curve(0.1)});
    const PathEnsemble paths = simulate(model, 500, 1);
    CHECK(paths.jumps[0].maxCoeff() == 0);
}

TEST_CASE("poisson counts match the exact law's mean") {
    MarketModel model = diffusion_model(0.0, 0.2, 1.0, 100);
    model.atoms.push_back({1.0, 2.0, Curve(0.1)});
    const int n_paths = 100000;
    const PathEnsemble paths = simulate(model, n_paths, 7);
    const double mean_total = paths.jumps[0].cast<double>().rowwise().sum().mean();
    // total count per path is Poisson(lambda T): mean 2, variance 2
    CHECK(std::abs(mean_total - 2.0) <= 3.0 * std::sqrt(2.0 / n_paths));
}

TEST_CASE("same seed reproduces the ensemble bit-exactly") {
    MarketModel model = diffusion_model(0.05, 0.2, 1.0, 10);
    model.atoms.push_back({-0.5, 1.5, Curve(0.2)});
    const PathEnsemble a = simulate(model, 64, 123);
    const PathEnsemble b = simulate(model, 64, 123);
    CHECK(a.dB == b.dB);
    CHECK(a.jumps[0] == b.jumps[0]);
}

TEST_CASE("path streams do not depend on how many paths are drawn") {
    const MarketModel model = diffusion_model(0.0, 0.2, 1.0, 8);
    const PathEnsemble small = simulate(model, 3, 5);
    const PathEnsemble big = simulate(model, 50, 5);
    CHECK(small.dB == big.dB.topRows(3));
}

TEST_CASE("simulate rejects invalid models") {
    MarketModel model = diffusion_model(0.0, 0.2);
    model.n_steps = 0;
    CHECK_THROWS_AS(simulate(model, 10, 1), std::invalid_argument);
    model = diffusion_model(0.0, 0.2);
    model.sigma = Curve([](double) { return std::numeric_limits<double>::quiet_NaN(); });
    CHECK_THROWS_AS(simulate(model, 10, 1), std::invalid_argument);
    model = diffusion_model(0.0, -0.1);
    CHECK_THROWS_AS(simulate(model, 10, 1), std::invalid_argument);
}

TEST_CASE("stochastic exponential: zero coefficients give the unit process") {
    const MarketModel model = diffusion_model(0.0, 0.2, 1.0, 20);
    const PathEnsemble paths = simulate(model, 100, 2);
    const Eigen::MatrixXd g = stochastic_exponential(paths, 0.0, 0.0, {});
    CHECK((g.array() - 1.0).abs().maxCoeff() == 0.0);
}

TEST_CASE("stochastic exponential: deterministic drift integrates exactly") {
    const MarketModel model = diffusion_model(0.0, 0.2, 2.0, 40);
    const PathEnsemble paths = simulate(model, 16, 3);
    const double r = 0.07;
    const Eigen::MatrixXd g = stochastic_exponential(paths, r, 0.0, {});
    CHECK(g.col(40).minCoeff() == doctest::Approx(std::exp(r * 2.0)).epsilon(1e-13));
    CHECK(g.col(40).maxCoeff() == doctest::Approx(std::exp(r * 2.0)).epsilon(1e-13));
}

TEST_CASE("driftless diffusion exponential is a mean-one martingale") {
    const MarketModel model = diffusion_model(0.0, 0.2, 1.0, 100);
    const int n_paths = 100000;
    const PathEnsemble paths = simulate(model, n_paths, 11);
    const double beta = -0.25;
    const Eigen::MatrixXd g = stochastic_exponential(paths, 0.0, beta, {});
    const Eigen::VectorXd gT = g.col(100);
    // exact lognormal: Var = exp(beta^2 T) - 1
    const double se = std::sqrt((std::exp(beta * beta) - 1.0) / n_paths);
    CHECK(std::abs(gT.mean() - 1.0) <= 3.0 * se);
    CHECK(gT.minCoeff() > 0.0);
}

TEST_CASE("stochastic exponential rejects gamma at or below -1") {
    MarketModel model = diffusion_model(0.0, 0.2, 1.0, 10);
    model.atoms.push_back({1.0, 1.0, Curve(0.1)});
    const PathEnsemble paths = simulate(model, 10, 4);
    CHECK_THROWS_AS(stochastic_exponential(paths, 0.0, 0.0, {Curve(-1.0)}),
                    std::invalid_argument);
}

TEST_CASE("girsanov density: identity scenario and market-price-of-risk tilt") {
    MarketModel model = diffusion_model(0.05, 0.2, 1.0, 100);
    const int n_paths = 100000;
    const PathEnsemble paths = simulate(model, n_paths, 13);

    Scenario id;
    const Eigen::MatrixXd m_id = girsanov_density(paths, id);
    CHECK((m_id.array() - 1.0).abs().maxCoeff() == 0.0);

    Scenario mpr;
    mpr.theta0 = -0.05 / 0.2; // -mu/sigma
    const Eigen::MatrixXd m = girsanov_density(paths, mpr);
    const double se = std::sqrt((std::exp(0.0625) - 1.0) / n_paths);
    CHECK(std::abs(m.col(100).mean() - 1.0) <= 3.0 * se);
}

TEST_CASE("compensated jump exponential is a mean-one martingale") {
    MarketModel model = diffusion_model(0.0, 0.2, 1.0, 100);
    model.atoms.push_back({1.0, 1.5, Curve(0.0)});
    const int n_paths = 100000;
    const PathEnsemble paths = simulate(model, n_paths, 17);
    Scenario s;
    s.theta0 = 0.0;
    s.theta1 = {Curve(0.5)};
    const Eigen::MatrixXd m = girsanov_density(paths, s);
    // compound-Poisson exponential: E M^2 = exp(lambda T theta1^2), so
    // Var = exp(1.5 * 0.25) - 1
    const double se = std::sqrt((std::exp(1.5 * 0.25) - 1.0) / n_paths);
    CHECK(std::abs(m.col(100).mean() - 1.0) <= 3.0 * se);
    CHECK(m.minCoeff() > 0.0);
}

TEST_CASE("scenario validation enforces theta1 > -1") {
    MarketModel model = diffusion_model(0.0, 0.2, 1.0, 10);
    model.atoms.push_back({1.0, 1.0, Curve(0.0)});
    Scenario s;
    s.theta1 = {Curve(-1.0)};
    CHECK_THROWS_AS(s.validate(model), std::invalid_argument);
}

TEST_CASE("relative entropy of the reference measure is zero") {
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(1000);
    const McEstimate h = relative_entropy(ones);
    CHECK(h.value == 0.0);
    CHECK(h.std_error == 0.0);
}

TEST_CASE("relative entropy matches the deterministic-scenario integral") {
    const MarketModel model = diffusion_model(0.05, 0.2, 1.0, 100);
    const PathEnsemble paths = simulate(model, 100000, 19);

    SUBCASE("theta0 = 0.5: H = 0.125") {
        Scenario s;
        s.theta0 = 0.5;
        const McEstimate h = relative_entropy(girsanov_density(paths, s).col(100));
        CHECK(std::abs(h.value - 0.125) <= 3.0 * h.std_error);
    }
    SUBCASE("theta0 = -mu/sigma: H = 0.03125") {
        Scenario s;
        s.theta0 = -0.25;
        const McEstimate h = relative_entropy(girsanov_density(paths, s).col(100));
        CHECK(std::abs(h.value - 0.03125) <= 3.0 * h.std_error);
    }
}

TEST_CASE("relative entropy rejects non-positive samples") {
    Eigen::VectorXd bad(3);
    bad << 1.0, 0.0, 1.0;
    CHECK_THROWS_AS(relative_entropy(bad), std::invalid_argument);
}

TEST_CASE("entropy is nonnegative within noise on random scenarios") {
    MarketModel model = diffusion_model(0.0, 0.2, 1.0, 50);
    model.atoms.push_back({1.0, 1.0, Curve(0.0)});
    const PathEnsemble paths = simulate(model, 20000, 23);
    for (double t0 : {-0.8, -0.1, 0.4, 1.2}) {
        Scenario s;
        s.theta0 = t0;
        s.theta1 = {Curve(0.5 * t0 * t0)};
        const McEstimate h = relative_entropy(girsanov_density(paths, s).col(50));
        CHECK(h.value >= -3.0 * h.std_error);
    }
}

TEST_CASE("ensemble csv export round-trips the header and row count") {
    MarketModel model = diffusion_model(0.0, 0.2, 1.0, 4);
    model.atoms.push_back({1.0, 1.0, Curve(0.1)});
    const PathEnsemble paths = simulate(model, 3, 29);
    const std::string file = "test_ensemble.csv";
    write_ensemble_csv(paths, file);
    std::ifstream f(file);
    std::string line;
    int rows = 0;
    REQUIRE(std::getline(f, line));
    CHECK(line == "path,t,dB,n0");
    while (std::getline(f, line)) ++rows;
    CHECK(rows == 3 * 4);
    std::remove(file.c_str());
}

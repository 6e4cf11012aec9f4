#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "levyrisk/bsde.hpp"

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

Eigen::MatrixXd log_price_state(const MarketModel& model, const PathEnsemble& paths) {
    std::vector<Curve> gammas;
    for (const auto& a : model.atoms) gammas.push_back(a.gamma);
    return stochastic_exponential(paths, model.mu, model.sigma, gammas)
        .array().log().matrix();
}

// eq-2.6-style replication driver: g(y, z) = -r y - (mu - r)/sigma z
Driver replication_driver(double r, double mu, double sigma) {
    Driver d;
    const double premium = (mu - r) / sigma;
    d.eval = [r, premium](double, double y, double z, std::span<const double>) {
        return -r * y - premium * z;
    };
    d.lipschitz_C = std::abs(r) + std::abs(premium) + 1e-12;
    d.depends_on_y = true;
    return d;
}

} // namespace

TEST_CASE("driver validation") {
    const std::vector<double> grid{0.0, 0.5, 1.0};
    SUBCASE("quadratic driver passes its declared box") {
        CHECK_NOTHROW(Driver::quadratic_z().validate(grid, {}));
    }
    SUBCASE("understated Lipschitz constant is caught") {
        Driver d = Driver::quadratic_z();
        d.lipschitz_C = 0.1;
        CHECK_THROWS_AS(d.validate(grid, {}), std::invalid_argument);
    }
    SUBCASE("non-finite g(t,0,0,0) is caught") {
        Driver d;
        d.eval = [](double, double, double, std::span<const double>) {
            return std::numeric_limits<double>::infinity();
        };
        CHECK_THROWS_AS(d.validate(grid, {}), std::invalid_argument);
    }
}

TEST_CASE("solve_linear: zero coefficients and a constant claim") {
    const MarketModel model = diffusion_model(0.0, 0.2, 1.0, 20);
    const PathEnsemble paths = simulate(model, 2000, 31);
    LinearDriverParams params;
    const BsdeSolution sol = solve_linear(params, Claim::constant(2.5), paths);
    CHECK(sol.Y0 == doctest::Approx(2.5).epsilon(1e-13));
    CHECK((sol.Y.array() - 2.5).abs().maxCoeff() <= 1e-12);
    // Z-estimates of a constant-valued Y are projected noise around zero;
    // the martingale-increment estimator has s.e. |F| / sqrt(dt n_paths)
    const double z_se = 2.5 / std::sqrt(paths.dt() * paths.n_paths());
    for (int n : {0, 10, 19}) CHECK(std::abs(sol.Z.col(n).mean()) <= 3.0 * z_se);
}

TEST_CASE("solve_linear: replication BSDE of a unit claim discounts at r") {
    // dY = {rY + Z (mu - r)/sigma} dt + Z dB, Y(T) = 1 => Y(0) = e^{-r}
    const double r = 0.05, mu = 0.07, sigma = 0.2;
    const MarketModel model = diffusion_model(mu, sigma, 1.0, 100);
    const int n_paths = 20000;
    const PathEnsemble paths = simulate(model, n_paths, 37);
    LinearDriverParams params;
    params.alpha = -r;
    params.beta = -(mu - r) / sigma;
    const BsdeSolution sol = solve_linear(params, Claim::constant(1.0), paths);
    // Gamma(T) is e^{-r} times a mean-one lognormal with beta = -0.1
    const double se = std::exp(-r) * std::sqrt((std::exp(0.01) - 1.0) / n_paths);
    CHECK(std::abs(sol.Y0 - std::exp(-0.05)) <= 3.0 * se);
    CHECK(sol.method_tag == "closed_form");
}

TEST_CASE("solve_linear: pure source term integrates to T - t") {
    const MarketModel model = diffusion_model(0.0, 0.2, 1.0, 50);
    const PathEnsemble paths = simulate(model, 500, 41);
    LinearDriverParams params;
    params.phi = 1.0;
    const BsdeSolution sol = solve_linear(params, Claim::constant(0.0), paths);
    CHECK(sol.Y0 == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(sol.Y(3, 25) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("solve_linear rejects gamma at or below -1") {
    MarketModel model = diffusion_model(0.0, 0.2, 1.0, 10);
    model.atoms.push_back({1.0, 1.0, Curve(0.0)});
    const PathEnsemble paths = simulate(model, 100, 43);
    LinearDriverParams params;
    params.gamma_coef = {Curve(-1.5)};
    CHECK_THROWS_AS(solve_linear(params, Claim::constant(1.0), paths),
                    std::invalid_argument);
}

TEST_CASE("solve_regression: conditional expectation of a constant is exact") {
    const MarketModel model = diffusion_model(0.05, 0.2, 1.0, 20);
    const PathEnsemble paths = simulate(model, 2000, 47);
    const Eigen::MatrixXd state = log_price_state(model, paths);
    const BsdeSolution sol =
        solve_regression(Driver::zero(), Claim::constant(3.0), paths, state);
    CHECK(sol.Y0 == doctest::Approx(3.0).epsilon(1e-13));
    CHECK((sol.Y.array() - 3.0).abs().maxCoeff() <= 1e-11);
}

TEST_CASE("solve_regression matches solve_linear on the replication problem") {
    const double r = 0.05, mu = 0.07, sigma = 0.2;
    const MarketModel model = diffusion_model(mu, sigma, 1.0, 50);
    const PathEnsemble paths = simulate(model, 20000, 53);
    const Eigen::MatrixXd state = log_price_state(model, paths);
    const BsdeSolution reg = solve_regression(replication_driver(r, mu, sigma),
                                              Claim::constant(1.0), paths, state);
    LinearDriverParams params;
    params.alpha = -r;
    params.beta = -(mu - r) / sigma;
    const BsdeSolution lin = solve_linear(params, Claim::constant(1.0), paths);
    CHECK(std::abs(reg.Y0 - lin.Y0) / std::abs(lin.Y0) <= 0.02);
    CHECK(std::abs(reg.Y0 - std::exp(-0.05)) / std::exp(-0.05) <= 0.02);
}

TEST_CASE("solve_regression: entropic driver prices the quadratic-risk claim") {
    // terminal wealth of the section-4.2 optimum: x + int (mu/sig)^2 dt
    // + int (mu/sig) dB; -Y0 must approach -x - (mu/sig)^2 T / 2
    const double mu = 0.05, sigma = 0.2, x0 = 1.0;
    const MarketModel model = diffusion_model(mu, sigma, 1.0, 100);
    const PathEnsemble paths = simulate(model, 50000, 59);
    const int N = paths.n_steps();
    const double ratio = mu / sigma;
    Eigen::MatrixXd state(paths.n_paths(), N + 1);
    state.col(0).setConstant(x0);
    for (int n = 0; n < N; ++n)
        state.col(n + 1) = state.col(n).array() + ratio * ratio * paths.dt() +
                           ratio * paths.dB.col(n).array();
    const BsdeSolution sol =
        solve_regression(Driver::quadratic_z(), Claim::terminal([](double v) { return v; }),
                         paths, state);
    const double expected = x0 + 0.5 * ratio * ratio; // Y0 = x + v/2
    CHECK(std::abs(sol.Y0 - expected) / std::abs(expected) <= 0.02);
}

TEST_CASE("solve_regression: stopped terminal condition freezes Y after tau") {
    const MarketModel model = diffusion_model(0.0, 0.2, 1.0, 10);
    const PathEnsemble paths = simulate(model, 1000, 61);
    const Eigen::MatrixXd state = log_price_state(model, paths);
    const BsdeSolution sol = solve_regression(
        Driver::zero(), Claim::terminal([](double v) { return v * v; }), paths, state,
        3, 6);
    CHECK(sol.Y.cols() == 7);
    for (int p = 0; p < 5; ++p)
        CHECK(sol.Y(p, 6) == doctest::Approx(state(p, 6) * state(p, 6)));
}

TEST_CASE("solve_regression input validation") {
    const MarketModel model = diffusion_model(0.0, 0.2, 1.0, 10);
    const PathEnsemble paths = simulate(model, 30, 67);
    const Eigen::MatrixXd state = log_price_state(model, paths);
    SUBCASE("too few paths for the basis") {
        CHECK_THROWS_AS(
            solve_regression(Driver::zero(), Claim::constant(1.0), paths, state, 3),
            std::invalid_argument);
    }
    SUBCASE("non-finite claim") {
        CHECK_THROWS_AS(
            solve_regression(Driver::zero(),
                             Claim::constant(std::numeric_limits<double>::quiet_NaN()),
                             paths, state, 0),
            std::invalid_argument);
    }
}

TEST_CASE("solve_regression: one-path ensemble degenerates to pathwise identity") {
    const MarketModel model = diffusion_model(0.0, 0.2, 1.0, 5);
    const PathEnsemble paths = simulate(model, 1, 71);
    const Eigen::MatrixXd state = log_price_state(model, paths);
    const BsdeSolution sol =
        solve_regression(Driver::zero(), Claim::terminal([](double v) { return v; }),
                         paths, state);
    CHECK(sol.Y0 == doctest::Approx(state(0, 5)));
    REQUIRE(!sol.notes.empty());
}

TEST_CASE("solve_regression agrees with solve_linear on a jump-diffusion driver") {
    MarketModel model = diffusion_model(0.03, 0.2, 1.0, 50);
    model.atoms.push_back({1.0, 1.0, Curve(0.2)});
    const PathEnsemble paths = simulate(model, 20000, 113);

    LinearDriverParams params;
    params.phi = 0.5;
    params.alpha = -0.05;
    params.beta = -0.1;
    params.gamma_coef = {Curve(0.3)};
    // the claim reads the terminal of the exponential driving both routes
    const Claim claim = Claim::terminal([](double v) { return std::log(v); });
    const BsdeSolution lin = solve_linear(params, claim, paths);

    Driver drv;
    drv.eval = [](double, double y, double z, std::span<const double> k) {
        return 0.5 - 0.05 * y - 0.1 * z + 0.3 * k[0] * 1.0;
    };
    drv.lipschitz_C = 0.5;
    drv.depends_on_y = true;
    const Eigen::MatrixXd state =
        stochastic_exponential(paths, params.alpha, params.beta, params.gamma_coef)
            .array().log().matrix();
    const BsdeSolution reg = solve_regression(
        drv, Claim::terminal([](double v) { return v; }), paths, state);
    CHECK(std::abs(reg.Y0 - lin.Y0) <= 0.02 * std::max(1.0, std::abs(lin.Y0)));
}

TEST_CASE("regression error halves when paths quadruple on the linear problem") {
    const double r = 0.05, mu = 0.07, sigma = 0.2;
    const MarketModel model = diffusion_model(mu, sigma, 1.0, 25);
    const double target = std::exp(-0.05);
    double rms_small = 0.0, rms_big = 0.0;
    const int n_seeds = 6;
    for (int seed = 1; seed <= n_seeds; ++seed) {
        for (int scale : {0, 1}) {
            const int n_paths = scale ? 40000 : 10000;
            const PathEnsemble paths = simulate(model, n_paths, 1000 + seed);
            const Eigen::MatrixXd state = log_price_state(model, paths);
            const BsdeSolution sol = solve_regression(replication_driver(r, mu, sigma),
                                                      Claim::constant(1.0), paths, state);
            const double err = (sol.Y0 - target) * (sol.Y0 - target);
            (scale ? rms_big : rms_small) += err;
        }
    }
    rms_small = std::sqrt(rms_small / n_seeds);
    rms_big = std::sqrt(rms_big / n_seeds);
    const double ratio = rms_big / rms_small;
    // Monte Carlo order 1/2: quadrupling paths should halve the error
    CHECK(ratio > 0.2);
    CHECK(ratio < 0.8);
}

TEST_CASE("check_comparison") {
    const MarketModel model = diffusion_model(0.0, 0.2, 1.0, 10);
    const PathEnsemble paths = simulate(model, 500, 73);
    const Eigen::MatrixXd state = log_price_state(model, paths);
    const BsdeSolution a =
        solve_regression(Driver::zero(), Claim::constant(1.0), paths, state);
    SUBCASE("identical solutions have zero excess") {
        const ComparisonReport rep = check_comparison(a, a, 1e-14);
        CHECK(rep.max_excess == 0.0);
        CHECK(rep.pass);
    }
    SUBCASE("translation by +1 shifts Y everywhere (z-only driver)") {
        const BsdeSolution b =
            solve_regression(Driver::zero(), Claim::constant(2.0), paths, state);
        const ComparisonReport rep = check_comparison(a, b, 1e-12);
        CHECK(rep.pass);
        CHECK(rep.max_excess == doctest::Approx(-1.0).epsilon(1e-12));
        const ComparisonReport rev = check_comparison(b, a, 1e-12);
        CHECK(!rev.pass);
        CHECK(rev.max_excess == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("mismatched grids are rejected") {
        const PathEnsemble other = simulate(diffusion_model(0.0, 0.2, 1.0, 5), 500, 73);
        const BsdeSolution c = solve_regression(
            Driver::zero(), Claim::constant(1.0), other, log_price_state(model, other));
        CHECK_THROWS_AS(check_comparison(a, c, 1e-12), std::invalid_argument);
    }
}

TEST_CASE("translation invariance holds within MC tolerance for the entropic driver") {
    const MarketModel model = diffusion_model(0.05, 0.2, 1.0, 40);
    const PathEnsemble paths = simulate(model, 20000, 79);
    const Eigen::MatrixXd state = log_price_state(model, paths);
    const Claim f = Claim::terminal([](double v) { return std::tanh(v); });
    const Claim f_shift = Claim::terminal([](double v) { return std::tanh(v) + 0.75; });
    const BsdeSolution a = solve_regression(Driver::quadratic_z(), f, paths, state);
    const BsdeSolution b = solve_regression(Driver::quadratic_z(), f_shift, paths, state);
    CHECK(std::abs(b.Y0 - a.Y0 - 0.75) <= 5e-3);
}

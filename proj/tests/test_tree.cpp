#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "levyrisk/tree.hpp"

using namespace levyrisk;

namespace {

// binomial Brownian branches crossed with a one-atom Bernoulli jump
TreeModel jump_binomial(int n_steps, double dt, double lambda) {
    TreeModel t;
    t.n_steps = n_steps;
    t.dt = dt;
    t.intensities = {lambda};
    const double s = std::sqrt(dt);
    const double pj = lambda * dt; // P(one jump) per step
    t.branches = {{0.5 * (1 - pj), s, {0}},
                  {0.5 * (1 - pj), -s, {0}},
                  {0.5 * pj, s, {1}},
                  {0.5 * pj, -s, {1}}};
    return t;
}

// terminal value from the path's Brownian sum, plus a jump-count tilt
TreeClaim walk_claim(const TreeModel& tree, double jump_weight = 0.0) {
    return [&tree, jump_weight](std::span<const int> path) {
        double b = 0.0, jumps = 0.0;
        for (int c : path) {
            b += tree.branches[c].db;
            if (!tree.branches[c].jumps.empty()) jumps += tree.branches[c].jumps[0];
        }
        return std::tanh(b) + jump_weight * jumps;
    };
}

} // namespace

TEST_CASE("one-step binomial expectation") {
    const TreeModel tree = TreeModel::binomial(1, 1.0);
    const TreeClaim claim = [](std::span<const int> path) {
        return path[0] == 0 ? 2.0 : 0.0;
    };
    const TreeSolution sol = solve_tree(Driver::zero(), claim, tree);
    CHECK(sol.Y0 == 1.0);
}

TEST_CASE("one-step quadratic driver against the hand-expanded recursion") {
    const double dt = 0.25;
    const TreeModel tree = TreeModel::binomial(1, dt);
    const TreeClaim claim = [](std::span<const int> path) {
        return path[0] == 0 ? 1.0 : -1.0;
    };
    const TreeSolution sol = solve_tree(Driver::quadratic_z(), claim, tree);
    // z = E[Y dB]/dt = 1/sqrt(dt); Y0 = E[Y] - z^2 dt / 2 = -1/2
    const double z = 1.0 / std::sqrt(dt);
    CHECK(sol.Z[0][0] == doctest::Approx(z).epsilon(1e-14));
    CHECK(sol.Y0 == doctest::Approx(0.0 - 0.5 * z * z * dt).epsilon(1e-14));
    CHECK(sol.Y0 == doctest::Approx(-0.5).epsilon(1e-14));
}

TEST_CASE("tree validation") {
    TreeModel t = TreeModel::binomial(3, 0.5);
    SUBCASE("probabilities must sum to one") {
        t.branches[0].prob = 0.5 + 1e-9;
        CHECK_THROWS_AS(t.validate(), std::invalid_argument);
    }
    SUBCASE("depth is capped at 12") {
        t.n_steps = 13;
        CHECK_THROWS_AS(t.validate(), std::invalid_argument);
    }
    SUBCASE("dB must be compensated") {
        t.branches[0].db = 0.8;
        CHECK_THROWS_AS(t.validate(), std::invalid_argument);
    }
    SUBCASE("jump counts must be compensated by lambda dt") {
        TreeModel j = jump_binomial(2, 0.5, 1.0);
        j.intensities[0] = 2.0;
        CHECK_THROWS_AS(j.validate(), std::invalid_argument);
    }
}

TEST_CASE("terminal row reproduces the claim exactly") {
    const TreeModel tree = jump_binomial(4, 0.25, 1.0);
    const TreeClaim claim = walk_claim(tree, 0.3);
    const TreeSolution sol = solve_tree(Driver::quadratic_z(1), claim, tree);
    for (long i = 0; i < sol.Y[4].size(); ++i)
        CHECK(sol.Y[4][i] == claim(tree_path(tree, 4, i)));
}

TEST_CASE("lemma-2.6 round trip: y-only driver solves its integral equation") {
    const TreeModel tree = TreeModel::binomial(5, 0.2);
    Driver drv;
    drv.eval = [](double t, double y, double, std::span<const double>) {
        return 0.4 * std::sin(y) + 0.1 * t;
    };
    drv.lipschitz_C = 0.4;
    drv.depends_on_y = true;
    const TreeClaim claim = walk_claim(tree);
    const TreeSolution sol = solve_tree(drv, claim, tree);

    const int B = tree.n_branches(), D = tree.n_steps;
    for (int n = 0; n <= D; ++n) {
        for (long i = 0; i < tree.nodes_at(n); ++i) {
            // conditional expectation of int_t^T g(s, Y(s)) ds + F over all
            // continuations of this node, by full enumeration
            double expect = 0.0;
            long tails = 1;
            for (int s = 0; s < D - n; ++s) tails *= B;
            for (long tail = 0; tail < tails; ++tail) {
                long node = i;
                double prob = 1.0, acc = 0.0;
                long rem = tail;
                long shift = tails;
                for (int m = n; m < D; ++m) {
                    acc += drv.eval(m * tree.dt, sol.Y[m][node], 0.0, {}) * tree.dt;
                    shift /= B;
                    const int branch = static_cast<int>((rem / shift) % B);
                    prob *= tree.branches[branch].prob;
                    node = node * B + branch;
                }
                acc += sol.Y[D][node];
                expect += prob * acc;
            }
            CHECK(sol.Y[n][i] == doctest::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("comparison: ordered terminals give ordered solutions node-wise") {
    const TreeModel tree = jump_binomial(5, 0.2, 1.5);
    Driver drv;
    drv.eval = [](double, double, double z, std::span<const double> k) {
        return -0.5 * z * z + 0.3 * k[0];
    };
    drv.lipschitz_C = 2.0;
    const TreeClaim f1 = walk_claim(tree, 0.2);
    const TreeClaim f2 = [&](std::span<const int> path) {
        return walk_claim(tree, 0.2)(path) + 0.1 + 0.05 * std::abs(path.back() - 1.0);
    };
    const TreeSolution s1 = solve_tree(drv, f1, tree);
    const TreeSolution s2 = solve_tree(drv, f2, tree);
    for (int n = 0; n <= tree.n_steps; ++n)
        for (long i = 0; i < s1.Y[n].size(); ++i) CHECK(s1.Y[n][i] <= s2.Y[n][i] + 1e-14);
}

TEST_CASE("comparison: ordered drivers give ordered solutions on the tree") {
    const TreeModel tree = TreeModel::binomial(6, 0.15);
    Driver g1, g2;
    g1.eval = [](double, double, double z, std::span<const double>) {
        return -0.5 * z * z - 0.2;
    };
    g2.eval = [](double, double, double z, std::span<const double>) { return -0.5 * z * z; };
    g1.lipschitz_C = g2.lipschitz_C = 2.0;
    const TreeClaim f = walk_claim(tree);
    const TreeSolution s1 = solve_tree(g1, f, tree);
    const TreeSolution s2 = solve_tree(g2, f, tree);
    for (int n = 0; n <= tree.n_steps; ++n)
        for (long i = 0; i < s1.Y[n].size(); ++i) CHECK(s1.Y[n][i] <= s2.Y[n][i] + 1e-14);
}

TEST_CASE("translation: z/k drivers shift exactly with the terminal") {
    const TreeModel tree = jump_binomial(4, 0.25, 1.0);
    Driver drv;
    drv.eval = [](double, double, double z, std::span<const double> k) {
        return -0.5 * z * z + 0.25 * std::tanh(k[0]);
    };
    drv.lipschitz_C = 2.0;
    const TreeClaim f = walk_claim(tree, 0.4);
    const double shift = 0.8;
    const TreeClaim g = [&](std::span<const int> path) { return f(path) + shift; };
    const TreeSolution a = solve_tree(drv, f, tree);
    const TreeSolution b = solve_tree(drv, g, tree);
    for (int n = 0; n <= tree.n_steps; ++n)
        for (long i = 0; i < a.Y[n].size(); ++i)
            CHECK(b.Y[n][i] - a.Y[n][i] == doctest::Approx(shift).epsilon(1e-13));
}

TEST_CASE("recursive utility of a constant consumption stream discounts exactly") {
    // driver g(y) = u(c) - beta y with zero terminal value: the implicit
    // recursion gives Y_n = (Y_{n+1} + u(c) dt) / (1 + beta dt), hence
    // Y_0 = u(c)/beta (1 - (1 + beta dt)^{-N})
    const double uc = 0.8, beta = 0.4;
    const TreeModel tree = TreeModel::binomial(6, 0.25);
    Driver drv;
    drv.eval = [uc, beta](double, double y, double, std::span<const double>) {
        return uc - beta * y;
    };
    drv.lipschitz_C = beta;
    drv.depends_on_y = true;
    const TreeSolution sol =
        solve_tree(drv, [](std::span<const int>) { return 0.0; }, tree);
    const double expected =
        uc / beta * (1.0 - std::pow(1.0 + beta * tree.dt, -tree.n_steps));
    CHECK(sol.Y0 == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("stopped solve reads the claim at the stopping level") {
    const TreeModel tree = TreeModel::binomial(6, 0.1);
    const TreeClaim claim = [](std::span<const int> path) {
        double b = 0.0;
        for (int c : path) b += (c == 0 ? 1.0 : -1.0);
        return b;
    };
    const TreeSolution sol = solve_tree(Driver::zero(), claim, tree, 3);
    CHECK(sol.terminal_step == 3);
    CHECK(sol.Y[3].size() == 8);
    CHECK(sol.Y0 == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("randomized instances: comparison holds exactly across drivers and claims") {
    std::mt19937_64 eng(2024);
    std::uniform_real_distribution<double> urand(0.1, 0.9);
    for (int inst = 0; inst < 20; ++inst) {
        const int depth = 3 + static_cast<int>(eng() % 4);
        const double dt = 0.1 + 0.2 * urand(eng);
        const double lambda = 0.3 + 0.6 * urand(eng);
        const TreeModel tree = jump_binomial(depth, dt, lambda);
        // keep the k-slope below lambda so the domination bound theta > -1
        // holds on the discrete increments
        const double cz = 0.5 * urand(eng), ck = 0.5 * lambda * urand(eng);
        const double gap = 0.3 * urand(eng);
        Driver g1, g2;
        g1.eval = [cz, ck, gap](double, double, double z, std::span<const double> k) {
            return cz * std::tanh(z) + ck * std::sin(k[0]) - gap;
        };
        g2.eval = [cz, ck](double, double, double z, std::span<const double> k) {
            return cz * std::tanh(z) + ck * std::sin(k[0]);
        };
        g1.lipschitz_C = g2.lipschitz_C = 1.0;
        const double bump = 0.5 * urand(eng);
        const double w = urand(eng);
        const TreeClaim f1 = walk_claim(tree, 0.3 * w);
        const TreeClaim f2 = [&, bump](std::span<const int> path) {
            return walk_claim(tree, 0.3 * w)(path) + bump;
        };
        const TreeSolution s1 = solve_tree(g1, f1, tree);
        const TreeSolution s2 = solve_tree(g2, f2, tree);
        for (int n = 0; n <= tree.n_steps; ++n)
            for (long i = 0; i < s1.Y[n].size(); ++i)
                CHECK(s1.Y[n][i] <= s2.Y[n][i] + 1e-13);
    }
}

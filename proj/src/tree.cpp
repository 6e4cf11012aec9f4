#include "levyrisk/tree.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace levyrisk {

long TreeModel::nodes_at(int level) const {
    long n = 1;
    for (int i = 0; i < level; ++i) n *= n_branches();
    return n;
}

void TreeModel::validate() const {
    if (n_steps < 1 || n_steps > 12)
        throw std::invalid_argument("TreeModel: n_steps must be in [1, 12]");
    if (!(dt > 0.0)) throw std::invalid_argument("TreeModel: dt must be positive");
    if (branches.empty()) throw std::invalid_argument("TreeModel: no branches");
    double psum = 0.0, db_mean = 0.0;
    std::vector<double> count_mean(n_atoms(), 0.0);
    for (const auto& b : branches) {
        if (b.prob < 0.0) throw std::invalid_argument("TreeModel: negative branch probability");
        if (static_cast<int>(b.jumps.size()) != n_atoms())
            throw std::invalid_argument("TreeModel: branch jump vector size mismatch");
        psum += b.prob;
        db_mean += b.prob * b.db;
        for (int j = 0; j < n_atoms(); ++j) count_mean[j] += b.prob * b.jumps[j];
    }
    if (std::abs(psum - 1.0) > 1e-12)
        throw std::invalid_argument("TreeModel: branch probabilities sum to " + std::to_string(psum));
    if (std::abs(db_mean) > 1e-12)
        throw std::invalid_argument("TreeModel: branch dB must have mean zero");
    for (int j = 0; j < n_atoms(); ++j)
        if (std::abs(count_mean[j] - intensities[j] * dt) > 1e-12)
            throw std::invalid_argument("TreeModel: jump counts not compensated by lambda dt");
    if (nodes_at(n_steps) > 20'000'000L)
        throw std::invalid_argument("TreeModel: too many nodes to enumerate");
}

TreeModel TreeModel::binomial(int n_steps, double dt) {
    TreeModel t;
    t.n_steps = n_steps;
    t.dt = dt;
    const double s = std::sqrt(dt);
    t.branches = {{0.5, s, {}}, {0.5, -s, {}}};
    return t;
}

std::vector<int> tree_path(const TreeModel& tree, int level, long index) {
    std::vector<int> path(level);
    const int b = tree.n_branches();
    for (int s = level - 1; s >= 0; --s) {
        path[s] = static_cast<int>(index % b);
        index /= b;
    }
    return path;
}

TreeSolution solve_tree(const Driver& driver, const TreeClaim& terminal,
                        const TreeModel& tree, int terminal_step) {
    tree.validate();
    const int term = terminal_step < 0 ? tree.n_steps : terminal_step;
    if (term < 1 || term > tree.n_steps)
        throw std::invalid_argument("solve_tree: terminal_step off the grid");
    const int B = tree.n_branches();
    const int J = tree.n_atoms();
    const double dt = tree.dt;

    TreeSolution sol;
    sol.terminal_step = term;
    sol.Y.resize(term + 1);
    sol.Z.resize(term);
    sol.K.assign(term, std::vector<Eigen::VectorXd>(J));

    sol.Y[term].resize(tree.nodes_at(term));
    for (long i = 0; i < sol.Y[term].size(); ++i) {
        const auto path = tree_path(tree, term, i);
        sol.Y[term][i] = terminal(path);
        if (!std::isfinite(sol.Y[term][i]))
            throw std::invalid_argument("solve_tree: terminal value not finite");
    }

    std::vector<double> k(J);
    for (int n = term - 1; n >= 0; --n) {
        const long count = tree.nodes_at(n);
        sol.Y[n].resize(count);
        sol.Z[n].resize(count);
        for (int j = 0; j < J; ++j) sol.K[n][j].resize(count);
        const double t = n * dt;
        for (long i = 0; i < count; ++i) {
            double ey = 0.0, ez = 0.0;
            for (int j = 0; j < J; ++j) k[j] = 0.0;
            for (int c = 0; c < B; ++c) {
                const double y_child = sol.Y[n + 1][i * B + c];
                const auto& br = tree.branches[c];
                ey += br.prob * y_child;
                ez += br.prob * y_child * br.db;
                for (int j = 0; j < J; ++j)
                    k[j] += br.prob * y_child * (br.jumps[j] - tree.intensities[j] * dt);
            }
            const double z = ez / dt;
            for (int j = 0; j < J; ++j)
                k[j] = tree.intensities[j] > 0.0 ? k[j] / (tree.intensities[j] * dt) : 0.0;

            double y = ey + driver.eval(t, ey, z, k) * dt;
            if (driver.depends_on_y) {
                for (int it = 0; it < 200; ++it) {
                    const double y_new = ey + driver.eval(t, y, z, k) * dt;
                    if (std::abs(y_new - y) <= 1e-15 * (1.0 + std::abs(y_new))) { y = y_new; break; }
                    y = y_new;
                }
            }
            sol.Y[n][i] = y;
            sol.Z[n][i] = z;
            for (int j = 0; j < J; ++j) sol.K[n][j][i] = k[j];
        }
    }
    sol.Y0 = sol.Y[0][0];
    return sol;
}

} // namespace levyrisk

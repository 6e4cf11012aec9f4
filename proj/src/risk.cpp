#include "levyrisk/risk.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace levyrisk {

void RiskMeasureSpec::validate() const {
    if (!driver.eval) throw std::invalid_argument("RiskMeasureSpec: driver not set");
    if (driver.depends_on_y)
        throw std::invalid_argument("RiskMeasureSpec: risk-measure drivers must not depend on y");
}

double rho_static(const RiskMeasureSpec& spec, const Claim& claim,
                  const PathEnsemble& paths, const Eigen::MatrixXd& state,
                  int basis_degree) {
    spec.validate();
    return -solve_regression(spec.driver, claim, paths, state, basis_degree).Y0;
}

double rho_static_tree(const RiskMeasureSpec& spec, const TreeClaim& claim,
                       const TreeModel& tree) {
    spec.validate();
    return -solve_tree(spec.driver, claim, tree).Y0;
}

Eigen::MatrixXd rho_dynamic(const RiskMeasureSpec& spec, const Claim& claim,
                            int tau_step, const PathEnsemble& paths,
                            const Eigen::MatrixXd& state, int basis_degree) {
    spec.validate();
    if (tau_step < 1 || tau_step > paths.n_steps())
        throw std::invalid_argument("rho_dynamic: tau off the grid");
    const BsdeSolution sol =
        solve_regression(spec.driver, claim, paths, state, basis_degree, tau_step);
    Eigen::MatrixXd rho(paths.n_paths(), paths.n_steps() + 1);
    rho.leftCols(tau_step + 1) = -sol.Y;
    for (int n = tau_step + 1; n <= paths.n_steps(); ++n)
        rho.col(n) = -sol.Y.col(tau_step); // Y(t) = xi for t >= tau
    return rho;
}

std::vector<Eigen::VectorXd> rho_dynamic_tree(const RiskMeasureSpec& spec,
                                              const TreeClaim& claim,
                                              int tau_step, const TreeModel& tree) {
    spec.validate();
    const TreeSolution sol = solve_tree(spec.driver, claim, tree, tau_step);
    std::vector<Eigen::VectorXd> rho(tree.n_steps + 1);
    for (int n = 0; n <= tau_step; ++n) rho[n] = -sol.Y[n];
    const int B = tree.n_branches();
    for (int n = tau_step + 1; n <= tree.n_steps; ++n) {
        // xi is settled at tau: nodes past tau inherit their tau-ancestor value
        rho[n].resize(tree.nodes_at(n));
        long stride = 1;
        for (int s = 0; s < n - tau_step; ++s) stride *= B;
        for (long i = 0; i < rho[n].size(); ++i) rho[n][i] = -sol.Y[tau_step][i / stride];
    }
    return rho;
}

bool AxiomReport::all_pass() const {
    return std::all_of(checks.begin(), checks.end(),
                       [](const AxiomCheck& c) { return c.pass; });
}

std::string AxiomReport::to_json() const {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& c : checks)
        j.push_back({{"axiom", c.axiom},
                     {"pass", c.pass},
                     {"worst_violation", c.worst_violation},
                     {"location", c.location}});
    return j.dump(2);
}

namespace {

void record(AxiomCheck& check, double violation, const std::string& where, double tol) {
    if (violation > check.worst_violation) {
        check.worst_violation = violation;
        check.location = where;
    }
    if (violation > tol) check.pass = false;
}

std::string loc(int level, long node, const std::string& extra) {
    std::ostringstream os;
    os << "level=" << level << ",node=" << node;
    if (!extra.empty()) os << "," << extra;
    return os.str();
}

} // namespace

AxiomReport check_axioms(const RiskMeasureSpec& spec,
                         const std::vector<TreeClaim>& claims,
                         const std::vector<double>& lambdas,
                         const TreeModel& tree, double tol) {
    spec.validate();
    const int nc = static_cast<int>(claims.size());
    std::vector<TreeSolution> sols(nc);
    for (int i = 0; i < nc; ++i) sols[i] = solve_tree(spec.driver, claims[i], tree);

    AxiomReport rep;
    AxiomCheck convexity{"convexity", true, 0.0, ""};
    AxiomCheck monotonicity{"monotonicity", true, 0.0, ""};
    AxiomCheck translation{"translation_invariance", true, 0.0, ""};

    for (int a = 0; a < nc; ++a)
        for (int b = a + 1; b < nc; ++b) {
            for (double lam : lambdas) {
                TreeClaim mixed = [&, lam](std::span<const int> path) {
                    return lam * claims[a](path) + (1.0 - lam) * claims[b](path);
                };
                const TreeSolution mix = solve_tree(spec.driver, mixed, tree);
                for (int n = 0; n <= tree.n_steps; ++n)
                    for (long i = 0; i < mix.Y[n].size(); ++i) {
                        // rho(lam Fa + (1-lam) Fb) <= lam rho(Fa) + (1-lam) rho(Fb)
                        const double lhs = -mix.Y[n][i];
                        const double rhs = lam * (-sols[a].Y[n][i]) + (1.0 - lam) * (-sols[b].Y[n][i]);
                        std::ostringstream extra;
                        extra << "lambda=" << lam << ",pair=(" << a << "," << b << ")";
                        record(convexity, lhs - rhs, loc(n, i, extra.str()), tol);
                    }
            }

            // only ordered pairs feed the monotonicity axiom
            bool a_le_b = true, b_le_a = true;
            const long leaves = tree.nodes_at(tree.n_steps);
            for (long i = 0; i < leaves && (a_le_b || b_le_a); ++i) {
                const auto path = tree_path(tree, tree.n_steps, i);
                const double fa = claims[a](path), fb = claims[b](path);
                if (fa > fb) a_le_b = false;
                if (fb > fa) b_le_a = false;
            }
            const int lo = a_le_b ? a : (b_le_a ? b : -1);
            const int hi = a_le_b ? b : a;
            if (lo >= 0)
                for (int n = 0; n <= tree.n_steps; ++n)
                    for (long i = 0; i < sols[lo].Y[n].size(); ++i) {
                        // F_lo <= F_hi pathwise => rho(F_lo) >= rho(F_hi)
                        const double viol = -sols[hi].Y[n][i] - (-sols[lo].Y[n][i]);
                        std::ostringstream extra;
                        extra << "pair=(" << lo << "," << hi << ")";
                        record(monotonicity, viol, loc(n, i, extra.str()), tol);
                    }
        }

    const double shifts[] = {1.0, -0.7, 0.3};
    for (int a = 0; a < nc; ++a)
        for (double sh : shifts) {
            TreeClaim shifted = [&, sh](std::span<const int> path) { return claims[a](path) + sh; };
            const TreeSolution ssol = solve_tree(spec.driver, shifted, tree);
            for (int n = 0; n <= tree.n_steps; ++n)
                for (long i = 0; i < ssol.Y[n].size(); ++i) {
                    const double viol =
                        std::abs((-ssol.Y[n][i]) - ((-sols[a].Y[n][i]) - sh));
                    std::ostringstream extra;
                    extra << "claim=" << a << ",shift=" << sh;
                    record(translation, viol, loc(n, i, extra.str()), tol);
                }
        }

    rep.checks = {convexity, monotonicity, translation};

    // zero-one law on first-step cylinder events, applicable when g(t,0,0) = 0
    std::vector<double> zeros(tree.n_atoms(), 0.0);
    bool g_zero = true;
    for (int n = 0; n < tree.n_steps; ++n)
        if (std::abs(spec.driver.eval(n * tree.dt, 0.0, 0.0, zeros)) > 0.0) g_zero = false;
    if (g_zero) {
        AxiomCheck zero_one{"zero_one_law", true, 0.0, ""};
        const int B = tree.n_branches();
        for (int mask = 1; mask < (1 << B) - 1; ++mask)
            for (int a = 0; a < nc; ++a) {
                TreeClaim cut = [&, mask](std::span<const int> path) {
                    return (mask >> path[0]) & 1 ? claims[a](path) : 0.0;
                };
                const TreeSolution csol = solve_tree(spec.driver, cut, tree);
                for (int n = 1; n <= tree.n_steps; ++n) {
                    long stride = 1;
                    for (int s = 0; s < n - 1; ++s) stride *= B;
                    for (long i = 0; i < csol.Y[n].size(); ++i) {
                        const int first = static_cast<int>((i / stride) % B);
                        const double expect = (mask >> first) & 1 ? -sols[a].Y[n][i] : 0.0;
                        std::ostringstream extra;
                        extra << "claim=" << a << ",event_mask=" << mask;
                        record(zero_one, std::abs(-csol.Y[n][i] - expect),
                               loc(n, i, extra.str()), tol);
                    }
                }
            }
        rep.checks.push_back(zero_one);
    }
    return rep;
}

DualResult rho_dual(const Claim& claim, const ScenarioFamily& family,
                    const MarketModel& model, const PathEnsemble& paths,
                    const Eigen::MatrixXd& claim_state) {
    if (family.scenarios.empty()) throw std::invalid_argument("rho_dual: empty scenario family");
    const int P = paths.n_paths();
    const int N = paths.n_steps();
    if (claim_state.rows() != P || claim_state.cols() != N + 1)
        throw std::invalid_argument("rho_dual: claim_state must be n_paths x (n_steps+1)");

    Eigen::VectorXd x(P), row(N + 1);
    for (int p = 0; p < P; ++p) {
        row = claim_state.row(p);
        x[p] = claim.payoff({row.data(), static_cast<std::size_t>(row.size())});
    }

    DualResult res;
    res.scenario_values.reserve(family.scenarios.size());
    for (std::size_t s = 0; s < family.scenarios.size(); ++s) {
        const Scenario& scen = family.scenarios[s];
        scen.validate(model);
        const Eigen::MatrixXd m = girsanov_density(paths, scen);
        const Eigen::VectorXd mt = m.col(N);
        const double penalty = family.penalty ? family.penalty(scen, mt)
                                              : relative_entropy(mt).value;
        const double value = (mt.array() * (-x.array())).mean() - penalty;
        res.scenario_values.push_back(value);
        if (res.argmax_index < 0 || value > res.value) {
            res.value = value;
            res.argmax_index = static_cast<int>(s);
            res.argmax = scen;
        }
    }
    return res;
}

} // namespace levyrisk

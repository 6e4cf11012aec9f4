// BSDE-induced static and dynamic convex risk measures, the dual/entropic
// representation over finite scenario families, and the axiom test battery
// (run node-wise on the exact tree oracle).

#ifndef LEVYRISK_RISK_HPP
#define LEVYRISK_RISK_HPP

#include <string>
#include <vector>

#include "levyrisk/bsde.hpp"
#include "levyrisk/tree.hpp"

namespace levyrisk {

// A risk-measure driver: no y-dependence, no consumption argument.
struct RiskMeasureSpec {
    Driver driver;
    std::string label;

    void validate() const; // rejects depends_on_y
};

// rho(F) = -Y0 of the BSDE with terminal F. Monte Carlo route.
double rho_static(const RiskMeasureSpec& spec, const Claim& claim,
                  const PathEnsemble& paths, const Eigen::MatrixXd& state,
                  int basis_degree = 3);

// Exact route on the tree oracle.
double rho_static_tree(const RiskMeasureSpec& spec, const TreeClaim& claim,
                       const TreeModel& tree);

// Dynamic risk rho_t(xi, tau) = -Y(t) for t <= tau and -xi for t >= tau,
// for a deterministic grid time tau (index on the grid). Returns the
// n_paths x (n_steps+1) process.
Eigen::MatrixXd rho_dynamic(const RiskMeasureSpec& spec, const Claim& claim,
                            int tau_step, const PathEnsemble& paths,
                            const Eigen::MatrixXd& state, int basis_degree = 3);

// Tree variant: per-level node values of rho_t, levels 0..n_steps.
std::vector<Eigen::VectorXd> rho_dynamic_tree(const RiskMeasureSpec& spec,
                                              const TreeClaim& claim,
                                              int tau_step, const TreeModel& tree);

struct AxiomCheck {
    std::string axiom;
    bool pass = true;
    double worst_violation = 0.0;
    std::string location;
};

struct AxiomReport {
    std::vector<AxiomCheck> checks;
    bool all_pass() const;
    std::string to_json() const; // per-axiom pass/fail, worst violation, location
};

// Node-wise verification of convexity, monotonicity and translation
// invariance on the exact tree oracle, over every claim pair and every
// lambda in `lambdas`; when g(t,0,0) = 0, also the zero-one law on events
// generated by the first tree step. Violations beyond `tol` are reported,
// never thrown.
AxiomReport check_axioms(const RiskMeasureSpec& spec,
                         const std::vector<TreeClaim>& claims,
                         const std::vector<double>& lambdas,
                         const TreeModel& tree, double tol = 1e-12);

// A finite scenario family with a penalty (entropic by default: the penalty
// of a scenario is the Monte Carlo relative entropy of its density).
struct ScenarioFamily {
    std::vector<Scenario> scenarios;
    std::function<double(const Scenario&, const Eigen::VectorXd& density_T)> penalty; // optional
};

struct DualResult {
    double value = 0.0;
    int argmax_index = -1;
    Scenario argmax;
    std::vector<double> scenario_values; // E_Q[-X] - penalty per scenario
};

// sup over the family of E[M_theta(T)(-X)] - penalty, all scenarios priced
// on the shared ensemble (common random numbers). Ties keep the first index.
DualResult rho_dual(const Claim& claim, const ScenarioFamily& family,
                    const MarketModel& model, const PathEnsemble& paths,
                    const Eigen::MatrixXd& claim_state);

} // namespace levyrisk

#endif

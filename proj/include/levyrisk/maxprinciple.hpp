// Stochastic maximum principle machinery for controlled wealth dynamics:
// the Hamiltonian, Monte Carlo adjoint estimation, the necessary-condition
// checker, and the two worked closed forms (terminal-utility maximization
// and quadratic-driver risk minimization).

#ifndef LEVYRISK_MAXPRINCIPLE_HPP
#define LEVYRISK_MAXPRINCIPLE_HPP

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "levyrisk/bsde.hpp"
#include "levyrisk/market.hpp"

namespace levyrisk {

// A control problem over the FB pair
//   dX = b dt + sigma dB + sum_j gamma_j dNtilde_j,      X(0) = x0,
//   dY = -g dt + Z dB + sum_j K_j dNtilde_j,             Y(T) = h(X(T)),
//   J(u) = E[ int f dt + phi(X(T)) ] + psi(Y(0)).
// Coefficients are evaluatable in (t, x, y, z, k, u). The simulators assume
// wealth-type forward dynamics b = u x b0(t), sigma = u x sigma0(t) (so X
// stays positive under the exact log scheme) and backward drivers that do
// not read the forward state; fully coupled FBSDE control is out of scope.
struct ControlProblem {
    using Coefficient =
        std::function<double(double t, double x, double y, double z,
                             std::span<const double> k, double u)>;

    Coefficient b, sigma, g, f;          // null means identically 0
    std::vector<Coefficient> gamma;      // per atom
    std::vector<double> intensities;     // lambda_j of the jump measure
    std::function<double(double)> h, h_prime;     // backward terminal (null: no backward part)
    std::function<double(double)> phi, phi_prime; // terminal reward
    std::function<double(double)> psi, psi_prime; // reward of Y(0)
    std::pair<double, double> control_set{-10.0, 10.0};
    double delay = 0.0;                  // G_t = F_{t - delay}

    // wealth-dynamics structure shared by the simulators
    Curve b0, sigma0;
    double T = 1.0;
    int n_steps = 100;
    double x0 = 1.0;

    // Finite-difference smoothness probes at randomized points: every
    // coefficient and its central differences must be finite.
    void validate(std::uint64_t seed = 11, int n_probes = 64) const;

    // sup_pi E[U(X_pi(T))] with no running reward and no backward part.
    static ControlProblem terminal_utility(const MarketModel& market,
                                           std::function<double(double)> U,
                                           std::function<double(double)> U_prime,
                                           double x0);
    // inf_pi rho(X_pi(T)) with rho induced by g(z) = -z^2/2; J = Y(0).
    static ControlProblem quadratic_risk(const MarketModel& market, double x0);
};

// The Hamiltonian f + g lambda + b p + sigma q + sum_j gamma_j r_j lambda_j
// at one point.
double hamiltonian(const ControlProblem& problem, double t, double x, double y,
                   double z, std::span<const double> k, double u, double lambda,
                   double p, double q, std::span<const double> r_atoms);

// Exact log-scheme simulation of dX = u X [b0 dt + sigma0 dB]; returns the
// n_paths x (n_steps+1) wealth matrix.
Eigen::MatrixXd simulate_wealth(const ControlProblem& problem, const Curve& u,
                                const PathEnsemble& paths);

// J(u) with its Monte Carlo standard error.
McEstimate performance(const ControlProblem& problem, const Curve& u,
                       const PathEnsemble& paths, int basis_degree = 3);

// Forward/backward adjoint sample paths of one control.
struct AdjointState {
    Eigen::MatrixXd lambda;           // n_paths x (N+1), lambda(0) = psi'(Y(0))
    Eigen::MatrixXd p;                // n_paths x (N+1), p(T) = phi' + lambda(T) h'
    Eigen::MatrixXd q;                // n_paths x N
    std::vector<Eigen::MatrixXd> r;   // per atom
};

AdjointState solve_adjoint(const ControlProblem& problem, const Curve& u,
                           const PathEnsemble& paths, int basis_degree = 3);

struct NecessaryReport {
    McEstimate gateaux;                      // d/da J(u + a beta) at a = 0
    McEstimate j_base;                       // J(u)
    std::vector<McEstimate> hamiltonian_u;   // per grid step: mean dH/du with s.e.
    double max_conditional_residual = 0.0;   // max_t RMS of fitted E[dH/du | G_t]
};

// Central finite-difference Gateaux derivative of J along the bounded
// perturbation beta (common random numbers across the +/- evaluations),
// plus the Monte Carlo estimate of E[dH/du | G_t] on the grid from the
// adjoint samples; conditioning uses the regression basis on the state
// delayed by `problem.delay`.
NecessaryReport check_necessary(const ControlProblem& problem, const Curve& u,
                                const Curve& beta, const PathEnsemble& paths,
                                double h_fd, int basis_degree = 3);

struct Utility {
    std::function<double(double)> U;
    std::function<double(double)> U_prime;
    std::function<double(double)> I; // (U')^{-1}
    double power_delta = 0.0;        // 0 marks log utility
    static Utility log_utility();
    static Utility power(double delta); // U(x) = x^delta / delta, delta != 0, 1
};

struct UtilityResult {
    double c = 0.0;               // multiplier solving x = E[I(c Gamma(T)) Gamma(T)]
    double c_closed_form = 0.0;   // moment-reduction value of the same equation
    Eigen::VectorXd terminal_wealth;
    Eigen::VectorXd gamma_T;      // pricing density samples
    McEstimate expected_utility;  // E[U(X_hat(T))]
    McEstimate budget_residual;   // E[Gamma(T) X_hat(T)] - x
};

// Optimal terminal wealth X_hat(T) = I(c Gamma(T)) with c from the empirical
// budget equation, solved by bisection and cross-checked against the moment
// reduction to 1e-10. No-jump markets only.
UtilityResult utility_optimize(const Utility& utility, const MarketModel& market,
                               double x0, const PathEnsemble& paths);

struct RiskMinResult {
    double analytic = 0.0;     // -x - int 1/2 (b0/sigma0)^2 dt
    McEstimate mc;             // -x - E_Q[ln Gamma(T)] sampled under P
    McEstimate entropy;        // E[Gamma(T) ln Gamma(T)]
    Curve z_hat;               // b0/sigma0
};

// Minimal risk of the quadratic-driver problem, both routes. Deterministic
// coefficients, no jumps.
RiskMinResult risk_minimize_quadratic(const MarketModel& market, double x0,
                                      const PathEnsemble& paths);

} // namespace levyrisk

#endif

// BSDEs with jumps: exact linear formula (Doleans-Dade form), regression
// Monte Carlo for general Lipschitz drivers, and the comparison-check
// harness. The small-tree oracle lives in tree.hpp.

#ifndef LEVYRISK_BSDE_HPP
#define LEVYRISK_BSDE_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "levyrisk/market.hpp"

namespace levyrisk {

// The BSDE driver g(t, y, z, k). k is the per-atom jump component, one entry
// per atom of the jump measure. lipschitz_C and the probe box feed the
// randomized Lipschitz spot-check; theta_bounds declare the per-atom
// domination interval (lower bound > -1) used by comparison arguments.
struct Driver {
    std::function<double(double, double, double, std::span<const double>)> eval;
    double lipschitz_C = 0.0;
    std::vector<std::pair<double, double>> theta_bounds; // per atom, [-1+eps, psi_j]
    bool depends_on_y = false;
    bool concave = false;     // declared concavity in (z, k)
    double probe_box = 2.0;   // Lipschitz probes drawn in [-box, box]

    // Checks eval(t,0,0,0) is finite on the grid and spot-checks the Lipschitz
    // bound on randomized probe pairs. Throws std::invalid_argument.
    void validate(const std::vector<double>& grid,
                  const std::vector<double>& intensities,
                  std::uint64_t seed = 7, int n_probes = 256) const;

    static Driver zero(int n_atoms = 0);
    // g(z) = -z^2/2, the entropic driver; Lipschitz on the declared probe box.
    static Driver quadratic_z(int n_atoms = 0);
};

// Coefficients of the linear driver phi + alpha y + beta z + sum gamma_j k_j lambda_j.
struct LinearDriverParams {
    Curve phi;
    Curve alpha;
    Curve beta;
    std::vector<Curve> gamma_coef; // per atom, > -1 on the grid

    void validate(const std::vector<double>& grid) const;
};

// A T-claim. The payoff sees one path's Markov-state samples on the grid
// (entries 0..terminal_step); terminal claims read the last entry.
struct Claim {
    std::function<double(std::span<const double>)> payoff;

    static Claim constant(double a);
    static Claim terminal(std::function<double(double)> f);
};

struct BsdeSolution {
    Eigen::MatrixXd Y;                // n_paths x (terminal_step + 1)
    Eigen::MatrixXd Z;                // n_paths x terminal_step
    std::vector<Eigen::MatrixXd> K;   // per atom, n_paths x terminal_step
    double Y0 = 0.0;
    std::string method_tag;           // closed_form | regression | tree
    std::vector<std::string> notes;
};

// Least-squares projection of target onto the polynomial basis
// {1, s, ..., s^degree} of the state sample, evaluated back at the samples.
// Degenerate state (zero variance) falls back to the plain mean; a singular
// non-degenerate system throws naming `step`.
Eigen::VectorXd regress_conditional(const Eigen::VectorXd& state,
                                    const Eigen::VectorXd& target,
                                    int degree, int step);

// Exact linear-BSDE solution via the stochastic exponential Gamma:
//   Y(t) = E[ Gamma(T)/Gamma(t) F + int_t^T Gamma(s)/Gamma(t) phi(s) ds | F_t ].
// Conditional expectations are least-squares projections on polynomials in
// log Gamma (degree basis_degree); Y0 is the plain Monte Carlo mean. The
// claim payoff sees the path of Gamma itself. Flags ill-conditioned Gamma
// (max/min beyond 1e12) in the notes.
BsdeSolution solve_linear(const LinearDriverParams& params, const Claim& claim,
                          const PathEnsemble& paths, int basis_degree = 3);

// Backward regression scheme on the supplied Markov state (n_paths x N+1):
// Z and K from martingale-increment regressions of Y_{n+1}, then the
// implicit-in-Y step  Y_n = E_n[Y_{n+1}] + g(t_n, Y_n, Z_n, K_n) dt  by
// fixed-point iteration (<= 20 sweeps, tol 1e-12). A terminal_step < N
// solves the stopped BSDE: driver zeroed after that grid point and
// Y(t) = claim for t >= terminal_step.
BsdeSolution solve_regression(const Driver& driver, const Claim& claim,
                              const PathEnsemble& paths,
                              const Eigen::MatrixXd& state,
                              int basis_degree = 3, int terminal_step = -1);

// Same scheme with the terminal condition supplied as per-path samples
// (claims that are not functions of the regression state, e.g. adjoint
// terminal values).
BsdeSolution solve_regression(const Driver& driver,
                              const Eigen::VectorXd& terminal_samples,
                              const PathEnsemble& paths,
                              const Eigen::MatrixXd& state,
                              int basis_degree = 3, int terminal_step = -1);

struct ComparisonReport {
    double max_excess = 0.0;  // max over paths/steps of Y1 - Y2
    int worst_path = -1;
    int worst_step = -1;
    long n_violations = 0;    // entries with Y1 - Y2 > tolerance
    bool pass = true;
};

// Reports where sol1 exceeds sol2 beyond tolerance. Grids must match.
ComparisonReport check_comparison(const BsdeSolution& sol1, const BsdeSolution& sol2,
                                  double tolerance);

// Export, one row per path-step: path, t, Y, Z, K_j...
void write_solution_csv(const BsdeSolution& sol, const std::vector<double>& grid,
                        const std::string& filename);

} // namespace levyrisk

#endif

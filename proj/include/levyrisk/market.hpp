// Ito-Levy driving noise: market model with a finite-atom jump measure,
// seeded path ensembles, stochastic exponentials, Girsanov densities and
// relative entropy.

#ifndef LEVYRISK_MARKET_HPP
#define LEVYRISK_MARKET_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "levyrisk/curve.hpp"

namespace levyrisk {

// One atom of the jump measure: mark zeta, intensity lambda (1/yr) and a
// relative jump amplitude curve gamma(t).
struct JumpAtom {
    double zeta = 1.0;   // jump mark, nonzero
    double lambda = 0.0; // intensity, >= 0
    Curve gamma;         // relative jump amplitude at that mark
};

// Deterministic market dynamics on [0, T]; the single source of truth for
// drift, volatility, jump amplitudes and the (finite-atom) jump measure.
struct MarketModel {
    double T = 1.0;     // horizon, years
    int n_steps = 100;  // uniform grid steps
    Curve mu;           // drift rate, 1/yr
    Curve sigma;        // volatility, 1/sqrt(yr)
    Curve r;            // risk-free rate, 1/yr (default 0)
    std::vector<JumpAtom> atoms;

    double dt() const { return T / n_steps; }

    // Throws std::invalid_argument on: n_steps == 0, sigma <= 0 on the grid,
    // negative intensities, duplicate marks, or non-finite curve values.
    void validate() const;
};

// A Girsanov pair (theta0(t), theta1_j(t)) defining a measure change.
struct Scenario {
    Curve theta0;
    std::vector<Curve> theta1; // one curve per atom

    // Requires theta1_j(t) > -1 on the grid of `model`.
    void validate(const MarketModel& model) const;
};

// Seeded Monte Carlo sample of Brownian increments and Poisson jump counts
// on the uniform grid. Immutable after creation; safe to share read-only.
struct PathEnsemble {
    std::vector<double> grid;          // t_0 = 0 < ... < t_N = T
    Eigen::MatrixXd dB;                // n_paths x n_steps, sqrt(dt) scale
    std::vector<Eigen::MatrixXi> jumps;// per atom: n_paths x n_steps counts
    std::vector<double> intensities;   // lambda_j echoed from the model
    std::uint64_t seed = 0;

    int n_paths() const { return static_cast<int>(dB.rows()); }
    int n_steps() const { return static_cast<int>(dB.cols()); }
    double dt() const { return grid.size() > 1 ? grid[1] - grid[0] : 0.0; }
    int n_atoms() const { return static_cast<int>(jumps.size()); }
};

// Draws the ensemble. Deterministic function of (model, n_paths, seed):
// path i is generated from its own substream, independent of n_paths.
PathEnsemble simulate(const MarketModel& model, int n_paths, std::uint64_t seed);

// Samples the Doleans-Dade exponential Gamma with
//   dGamma = Gamma(t-) [alpha dt + beta dB + sum_j gamma_j dNtilde_j]
// using the exact log form on the grid, so Gamma stays strictly positive and
// Gamma(0) = 1 on every path. Requires 1 + gamma_j(t) > 0.
Eigen::MatrixXd stochastic_exponential(const PathEnsemble& paths,
                                       const Curve& alpha,
                                       const Curve& beta,
                                       const std::vector<Curve>& gamma);

// Girsanov density M_theta: the driftless exponential with beta = theta0,
// gamma_j = theta1_j.
Eigen::MatrixXd girsanov_density(const PathEnsemble& paths, const Scenario& scenario);

// Monte Carlo estimate of H(Q|P) = E[M log M] from terminal density samples.
// Rejects non-positive samples.
McEstimate relative_entropy(const Eigen::VectorXd& density_T);

// Debug export, one row per path-step: path, t, dB, counts per atom.
void write_ensemble_csv(const PathEnsemble& paths, const std::string& filename);

} // namespace levyrisk

#endif

// The entropic zero-sum game between scenario and portfolio: generator of
// the (s, x, m) state, first-order system for the saddle controls, closed
// form of the game value, and a lattice verification checker for the
// HJBI conditions.

#ifndef LEVYRISK_HJBI_HPP
#define LEVYRISK_HJBI_HPP

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "levyrisk/market.hpp"

namespace levyrisk {

// State (s, x, m): time, wealth, scenario-density value. Solvency region
// [0, T] x R+ x R+.
struct GameSpec {
    MarketModel market;
};

struct GameControls {
    double theta0 = 0.0;
    std::vector<double> theta1; // per atom, > -1
    double w = 0.0;
};

// A candidate value function with analytic first/second partials.
struct CandidateValue {
    std::function<double(double, double, double)> phi;
    std::function<double(double, double, double)> phi_s, phi_x, phi_m;
    std::function<double(double, double, double)> phi_xx, phi_mm, phi_xm;
    Curve kappa;

    // -xm - m log m + kappa(s) m with kappa(s) = -int_s^T (mu/sigma)^2/2 dt,
    // so the boundary value at s = T is -xm - m log m.
    static CandidateValue entropic_ansatz(const MarketModel& market);
};

// The game generator applied to phi at (s, x, m) under (theta, w): drift,
// diffusion and cross terms plus the finite atom sum of the jump integrand.
// Requires 1 + theta1_j > 0 and an interior point of the solvency region.
double generator_apply(const GameSpec& spec, const CandidateValue& phi,
                       double s, double x, double m, const GameControls& controls);

// The reduced generator of the entropic ansatz divided by m:
//   kappa'(s) - w mu - theta0^2/2 - w theta0 sigma
//     + sum_j lambda_j [theta1_j (1 - w gamma_j) - (1+theta1_j) log(1+theta1_j)].
// generator_apply on the ansatz equals m times this bracket.
double entropic_bracket(const GameSpec& spec, double s, const GameControls& controls);

struct FirstOrderSolution {
    GameControls controls;
    double residual = 0.0;
    int iterations = 0;
};

// Stationary point of the reduced generator in (theta0, theta1, w):
//   theta0 + w sigma = 0,
//   w gamma_j + log(1 + theta1_j) = 0        (per atom),
//   mu + theta0 sigma + sum_j lambda_j theta1_j gamma_j = 0,
// by damped Newton from the origin; the no-jump case returns the closed form
// theta0 = -mu/sigma, w = mu/sigma^2 directly. Residual <= 1e-12 or throws
// after 100 iterations.
FirstOrderSolution solve_first_order(const GameSpec& spec, double s);

// Closed-form game value -xm - m log m + kappa(s) m for no-jump markets,
// kappa by quadrature on the model grid.
double value_closed(const GameSpec& spec, double s, double x, double m);

struct VerifyOptions {
    int n_s = 20, n_x = 20, n_m = 20;
    double x_lo = 0.5, x_hi = 2.0;
    double m_lo = 0.5, m_hi = 2.0;
    int n_probes = 41;
    double theta0_lo = -2.0, theta0_hi = 2.0;
    double w_lo = -2.0, w_hi = 2.0;
    double theta1_lo = -0.9, theta1_hi = 3.0;
    double tolerance = 1e-8;
};

struct HjbiCondition {
    std::string name;
    bool pass = true;
    double worst_violation = 0.0;
    std::array<double, 3> location{0, 0, 0}; // (s, x, m)
    double worst_probe = 0.0;
};

struct HjbiReport {
    std::vector<HjbiCondition> conditions;
    bool all_pass() const;
    std::string to_json() const;
};

// Checks, at every lattice point, with f = 0:
//   (i)  A^{theta_hat, w} phi >= 0 over the w probe grid,
//   (ii) A^{theta, w_hat} phi <= 0 over the theta probe grid,
//   (iii)|A^{theta_hat, w_hat} phi| <= tolerance,
// plus the terminal boundary identity phi(T, x, m) = -xm - m log m.
// Violations are reported, never thrown. Controls are curves of s.
HjbiReport verify_hjbi(const GameSpec& spec, const CandidateValue& phi,
                       const std::function<GameControls(double)>& controls,
                       const VerifyOptions& opt = {});

} // namespace levyrisk

#endif

// Stackelberg newsvendor game in the deterministic-coefficient reduction:
// Gaussian demand closed forms, follower response through the backward ODE
// for Y, and the leader price from the first-order condition.

#ifndef LEVYRISK_NEWSVENDOR_HPP
#define LEVYRISK_NEWSVENDOR_HPP

#include <string>
#include <vector>

#include "levyrisk/curve.hpp"

namespace levyrisk {

struct NewsvendorSpec {
    double K = 20.0;     // demand intercept
    double M = 4.0;      // production cost per unit
    double S = 1.0;      // salvage price per unit
    double sigma = 2.0;  // demand noise scale
    double delta = 0.1;  // information delay
    double T = 1.0;      // horizon
    int n_steps = 200;   // grid steps (even, for the quadrature checks)
    Curve demand_mean = 10.0;  // m_t
    Curve demand_sd = 2.0;     // sbar_t > 0

    double dt() const { return T / n_steps; }
    void validate() const; // S < M < K, sbar > 0 on the grid, delta < T
};

// Standard normal CDF / PDF / quantile used by the Gaussian closed forms.
double normal_cdf(double z);
double normal_pdf(double z);
double normal_quantile(double p); // inverse CDF, |p - cdf(quantile(p))| ~ 1e-15

// Gaussian closed forms of the conditional tail functionals:
//   h_t(x) = P(X_t <= x | G_t),  f_t(x) = E[X_t 1_{X_t <= x} | G_t].
std::pair<double, double> h_and_f(const NewsvendorSpec& spec, double t, double x);

// Expected sales at margin y: F_t(y) = Q (w-S)/(y+w-S) + f_t(Q) with
// Q = h_t^{-1}(y / (y + w - S)). Strictly increasing in y.
double sales_F(const NewsvendorSpec& spec, double t, double w, double y);

// Inverse of sales_F in y by log-space bisection on a bracket grown
// geometrically from (0, K]; throws with the offending (t, w, Y) when no
// bracket encloses the target.
double sales_F_inverse(const NewsvendorSpec& spec, double t, double w, double target);

struct FollowerResponse {
    std::vector<double> grid;
    std::vector<double> Y;      // backward state, Y(T) = 0
    std::vector<double> Q;      // order quantity
    std::vector<double> R;      // retail price
};

// Solves Y' = -F_t^{-1}(w_t, Y_t), Y(T) = 0 by backward RK4, then
// R = w + F^{-1}(w, Y) and Q from the first-order ratio. Requires
// w(t) in (S, K) on the grid.
FollowerResponse follower_response(const NewsvendorSpec& spec, const Curve& w);

struct StackelbergSolution {
    std::vector<double> grid;
    std::vector<double> w_hat;
    std::vector<double> Q_hat;
    std::vector<double> R_hat;
    std::vector<double> Y;
    std::vector<double> lambda;
    int sweeps = 0;
    std::vector<double> sweep_history; // sup-norm change of w per sweep
};

// Fixed point of the (w -> Y -> lambda -> w) loop: lambda integrated forward
// from lambda(0) = 0 with dH/dy by central differences, w_t from the
// first-order condition
//   (w - M) dQ/dw + Q + lambda dF^{-1}/dw = 0
// root-found on (M, K) at every grid point. Damping 1/2, sup-norm tolerance
// 1e-8 on w, at most 200 sweeps (error with the sweep history otherwise).
StackelbergSolution leader_price(const NewsvendorSpec& spec);

// Residual of the leader first-order condition at the returned solution.
double leader_foc_residual(const NewsvendorSpec& spec, const StackelbergSolution& sol,
                           int step);

// E[ int_delta^T (w_t - M) Q_hat(w)_t dt ] for a given price curve, by
// trapezoid over the grid points with t >= delta.
double leader_profit(const NewsvendorSpec& spec, const Curve& w);

// t, w, Q, R, Y, lambda per grid point.
void write_stackelberg_csv(const StackelbergSolution& sol, const std::string& filename);

} // namespace levyrisk

#endif

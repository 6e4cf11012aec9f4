// Deterministic coefficient curves t -> R and grid quadrature helpers.

#ifndef LEVYRISK_CURVE_HPP
#define LEVYRISK_CURVE_HPP

#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace levyrisk {

// A deterministic curve t -> R. Implicitly constructible from a constant so
// model setup reads like the formulas (mu = 0.05, sigma = 0.2, ...).
class Curve {
public:
    Curve() : fn_(nullptr), value_(0.0) {}
    Curve(double c) : fn_(nullptr), value_(c) {}
    Curve(std::function<double(double)> f) : fn_(std::move(f)), value_(0.0) {}

    double operator()(double t) const { return fn_ ? fn_(t) : value_; }
    bool is_constant() const { return !fn_; }

private:
    std::function<double(double)> fn_;
    double value_;
};

// Composite trapezoid of f over [a, b] with n uniform subintervals.
// All closed-form values in the toolkit that involve an integral of a
// coefficient curve go through this single routine, so independent routes
// that quote "the same integral" agree bit-for-bit.
inline double grid_integral(const std::function<double(double)>& f,
                            double a, double b, int n_sub) {
    if (n_sub < 1) throw std::invalid_argument("grid_integral: n_sub must be >= 1");
    if (b <= a) return 0.0;
    const double h = (b - a) / n_sub;
    double acc = 0.5 * (f(a) + f(b));
    for (int i = 1; i < n_sub; ++i) acc += f(a + i * h);
    return acc * h;
}

inline double grid_integral(const Curve& c, double a, double b, int n_sub) {
    if (c.is_constant()) return c(0.0) * std::max(0.0, b - a);
    return grid_integral([&c](double t) { return c(t); }, a, b, n_sub);
}

// A sampled value with its Monte Carlo standard error.
struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

} // namespace levyrisk

#endif

#include "levyrisk/newsvendor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace levyrisk {

void NewsvendorSpec::validate() const {
    if (!(S < M)) throw std::invalid_argument("NewsvendorSpec: salvage must be below cost");
    if (!(M < K)) throw std::invalid_argument("NewsvendorSpec: cost must be below the intercept");
    if (!(delta >= 0.0 && delta < T))
        throw std::invalid_argument("NewsvendorSpec: need 0 <= delta < T");
    if (n_steps < 2 || n_steps % 2 != 0)
        throw std::invalid_argument("NewsvendorSpec: n_steps must be even and >= 2");
    for (int n = 0; n <= n_steps; ++n) {
        const double t = n * dt();
        if (!(demand_sd(t) > 0.0))
            throw std::invalid_argument("NewsvendorSpec: demand sd must be positive");
        if (!std::isfinite(demand_mean(t)))
            throw std::invalid_argument("NewsvendorSpec: non-finite demand mean");
    }
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z * 0.7071067811865475244); }

double normal_pdf(double z) {
    return std::exp(-0.5 * z * z) * 0.3989422804014326779;
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::invalid_argument("normal_quantile: p must be in (0, 1)");
    // Acklam's rational approximation, then two Newton polish steps.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double q;
    if (p < plow) {
        const double u = std::sqrt(-2.0 * std::log(p));
        q = (((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
            ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
    } else if (p > 1.0 - plow) {
        const double u = std::sqrt(-2.0 * std::log(1.0 - p));
        q = -(((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
            ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
    } else {
        const double u = p - 0.5, t = u * u;
        q = (((((a[0] * t + a[1]) * t + a[2]) * t + a[3]) * t + a[4]) * t + a[5]) * u /
            (((((b[0] * t + b[1]) * t + b[2]) * t + b[3]) * t + b[4]) * t + 1.0);
    }
    for (int i = 0; i < 2; ++i) {
        const double e = normal_cdf(q) - p;
        const double pdf = normal_pdf(q);
        if (pdf > 0.0) q -= e / pdf;
    }
    return q;
}

std::pair<double, double> h_and_f(const NewsvendorSpec& spec, double t, double x) {
    const double m = spec.demand_mean(t), sd = spec.demand_sd(t);
    const double z = (x - m) / sd;
    return {normal_cdf(z), m * normal_cdf(z) - sd * normal_pdf(z)};
}

double sales_F(const NewsvendorSpec& spec, double t, double w, double y) {
    if (!(y > 0.0)) throw std::invalid_argument("sales_F: margin y must be positive");
    const double m = spec.demand_mean(t), sd = spec.demand_sd(t);
    // fractile clamped to the open unit interval; F saturates at the demand
    // mean for huge margins and the inverse reports a bracket failure there
    const double p =
        std::clamp(y / (y + w - spec.S), 1e-300, 1.0 - 1e-16);
    const double q = m + sd * normal_quantile(p);
    return q * (w - spec.S) / (y + w - spec.S) + h_and_f(spec, t, q).second;
}

double sales_F_inverse(const NewsvendorSpec& spec, double t, double w, double target) {
    double lo = 1e-12, hi = spec.K;
    double flo = sales_F(spec, t, w, lo);
    double fhi = sales_F(spec, t, w, hi);
    int grow = 0;
    while (flo > target && grow < 80) { lo *= 0.25; flo = sales_F(spec, t, w, lo); ++grow; }
    while (fhi < target && grow < 160) { hi *= 2.0; fhi = sales_F(spec, t, w, hi); ++grow; }
    if (flo > target || fhi < target) {
        std::ostringstream os;
        os << "sales_F_inverse: bracket failure at t=" << t << ", w=" << w
           << ", Y=" << target << " (F(" << lo << ")=" << flo << ", F(" << hi
           << ")=" << fhi << ")";
        throw std::runtime_error(os.str());
    }
    // F is increasing in y; bisect in log y for relative precision.
    double llo = std::log(lo), lhi = std::log(hi);
    for (int it = 0; it < 200 && lhi - llo > 4e-16 * std::max(1.0, std::abs(lhi)); ++it) {
        const double mid = 0.5 * (llo + lhi);
        if (sales_F(spec, t, w, std::exp(mid)) < target) llo = mid; else lhi = mid;
    }
    return std::exp(0.5 * (llo + lhi));
}

namespace {

double order_from_margin(const NewsvendorSpec& spec, double t, double w, double y) {
    const double p = y / (y + w - spec.S);
    return spec.demand_mean(t) + spec.demand_sd(t) * normal_quantile(p);
}

// w value at time t with linear interpolation between grid samples.
double w_at(const std::vector<double>& grid, const std::vector<double>& w, double t) {
    if (t <= grid.front()) return w.front();
    if (t >= grid.back()) return w.back();
    const double h = grid[1] - grid[0];
    const int i = std::min(static_cast<int>(t / h), static_cast<int>(grid.size()) - 2);
    const double a = (t - grid[i]) / h;
    return (1.0 - a) * w[i] + a * w[i + 1];
}

} // namespace

FollowerResponse follower_response(const NewsvendorSpec& spec, const Curve& w) {
    spec.validate();
    const int N = spec.n_steps;
    const double h = spec.dt();
    FollowerResponse resp;
    resp.grid.resize(N + 1);
    for (int n = 0; n <= N; ++n) {
        resp.grid[n] = n * h;
        const double wn = w(resp.grid[n]);
        if (!(wn > spec.S && wn < spec.K))
            throw std::invalid_argument("follower_response: w must lie in (S, K)");
    }

    resp.Y.assign(N + 1, 0.0);
    const auto slope = [&](double t, double y) {
        return -sales_F_inverse(spec, t, w(t), y);
    };
    // classical RK4, integrated backward from Y(T) = 0
    for (int n = N; n > 0; --n) {
        const double t = resp.grid[n];
        const double y = resp.Y[n];
        const double k1 = slope(t, y);
        const double k2 = slope(t - 0.5 * h, y - 0.5 * h * k1);
        const double k3 = slope(t - 0.5 * h, y - 0.5 * h * k2);
        const double k4 = slope(t - h, y - h * k3);
        resp.Y[n - 1] = y - h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
    }

    resp.Q.resize(N + 1);
    resp.R.resize(N + 1);
    for (int n = 0; n <= N; ++n) {
        const double t = resp.grid[n];
        const double wn = w(t);
        const double y = std::max(resp.Y[n], 0.0);
        const double margin = y > 0.0 ? sales_F_inverse(spec, t, wn, y)
                                      : sales_F_inverse(spec, t, wn, 0.0);
        resp.R[n] = wn + margin;
        resp.Q[n] = order_from_margin(spec, t, wn, margin);
    }
    return resp;
}

namespace {

// dH/dy of the leader Hamiltonian (p = q = 0 branch) by central differences.
double hamiltonian_y_derivative(const NewsvendorSpec& spec, double t, double w,
                                double y, double lambda, double fd) {
    auto ham = [&](double yy) {
        const double margin = sales_F_inverse(spec, t, w, std::max(yy, 0.0));
        return (w - spec.M) * order_from_margin(spec, t, w, margin) + lambda * margin;
    };
    return (ham(y + fd) - ham(y - fd)) / (2.0 * fd);
}

// Residual of the leader first-order condition at (t, w) given (Y, lambda).
double leader_g(const NewsvendorSpec& spec, double t, double w, double y,
                double lambda, double fd) {
    auto order = [&](double ww) {
        const double margin = sales_F_inverse(spec, t, ww, std::max(y, 0.0));
        return order_from_margin(spec, t, ww, margin);
    };
    auto margin_of = [&](double ww) {
        return sales_F_inverse(spec, t, ww, std::max(y, 0.0));
    };
    const double dq_dw = (order(w + fd) - order(w - fd)) / (2.0 * fd);
    const double dm_dw = (margin_of(w + fd) - margin_of(w - fd)) / (2.0 * fd);
    return (w - spec.M) * dq_dw + order(w) + lambda * dm_dw;
}

} // namespace

double leader_foc_residual(const NewsvendorSpec& spec, const StackelbergSolution& sol,
                           int step) {
    const double fd = 1e-5 * (spec.K - spec.S);
    return leader_g(spec, sol.grid[step], sol.w_hat[step], sol.Y[step],
                    sol.lambda[step], fd);
}

double leader_profit(const NewsvendorSpec& spec, const Curve& w) {
    const FollowerResponse resp = follower_response(spec, w);
    const int N = spec.n_steps;
    const double h = spec.dt();
    double acc = 0.0;
    for (int n = 0; n < N; ++n) {
        const double t0 = resp.grid[n], t1 = resp.grid[n + 1];
        if (t1 <= spec.delta) continue;
        const double a = std::max(t0, spec.delta);
        const double f0 = (w(t0) - spec.M) * resp.Q[n];
        const double f1 = (w(t1) - spec.M) * resp.Q[n + 1];
        // trapezoid, with the first cell clipped at delta
        const double frac = (t1 - a) / h;
        const double fa = f0 + (f1 - f0) * (a - t0) / h;
        acc += 0.5 * (fa + f1) * frac * h;
    }
    return acc;
}

StackelbergSolution leader_price(const NewsvendorSpec& spec) {
    spec.validate();
    const int N = spec.n_steps;
    const double h = spec.dt();
    const double fd = 1e-5 * (spec.K - spec.S);

    StackelbergSolution sol;
    sol.grid.resize(N + 1);
    for (int n = 0; n <= N; ++n) sol.grid[n] = n * h;
    sol.w_hat.assign(N + 1, 0.5 * (spec.M + spec.K));
    sol.lambda.assign(N + 1, 0.0);

    for (int sweep = 0; sweep < 200; ++sweep) {
        const Curve w_curve([&grid = sol.grid, &wv = sol.w_hat](double t) {
            return w_at(grid, wv, t);
        });
        const FollowerResponse resp = follower_response(spec, w_curve);
        sol.Y = resp.Y;

        // forward Heun integration of d lambda = dH/dy dt from lambda(0) = 0
        sol.lambda[0] = 0.0;
        for (int n = 0; n < N; ++n) {
            const double d0 = hamiltonian_y_derivative(spec, sol.grid[n], sol.w_hat[n],
                                                       sol.Y[n], sol.lambda[n], fd);
            const double pred = sol.lambda[n] + h * d0;
            const double d1 = hamiltonian_y_derivative(spec, sol.grid[n + 1], sol.w_hat[n + 1],
                                                       sol.Y[n + 1], pred, fd);
            sol.lambda[n + 1] = sol.lambda[n] + 0.5 * h * (d0 + d1);
        }

        // pointwise root of the first-order condition on (M, K)
        double change = 0.0;
        for (int n = 0; n <= N; ++n) {
            const double t = sol.grid[n];
            auto g = [&](double w) { return leader_g(spec, t, w, sol.Y[n], sol.lambda[n], fd); };
            const double lo_lim = spec.M + 1e-6 * (spec.K - spec.M);
            const double hi_lim = spec.K - 1e-6 * (spec.K - spec.M);
            double lo = lo_lim, hi = hi_lim;
            double glo = g(lo), ghi = g(hi);
            if (glo * ghi > 0.0) {
                // scan for a sign change
                bool found = false;
                double prev_w = lo, prev_g = glo;
                for (int i = 1; i <= 32 && !found; ++i) {
                    const double wi = lo_lim + (hi_lim - lo_lim) * i / 32.0;
                    const double gi = g(wi);
                    if (prev_g * gi <= 0.0) {
                        lo = prev_w; glo = prev_g; hi = wi; ghi = gi;
                        found = true;
                    }
                    prev_w = wi; prev_g = gi;
                }
                if (!found) {
                    std::ostringstream os;
                    os << "leader_price: no root of the first-order condition in (M, K)"
                       << " at t=" << t << "; G(" << lo_lim << ")=" << g(lo_lim)
                       << ", G(" << hi_lim << ")=" << g(hi_lim)
                       << " (the order map Q(w, Y) is w-independent at fixed Y, so the"
                       << " condition reduces to Q + lambda dF^{-1}/dw = 0 with all"
                       << " terms positive)";
                    throw std::runtime_error(os.str());
                }
            }
            for (int it = 0; it < 100 && hi - lo > 1e-13 * (spec.K - spec.M); ++it) {
                const double mid = 0.5 * (lo + hi);
                if (g(mid) * glo <= 0.0) hi = mid; else { lo = mid; glo = g(lo); }
            }
            const double root = 0.5 * (lo + hi);
            const double w_new = 0.5 * sol.w_hat[n] + 0.5 * root;
            change = std::max(change, std::abs(w_new - sol.w_hat[n]));
            sol.w_hat[n] = w_new;
        }
        sol.sweep_history.push_back(change);
        sol.sweeps = sweep + 1;
        if (change <= 1e-8) break;
        if (sweep == 199) {
            std::ostringstream os;
            os << "leader_price: fixed point did not converge; sweep sup-norms:";
            for (double c : sol.sweep_history) os << " " << c;
            throw std::runtime_error(os.str());
        }
    }

    // final follower response at the converged price
    const Curve w_final([&grid = sol.grid, &wv = sol.w_hat](double t) {
        return w_at(grid, wv, t);
    });
    const FollowerResponse resp = follower_response(spec, w_final);
    sol.Y = resp.Y;
    sol.Q_hat = resp.Q;
    sol.R_hat = resp.R;
    return sol;
}

void write_stackelberg_csv(const StackelbergSolution& sol, const std::string& filename) {
    std::ofstream f(filename);
    if (!f) throw std::runtime_error("write_stackelberg_csv: cannot open " + filename);
    f << std::setprecision(17) << "t,w,Q,R,Y,lambda\n";
    for (std::size_t n = 0; n < sol.grid.size(); ++n)
        f << sol.grid[n] << "," << sol.w_hat[n] << "," << sol.Q_hat[n] << ","
          << sol.R_hat[n] << "," << sol.Y[n] << "," << sol.lambda[n] << "\n";
}

} // namespace levyrisk

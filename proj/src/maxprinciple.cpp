#include "levyrisk/maxprinciple.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace levyrisk {

namespace {

McEstimate mean_se(const Eigen::VectorXd& v) {
    const int n = static_cast<int>(v.size());
    const double mean = v.mean();
    if (n < 2) return {mean, 0.0};
    const double var = (v.array() - mean).square().sum() / (n - 1.0);
    return {mean, std::sqrt(var / n)};
}

double eval0(const ControlProblem::Coefficient& c, double t, double x, double y,
             double z, std::span<const double> k, double u) {
    return c ? c(t, x, y, z, k, u) : 0.0;
}

// Backward driver of the problem under a fixed control curve. Wealth-family
// scope: g may not read the forward state.
Driver backward_driver(const ControlProblem& problem, const Curve& u) {
    Driver d;
    d.eval = [&problem, u](double t, double y, double z, std::span<const double> k) {
        return problem.g(t, 0.0, y, z, k, u(t));
    };
    d.lipschitz_C = 2.0 * (1.0 + std::abs(problem.control_set.first) +
                           std::abs(problem.control_set.second));
    d.theta_bounds.assign(problem.intensities.size(), {-0.999, 1.0});
    std::vector<double> z0(problem.intensities.size(), 0.0);
    d.depends_on_y =
        std::abs(problem.g(0.0, 0.0, 1.0, 0.0, z0, u(0.0)) -
                 problem.g(0.0, 0.0, 0.0, 0.0, z0, u(0.0))) > 0.0;
    return d;
}

struct ObjectiveParts {
    Eigen::VectorXd contrib;   // per path: int f dt + phi(X(T))
    double psi_part = 0.0;     // psi(Y(0))
    double psi_prime_y0 = 0.0;
    Eigen::VectorXd v_backward; // per-path realized terminal+driver sums of Y
    double y0 = 0.0;
};

ObjectiveParts objective_parts(const ControlProblem& problem, const Curve& u,
                               const PathEnsemble& paths, int basis_degree) {
    const int P = paths.n_paths();
    const int N = paths.n_steps();
    const double dt = paths.dt();
    const Eigen::MatrixXd X = simulate_wealth(problem, u, paths);

    ObjectiveParts parts;
    parts.contrib = Eigen::VectorXd::Zero(P);
    std::vector<double> kz(problem.intensities.size(), 0.0);
    for (int p = 0; p < P; ++p) {
        double acc = 0.0;
        if (problem.f)
            for (int n = 0; n < N; ++n)
                acc += problem.f(paths.grid[n], X(p, n), 0.0, 0.0, kz, u(paths.grid[n])) * dt;
        if (problem.phi) acc += problem.phi(X(p, N));
        parts.contrib[p] = acc;
    }

    if (problem.h) {
        Eigen::VectorXd terminal(P);
        for (int p = 0; p < P; ++p) terminal[p] = problem.h(X(p, N));
        const Eigen::MatrixXd state = X.array().log().matrix();
        const Driver drv = backward_driver(problem, u);
        const BsdeSolution sol =
            solve_regression(drv, terminal, paths, state, basis_degree);
        parts.y0 = sol.Y0;
        parts.v_backward.resize(P);
        std::vector<double> kbuf(paths.n_atoms());
        for (int p = 0; p < P; ++p) {
            double acc = terminal[p];
            for (int n = 0; n < N; ++n) {
                for (int j = 0; j < paths.n_atoms(); ++j) kbuf[j] = sol.K[j](p, n);
                acc += drv.eval(paths.grid[n], sol.Y(p, n), sol.Z(p, n), kbuf) * dt;
            }
            parts.v_backward[p] = acc;
        }
        if (problem.psi) {
            parts.psi_part = problem.psi(sol.Y0);
            parts.psi_prime_y0 = problem.psi_prime ? problem.psi_prime(sol.Y0) : 0.0;
        }
    } else if (problem.psi) {
        parts.psi_part = problem.psi(0.0);
    }
    return parts;
}

} // namespace

void ControlProblem::validate(std::uint64_t seed, int n_probes) const {
    std::mt19937_64 eng(seed);
    std::uniform_real_distribution<double> xs(0.5, 2.0), box(-1.5, 1.5);
    std::uniform_real_distribution<double> us(control_set.first, control_set.second);
    std::uniform_real_distribution<double> ts(0.0, T);
    const double fd = 1e-5;
    std::vector<double> k(intensities.size());
    auto probe_fn = [&](const Coefficient& c, double t, double x, double y, double z,
                        double u) {
        if (!c) return;
        const double v0 = c(t, x, y, z, k, u);
        const double dx = (c(t, x + fd, y, z, k, u) - c(t, x - fd, y, z, k, u)) / (2 * fd);
        const double du = (c(t, x, y, z, k, u + fd) - c(t, x, y, z, k, u - fd)) / (2 * fd);
        if (!std::isfinite(v0) || !std::isfinite(dx) || !std::isfinite(du))
            throw std::invalid_argument("ControlProblem: non-finite coefficient probe");
    };
    auto probe_scalar = [&](const std::function<double(double)>& fn, double x) {
        if (!fn) return;
        const double d = (fn(x + fd) - fn(x - fd)) / (2 * fd);
        if (!std::isfinite(fn(x)) || !std::isfinite(d))
            throw std::invalid_argument("ControlProblem: non-finite scalar probe");
    };
    for (int i = 0; i < n_probes; ++i) {
        const double t = ts(eng), x = xs(eng), y = box(eng), z = box(eng), u = us(eng);
        for (std::size_t j = 0; j < k.size(); ++j) k[j] = box(eng);
        probe_fn(b, t, x, y, z, u);
        probe_fn(sigma, t, x, y, z, u);
        probe_fn(g, t, x, y, z, u);
        probe_fn(f, t, x, y, z, u);
        for (const auto& gm : gamma) probe_fn(gm, t, x, y, z, u);
        probe_scalar(h, x);
        probe_scalar(phi, x);
        probe_scalar(psi, y);
    }
}

ControlProblem ControlProblem::terminal_utility(const MarketModel& market,
                                                std::function<double(double)> U,
                                                std::function<double(double)> U_prime,
                                                double x0) {
    if (!market.atoms.empty())
        throw std::invalid_argument("terminal_utility: no-jump markets only");
    ControlProblem pb;
    pb.b0 = market.mu;
    pb.sigma0 = market.sigma;
    pb.T = market.T;
    pb.n_steps = market.n_steps;
    pb.x0 = x0;
    const Curve b0 = market.mu, s0 = market.sigma;
    pb.b = [b0](double t, double x, double, double, std::span<const double>, double u) {
        return u * x * b0(t);
    };
    pb.sigma = [s0](double t, double x, double, double, std::span<const double>, double u) {
        return u * x * s0(t);
    };
    pb.phi = std::move(U);
    pb.phi_prime = std::move(U_prime);
    return pb;
}

ControlProblem ControlProblem::quadratic_risk(const MarketModel& market, double x0) {
    ControlProblem pb = terminal_utility(market, nullptr, nullptr, x0);
    pb.g = [](double, double, double, double z, std::span<const double>, double) {
        return -0.5 * z * z;
    };
    pb.h = [](double x) { return x; };
    pb.h_prime = [](double) { return 1.0; };
    pb.psi = [](double y) { return y; };
    pb.psi_prime = [](double) { return 1.0; };
    return pb;
}

double hamiltonian(const ControlProblem& problem, double t, double x, double y,
                   double z, std::span<const double> k, double u, double lambda,
                   double p, double q, std::span<const double> r_atoms) {
    double hval = eval0(problem.f, t, x, y, z, k, u) +
                  eval0(problem.g, t, x, y, z, k, u) * lambda +
                  eval0(problem.b, t, x, y, z, k, u) * p +
                  eval0(problem.sigma, t, x, y, z, k, u) * q;
    for (std::size_t j = 0; j < problem.gamma.size(); ++j)
        hval += eval0(problem.gamma[j], t, x, y, z, k, u) * r_atoms[j] *
                problem.intensities[j];
    return hval;
}

Eigen::MatrixXd simulate_wealth(const ControlProblem& problem, const Curve& u,
                                const PathEnsemble& paths) {
    const int P = paths.n_paths();
    const int N = paths.n_steps();
    const double dt = paths.dt();
    Eigen::MatrixXd X(P, N + 1);
    X.col(0).setConstant(problem.x0);
    std::vector<double> drift(N), vol(N);
    for (int n = 0; n < N; ++n) {
        const double t = paths.grid[n];
        const double un = u(t);
        vol[n] = un * problem.sigma0(t);
        drift[n] = (un * problem.b0(t) - 0.5 * vol[n] * vol[n]) * dt;
    }
    for (int p = 0; p < P; ++p) {
        double logx = std::log(problem.x0);
        for (int n = 0; n < N; ++n) {
            logx += drift[n] + vol[n] * paths.dB(p, n);
            X(p, n + 1) = std::exp(logx);
        }
    }
    return X;
}

McEstimate performance(const ControlProblem& problem, const Curve& u,
                       const PathEnsemble& paths, int basis_degree) {
    const ObjectiveParts parts = objective_parts(problem, u, paths, basis_degree);
    McEstimate e = mean_se(parts.contrib);
    e.value += parts.psi_part;
    if (parts.v_backward.size() > 0) {
        const double se_y0 = mean_se(parts.v_backward).std_error;
        e.std_error = std::sqrt(e.std_error * e.std_error +
                                parts.psi_prime_y0 * parts.psi_prime_y0 * se_y0 * se_y0);
    }
    return e;
}

AdjointState solve_adjoint(const ControlProblem& problem, const Curve& u,
                           const PathEnsemble& paths, int basis_degree) {
    const int P = paths.n_paths();
    const int N = paths.n_steps();
    const double dt = paths.dt();
    const Eigen::MatrixXd X = simulate_wealth(problem, u, paths);
    const Eigen::MatrixXd state = X.array().log().matrix();

    AdjointState adj;
    adj.lambda = Eigen::MatrixXd::Zero(P, N + 1);
    adj.r.assign(problem.intensities.size(), Eigen::MatrixXd::Zero(P, N));

    BsdeSolution backward;
    if (problem.h) {
        Eigen::VectorXd terminal(P);
        for (int p = 0; p < P; ++p) terminal[p] = problem.h(X(p, N));
        backward = solve_regression(backward_driver(problem, u), terminal, paths,
                                    state, basis_degree);
    }

    if (problem.psi_prime && problem.h) {
        // d lambda = lambda [g_y dt + g_z dB], lambda(0) = psi'(Y(0)),
        // integrated pathwise in exact exponential form.
        const double lam0 = problem.psi_prime(backward.Y0);
        std::vector<double> kz(problem.intensities.size(), 0.0);
        const double fd = 1e-6;
        for (int p = 0; p < P; ++p) {
            double loglam = 0.0;
            adj.lambda(p, 0) = lam0;
            for (int n = 0; n < N; ++n) {
                const double t = paths.grid[n];
                const double z = backward.Z(p, n);
                const double y = backward.Y(p, n);
                const double gz = (problem.g(t, 0.0, y, z + fd, kz, u(t)) -
                                   problem.g(t, 0.0, y, z - fd, kz, u(t))) / (2 * fd);
                const double gy = (problem.g(t, 0.0, y + fd, z, kz, u(t)) -
                                   problem.g(t, 0.0, y - fd, z, kz, u(t))) / (2 * fd);
                loglam += (gy - 0.5 * gz * gz) * dt + gz * paths.dB(p, n);
                adj.lambda(p, n + 1) = lam0 * std::exp(loglam);
            }
        }
    } else if (problem.psi_prime) {
        adj.lambda.setConstant(problem.psi_prime(0.0));
    }

    // dp = -[u b0 p + u sigma0 q] dt + q dB, p(T) = phi'(X(T)) + lambda(T) h'(X(T))
    Eigen::VectorXd p_terminal = Eigen::VectorXd::Zero(P);
    for (int p = 0; p < P; ++p) {
        if (problem.phi_prime) p_terminal[p] += problem.phi_prime(X(p, N));
        if (problem.h_prime) p_terminal[p] += adj.lambda(p, N) * problem.h_prime(X(p, N));
    }
    const Curve b0 = problem.b0, s0 = problem.sigma0;
    Driver adj_driver;
    adj_driver.eval = [b0, s0, u](double t, double y, double z, std::span<const double>) {
        return u(t) * (b0(t) * y + s0(t) * z);
    };
    adj_driver.depends_on_y = true;
    double cmax = 0.0;
    for (int n = 0; n < N; ++n) {
        const double t = paths.grid[n];
        cmax = std::max(cmax, std::abs(u(t)) * (std::abs(b0(t)) + std::abs(s0(t))));
    }
    adj_driver.lipschitz_C = cmax + 1e-12;
    const BsdeSolution psol =
        solve_regression(adj_driver, p_terminal, paths, state, basis_degree);
    adj.p = psol.Y;
    adj.q = psol.Z;
    return adj;
}

NecessaryReport check_necessary(const ControlProblem& problem, const Curve& u,
                                const Curve& beta, const PathEnsemble& paths,
                                double h_fd, int basis_degree) {
    const int P = paths.n_paths();
    const int N = paths.n_steps();
    if (!(h_fd > 0.0)) throw std::invalid_argument("check_necessary: h_fd must be > 0");
    for (int n = 0; n <= N; ++n) {
        const double t = paths.grid[n];
        for (double s : {-h_fd, 0.0, h_fd}) {
            const double v = u(t) + s * beta(t);
            if (v <= problem.control_set.first || v >= problem.control_set.second)
                throw std::invalid_argument(
                    "check_necessary: perturbed control leaves the control set");
        }
    }

    const Curve u_plus([u, beta, h_fd](double t) { return u(t) + h_fd * beta(t); });
    const Curve u_minus([u, beta, h_fd](double t) { return u(t) - h_fd * beta(t); });
    const ObjectiveParts plus = objective_parts(problem, u_plus, paths, basis_degree);
    const ObjectiveParts minus = objective_parts(problem, u_minus, paths, basis_degree);

    NecessaryReport rep;
    const Eigen::VectorXd diff = (plus.contrib - minus.contrib) / (2.0 * h_fd);
    rep.gateaux = mean_se(diff);
    if (problem.psi && problem.h) {
        rep.gateaux.value += (plus.psi_part - minus.psi_part) / (2.0 * h_fd);
        const McEstimate dv = mean_se((plus.v_backward - minus.v_backward).eval());
        const double se_psi =
            std::abs(plus.psi_prime_y0) * dv.std_error / (2.0 * h_fd);
        rep.gateaux.std_error =
            std::sqrt(rep.gateaux.std_error * rep.gateaux.std_error + se_psi * se_psi);
    }
    rep.j_base = performance(problem, u, paths, basis_degree);

    // E[dH/du | G_t] from adjoint samples. The diffusion adjoint q enters
    // through its raw martingale-increment samples p_{n+1} dB_n / dt, so the
    // per-step mean carries its honest Monte Carlo standard error; the
    // regression-smoothed surface feeds the conditional-residual summary.
    const AdjointState adj = solve_adjoint(problem, u, paths, basis_degree);
    const Eigen::MatrixXd X = simulate_wealth(problem, u, paths);
    const Eigen::MatrixXd state = X.array().log().matrix();
    const double dt = paths.dt();
    const int delay_steps =
        problem.delay > 0.0 ? static_cast<int>(std::lround(problem.delay / dt)) : 0;

    std::vector<double> kz(problem.intensities.size(), 0.0);
    const double fd = 1e-6;
    rep.hamiltonian_u.resize(N);
    rep.max_conditional_residual = 0.0;
    Eigen::VectorXd samples(P);
    for (int n = 0; n < N; ++n) {
        const double t = paths.grid[n];
        for (int p = 0; p < P; ++p) {
            const double q_raw = adj.p(p, n + 1) * paths.dB(p, n) / dt;
            double s = X(p, n) * (problem.b0(t) * adj.p(p, n) + problem.sigma0(t) * q_raw);
            if (problem.f)
                s += (problem.f(t, X(p, n), 0.0, 0.0, kz, u(t) + fd) -
                      problem.f(t, X(p, n), 0.0, 0.0, kz, u(t) - fd)) / (2 * fd);
            if (problem.g)
                s += adj.lambda(p, n) *
                     (problem.g(t, 0.0, 0.0, 0.0, kz, u(t) + fd) -
                      problem.g(t, 0.0, 0.0, 0.0, kz, u(t) - fd)) / (2 * fd);
            samples[p] = s;
        }
        rep.hamiltonian_u[n] = mean_se(samples);
        const int cond = std::max(0, n - delay_steps);
        const Eigen::VectorXd fitted =
            regress_conditional(state.col(cond), samples, cond == 0 ? 0 : basis_degree, n);
        rep.max_conditional_residual =
            std::max(rep.max_conditional_residual,
                     std::sqrt(fitted.array().square().mean()));
    }
    return rep;
}

Utility Utility::log_utility() {
    Utility u;
    u.U = [](double x) { return std::log(x); };
    u.U_prime = [](double x) { return 1.0 / x; };
    u.I = [](double y) { return 1.0 / y; };
    return u;
}

Utility Utility::power(double delta) {
    if (delta == 0.0 || delta == 1.0)
        throw std::invalid_argument("Utility::power: delta must differ from 0 and 1");
    Utility u;
    u.U = [delta](double x) { return std::pow(x, delta) / delta; };
    u.U_prime = [delta](double x) { return std::pow(x, delta - 1.0); };
    u.I = [delta](double y) { return std::pow(y, 1.0 / (delta - 1.0)); };
    u.power_delta = delta;
    return u;
}

UtilityResult utility_optimize(const Utility& utility, const MarketModel& market,
                               double x0, const PathEnsemble& paths) {
    if (!market.atoms.empty())
        throw std::invalid_argument("utility_optimize: no-jump markets only");
    if (!(x0 > 0.0)) throw std::invalid_argument("utility_optimize: x0 must be positive");
    const Curve mu = market.mu, sg = market.sigma;
    const Curve theta0([mu, sg](double t) { return -mu(t) / sg(t); });
    const Eigen::MatrixXd gamma = stochastic_exponential(paths, Curve(0.0), theta0, {});
    const Eigen::VectorXd gT = gamma.col(paths.n_steps());

    const auto budget = [&](double c) {
        double acc = 0.0;
        for (int p = 0; p < gT.size(); ++p) acc += utility.I(c * gT[p]) * gT[p];
        return acc / gT.size() - x0;
    };

    double lo = 1e-10, hi = 1e10;
    double flo = budget(lo), fhi = budget(hi);
    if (!(flo > 0.0 && fhi < 0.0)) {
        std::ostringstream os;
        os << "utility_optimize: bisection bracket failure, budget(" << lo << ")=" << flo
           << ", budget(" << hi << ")=" << fhi;
        throw std::runtime_error(os.str());
    }
    // bisect in log c; the budget function is decreasing in c
    double llo = std::log(lo), lhi = std::log(hi);
    for (int it = 0; it < 200 && (lhi - llo) > 1e-13; ++it) {
        const double mid = 0.5 * (llo + lhi);
        if (budget(std::exp(mid)) > 0.0) llo = mid; else lhi = mid;
    }
    UtilityResult res;
    res.c = std::exp(0.5 * (llo + lhi));

    // moment reduction of the same empirical budget equation
    if (utility.power_delta == 0.0) {
        res.c_closed_form = 1.0 / x0;
    } else {
        const double a = utility.power_delta / (utility.power_delta - 1.0);
        const double moment = gT.array().pow(a).mean();
        res.c_closed_form = std::pow(x0 / moment, utility.power_delta - 1.0);
    }
    if (std::abs(res.c - res.c_closed_form) > 1e-10 * (1.0 + std::abs(res.c)))
        throw std::runtime_error("utility_optimize: bisection and moment reduction disagree");

    res.gamma_T = gT;
    res.terminal_wealth.resize(gT.size());
    Eigen::VectorXd util(gT.size()), budg(gT.size());
    for (int p = 0; p < gT.size(); ++p) {
        res.terminal_wealth[p] = utility.I(res.c * gT[p]);
        util[p] = utility.U(res.terminal_wealth[p]);
        budg[p] = gT[p] * res.terminal_wealth[p] - x0;
    }
    res.expected_utility = mean_se(util);
    res.budget_residual = mean_se(budg);
    return res;
}

RiskMinResult risk_minimize_quadratic(const MarketModel& market, double x0,
                                      const PathEnsemble& paths) {
    if (!market.atoms.empty())
        throw std::invalid_argument("risk_minimize_quadratic: no-jump markets only");
    const Curve mu = market.mu, sg = market.sigma;
    RiskMinResult res;
    res.z_hat = Curve([mu, sg](double t) { return mu(t) / sg(t); });
    res.analytic =
        -x0 - grid_integral([&](double t) { const double r = mu(t) / sg(t); return 0.5 * r * r; },
                            0.0, market.T, market.n_steps);
    const Curve theta0([mu, sg](double t) { return -mu(t) / sg(t); });
    const Eigen::MatrixXd gamma = stochastic_exponential(paths, Curve(0.0), theta0, {});
    res.entropy = relative_entropy(gamma.col(paths.n_steps()));
    res.mc = {-x0 - res.entropy.value, res.entropy.std_error};
    return res;
}

} // namespace levyrisk

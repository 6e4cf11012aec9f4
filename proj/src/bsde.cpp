#include "levyrisk/bsde.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <stdexcept>

namespace levyrisk {

namespace {

double knorm(std::span<const double> k, const std::vector<double>& intensities) {
    double s = 0.0;
    for (std::size_t j = 0; j < k.size(); ++j) s += k[j] * k[j] * intensities[j];
    return std::sqrt(s);
}

} // namespace

void Driver::validate(const std::vector<double>& grid,
                      const std::vector<double>& intensities,
                      std::uint64_t seed, int n_probes) const {
    if (!eval) throw std::invalid_argument("Driver: eval not set");
    if (lipschitz_C < 0.0) throw std::invalid_argument("Driver: lipschitz_C must be >= 0");
    for (const auto& [lo, hi] : theta_bounds)
        if (!(lo > -1.0) || !(lo <= hi))
            throw std::invalid_argument("Driver: domination bounds need -1 < lo <= hi");
    const int J = static_cast<int>(intensities.size());
    std::vector<double> zeros(J, 0.0);
    for (double t : grid)
        if (!std::isfinite(eval(t, 0.0, 0.0, zeros)))
            throw std::invalid_argument("Driver: g(t,0,0,0) not finite on the grid");

    std::mt19937_64 eng(seed);
    std::uniform_real_distribution<double> box(-probe_box, probe_box);
    std::uniform_int_distribution<std::size_t> pick_t(0, grid.empty() ? 0 : grid.size() - 1);
    std::vector<double> k1(J), k2(J), dk(J);
    for (int i = 0; i < n_probes; ++i) {
        const double t = grid.empty() ? 0.0 : grid[pick_t(eng)];
        const double y1 = box(eng), y2 = box(eng);
        const double z1 = box(eng), z2 = box(eng);
        for (int j = 0; j < J; ++j) {
            k1[j] = box(eng);
            k2[j] = box(eng);
            dk[j] = k1[j] - k2[j];
        }
        const double lhs = std::abs(eval(t, y1, z1, k1) - eval(t, y2, z2, k2));
        const double rhs = lipschitz_C *
            (std::abs(y1 - y2) + std::abs(z1 - z2) + knorm(dk, intensities));
        if (lhs > rhs + 1e-9 * (1.0 + rhs))
            throw std::invalid_argument("Driver: Lipschitz spot-check failed on a probe pair");
    }
}

Driver Driver::zero(int n_atoms) {
    Driver d;
    d.eval = [](double, double, double, std::span<const double>) { return 0.0; };
    d.lipschitz_C = 0.0;
    d.theta_bounds.assign(n_atoms, {-0.999, 1.0});
    return d;
}

Driver Driver::quadratic_z(int n_atoms) {
    Driver d;
    d.eval = [](double, double, double z, std::span<const double>) { return -0.5 * z * z; };
    d.lipschitz_C = 2.0;  // valid on the default probe box [-2, 2]
    d.theta_bounds.assign(n_atoms, {-0.999, 1.0});
    d.concave = true;
    return d;
}

void LinearDriverParams::validate(const std::vector<double>& grid) const {
    for (double t : grid) {
        if (!std::isfinite(phi(t)) || !std::isfinite(alpha(t)) || !std::isfinite(beta(t)))
            throw std::invalid_argument("LinearDriverParams: non-finite coefficient on the grid");
        for (const auto& g : gamma_coef)
            if (!(g(t) > -1.0))
                throw std::invalid_argument("LinearDriverParams: gamma must be > -1");
    }
}

Claim Claim::constant(double a) {
    Claim c;
    c.payoff = [a](std::span<const double>) { return a; };
    return c;
}

Claim Claim::terminal(std::function<double(double)> f) {
    Claim c;
    c.payoff = [f = std::move(f)](std::span<const double> path) { return f(path.back()); };
    return c;
}

Eigen::VectorXd regress_conditional(const Eigen::VectorXd& state,
                                    const Eigen::VectorXd& target,
                                    int degree, int step) {
    const int n = static_cast<int>(state.size());
    if (n != target.size()) throw std::invalid_argument("regress_conditional: size mismatch");
    if (n == 1) return target; // pathwise identity for a degenerate ensemble

    const double mean = state.mean();
    const double sd = std::sqrt((state.array() - mean).square().sum() / (n - 1.0));
    if (!(sd > 1e-12 * (1.0 + std::abs(mean))) || degree == 0) {
        // deterministic state: the conditional expectation is the plain mean
        return Eigen::VectorXd::Constant(n, target.mean());
    }

    Eigen::MatrixXd basis(n, degree + 1);
    basis.col(0).setOnes();
    Eigen::ArrayXd s = (state.array() - mean) / sd;
    for (int d = 1; d <= degree; ++d) basis.col(d) = basis.col(d - 1).array() * s;

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(basis);
    if (qr.rank() < degree + 1)
        throw std::runtime_error("regress_conditional: singular regression matrix at step " +
                                 std::to_string(step));
    return basis * qr.solve(target);
}

namespace {

// Martingale-increment estimators for Z and K at step n: regressions of
// Y_{n+1} dB_n / dt and Y_{n+1} (dN_{n,j} - lambda_j dt) / (lambda_j dt).
void estimate_z_k(const PathEnsemble& paths, const Eigen::VectorXd& y_next,
                  const Eigen::VectorXd& state_n, int n, int degree,
                  Eigen::Ref<Eigen::VectorXd> z_out,
                  std::vector<Eigen::MatrixXd>& K, double dt) {
    const Eigen::VectorXd zc = (y_next.array() * paths.dB.col(n).array() / dt).matrix();
    z_out = regress_conditional(state_n, zc, degree, n);
    for (int j = 0; j < paths.n_atoms(); ++j) {
        const double lam = paths.intensities[j];
        if (lam <= 0.0) {
            K[j].col(n).setZero();
            continue;
        }
        const Eigen::VectorXd kc =
            (y_next.array() *
             (paths.jumps[j].col(n).cast<double>().array() - lam * dt) / (lam * dt))
                .matrix();
        K[j].col(n) = regress_conditional(state_n, kc, degree, n);
    }
}

} // namespace

BsdeSolution solve_linear(const LinearDriverParams& params, const Claim& claim,
                          const PathEnsemble& paths, int basis_degree) {
    const int P = paths.n_paths();
    const int N = paths.n_steps();
    const double dt = paths.dt();
    params.validate(paths.grid);
    if (static_cast<int>(params.gamma_coef.size()) != paths.n_atoms())
        throw std::invalid_argument("solve_linear: gamma_coef / ensemble atom mismatch");

    const Eigen::MatrixXd gamma =
        stochastic_exponential(paths, params.alpha, params.beta, params.gamma_coef);

    BsdeSolution sol;
    sol.method_tag = "closed_form";
    const double ratio = gamma.maxCoeff() / gamma.minCoeff();
    if (!(ratio < 1e12))
        sol.notes.push_back("ill-conditioned Gamma: max/min ratio " + std::to_string(ratio));

    // Terminal claim sees the path of Gamma itself.
    Eigen::VectorXd F(P);
    for (int p = 0; p < P; ++p) {
        Eigen::VectorXd row = gamma.row(p);
        F[p] = claim.payoff({row.data(), static_cast<std::size_t>(row.size())});
        if (!std::isfinite(F[p])) throw std::invalid_argument("solve_linear: claim not finite");
    }

    // Pathwise value to be projected: Gamma(T)F + suffix sum of Gamma(s)phi(s)ds,
    // all divided by Gamma(t) (left-point rule on the phi integral).
    Eigen::VectorXd suffix = Eigen::VectorXd::Zero(P);
    Eigen::MatrixXd v(P, N + 1);
    v.col(N) = F;
    for (int n = N - 1; n >= 0; --n) {
        suffix += gamma.col(n) * (params.phi(paths.grid[n]) * dt);
        v.col(n) = (gamma.col(N).array() * F.array() + suffix.array()) / gamma.col(n).array();
    }

    sol.Y.resize(P, N + 1);
    sol.Y.col(N) = F;
    Eigen::MatrixXd logg = gamma.array().log().matrix();
    for (int n = 0; n < N; ++n)
        sol.Y.col(n) = regress_conditional(logg.col(n), v.col(n), n == 0 ? 0 : basis_degree, n);
    sol.Y0 = v.col(0).mean();

    sol.Z.resize(P, N);
    sol.K.assign(paths.n_atoms(), Eigen::MatrixXd(P, N));
    for (int n = 0; n < N; ++n)
        estimate_z_k(paths, sol.Y.col(n + 1), logg.col(n), n, n == 0 ? 0 : basis_degree,
                     sol.Z.col(n), sol.K, dt);
    return sol;
}

BsdeSolution solve_regression(const Driver& driver, const Claim& claim,
                              const PathEnsemble& paths,
                              const Eigen::MatrixXd& state,
                              int basis_degree, int terminal_step) {
    const int N = paths.n_steps();
    const int term = terminal_step < 0 ? N : terminal_step;
    if (term < 1 || term > N)
        throw std::invalid_argument("solve_regression: terminal_step off the grid");
    if (state.rows() != paths.n_paths() || state.cols() != N + 1)
        throw std::invalid_argument("solve_regression: state must be n_paths x (n_steps+1)");

    Eigen::VectorXd terminal(paths.n_paths());
    Eigen::VectorXd row(N + 1);
    for (int p = 0; p < paths.n_paths(); ++p) {
        row = state.row(p);
        terminal[p] = claim.payoff({row.data(), static_cast<std::size_t>(term + 1)});
    }
    return solve_regression(driver, terminal, paths, state, basis_degree, terminal_step);
}

BsdeSolution solve_regression(const Driver& driver,
                              const Eigen::VectorXd& terminal_samples,
                              const PathEnsemble& paths,
                              const Eigen::MatrixXd& state,
                              int basis_degree, int terminal_step) {
    const int P = paths.n_paths();
    const int N = paths.n_steps();
    const double dt = paths.dt();
    const int term = terminal_step < 0 ? N : terminal_step;
    if (term < 1 || term > N)
        throw std::invalid_argument("solve_regression: terminal_step off the grid");
    if (state.rows() != P || state.cols() != N + 1)
        throw std::invalid_argument("solve_regression: state must be n_paths x (n_steps+1)");
    if (terminal_samples.size() != P)
        throw std::invalid_argument("solve_regression: terminal sample count mismatch");
    driver.validate(paths.grid, paths.intensities);

    BsdeSolution sol;
    sol.method_tag = "regression";
    if (P == 1) sol.notes.push_back("degenerate ensemble: regression is the pathwise identity");
    if (P > 1 && P < 10 * (basis_degree + 1))
        throw std::invalid_argument("solve_regression: need >= 10x more paths than basis functions");

    sol.Y.resize(P, term + 1);
    sol.Z.resize(P, term);
    sol.K.assign(paths.n_atoms(), Eigen::MatrixXd(P, term));

    for (int p = 0; p < P; ++p) {
        sol.Y(p, term) = terminal_samples[p];
        if (!std::isfinite(sol.Y(p, term)))
            throw std::invalid_argument("solve_regression: claim not finite");
    }

    std::vector<double> kbuf(paths.n_atoms());
    for (int n = term - 1; n >= 0; --n) {
        const int deg = n == 0 ? 0 : basis_degree;
        estimate_z_k(paths, sol.Y.col(n + 1), state.col(n), n, deg, sol.Z.col(n), sol.K, dt);
        const Eigen::VectorXd ce = regress_conditional(state.col(n), sol.Y.col(n + 1), deg, n);

        const double t = paths.grid[n];
        for (int p = 0; p < P; ++p) {
            for (int j = 0; j < paths.n_atoms(); ++j) kbuf[j] = sol.K[j](p, n);
            const double z = sol.Z(p, n);
            double y = ce[p] + driver.eval(t, ce[p], z, kbuf) * dt;
            if (driver.depends_on_y) {
                for (int it = 0; it < 20; ++it) {
                    const double y_new = ce[p] + driver.eval(t, y, z, kbuf) * dt;
                    if (std::abs(y_new - y) <= 1e-12 * (1.0 + std::abs(y_new))) { y = y_new; break; }
                    y = y_new;
                }
            }
            if (!std::isfinite(y))
                throw std::runtime_error("solve_regression: non-finite driver output at step " +
                                         std::to_string(n));
            sol.Y(p, n) = y;
        }
    }
    sol.Y0 = sol.Y.col(0).mean();
    return sol;
}

ComparisonReport check_comparison(const BsdeSolution& sol1, const BsdeSolution& sol2,
                                  double tolerance) {
    if (sol1.Y.rows() != sol2.Y.rows() || sol1.Y.cols() != sol2.Y.cols())
        throw std::invalid_argument("check_comparison: mismatched grids");
    ComparisonReport rep;
    rep.max_excess = -std::numeric_limits<double>::infinity();
    for (int n = 0; n < sol1.Y.cols(); ++n)
        for (int p = 0; p < sol1.Y.rows(); ++p) {
            const double d = sol1.Y(p, n) - sol2.Y(p, n);
            if (d > rep.max_excess) {
                rep.max_excess = d;
                rep.worst_path = p;
                rep.worst_step = n;
            }
            if (d > tolerance) ++rep.n_violations;
        }
    rep.pass = rep.n_violations == 0;
    return rep;
}

void write_solution_csv(const BsdeSolution& sol, const std::vector<double>& grid,
                        const std::string& filename) {
    std::ofstream f(filename);
    if (!f) throw std::runtime_error("write_solution_csv: cannot open " + filename);
    f << std::setprecision(17);
    f << "path,t,Y,Z";
    for (std::size_t j = 0; j < sol.K.size(); ++j) f << ",K" << j;
    f << "\n";
    for (int p = 0; p < sol.Y.rows(); ++p)
        for (int n = 0; n < sol.Y.cols(); ++n) {
            f << p << "," << grid[n] << "," << sol.Y(p, n) << ","
              << (n < sol.Z.cols() ? sol.Z(p, n) : 0.0);
            for (std::size_t j = 0; j < sol.K.size(); ++j)
                f << "," << (n < sol.Z.cols() ? sol.K[j](p, n) : 0.0);
            f << "\n";
        }
}

} // namespace levyrisk

#include "levyrisk/market.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace levyrisk {

namespace {

bool finite(double x) { return std::isfinite(x); }

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Per-path draw stream. Normals via Box-Muller and Poisson counts via the
// Knuth product method, both on top of mt19937_64 uniforms, so the ensemble
// is a pure function of (seed, path index) with no library-dependent
// distribution state.
class DrawStream {
public:
    explicit DrawStream(std::uint64_t s) : eng_(s) {}

    double uniform() { // in (0, 1)
        return (static_cast<double>(eng_() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    }

    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    int poisson(double mean) {
        if (mean <= 0.0) return 0;
        const double limit = std::exp(-mean);
        int k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform();
        } while (p > limit);
        return k - 1;
    }

private:
    std::mt19937_64 eng_;
};

} // namespace

void MarketModel::validate() const {
    if (n_steps <= 0) throw std::invalid_argument("MarketModel: n_steps must be positive");
    if (!(T > 0.0) || !finite(T)) throw std::invalid_argument("MarketModel: horizon must be positive and finite");
    std::set<double> marks;
    for (const auto& a : atoms) {
        if (a.zeta == 0.0) throw std::invalid_argument("MarketModel: jump mark zeta must be nonzero");
        if (a.lambda < 0.0 || !finite(a.lambda))
            throw std::invalid_argument("MarketModel: jump intensity must be >= 0 and finite");
        if (a.lambda * dt() > 100.0)
            throw std::invalid_argument("MarketModel: lambda dt too large for the count sampler");
        if (!marks.insert(a.zeta).second)
            throw std::invalid_argument("MarketModel: duplicate jump marks");
    }
    const double h = dt();
    for (int n = 0; n <= n_steps; ++n) {
        const double t = n * h;
        if (!finite(mu(t)) || !finite(r(t)))
            throw std::invalid_argument("MarketModel: non-finite coefficient on the grid");
        if (!(sigma(t) > 0.0) || !finite(sigma(t)))
            throw std::invalid_argument("MarketModel: sigma must be > 0 on the grid");
        for (const auto& a : atoms)
            if (!finite(a.gamma(t)))
                throw std::invalid_argument("MarketModel: non-finite jump amplitude on the grid");
    }
}

void Scenario::validate(const MarketModel& model) const {
    if (theta1.size() != model.atoms.size())
        throw std::invalid_argument("Scenario: theta1 must have one curve per atom");
    const double h = model.dt();
    for (int n = 0; n <= model.n_steps; ++n) {
        const double t = n * h;
        if (!finite(theta0(t))) throw std::invalid_argument("Scenario: non-finite theta0");
        for (const auto& c : theta1) {
            const double v = c(t);
            if (!finite(v) || v <= -1.0)
                throw std::invalid_argument("Scenario: theta1 must be finite and > -1");
        }
    }
}

PathEnsemble simulate(const MarketModel& model, int n_paths, std::uint64_t seed) {
    model.validate();
    if (n_paths < 1) throw std::invalid_argument("simulate: n_paths must be >= 1");

    const int N = model.n_steps;
    const int J = static_cast<int>(model.atoms.size());
    const double h = model.dt();
    const double sqrt_h = std::sqrt(h);

    PathEnsemble out;
    out.seed = seed;
    out.grid.resize(N + 1);
    for (int n = 0; n <= N; ++n) out.grid[n] = n * h;
    out.dB.resize(n_paths, N);
    out.jumps.assign(J, Eigen::MatrixXi(n_paths, N));
    out.intensities.resize(J);
    for (int j = 0; j < J; ++j) out.intensities[j] = model.atoms[j].lambda;

    for (int p = 0; p < n_paths; ++p) {
        DrawStream stream(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(p) + 1)));
        for (int n = 0; n < N; ++n) {
            out.dB(p, n) = sqrt_h * stream.normal();
            for (int j = 0; j < J; ++j)
                out.jumps[j](p, n) = stream.poisson(model.atoms[j].lambda * h);
        }
    }
    return out;
}

Eigen::MatrixXd stochastic_exponential(const PathEnsemble& paths,
                                       const Curve& alpha,
                                       const Curve& beta,
                                       const std::vector<Curve>& gamma) {
    const int P = paths.n_paths();
    const int N = paths.n_steps();
    const int J = paths.n_atoms();
    if (static_cast<int>(gamma.size()) != J)
        throw std::invalid_argument("stochastic_exponential: one gamma curve per atom required");
    const double h = paths.dt();

    // Per-step coefficients on the left grid point (predictable convention).
    std::vector<double> a(N), b(N);
    std::vector<std::vector<double>> log1g(J, std::vector<double>(N));
    std::vector<std::vector<double>> comp(J, std::vector<double>(N));
    for (int n = 0; n < N; ++n) {
        const double t = paths.grid[n];
        a[n] = alpha(t);
        b[n] = beta(t);
        for (int j = 0; j < J; ++j) {
            const double g = gamma[j](t);
            if (!(1.0 + g > 0.0))
                throw std::invalid_argument("stochastic_exponential: 1 + gamma must stay positive");
            log1g[j][n] = std::log1p(g);
            comp[j][n] = g * paths.intensities[j] * h;
        }
    }

    Eigen::MatrixXd out(P, N + 1);
    out.col(0).setOnes();
    for (int p = 0; p < P; ++p) {
        double loggamma = 0.0;
        for (int n = 0; n < N; ++n) {
            // Exact log form: the compensator of the jump integral folds with
            // the nu-term of the exponent into -gamma * lambda * dt.
            double inc = b[n] * paths.dB(p, n) + (a[n] - 0.5 * b[n] * b[n]) * h;
            for (int j = 0; j < J; ++j)
                inc += paths.jumps[j](p, n) * log1g[j][n] - comp[j][n];
            loggamma += inc;
            out(p, n + 1) = std::exp(loggamma);
        }
    }
    return out;
}

Eigen::MatrixXd girsanov_density(const PathEnsemble& paths, const Scenario& scenario) {
    if (static_cast<int>(scenario.theta1.size()) != paths.n_atoms())
        throw std::invalid_argument("girsanov_density: scenario/ensemble atom count mismatch");
    return stochastic_exponential(paths, Curve(0.0), scenario.theta0, scenario.theta1);
}

McEstimate relative_entropy(const Eigen::VectorXd& density_T) {
    const int n = static_cast<int>(density_T.size());
    if (n < 2) throw std::invalid_argument("relative_entropy: need at least 2 samples");
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double m = density_T[i];
        if (!(m > 0.0)) throw std::invalid_argument("relative_entropy: density samples must be positive");
        const double v = m * std::log(m);
        sum += v;
        sumsq += v * v;
    }
    const double mean = sum / n;
    const double var = std::max(0.0, sumsq / n - mean * mean) * n / (n - 1.0);
    return {mean, std::sqrt(var / n)};
}

void write_ensemble_csv(const PathEnsemble& paths, const std::string& filename) {
    std::ofstream f(filename);
    if (!f) throw std::runtime_error("write_ensemble_csv: cannot open " + filename);
    f << std::setprecision(17);
    f << "path,t,dB";
    for (int j = 0; j < paths.n_atoms(); ++j) f << ",n" << j;
    f << "\n";
    for (int p = 0; p < paths.n_paths(); ++p)
        for (int n = 0; n < paths.n_steps(); ++n) {
            f << p << "," << paths.grid[n + 1] << "," << paths.dB(p, n);
            for (int j = 0; j < paths.n_atoms(); ++j) f << "," << paths.jumps[j](p, n);
            f << "\n";
        }
}

} // namespace levyrisk

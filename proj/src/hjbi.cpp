#include "levyrisk/hjbi.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>
#include <json.hpp>

namespace levyrisk {

CandidateValue CandidateValue::entropic_ansatz(const MarketModel& market) {
    const Curve mu = market.mu, sg = market.sigma;
    const double T = market.T;
    const int n = market.n_steps;
    CandidateValue cv;
    cv.kappa = Curve([mu, sg, T, n](double s) {
        return -grid_integral(
            [&](double t) { const double r = mu(t) / sg(t); return 0.5 * r * r; }, s, T, n);
    });
    const Curve kappa = cv.kappa;
    cv.phi = [kappa](double s, double x, double m) {
        return -x * m - m * std::log(m) + kappa(s) * m;
    };
    cv.phi_s = [mu, sg](double s, double, double m) {
        const double r = mu(s) / sg(s);
        return 0.5 * r * r * m; // kappa'(s) m, analytic
    };
    cv.phi_x = [](double, double, double m) { return -m; };
    cv.phi_m = [kappa](double s, double x, double m) {
        return -x - std::log(m) - 1.0 + kappa(s);
    };
    cv.phi_xx = [](double, double, double) { return 0.0; };
    cv.phi_mm = [](double, double, double m) { return -1.0 / m; };
    cv.phi_xm = [](double, double, double) { return -1.0; };
    return cv;
}

double generator_apply(const GameSpec& spec, const CandidateValue& phi,
                       double s, double x, double m, const GameControls& controls) {
    if (!(m > 0.0) || !(x > 0.0))
        throw std::invalid_argument("generator_apply: point outside the solvency region");
    if (controls.theta1.size() != spec.market.atoms.size())
        throw std::invalid_argument("generator_apply: theta1 size mismatch");
    const double sg = spec.market.sigma(s);
    const double mu = spec.market.mu(s);
    const double w = controls.w, th0 = controls.theta0;

    double a = phi.phi_s(s, x, m) + w * mu * phi.phi_x(s, x, m) +
               0.5 * w * w * sg * sg * phi.phi_xx(s, x, m) +
               0.5 * m * m * th0 * th0 * phi.phi_mm(s, x, m) +
               w * th0 * m * sg * phi.phi_xm(s, x, m);
    for (std::size_t j = 0; j < spec.market.atoms.size(); ++j) {
        const double th1 = controls.theta1[j];
        if (!(1.0 + th1 > 0.0))
            throw std::invalid_argument("generator_apply: 1 + theta1 must be positive");
        const double lam = spec.market.atoms[j].lambda;
        if (lam == 0.0) continue;
        const double g = spec.market.atoms[j].gamma(s);
        a += lam * (phi.phi(s, x + w * g, m * (1.0 + th1)) - phi.phi(s, x, m) -
                    phi.phi_x(s, x, m) * w * g - phi.phi_m(s, x, m) * m * th1);
    }
    if (!std::isfinite(a)) throw std::invalid_argument("generator_apply: non-finite partials");
    return a;
}

double entropic_bracket(const GameSpec& spec, double s, const GameControls& controls) {
    const double mu = spec.market.mu(s), sg = spec.market.sigma(s);
    const double r = mu / sg;
    const double w = controls.w, th0 = controls.theta0;
    double b = 0.5 * r * r - w * mu - 0.5 * th0 * th0 - w * th0 * sg;
    for (std::size_t j = 0; j < spec.market.atoms.size(); ++j) {
        const double lam = spec.market.atoms[j].lambda;
        if (lam == 0.0) continue;
        const double g = spec.market.atoms[j].gamma(s);
        const double th1 = controls.theta1[j];
        b += lam * (th1 * (1.0 - w * g) - (1.0 + th1) * std::log1p(th1));
    }
    return b;
}

FirstOrderSolution solve_first_order(const GameSpec& spec, double s) {
    const double mu = spec.market.mu(s), sg = spec.market.sigma(s);
    if (!(sg > 0.0)) throw std::invalid_argument("solve_first_order: sigma must be positive");
    const int J = static_cast<int>(spec.market.atoms.size());

    FirstOrderSolution sol;
    sol.controls.theta1.assign(J, 0.0);
    if (J == 0) {
        sol.controls.theta0 = -mu / sg;
        sol.controls.w = mu / (sg * sg);
        sol.residual = std::abs(sol.controls.theta0 + sol.controls.w * sg) +
                       std::abs(mu + sol.controls.theta0 * sg);
        return sol;
    }

    std::vector<double> lam(J), gam(J);
    for (int j = 0; j < J; ++j) {
        lam[j] = spec.market.atoms[j].lambda;
        gam[j] = spec.market.atoms[j].gamma(s);
    }

    const int dim = J + 2; // order: theta0, theta1_1..theta1_J, w
    Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
    auto resid = [&](const Eigen::VectorXd& u) {
        Eigen::VectorXd r(dim);
        const double th0 = u[0], w = u[dim - 1];
        r[0] = th0 + w * sg;
        double jump_sum = 0.0;
        for (int j = 0; j < J; ++j) {
            r[1 + j] = w * gam[j] + std::log1p(u[1 + j]);
            jump_sum += lam[j] * u[1 + j] * gam[j];
        }
        r[dim - 1] = mu + th0 * sg + jump_sum;
        return r;
    };

    Eigen::VectorXd r = resid(v);
    for (int it = 0; it < 100; ++it) {
        if (r.lpNorm<Eigen::Infinity>() <= 1e-12) {
            sol.iterations = it;
            break;
        }
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(dim, dim);
        jac(0, 0) = 1.0;
        jac(0, dim - 1) = sg;
        for (int j = 0; j < J; ++j) {
            jac(1 + j, 1 + j) = 1.0 / (1.0 + v[1 + j]);
            jac(1 + j, dim - 1) = gam[j];
            jac(dim - 1, 1 + j) = lam[j] * gam[j];
        }
        jac(dim - 1, 0) = sg;
        Eigen::VectorXd step = jac.partialPivLu().solve(-r);

        double scale = 1.0;
        for (int j = 0; j < J; ++j) // keep 1 + theta1 positive
            while (v[1 + j] + scale * step[1 + j] <= -1.0 + 1e-12) scale *= 0.5;
        Eigen::VectorXd v_new = v + scale * step;
        Eigen::VectorXd r_new = resid(v_new);
        int halvings = 0;
        while (r_new.lpNorm<Eigen::Infinity>() > r.lpNorm<Eigen::Infinity>() && halvings < 40) {
            scale *= 0.5;
            v_new = v + scale * step;
            r_new = resid(v_new);
            ++halvings;
        }
        if ((scale * step).lpNorm<Eigen::Infinity>() <= 1e-14 &&
            r_new.lpNorm<Eigen::Infinity>() <= 1e-10) {
            v = v_new;
            r = r_new;
            sol.iterations = it + 1;
            break;
        }
        v = v_new;
        r = r_new;
        if (it == 99)
            throw std::runtime_error("solve_first_order: Newton did not converge, residual " +
                                     std::to_string(r.lpNorm<Eigen::Infinity>()));
    }
    sol.controls.theta0 = v[0];
    for (int j = 0; j < J; ++j) sol.controls.theta1[j] = v[1 + j];
    sol.controls.w = v[dim - 1];
    sol.residual = resid(v).lpNorm<Eigen::Infinity>();
    if (sol.residual > 1e-10)
        throw std::runtime_error("solve_first_order: residual " + std::to_string(sol.residual));
    return sol;
}

double value_closed(const GameSpec& spec, double s, double x, double m) {
    if (!spec.market.atoms.empty())
        throw std::invalid_argument("value_closed: no-jump markets only");
    const CandidateValue cv = CandidateValue::entropic_ansatz(spec.market);
    return cv.phi(s, x, m);
}

bool HjbiReport::all_pass() const {
    for (const auto& c : conditions)
        if (!c.pass) return false;
    return true;
}

std::string HjbiReport::to_json() const {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& c : conditions)
        j.push_back({{"condition", c.name},
                     {"pass", c.pass},
                     {"worst_violation", c.worst_violation},
                     {"location", {c.location[0], c.location[1], c.location[2]}},
                     {"worst_probe", c.worst_probe}});
    return j.dump(2);
}

HjbiReport verify_hjbi(const GameSpec& spec, const CandidateValue& phi,
                       const std::function<GameControls(double)>& controls,
                       const VerifyOptions& opt) {
    const int J = static_cast<int>(spec.market.atoms.size());
    HjbiCondition sup_w{"(i) A^{theta_hat,w} phi >= 0", true, 0.0, {0, 0, 0}, 0.0};
    HjbiCondition sup_theta{"(ii) A^{theta,w_hat} phi <= 0", true, 0.0, {0, 0, 0}, 0.0};
    HjbiCondition saddle{"(iii) A^{theta_hat,w_hat} phi = 0", true, 0.0, {0, 0, 0}, 0.0};
    HjbiCondition boundary{"(iv) phi(T,x,m) = -xm - m log m", true, 0.0, {0, 0, 0}, 0.0};

    auto axis = [](double lo, double hi, int n, int i) {
        return n > 1 ? lo + (hi - lo) * i / (n - 1.0) : lo;
    };
    auto note = [](HjbiCondition& c, double excess, double s, double x, double m,
                   double probe, double tol) {
        if (excess > c.worst_violation) {
            c.worst_violation = excess;
            c.location = {s, x, m};
            c.worst_probe = probe;
        }
        if (excess > tol) c.pass = false;
    };

    for (int is = 0; is < opt.n_s; ++is) {
        const double s = axis(0.0, spec.market.T, opt.n_s, is);
        const GameControls hat = controls(s);
        for (int ix = 0; ix < opt.n_x; ++ix) {
            const double x = axis(opt.x_lo, opt.x_hi, opt.n_x, ix);
            for (int im = 0; im < opt.n_m; ++im) {
                const double m = axis(opt.m_lo, opt.m_hi, opt.n_m, im);

                const double a_hat = generator_apply(spec, phi, s, x, m, hat);
                note(saddle, std::abs(a_hat), s, x, m, 0.0, opt.tolerance);

                GameControls probe = hat;
                for (int i = 0; i < opt.n_probes; ++i) {
                    probe.w = axis(opt.w_lo, opt.w_hi, opt.n_probes, i);
                    const double a = generator_apply(spec, phi, s, x, m, probe);
                    note(sup_w, -a, s, x, m, probe.w, opt.tolerance);
                }
                probe = hat;
                for (int i = 0; i < opt.n_probes; ++i) {
                    probe.theta0 = axis(opt.theta0_lo, opt.theta0_hi, opt.n_probes, i);
                    if (J == 0) {
                        note(sup_theta, generator_apply(spec, phi, s, x, m, probe), s, x, m,
                             probe.theta0, opt.tolerance);
                        continue;
                    }
                    for (int j = 0; j < J; ++j) {
                        probe.theta1 = hat.theta1;
                        for (int i1 = 0; i1 < opt.n_probes; ++i1) {
                            probe.theta1[j] = axis(opt.theta1_lo, opt.theta1_hi, opt.n_probes, i1);
                            note(sup_theta, generator_apply(spec, phi, s, x, m, probe), s, x, m,
                                 probe.theta0, opt.tolerance);
                        }
                    }
                }

                const double bval = phi.phi(spec.market.T, x, m);
                note(boundary, std::abs(bval - (-x * m - m * std::log(m))), s, x, m, 0.0,
                     opt.tolerance);
            }
        }
    }
    HjbiReport rep;
    rep.conditions = {sup_w, sup_theta, saddle, boundary};
    return rep;
}

} // namespace levyrisk

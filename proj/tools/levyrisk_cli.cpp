// Batch front door: parses a run configuration (flags, optionally seeded
// from a JSON config file), orchestrates the library modules and emits a
// reproducible JSON result record plus optional CSV curves.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "levyrisk/bsde.hpp"
#include "levyrisk/hjbi.hpp"
#include "levyrisk/market.hpp"
#include "levyrisk/maxprinciple.hpp"
#include "levyrisk/newsvendor.hpp"
#include "levyrisk/risk.hpp"

using nlohmann::json;
using namespace levyrisk;

namespace {

struct RunConfig {
    double T = 1.0;
    int steps = 100;
    double mu = 0.05;
    double sigma = 0.2;
    double r = 0.0;
    std::string atoms; // "zeta:lambda:gamma,..."
    int paths = 100000;
    std::uint64_t seed = 42;
    int basis_degree = 3;
    double x0 = 1.0;
    std::string out;      // CSV path
    std::string json_out; // record path
    // command-specific
    std::string method = "linear";      // solve-bsde
    std::string claim = "const:1";      // solve-bsde / risk
    std::string driver = "quadratic";   // risk
    double phi = 0.0, alpha = 0.0, beta = 0.0; // linear driver constants
    double theta_min = -1.0, theta_max = 1.0;  // dual-risk
    int theta_count = 41;
    std::string utility = "log";
    double delta_pow = 0.5;
    std::string hjbi_mode = "verify";
    double s = 0.0, x = 1.0, m = 1.0;   // hjbi evaluation point
    // newsvendor
    double nv_K = 20.0, nv_M = 4.0, nv_S = 1.0, nv_mbar = 10.0, nv_sbar = 2.0,
           nv_delta = 0.1, nv_w = 0.0;
};

MarketModel make_model(const RunConfig& cfg) {
    MarketModel model;
    model.T = cfg.T;
    model.n_steps = cfg.steps;
    model.mu = cfg.mu;
    model.sigma = cfg.sigma;
    model.r = cfg.r;
    if (!cfg.atoms.empty()) {
        std::stringstream ss(cfg.atoms);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            double zeta, lambda, gamma;
            if (std::sscanf(tok.c_str(), "%lf:%lf:%lf", &zeta, &lambda, &gamma) != 3)
                throw std::invalid_argument("bad --atoms entry: " + tok);
            model.atoms.push_back({zeta, lambda, Curve(gamma)});
        }
    }
    return model;
}

json config_json(const RunConfig& c, const std::string& command) {
    return {{"command", command}, {"T", c.T},       {"steps", c.steps},
            {"mu", c.mu},         {"sigma", c.sigma}, {"r", c.r},
            {"atoms", c.atoms},   {"paths", c.paths}, {"seed", c.seed},
            {"basis_degree", c.basis_degree}, {"x0", c.x0},
            {"method", c.method}, {"claim", c.claim}, {"driver", c.driver},
            {"phi", c.phi},       {"alpha", c.alpha}, {"beta", c.beta},
            {"theta_min", c.theta_min}, {"theta_max", c.theta_max},
            {"theta_count", c.theta_count}, {"utility", c.utility},
            {"delta", c.delta_pow}, {"hjbi_mode", c.hjbi_mode},
            {"s", c.s}, {"x", c.x}, {"m", c.m},
            {"nv_K", c.nv_K}, {"nv_M", c.nv_M}, {"nv_S", c.nv_S},
            {"nv_mbar", c.nv_mbar}, {"nv_sbar", c.nv_sbar}, {"nv_delta", c.nv_delta},
            {"nv_w", c.nv_w}};
}

Claim parse_claim(const std::string& text) {
    if (text.rfind("const:", 0) == 0) return Claim::constant(std::stod(text.substr(6)));
    if (text == "terminal-identity") return Claim::terminal([](double v) { return v; });
    if (text == "terminal-log") return Claim::terminal([](double v) { return std::log(v); });
    throw std::invalid_argument("unknown claim: " + text);
}

// Markov state of the risky price: log S1(t)/S1(0) sampled on the ensemble.
Eigen::MatrixXd log_price_state(const MarketModel& model, const PathEnsemble& paths) {
    std::vector<Curve> gammas;
    for (const auto& a : model.atoms) gammas.push_back(a.gamma);
    return stochastic_exponential(paths, model.mu, model.sigma, gammas)
        .array().log().matrix();
}

// Terminal wealth of the quadratic-risk optimum: x + int (mu/sig)^2 dt
// + int (mu/sig) dB, sampled per path on the grid.
Eigen::MatrixXd optimal_wealth_state(const MarketModel& model, double x0,
                                     const PathEnsemble& paths) {
    const int P = paths.n_paths(), N = paths.n_steps();
    const double dt = paths.dt();
    Eigen::MatrixXd state(P, N + 1);
    state.col(0).setConstant(x0);
    for (int n = 0; n < N; ++n) {
        const double ratio = model.mu(paths.grid[n]) / model.sigma(paths.grid[n]);
        state.col(n + 1) = state.col(n).array() + ratio * ratio * dt +
                           ratio * paths.dB.col(n).array();
    }
    return state;
}

int run_command(const std::string& command, const RunConfig& cfg, json& results) {
    if (command == "simulate") {
        const MarketModel model = make_model(cfg);
        const PathEnsemble paths = simulate(model, cfg.paths, cfg.seed);
        const std::string out = cfg.out.empty() ? "ensemble.csv" : cfg.out;
        write_ensemble_csv(paths, out);
        const double dt = paths.dt();
        results["csv"] = out;
        results["dB_mean"] = paths.dB.mean();
        results["dB_var"] = (paths.dB.array() - paths.dB.mean()).square().mean();
        results["dt"] = dt;
        for (int j = 0; j < paths.n_atoms(); ++j)
            results["mean_total_jumps_atom" + std::to_string(j)] =
                paths.jumps[j].cast<double>().rowwise().sum().mean();
        return 0;
    }
    if (command == "solve-bsde") {
        const MarketModel model = make_model(cfg);
        const PathEnsemble paths = simulate(model, cfg.paths, cfg.seed);
        const Claim claim = parse_claim(cfg.claim);
        BsdeSolution sol;
        if (cfg.method == "linear") {
            LinearDriverParams params;
            params.phi = cfg.phi;
            params.alpha = cfg.alpha;
            params.beta = cfg.beta;
            for (std::size_t j = 0; j < model.atoms.size(); ++j)
                params.gamma_coef.push_back(Curve(0.0));
            sol = solve_linear(params, claim, paths, cfg.basis_degree);
        } else if (cfg.method == "regression") {
            Driver drv;
            if (cfg.driver == "zero") drv = Driver::zero(static_cast<int>(model.atoms.size()));
            else if (cfg.driver == "quadratic")
                drv = Driver::quadratic_z(static_cast<int>(model.atoms.size()));
            else if (cfg.driver == "replication") {
                const double r = cfg.r, premium = (cfg.mu - cfg.r) / cfg.sigma;
                drv.eval = [r, premium](double, double y, double z, std::span<const double>) {
                    return -r * y - premium * z;
                };
                drv.lipschitz_C = std::abs(r) + std::abs(premium) + 1e-12;
                drv.depends_on_y = true;
            } else
                throw std::invalid_argument("unknown driver: " + cfg.driver);
            sol = solve_regression(drv, claim, paths, log_price_state(model, paths),
                                   cfg.basis_degree);
        } else
            throw std::invalid_argument("unknown method: " + cfg.method);
        if (!cfg.out.empty()) write_solution_csv(sol, paths.grid, cfg.out);
        results["Y0"] = sol.Y0;
        results["method_tag"] = sol.method_tag;
        results["notes"] = sol.notes;
        return 0;
    }
    if (command == "risk") {
        const MarketModel model = make_model(cfg);
        const PathEnsemble paths = simulate(model, cfg.paths, cfg.seed);
        RiskMeasureSpec spec;
        spec.label = cfg.driver;
        if (cfg.driver == "quadratic")
            spec.driver = Driver::quadratic_z(static_cast<int>(model.atoms.size()));
        else if (cfg.driver == "zero")
            spec.driver = Driver::zero(static_cast<int>(model.atoms.size()));
        else
            throw std::invalid_argument("unknown driver: " + cfg.driver);
        Eigen::MatrixXd state;
        Claim claim = Claim::constant(0.0);
        if (cfg.claim == "optimal-wealth") {
            state = optimal_wealth_state(model, cfg.x0, paths);
            claim = Claim::terminal([](double v) { return v; });
        } else {
            state = log_price_state(model, paths);
            claim = parse_claim(cfg.claim);
        }
        results["rho"] = rho_static(spec, claim, paths, state, cfg.basis_degree);
        return 0;
    }
    if (command == "dual-risk") {
        const MarketModel model = make_model(cfg);
        const PathEnsemble paths = simulate(model, cfg.paths, cfg.seed);
        const Eigen::MatrixXd state = optimal_wealth_state(model, cfg.x0, paths);
        const Claim claim = Claim::terminal([](double v) { return v; });
        ScenarioFamily family;
        for (int i = 0; i < cfg.theta_count; ++i) {
            Scenario s;
            s.theta0 = cfg.theta_min + (cfg.theta_max - cfg.theta_min) * i /
                                           std::max(1, cfg.theta_count - 1);
            family.scenarios.push_back(s);
        }
        const DualResult dual = rho_dual(claim, family, model, paths, state);
        results["value"] = dual.value;
        results["argmax_index"] = dual.argmax_index;
        results["argmax_theta0"] = dual.argmax.theta0(0.0);
        results["scenario_values"] = dual.scenario_values;
        return 0;
    }
    if (command == "utility") {
        const MarketModel model = make_model(cfg);
        const PathEnsemble paths = simulate(model, cfg.paths, cfg.seed);
        const Utility util = cfg.utility == "log" ? Utility::log_utility()
                                                  : Utility::power(cfg.delta_pow);
        const UtilityResult res = utility_optimize(util, model, cfg.x0, paths);
        results["c"] = res.c;
        results["c_closed_form"] = res.c_closed_form;
        results["expected_utility"] = res.expected_utility.value;
        results["expected_utility_se"] = res.expected_utility.std_error;
        results["budget_residual"] = res.budget_residual.value;
        results["budget_residual_se"] = res.budget_residual.std_error;
        return 0;
    }
    if (command == "risk-min") {
        const MarketModel model = make_model(cfg);
        const PathEnsemble paths = simulate(model, cfg.paths, cfg.seed);
        const RiskMinResult res = risk_minimize_quadratic(model, cfg.x0, paths);
        results["analytic"] = res.analytic;
        results["mc"] = res.mc.value;
        results["mc_se"] = res.mc.std_error;
        results["entropy"] = res.entropy.value;
        results["entropy_se"] = res.entropy.std_error;
        return 0;
    }
    if (command == "hjbi") {
        const GameSpec spec{make_model(cfg)};
        if (cfg.hjbi_mode == "solve") {
            const FirstOrderSolution sol = solve_first_order(spec, cfg.s);
            results["theta0"] = sol.controls.theta0;
            results["theta1"] = sol.controls.theta1;
            results["w"] = sol.controls.w;
            results["residual"] = sol.residual;
            results["iterations"] = sol.iterations;
        } else if (cfg.hjbi_mode == "value") {
            results["value"] = value_closed(spec, cfg.s, cfg.x, cfg.m);
        } else if (cfg.hjbi_mode == "verify") {
            const CandidateValue phi = CandidateValue::entropic_ansatz(spec.market);
            const auto controls = [&spec](double s) {
                return solve_first_order(spec, s).controls;
            };
            const HjbiReport rep = verify_hjbi(spec, phi, controls);
            results["report"] = json::parse(rep.to_json());
            results["all_pass"] = rep.all_pass();
            if (!rep.all_pass()) return 1;
        } else
            throw std::invalid_argument("unknown hjbi mode: " + cfg.hjbi_mode);
        return 0;
    }
    if (command == "newsvendor") {
        NewsvendorSpec spec;
        spec.K = cfg.nv_K;
        spec.M = cfg.nv_M;
        spec.S = cfg.nv_S;
        spec.delta = cfg.nv_delta;
        spec.T = cfg.T;
        spec.demand_mean = cfg.nv_mbar;
        spec.demand_sd = cfg.nv_sbar;
        spec.sigma = cfg.nv_sbar;
        const std::string out = cfg.out.empty() ? "newsvendor.csv" : cfg.out;
        if (cfg.nv_w > 0.0) {
            // follower response at a fixed wholesale price
            const FollowerResponse resp = follower_response(spec, Curve(cfg.nv_w));
            StackelbergSolution sol;
            sol.grid = resp.grid;
            sol.w_hat.assign(resp.grid.size(), cfg.nv_w);
            sol.Q_hat = resp.Q;
            sol.R_hat = resp.R;
            sol.Y = resp.Y;
            sol.lambda.assign(resp.grid.size(), 0.0);
            write_stackelberg_csv(sol, out);
            results["csv"] = out;
            results["mode"] = "follower";
            results["profit"] = leader_profit(spec, Curve(cfg.nv_w));
            double worst_ratio = 0.0;
            for (int n = 0; n <= spec.n_steps; ++n) {
                const double ratio = (resp.R[n] - cfg.nv_w) / (resp.R[n] - spec.S);
                worst_ratio = std::max(worst_ratio,
                                       std::abs(h_and_f(spec, resp.grid[n], resp.Q[n]).first -
                                                ratio));
            }
            results["max_ratio_residual"] = worst_ratio;
            return 0;
        }
        const StackelbergSolution sol = leader_price(spec);
        write_stackelberg_csv(sol, out);
        double max_res = 0.0;
        for (int n = 0; n <= spec.n_steps; ++n)
            max_res = std::max(max_res, std::abs(leader_foc_residual(spec, sol, n)));
        results["csv"] = out;
        results["sweeps"] = sol.sweeps;
        results["w0"] = sol.w_hat.front();
        results["max_foc_residual"] = max_res;
        results["profit"] = leader_profit(spec, Curve([&sol](double t) {
            const double h = sol.grid[1] - sol.grid[0];
            const int i = std::min<int>(static_cast<int>(t / h),
                                        static_cast<int>(sol.grid.size()) - 2);
            const double a = (t - sol.grid[i]) / h;
            return (1.0 - a) * sol.w_hat[i] + a * sol.w_hat[i + 1];
        }));
        return 0;
    }
    if (command == "verify") {
        // condensed cross-checks at reduced path counts; the full acceptance
        // suite lives in the test binary
        MarketModel model = make_model(cfg);
        model.atoms.clear();
        const GameSpec spec{model};
        json checks;
        const double closed = value_closed(spec, 0.0, cfg.x0, 1.0);
        const PathEnsemble paths = simulate(model, std::min(cfg.paths, 20000), cfg.seed);
        const RiskMinResult rm = risk_minimize_quadratic(model, cfg.x0, paths);
        checks["value_closed"] = closed;
        checks["risk_min_analytic"] = rm.analytic;
        checks["analytic_routes_agree"] =
            std::abs(closed - rm.analytic) <= 1e-10 * std::abs(closed);
        checks["mc_within_3se"] = std::abs(rm.mc.value - rm.analytic) <=
                                  3.0 * rm.mc.std_error + 1e-12;
        const FirstOrderSolution fo = solve_first_order(spec, 0.0);
        checks["first_order_theta0"] = fo.controls.theta0;
        checks["first_order_w"] = fo.controls.w;
        checks["first_order_residual"] = fo.residual;
        VerifyOptions opt;
        opt.n_s = opt.n_x = opt.n_m = 8;
        const CandidateValue phi = CandidateValue::entropic_ansatz(model);
        const auto controls = [&spec](double s) { return solve_first_order(spec, s).controls; };
        const HjbiReport rep = verify_hjbi(spec, phi, controls, opt);
        checks["hjbi_all_pass"] = rep.all_pass();
        results["checks"] = checks;
        const bool ok = checks["analytic_routes_agree"].get<bool>() &&
                        checks["mc_within_3se"].get<bool>() &&
                        rep.all_pass() && fo.residual <= 1e-10;
        results["all_pass"] = ok;
        return ok ? 0 : 1;
    }
    throw CLI::ValidationError("unknown command " + command);
}

void load_config_defaults(int argc, char** argv, RunConfig& cfg) {
    std::string path;
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--config") path = argv[i + 1];
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg.rfind("--config=", 0) == 0) path = arg.substr(9);
    }
    if (path.empty()) return;
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file " + path);
    json j;
    f >> j;
    auto get = [&j](const char* key, auto& slot) {
        if (j.contains(key)) slot = j[key].template get<std::decay_t<decltype(slot)>>();
    };
    get("T", cfg.T); get("steps", cfg.steps); get("mu", cfg.mu);
    get("sigma", cfg.sigma); get("r", cfg.r); get("atoms", cfg.atoms);
    get("paths", cfg.paths); get("seed", cfg.seed);
    get("basis_degree", cfg.basis_degree); get("x0", cfg.x0);
    get("method", cfg.method); get("claim", cfg.claim); get("driver", cfg.driver);
    get("phi", cfg.phi); get("alpha", cfg.alpha); get("beta", cfg.beta);
    get("theta_min", cfg.theta_min); get("theta_max", cfg.theta_max);
    get("theta_count", cfg.theta_count); get("utility", cfg.utility);
    get("delta", cfg.delta_pow); get("hjbi_mode", cfg.hjbi_mode);
    get("s", cfg.s); get("x", cfg.x); get("m", cfg.m);
    get("nv_K", cfg.nv_K); get("nv_M", cfg.nv_M); get("nv_S", cfg.nv_S);
    get("nv_mbar", cfg.nv_mbar); get("nv_sbar", cfg.nv_sbar);
    get("nv_delta", cfg.nv_delta); get("nv_w", cfg.nv_w);
}

} // namespace

int main(int argc, char** argv) {
    RunConfig cfg;
    std::string config_path;
    try {
        load_config_defaults(argc, argv, cfg);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }

    CLI::App app{"BSDE / risk-minimization toolkit"};
    app.require_subcommand(1);
    std::vector<CLI::App*> subs;
    for (const char* name : {"simulate", "solve-bsde", "risk", "dual-risk", "utility",
                             "risk-min", "hjbi", "newsvendor", "verify"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "JSON config file (flags override)");
        sub->add_option("--T", cfg.T);
        sub->add_option("--steps", cfg.steps);
        sub->add_option("--mu", cfg.mu);
        sub->add_option("--sigma", cfg.sigma);
        sub->add_option("--r", cfg.r);
        sub->add_option("--atoms", cfg.atoms, "zeta:lambda:gamma[,...]");
        sub->add_option("--paths", cfg.paths);
        sub->add_option("--seed", cfg.seed);
        sub->add_option("--basis-degree", cfg.basis_degree);
        sub->add_option("--x0", cfg.x0);
        sub->add_option("--out", cfg.out, "CSV output path");
        sub->add_option("--json", cfg.json_out, "write the result record here too");
        subs.push_back(sub);
    }
    app.get_subcommand("solve-bsde")->add_option("--method", cfg.method, "linear|regression");
    app.get_subcommand("solve-bsde")->add_option("--claim", cfg.claim);
    app.get_subcommand("solve-bsde")->add_option("--driver", cfg.driver);
    app.get_subcommand("solve-bsde")->add_option("--phi", cfg.phi);
    app.get_subcommand("solve-bsde")->add_option("--alpha", cfg.alpha);
    app.get_subcommand("solve-bsde")->add_option("--beta", cfg.beta);
    app.get_subcommand("risk")->add_option("--driver", cfg.driver, "quadratic|zero");
    app.get_subcommand("risk")->add_option("--claim", cfg.claim);
    app.get_subcommand("dual-risk")->add_option("--theta-min", cfg.theta_min);
    app.get_subcommand("dual-risk")->add_option("--theta-max", cfg.theta_max);
    app.get_subcommand("dual-risk")->add_option("--theta-count", cfg.theta_count);
    app.get_subcommand("utility")->add_option("--utility", cfg.utility, "log|power");
    app.get_subcommand("utility")->add_option("--delta", cfg.delta_pow);
    app.get_subcommand("hjbi")->add_option("mode", cfg.hjbi_mode, "solve|verify|value");
    app.get_subcommand("hjbi")->add_option("--s", cfg.s);
    app.get_subcommand("hjbi")->add_option("--x", cfg.x);
    app.get_subcommand("hjbi")->add_option("--m", cfg.m);
    app.get_subcommand("newsvendor")->add_option("--K", cfg.nv_K);
    app.get_subcommand("newsvendor")->add_option("--M", cfg.nv_M);
    app.get_subcommand("newsvendor")->add_option("--S", cfg.nv_S);
    app.get_subcommand("newsvendor")->add_option("--mbar", cfg.nv_mbar);
    app.get_subcommand("newsvendor")->add_option("--sbar", cfg.nv_sbar);
    app.get_subcommand("newsvendor")->add_option("--delta", cfg.nv_delta);
    app.get_subcommand("newsvendor")
        ->add_option("--w", cfg.nv_w, "fixed wholesale price: emit the follower response only");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    json record;
    record["command"] = command;
    record["config"] = config_json(cfg, command);
    record["seed"] = cfg.seed;
    record["errors"] = json::array();

    const auto t0 = std::chrono::steady_clock::now();
    int status = 0;
    json results;
    try {
        status = run_command(command, cfg, results);
    } catch (const CLI::Error& e) {
        record["errors"].push_back(e.what());
        status = 2;
    } catch (const std::invalid_argument& e) {
        record["errors"].push_back(e.what());
        status = 2;
    } catch (const std::exception& e) {
        record["errors"].push_back(e.what());
        status = 1;
    }
    record["results"] = results;
    record["runtime_ms"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - t0).count();

    const std::string text = record.dump(2);
    std::cout << text << "\n";
    if (!cfg.json_out.empty()) {
        std::ofstream f(cfg.json_out);
        f << text << "\n";
    }
    return status;
}

#include "mdpopt/bellman.hpp"
#include "mdpopt/cross_validate.hpp"
#include "mdpopt/generator.hpp"
#include "mdpopt/io.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>

using namespace mdpopt;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitEquivalence = 3;
constexpr int kExitRoute = 4;

std::string fmt(Scalar x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string vec_text(const Vector& v) {
    std::string out = "[";
    for (Index i = 0; i < v.size(); ++i) out += (i ? ", " : "") + fmt(v(i));
    return out + "]";
}

std::string mat_text(const Matrix& m) {
    std::string out = "[";
    for (Index i = 0; i < m.rows(); ++i) out += (i ? ", " : "") + vec_text(m.row(i).transpose());
    return out + "]";
}

/// Loads and validates; prints every violation and returns false on failure.
bool load(const std::string& path, TabularMdp& mdp) {
    try {
        mdp = read_mdp_file(path);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return false;
    }
    const ValidationResult result = validate_mdp(mdp);
    for (const auto& v : result.violations) std::cerr << "violation: " << to_string(v.kind) << ": " << v.detail << "\n";
    return result.ok();
}

int cmd_validate(const std::string& path) {
    TabularMdp mdp;
    if (!load(path, mdp)) return kExitValidation;
    std::cout << "valid: " << mdp.num_states() << " states, " << mdp.num_actions() << " actions, gamma "
              << fmt(mdp.discount) << "\n";
    if (mdp.undiscounted()) {
        const ErgodicityReport erg = ergodicity_probe(mdp, 16, 0);
        std::cout << "ergodicity: " << to_string(erg.verdict) << " (" << erg.probed_policies << " policies probed)\n";
    }
    return kExitOk;
}

struct SolveArgs {
    std::string file;
    std::string setting;
    std::string route;
    std::string trace;
    std::string format = "table";
};

int cmd_solve(const SolveArgs& args) {
    TabularMdp mdp;
    if (!load(args.file, mdp)) return kExitValidation;
    const Setting setting = parse_setting(args.setting);
    const Route route = parse_route(args.route);

    RouteOptions options;
    std::unique_ptr<std::ofstream> trace;
    if (!args.trace.empty()) {
        trace = std::make_unique<std::ofstream>(args.trace);
        if (!*trace) {
            std::cerr << "error: cannot open trace file " << args.trace << "\n";
            return kExitRoute;
        }
        std::ofstream& os = *trace;
        os.precision(17);
        switch (route) {
        case Route::Saddle:
            os << "iteration,gap,lagrangian\n";
            options.saddle.on_check = [&os](Index it, Scalar gap, Scalar l) { os << it << ',' << gap << ',' << l << '\n'; };
            break;
        case Route::PolicyGradient:
        case Route::Dual:
            os << "iteration,objective,grad_norm\n";
            options.pg.on_iteration = [&os](Index it, Scalar j, Scalar g) { os << it << ',' << j << ',' << g << '\n'; };
            if (route == Route::PolicyGradient || is_regularized(setting)) break;
            [[fallthrough]];
        default:
            os << "iteration,change\n";
            options.bellman.on_iteration = [&os](Index it, Scalar c) { os << it << ',' << c << '\n'; };
            break;
        }
    }

    RouteResult rr;
    try {
        rr = run_route(mdp, setting, route, options);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }

    if (args.format == "json") {
        EquivalenceReport single;
        single.setting = setting;
        single.routes.push_back(rr);
        single.kkt_pass = rr.kkt && rr.kkt->pass;
        single.pass = rr.ok;
        std::cout << report_to_json(single);
    } else {
        std::cout << "setting: " << to_string(setting) << "\nroute: " << to_string(route) << "\n";
        std::cout << "status: " << (rr.ok ? "ok" : "error: " + rr.error) << "\n";
        std::cout << "objective: " << fmt(rr.objective) << "\n";
        std::cout << "v: " << vec_text(rr.v) << "\n";
        if (rr.rho) std::cout << "rho: " << fmt(*rr.rho) << "\n";
        std::cout << "policy: " << mat_text(rr.policy.probs) << "\n";
        std::cout << "mu: " << mat_text(rr.mu) << "\n";
        if (rr.kkt) {
            const KktReport& k = *rr.kkt;
            std::printf("kkt: primal %.3e dual %.3e stationarity %.3e slackness %.3e -> %s\n", k.primal_feasibility,
                        k.dual_feasibility, k.stationarity, k.complementary_slackness, k.pass ? "pass" : "FAIL");
        }
        std::cout << "iterations: " << rr.iterations << "\n";
    }
    return rr.ok ? kExitOk : kExitRoute;
}

int cmd_cross_validate(const std::string& path, const std::string& setting_text, double tol, const std::string& format) {
    TabularMdp mdp;
    if (!load(path, mdp)) return kExitValidation;
    CrossValidateOptions options;
    if (tol > 0) {
        options.tol.objective = tol;
        options.tol.saddle = std::max(tol, options.tol.saddle);
    }
    EquivalenceReport report;
    try {
        report = cross_validate(mdp, parse_setting(setting_text), options);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    std::cout << (format == "json" ? report_to_json(report) : report_to_table(report));
    return report.pass ? kExitOk : kExitEquivalence;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tabular MDP optimization workbench"};
    app.require_subcommand(1);
    const std::vector<std::string> settings{"disc-std", "disc-reg", "avg-std", "avg-reg"};
    const std::vector<std::string> routes{"bellman", "primal", "dual", "saddle", "pg", "oracle"};
    const std::vector<std::string> formats{"table", "json"};

    std::string validate_file;
    auto* validate = app.add_subcommand("validate", "Check an MDP file");
    validate->add_option("file", validate_file)->required();

    SolveArgs solve_args;
    auto* solve = app.add_subcommand("solve", "Solve one setting by one route");
    solve->add_option("file", solve_args.file)->required();
    solve->add_option("--setting", solve_args.setting)->required()->check(CLI::IsMember(settings));
    solve->add_option("--route", solve_args.route)->required()->check(CLI::IsMember(routes));
    solve->add_option("--trace", solve_args.trace, "Write per-iteration values as comma-separated text");
    solve->add_option("--format", solve_args.format)->check(CLI::IsMember(formats));

    std::string cv_file, cv_setting, cv_format = "table";
    double cv_tol = 0;
    auto* cv = app.add_subcommand("cross-validate", "Run every route and compare");
    cv->add_option("file", cv_file)->required();
    cv->add_option("--setting", cv_setting)->required()->check(CLI::IsMember(settings));
    cv->add_option("--tol", cv_tol, "Objective agreement tolerance")->check(CLI::PositiveNumber);
    cv->add_option("--format", cv_format)->check(CLI::IsMember(formats));

    GeneratorParams gen;
    std::string gen_out;
    auto* generate = app.add_subcommand("generate", "Write a seeded random instance");
    generate->add_option("--states", gen.num_states)->required()->check(CLI::PositiveNumber);
    generate->add_option("--actions", gen.num_actions)->required()->check(CLI::PositiveNumber);
    generate->add_option("--gamma", gen.discount)->required()->check(CLI::Range(0.0, 1.0));
    generate->add_option("--seed", gen.seed)->required();
    generate->add_option("--epsilon", gen.smoothing, "Transition smoothing")->check(CLI::Range(1e-12, 0.5));
    generate->add_option("--out", gen_out)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*validate) return cmd_validate(validate_file);
        if (*solve) return cmd_solve(solve_args);
        if (*cv) return cmd_cross_validate(cv_file, cv_setting, cv_tol, cv_format);
        if (*generate) {
            if (gen.discount <= 0.0) {
                std::cerr << "error: gamma must be in (0, 1]\n";
                return kExitValidation;
            }
            write_mdp_file(generate_random_mdp(gen), gen_out);
            return kExitOk;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return kExitOk;
}

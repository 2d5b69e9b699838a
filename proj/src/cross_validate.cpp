#include "mdpopt/cross_validate.hpp"

#include "mdpopt/lp.hpp"
#include "mdpopt/numerics.hpp"
#include "mdpopt/oracle.hpp"
#include "mdpopt/random.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace mdpopt {

std::string_view to_string(Route r) {
    switch (r) {
    case Route::Bellman: return "bellman";
    case Route::Primal: return "primal";
    case Route::Dual: return "dual";
    case Route::Saddle: return "saddle";
    case Route::PolicyGradient: return "pg";
    case Route::Oracle: return "oracle";
    }
    return "?";
}

Route parse_route(std::string_view text) {
    for (Route r : all_routes())
        if (to_string(r) == text) return r;
    throw Error(ErrorCode::ParseError, "unknown route '" + std::string(text) + "'");
}

const std::vector<Route>& all_routes() {
    static const std::vector<Route> routes{Route::Bellman, Route::Primal,         Route::Dual,
                                           Route::Saddle,  Route::PolicyGradient, Route::Oracle};
    return routes;
}

std::string_view to_string(PolicyAgreement p) {
    switch (p) {
    case PolicyAgreement::Matched: return "matched";
    case PolicyAgreement::SkippedDegenerate: return "skipped-degenerate";
    case PolicyAgreement::Mismatched: return "mismatched";
    case PolicyAgreement::NotApplicable: return "n/a";
    }
    return "?";
}

const RouteResult* EquivalenceReport::find(Route r) const {
    for (const auto& rr : routes)
        if (rr.route == r) return &rr;
    return nullptr;
}

namespace {

ValueSolution evaluate_policy(Setting setting, const TabularMdp& mdp, const Policy& pi) {
    return is_average(setting) ? evaluate_average(mdp, pi, is_regularized(setting))
                               : evaluate_discounted(mdp, pi, is_regularized(setting));
}

ValueSolution bellman_optimum(Setting setting, const TabularMdp& mdp, const SolverParams& params) {
    switch (setting) {
    case Setting::DiscStd: return value_iteration(mdp, params);
    case Setting::DiscReg: return soft_value_iteration(mdp, params);
    case Setting::AvgStd: return policy_iteration_average(mdp, params);
    case Setting::AvgReg: return soft_relative_value_iteration(mdp, params);
    }
    throw Error(ErrorCode::SettingMismatch, "unknown setting");
}

/// Greedy or Gibbs policy of a value solution.
Policy policy_of(Setting setting, const TabularMdp& mdp, const Vector& v, std::optional<Scalar> rho) {
    return is_regularized(setting) ? gibbs_policy(mdp, v, rho).policy : greedy_policy(mdp, v, rho).policy;
}

/// Fills v/rho/mu from a policy by exact evaluation.
void certify_policy(Setting setting, const TabularMdp& mdp, RouteResult& out) {
    const ValueSolution sol = evaluate_policy(setting, mdp, out.policy);
    out.v = sol.v;
    out.rho = sol.rho;
    out.mu = occupancy_from_policy(mdp, out.policy, setting).mu;
}

void run_bellman(Setting setting, const TabularMdp& mdp, const RouteOptions& options, RouteResult& out) {
    const ValueSolution sol = bellman_optimum(setting, mdp, options.bellman);
    out.v = sol.v;
    out.rho = sol.rho;
    out.iterations = sol.iterations;
    out.objective = primal_objective(setting, mdp, sol.v, sol.rho.value_or(0.0));
    out.policy = policy_of(setting, mdp, sol.v, sol.rho);
    out.mu = occupancy_from_policy(mdp, out.policy, setting).mu;
}

void run_primal(Setting setting, const TabularMdp& mdp, const RouteOptions& options, RouteResult& out) {
    const ProgramSpec spec = build_primal(setting, mdp);
    const Index n = mdp.num_states();
    if (const auto* lp = std::get_if<LinearProgramSpec>(&spec)) {
        const LpSolution sol = solve_lp(*lp);
        if (sol.status != LpStatus::Optimal)
            throw Error(ErrorCode::Stalled, "primal LP ended " + std::string(to_string(sol.status)));
        out.v = sol.x.head(n);
        if (is_average(setting)) out.rho = sol.x(n);
        out.objective = sol.objective;
        out.iterations = sol.pivot_count;
    } else {
        // Certify the soft fixed point as a feasible point with every constraint tight.
        const auto& cp = std::get<ConvexProgramSpec>(spec);
        const ValueSolution fixed = bellman_optimum(setting, mdp, options.bellman);
        Vector x(cp.num_variables());
        x.head(n) = fixed.v;
        if (is_average(setting)) x(n) = *fixed.rho;
        const Vector g = cp.constraint_values(x);
        if (g.maxCoeff() > 1e-8 || g.minCoeff() < -1e-8)
            throw Error(ErrorCode::NotConverged, "soft fixed point is not feasible-and-tight for the convex primal");
        out.v = fixed.v;
        out.rho = fixed.rho;
        out.objective = cp.objective(x);
        out.iterations = fixed.iterations;
    }
    out.policy = policy_of(setting, mdp, out.v, out.rho);
    out.mu = occupancy_from_policy(mdp, out.policy, setting).mu;
}

void run_dual(Setting setting, const TabularMdp& mdp, const RouteOptions& options, RouteResult& out) {
    const ProgramSpec spec = build_dual(setting, mdp);
    const Index n = mdp.num_states();
    const Index m = mdp.num_actions();
    if (const auto* lp = std::get_if<LinearProgramSpec>(&spec)) {
        const LpSolution sol = solve_lp(*lp);
        if (sol.status != LpStatus::Optimal)
            throw Error(ErrorCode::Stalled, "dual LP ended " + std::string(to_string(sol.status)));
        const OccupancyMeasure mu = OccupancyMeasure::from_flat(sol.x, n, m, setting);
        out.objective = sol.objective;
        out.iterations = sol.pivot_count;
        out.policy = policy_from_occupancy(mu).policy;
        const ValueSolution vs = evaluate_policy(setting, mdp, out.policy);
        out.v = vs.v;
        out.rho = vs.rho;
        out.mu = mu.mu;
    } else {
        // Dual point built by policy-gradient ascent, mu = w^pi pi.
        const auto& cp = std::get<ConvexProgramSpec>(spec);
        const AscentTrace trace = pg_ascend(setting, mdp, PolicyLogits::zeros(n, m), options.pg);
        if (!trace.converged) throw Error(ErrorCode::NotConverged, "policy-gradient construction did not converge");
        out.policy = trace.final_policy;
        certify_policy(setting, mdp, out);
        const OccupancyMeasure mu{out.mu, setting};
        if (dual_constraint_residual(setting, mdp, mu.mu) > 1e-8)
            throw Error(ErrorCode::NotConverged, "constructed occupancy violates the dual constraints");
        out.objective = cp.objective(mu.flat());
        out.iterations = static_cast<Index>(trace.objective.size());
    }
}

void run_saddle(Setting setting, const TabularMdp& mdp, const RouteOptions& options, RouteResult& out) {
    const SaddleResult sol = solve_saddle(setting, mdp, options.saddle);
    out.iterations = sol.iterations;
    out.v = sol.v;
    out.rho = sol.rho;
    out.mu = sol.mu.mu;
    out.policy = policy_from_occupancy(sol.mu).policy;
    out.objective = sol.lagrangian;
    if (!sol.converged)
        throw Error(ErrorCode::NotConverged,
                    "saddle gap " + std::to_string(sol.gap_trace.empty() ? kInf : sol.gap_trace.back()) +
                        " above tolerance");
}

void run_pg(Setting setting, const TabularMdp& mdp, const RouteOptions& options, RouteResult& out) {
    SplitMix64 rng(options.pg_seed);
    PolicyLogits init{Matrix(mdp.num_states(), mdp.num_actions())};
    for (Index s = 0; s < init.theta.rows(); ++s)
        for (Index a = 0; a < init.theta.cols(); ++a) init.theta(s, a) = rng.uniform(-1.0, 1.0);
    const AscentTrace trace = pg_ascend(setting, mdp, init, options.pg);
    out.iterations = static_cast<Index>(trace.objective.size());
    out.policy = trace.final_policy;
    out.objective = pg_objective(setting, mdp, out.policy);
    certify_policy(setting, mdp, out);
    if (!trace.converged) throw Error(ErrorCode::MaxItersExceeded, "policy-gradient ascent hit max_iters");
}

void run_oracle(Setting setting, const TabularMdp& mdp, RouteResult& out) {
    const OracleResult orc = brute_force_oracle(mdp, setting);
    out.objective = orc.objective;
    out.v = orc.v;
    out.rho = orc.rho;
    out.policy = orc.policy;
    out.mu = occupancy_from_policy(mdp, out.policy, setting).mu;
}

} // namespace

RouteResult run_route(const TabularMdp& mdp, Setting setting, Route route, const RouteOptions& options) {
    require_setting_matches(setting, mdp);
    RouteResult out;
    out.route = route;
    const auto start = std::chrono::steady_clock::now();
    try {
        require_valid(mdp);
        switch (route) {
        case Route::Bellman: run_bellman(setting, mdp, options, out); break;
        case Route::Primal: run_primal(setting, mdp, options, out); break;
        case Route::Dual: run_dual(setting, mdp, options, out); break;
        case Route::Saddle: run_saddle(setting, mdp, options, out); break;
        case Route::PolicyGradient: run_pg(setting, mdp, options, out); break;
        case Route::Oracle: run_oracle(setting, mdp, out); break;
        }
        out.ok = true;
    } catch (const Error& e) {
        out.ok = false;
        out.error = e.what();
    }
    if (out.v.size() == mdp.num_states() && out.mu.rows() == mdp.num_states()) {
        const Scalar tol = route == Route::Saddle ? options.saddle_kkt_tol : options.kkt_tol;
        out.kkt = kkt_residuals(setting, mdp, out.v, out.rho, OccupancyMeasure{out.mu, setting}, tol);
    }
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

EquivalenceReport cross_validate(const TabularMdp& mdp, Setting setting, const CrossValidateOptions& options) {
    require_setting_matches(setting, mdp);
    EquivalenceReport report;
    report.setting = setting;

    const auto validation = validate_mdp(mdp);
    if (!validation.ok()) {
        for (const auto& v : validation.violations) report.warnings.push_back(v.detail);
        return report;
    }

    if (is_average(setting)) {
        const ErgodicityReport erg = ergodicity_probe(mdp, options.ergodicity_random_policies, options.ergodicity_seed);
        report.ergodicity = std::string(to_string(erg.verdict));
        if (erg.verdict == ErgodicityVerdict::Violated) {
            report.warnings.push_back("instance violates the unichain assumption; routes skipped");
            return report;
        }
        if (erg.verdict == ErgodicityVerdict::Inconclusive)
            report.warnings.push_back("periodic chains found; average-reward routes may not converge");
    }

    RouteOptions route_options = options.route;
    route_options.kkt_tol = options.tol.kkt;
    for (Route r : options.routes) report.routes.push_back(run_route(mdp, setting, r, route_options));

    bool all_ok = true;
    report.kkt_pass = true;
    for (const auto& rr : report.routes) {
        all_ok = all_ok && rr.ok;
        report.kkt_pass = report.kkt_pass && rr.kkt && rr.kkt->pass;
        if (rr.ok && is_average(setting)) {
            const Vector w = stationary_distribution(induce_chain(mdp, rr.policy).p_pi);
            if (has_negligible_mass(w))
                report.warnings.push_back(std::string(to_string(rr.route)) + ": stationary mass below 1e-12");
        }
    }

    bool deviations_ok = true;
    for (std::size_t i = 0; i < report.routes.size(); ++i) {
        for (std::size_t j = i + 1; j < report.routes.size(); ++j) {
            const auto& a = report.routes[i];
            const auto& b = report.routes[j];
            if (!a.ok || !b.ok) continue;
            PairDeviation d;
            d.first = a.route;
            d.second = b.route;
            d.deviation = std::abs(a.objective - b.objective);
            d.tolerance = (a.route == Route::Saddle || b.route == Route::Saddle) ? options.tol.saddle
                                                                                  : options.tol.objective;
            d.ok = d.deviation <= d.tolerance;
            deviations_ok = deviations_ok && d.ok;
            report.deviations.push_back(d);
        }
    }

    const RouteResult* primal = report.find(Route::Primal);
    const RouteResult* dual = report.find(Route::Dual);
    if (primal && dual && primal->ok && dual->ok) report.duality_gap = primal->objective - dual->objective;

    // Policy identity against the oracle (or the Bellman route without one).
    const RouteResult* reference = report.find(Route::Oracle);
    if (!reference || !reference->ok) reference = report.find(Route::Bellman);
    if (reference && reference->ok) {
        report.policy_agreement = PolicyAgreement::Matched;
        if (is_regularized(setting)) {
            for (const auto& rr : report.routes) {
                if (!rr.ok || &rr == reference) continue;
                const Scalar tol = rr.route == Route::Saddle ? options.tol.saddle : options.tol.policy;
                if (sup_norm(rr.policy.probs - reference->policy.probs) > tol)
                    report.policy_agreement = PolicyAgreement::Mismatched;
            }
        } else {
            const GreedyPolicy ref = greedy_policy(mdp, reference->v, reference->rho);
            if (ref.has_near_ties) {
                report.policy_agreement = PolicyAgreement::SkippedDegenerate;
            } else {
                for (const auto& rr : report.routes) {
                    if (!rr.ok) continue;
                    for (Index s = 0; s < mdp.num_states(); ++s) {
                        Index best;
                        rr.policy.probs.row(s).maxCoeff(&best);
                        if (best != ref.actions[static_cast<std::size_t>(s)])
                            report.policy_agreement = PolicyAgreement::Mismatched;
                    }
                }
            }
        }
    }

    report.pass = all_ok && deviations_ok && report.kkt_pass && !report.routes.empty() &&
                  report.policy_agreement != PolicyAgreement::Mismatched;
    return report;
}

namespace {

using nlohmann::json;

json vec_json(const Vector& v) {
    json j = json::array();
    for (Index i = 0; i < v.size(); ++i) j.push_back(v(i));
    return j;
}

json mat_json(const Matrix& m) {
    json j = json::array();
    for (Index i = 0; i < m.rows(); ++i) j.push_back(vec_json(m.row(i).transpose()));
    return j;
}

Vector json_vec(const json& j) {
    Vector v(static_cast<Index>(j.size()));
    for (Index i = 0; i < v.size(); ++i) v(i) = j[static_cast<std::size_t>(i)].get<Scalar>();
    return v;
}

Matrix json_mat(const json& j) {
    const Index rows = static_cast<Index>(j.size());
    const Index cols = rows ? static_cast<Index>(j[0].size()) : 0;
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) m.row(i) = json_vec(j[static_cast<std::size_t>(i)]).transpose();
    return m;
}

PolicyAgreement parse_agreement(const std::string& s) {
    for (auto p : {PolicyAgreement::Matched, PolicyAgreement::SkippedDegenerate, PolicyAgreement::Mismatched,
                   PolicyAgreement::NotApplicable})
        if (to_string(p) == s) return p;
    throw Error(ErrorCode::ParseError, "unknown policy agreement '" + s + "'");
}

} // namespace

std::string report_to_json(const EquivalenceReport& report) {
    json j;
    j["setting"] = std::string(to_string(report.setting));
    j["ergodicity"] = report.ergodicity;
    j["pass"] = report.pass;
    j["kkt_pass"] = report.kkt_pass;
    j["policy_agreement"] = std::string(to_string(report.policy_agreement));
    j["duality_gap"] = report.duality_gap ? json(*report.duality_gap) : json(nullptr);
    j["warnings"] = report.warnings;
    j["routes"] = json::array();
    for (const auto& rr : report.routes) {
        json r;
        r["route"] = std::string(to_string(rr.route));
        r["ok"] = rr.ok;
        r["error"] = rr.error;
        r["objective"] = rr.objective;
        r["v"] = vec_json(rr.v);
        r["rho"] = rr.rho ? json(*rr.rho) : json(nullptr);
        r["mu"] = mat_json(rr.mu);
        r["policy"] = mat_json(rr.policy.probs);
        r["iterations"] = rr.iterations;
        r["wall_seconds"] = rr.wall_seconds;
        if (rr.kkt) {
            r["kkt"] = {{"primal_feasibility", rr.kkt->primal_feasibility},
                        {"dual_feasibility", rr.kkt->dual_feasibility},
                        {"stationarity", rr.kkt->stationarity},
                        {"complementary_slackness", rr.kkt->complementary_slackness},
                        {"tightness", rr.kkt->tightness},
                        {"tolerance", rr.kkt->tolerance},
                        {"pass", rr.kkt->pass}};
        } else {
            r["kkt"] = nullptr;
        }
        j["routes"].push_back(r);
    }
    j["deviations"] = json::array();
    for (const auto& d : report.deviations) {
        j["deviations"].push_back({{"first", std::string(to_string(d.first))},
                                   {"second", std::string(to_string(d.second))},
                                   {"deviation", d.deviation},
                                   {"tolerance", d.tolerance},
                                   {"ok", d.ok}});
    }
    return j.dump(2) + "\n";
}

EquivalenceReport report_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, e.what());
    }
    try {
        EquivalenceReport report;
        report.setting = parse_setting(j.at("setting").get<std::string>());
        report.ergodicity = j.at("ergodicity").get<std::string>();
        report.pass = j.at("pass").get<bool>();
        report.kkt_pass = j.at("kkt_pass").get<bool>();
        report.policy_agreement = parse_agreement(j.at("policy_agreement").get<std::string>());
        if (!j.at("duality_gap").is_null()) report.duality_gap = j["duality_gap"].get<Scalar>();
        report.warnings = j.at("warnings").get<std::vector<std::string>>();
        for (const auto& r : j.at("routes")) {
            RouteResult rr;
            rr.route = parse_route(r.at("route").get<std::string>());
            rr.ok = r.at("ok").get<bool>();
            rr.error = r.at("error").get<std::string>();
            rr.objective = r.at("objective").get<Scalar>();
            rr.v = json_vec(r.at("v"));
            if (!r.at("rho").is_null()) rr.rho = r["rho"].get<Scalar>();
            rr.mu = json_mat(r.at("mu"));
            rr.policy.probs = json_mat(r.at("policy"));
            rr.iterations = r.at("iterations").get<Index>();
            rr.wall_seconds = r.at("wall_seconds").get<double>();
            if (!r.at("kkt").is_null()) {
                const json& k = r["kkt"];
                KktReport kkt;
                kkt.primal_feasibility = k.at("primal_feasibility").get<Scalar>();
                kkt.dual_feasibility = k.at("dual_feasibility").get<Scalar>();
                kkt.stationarity = k.at("stationarity").get<Scalar>();
                kkt.complementary_slackness = k.at("complementary_slackness").get<Scalar>();
                kkt.tightness = k.at("tightness").get<Scalar>();
                kkt.tolerance = k.at("tolerance").get<Scalar>();
                kkt.pass = k.at("pass").get<bool>();
                rr.kkt = kkt;
            }
            report.routes.push_back(std::move(rr));
        }
        for (const auto& d : j.at("deviations")) {
            PairDeviation pd;
            pd.first = parse_route(d.at("first").get<std::string>());
            pd.second = parse_route(d.at("second").get<std::string>());
            pd.deviation = d.at("deviation").get<Scalar>();
            pd.tolerance = d.at("tolerance").get<Scalar>();
            pd.ok = d.at("ok").get<bool>();
            report.deviations.push_back(pd);
        }
        return report;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, e.what());
    }
}

std::string report_to_table(const EquivalenceReport& report) {
    std::ostringstream os;
    char line[256];
    os << "setting: " << to_string(report.setting) << "    ergodicity: " << report.ergodicity << "\n";
    std::snprintf(line, sizeof line, "%-8s %-6s %24s %-5s %10s  %s\n", "route", "status", "objective", "kkt",
                  "wall(s)", "note");
    os << line;
    for (const auto& rr : report.routes) {
        const char* kkt = !rr.kkt ? "-" : (rr.kkt->pass ? "pass" : "FAIL");
        std::snprintf(line, sizeof line, "%-8s %-6s %24.15g %-5s %10.4f  %s\n", std::string(to_string(rr.route)).c_str(),
                      rr.ok ? "ok" : "ERROR", rr.objective, kkt, rr.wall_seconds, rr.error.c_str());
        os << line;
    }
    Scalar worst = 0;
    for (const auto& d : report.deviations) worst = std::max(worst, d.deviation);
    std::snprintf(line, sizeof line, "max pairwise deviation: %.3e\n", worst);
    os << line;
    if (report.duality_gap) {
        std::snprintf(line, sizeof line, "duality gap (primal - dual): %.3e\n", *report.duality_gap);
        os << line;
    }
    os << "policy agreement: " << to_string(report.policy_agreement) << "\n";
    for (const auto& w : report.warnings) os << "warning: " << w << "\n";
    os << "overall: " << (report.pass ? "PASS" : "FAIL") << "\n";
    return os.str();
}

} // namespace mdpopt

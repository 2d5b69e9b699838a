#pragma once

#include "mdpopt/bellman.hpp"
#include "mdpopt/poligrad.hpp"
#include "mdpopt/programs.hpp"
#include "mdpopt/saddle.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mdpopt {

enum class Route { Bellman, Primal, Dual, Saddle, PolicyGradient, Oracle };

std::string_view to_string(Route r);
/// Accepts "bellman", "primal", "dual", "saddle", "pg", "oracle".
Route parse_route(std::string_view text);
const std::vector<Route>& all_routes();

struct RouteOptions {
    SolverParams bellman;
    /// Tight enough that the recovered pair also passes the KKT check.
    SaddleParams saddle = [] {
        SaddleParams p;
        p.tol = 1e-7;
        return p;
    }();
    /// Run to the gradient tolerance: the policy, not only J, is certified.
    AscentParams pg = [] {
        AscentParams p;
        p.min_gain = 0;
        return p;
    }();
    std::uint64_t pg_seed = 7;   // random initial logits of the pg route
    Scalar kkt_tol = 1e-6;
    Scalar saddle_kkt_tol = 1e-6;
};

/// Outcome of one solution route, with the (v, rho, mu) pair it certifies.
struct RouteResult {
    Route route = Route::Bellman;
    bool ok = false;
    std::string error;
    Scalar objective = 0;
    Vector v;
    std::optional<Scalar> rho;
    Matrix mu;
    Policy policy;
    std::optional<KktReport> kkt;
    Index iterations = 0;
    double wall_seconds = 0;
};

/// Runs one route. Solver failures are captured in `ok`/`error`; only
/// SettingMismatch propagates.
RouteResult run_route(const TabularMdp& mdp, Setting setting, Route route, const RouteOptions& options = {});

struct Tolerances {
    Scalar objective = 1e-5;
    Scalar saddle = 1e-4; // any pair involving the saddle route
    Scalar kkt = 1e-6;
    Scalar policy = 1e-4; // regularized policies, sup-norm
};

struct CrossValidateOptions {
    Tolerances tol;
    std::vector<Route> routes = all_routes();
    RouteOptions route;
    Index ergodicity_random_policies = 16;
    std::uint64_t ergodicity_seed = 0;
};

struct PairDeviation {
    Route first = Route::Bellman;
    Route second = Route::Bellman;
    Scalar deviation = 0;
    Scalar tolerance = 0;
    bool ok = false;
};

enum class PolicyAgreement { Matched, SkippedDegenerate, Mismatched, NotApplicable };
std::string_view to_string(PolicyAgreement p);

struct EquivalenceReport {
    Setting setting = Setting::DiscStd;
    std::vector<RouteResult> routes;
    std::vector<PairDeviation> deviations;
    std::optional<Scalar> duality_gap; // primal minus dual objective
    bool kkt_pass = false;
    PolicyAgreement policy_agreement = PolicyAgreement::NotApplicable;
    std::string ergodicity = "n/a";
    std::vector<std::string> warnings;
    bool pass = false;

    const RouteResult* find(Route r) const;
};

/// Runs every requested route and assembles the agreement report. Route
/// failures degrade the report; only SettingMismatch throws.
EquivalenceReport cross_validate(const TabularMdp& mdp, Setting setting, const CrossValidateOptions& options = {});

/// Machine-readable report (JSON) and its inverse.
std::string report_to_json(const EquivalenceReport& report);
EquivalenceReport report_from_json(const std::string& text);

/// Human-readable table.
std::string report_to_table(const EquivalenceReport& report);

} // namespace mdpopt

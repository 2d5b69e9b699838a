#pragma once

#include "mdpopt/mdp.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace mdpopt {

enum class Sense { Minimize, Maximize };

/// Dense LP: optimize c^T x subject to A_ub x <= b_ub, A_eq x = b_eq and
/// x_j >= lower_j (lower_j is 0 or -inf).
struct LinearProgramSpec {
    Sense sense = Sense::Minimize;
    Vector c;
    Matrix a_ub;
    Vector b_ub;
    Matrix a_eq;
    Vector b_eq;
    Vector lower;
    std::vector<std::string> names;

    Index num_variables() const { return c.size(); }
    /// Throws ShapeMismatch on inconsistent dimensions or duplicate names.
    void check() const;
    /// Canonical text dump: one item per line, deterministic order, %.17g numbers.
    std::string to_text() const;
};

enum class ProgramSide { Primal, Dual };

/// Convex (entropy-regularized) program with exact evaluators.
///
/// Primal: variables (v[, rho]), objective e^T v or rho, and one constraint per
/// state g_s(x) = logsumexp_a(r^a_s + gamma (P^a v)_s [- rho]) - v_s <= 0.
/// Dual: variables mu (a-major), objective sum r.mu - sum_s h(mu_s), with the
/// same linear equality block as the standard dual.
class ConvexProgramSpec {
public:
    ConvexProgramSpec(ProgramSide side, Setting setting, const TabularMdp& mdp);

    ProgramSide side() const { return side_; }
    Setting setting() const { return setting_; }
    Sense sense() const { return side_ == ProgramSide::Primal ? Sense::Minimize : Sense::Maximize; }
    Index num_variables() const { return static_cast<Index>(names_.size()); }
    Index num_nonlinear_constraints() const { return side_ == ProgramSide::Primal ? mdp_.num_states() : 0; }
    const std::vector<std::string>& names() const { return names_; }
    const Matrix& a_eq() const { return a_eq_; }
    const Vector& b_eq() const { return b_eq_; }
    const Vector& lower() const { return lower_; }

    Scalar objective(const Vector& x) const;
    Vector objective_gradient(const Vector& x) const;
    /// g(x); feasible iff every entry is <= 0.
    Vector constraint_values(const Vector& x) const;
    /// d g_s / d x_j, |S| x num_variables.
    Matrix constraint_jacobian(const Vector& x) const;

private:
    ProgramSide side_;
    Setting setting_;
    TabularMdp mdp_;
    std::vector<std::string> names_;
    Matrix a_eq_;
    Vector b_eq_;
    Vector lower_;
};

using ProgramSpec = std::variant<LinearProgramSpec, ConvexProgramSpec>;

ProgramSpec build_primal(Setting setting, const TabularMdp& mdp);
ProgramSpec build_dual(Setting setting, const TabularMdp& mdp);

/// Throws SettingMismatch when gamma does not fit the setting.
void require_setting_matches(Setting setting, const TabularMdp& mdp);

/// State-action masses mu(s, a), flattened a-major (index a |S| + s) when
/// handed to LP code.
struct OccupancyMeasure {
    Matrix mu; // |S| x |A|
    Setting setting = Setting::DiscStd;

    Vector state_marginal() const { return mu.rowwise().sum(); }
    Vector flat() const { return Eigen::Map<const Vector>(mu.data(), mu.size()); }
    static OccupancyMeasure from_flat(const Vector& x, Index num_states, Index num_actions, Setting setting);
};

/// mu^a_s = w_s pi^a_s with the discounted visitation (I - gamma P^pi^T)^{-1} e
/// or the stationary distribution.
OccupancyMeasure occupancy_from_policy(const TabularMdp& mdp, const Policy& pi, Setting setting);

struct PolicyFromOccupancy {
    Policy policy;
    Vector marginal;
    std::vector<Index> flagged_states; // w_s <= 1e-12, given the uniform row
};

PolicyFromOccupancy policy_from_occupancy(const OccupancyMeasure& mu);

/// e^T v (discounted) or rho (average).
Scalar primal_objective(Setting setting, const TabularMdp& mdp, const Vector& v, Scalar rho = 0.0);
/// sum_a (r^a)^T mu^a, minus sum_s h(mu_s) when regularized.
Scalar dual_objective(Setting setting, const TabularMdp& mdp, const OccupancyMeasure& mu);

/// Residual of the dual linear constraints: e-balance or flow balance plus the
/// normalization row in average settings.
Scalar dual_constraint_residual(Setting setting, const TabularMdp& mdp, const Matrix& mu);

struct KktReport {
    Scalar primal_feasibility = 0;      // largest positive constraint value
    Scalar dual_feasibility = 0;        // magnitude of the most negative mu entry
    Scalar stationarity = 0;            // dual linear-constraint residual
    Scalar complementary_slackness = 0; // max |mu slack|, or Gibbs residual when regularized
    Scalar tightness = 0;               // regularized only: max_s w_s |log Z_s|
    Scalar tolerance = 1e-6;
    bool pass = false;
};

KktReport kkt_residuals(Setting setting, const TabularMdp& mdp, const Vector& v, std::optional<Scalar> rho,
                        const OccupancyMeasure& mu, Scalar tolerance = 1e-6);

} // namespace mdpopt

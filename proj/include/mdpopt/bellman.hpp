#pragma once

#include "mdpopt/mdp.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace mdpopt {

struct ValueSolution {
    Vector v;
    std::optional<Scalar> rho; // present iff the setting is average reward
    Setting setting = Setting::DiscStd;
    Scalar residual = 0;       // sup-norm Bellman residual
    Index iterations = 0;
    std::string method;
};

struct SolverParams {
    Scalar tol = 1e-10;
    Index max_iters = 100000;
    Scalar damping = 0.5; // relaxation for the soft relative iteration
    /// Optional per-sweep callback (iteration, sup-norm change).
    std::function<void(Index, Scalar)> on_iteration;
};

/// Q-values q(s, a) = r^a_s + scale * (P^a v)_s, returned |S| x |A|.
Matrix action_values(const TabularMdp& mdp, const Vector& v, Scalar scale);

/// Policy evaluation for gamma < 1: (I - gamma P^pi) v = r^pi [- h^pi].
ValueSolution evaluate_discounted(const TabularMdp& mdp, const Policy& pi, bool regularized);

/// Average-reward evaluation for gamma = 1, normalized so (w^pi)^T v = 0.
ValueSolution evaluate_average(const TabularMdp& mdp, const Policy& pi, bool regularized);

/// v <- max_a (r^a + gamma P^a v) from v = 0.
ValueSolution value_iteration(const TabularMdp& mdp, const SolverParams& params = {});

/// v <- log sum_a exp(r^a + gamma P^a v) from v = 0.
ValueSolution soft_value_iteration(const TabularMdp& mdp, const SolverParams& params = {});

/// Howard policy iteration on the average-reward optimality equation.
/// `rho_trace`, when given, receives the gain of every evaluated policy.
ValueSolution policy_iteration_average(const TabularMdp& mdp, const SolverParams& params = {},
                                       std::vector<Scalar>* rho_trace = nullptr);

/// Damped relative iteration on the log-sum-exp average-reward equation.
ValueSolution soft_relative_value_iteration(const TabularMdp& mdp, const SolverParams& params = {});

/// Sup-norm residual of the optimality equation for `setting` at (v, rho).
Scalar optimality_residual(const TabularMdp& mdp, Setting setting, const Vector& v, Scalar rho = 0.0);

struct GreedyPolicy {
    Policy policy;
    std::vector<Index> actions;
    Vector margins;         // best minus runner-up per state (+inf when |A| = 1)
    Scalar min_margin = kInfMargin;
    bool has_near_ties = false; // some margin below 1e-6

    static constexpr Scalar kInfMargin = 1e300;
};

/// Deterministic argmax policy; ties go to the smallest action index.
GreedyPolicy greedy_policy(const TabularMdp& mdp, const Vector& v, std::optional<Scalar> rho = std::nullopt);

struct GibbsPolicy {
    Policy policy;
    Vector log_partition; // log Z_s, the regularized primal constraint slack
};

/// Per-state softmax of r^a + gamma P^a v - v (- rho).
GibbsPolicy gibbs_policy(const TabularMdp& mdp, const Vector& v, std::optional<Scalar> rho = std::nullopt);

} // namespace mdpopt

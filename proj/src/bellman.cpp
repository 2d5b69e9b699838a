#include "mdpopt/bellman.hpp"

#include "mdpopt/numerics.hpp"

#include <cmath>

namespace mdpopt {

namespace {

void require_discounted(const TabularMdp& mdp, const char* who) {
    if (!(mdp.discount < 1.0))
        throw Error(ErrorCode::SettingMismatch, std::string(who) + " needs gamma < 1");
}

void require_undiscounted(const TabularMdp& mdp, const char* who) {
    if (!mdp.undiscounted()) throw Error(ErrorCode::SettingMismatch, std::string(who) + " needs gamma = 1");
}

Vector row_max(const Matrix& q) { return q.rowwise().maxCoeff(); }

Vector row_log_sum_exp(const Matrix& q) {
    Vector out(q.rows());
    for (Index s = 0; s < q.rows(); ++s) out(s) = log_sum_exp(q.row(s));
    return out;
}

} // namespace

Matrix action_values(const TabularMdp& mdp, const Vector& v, Scalar scale) {
    Matrix q = mdp.rewards;
    for (Index a = 0; a < mdp.num_actions(); ++a)
        q.col(a).noalias() += scale * (mdp.transitions[static_cast<std::size_t>(a)] * v);
    return q;
}

ValueSolution evaluate_discounted(const TabularMdp& mdp, const Policy& pi, bool regularized) {
    require_discounted(mdp, "evaluate_discounted");
    require_valid_policy(pi, mdp.num_states(), mdp.num_actions());
    const InducedChain chain = induce_chain(mdp, pi);
    const Index n = mdp.num_states();

    const Vector reward = regularized ? Vector(chain.r_pi - chain.h_pi) : chain.r_pi;
    const Matrix system = Matrix::Identity(n, n) - mdp.discount * chain.p_pi;
    Eigen::FullPivLU<Matrix> lu(system);
    if (!lu.isInvertible()) throw Error(ErrorCode::SingularSystem, "I - gamma P^pi is singular");

    ValueSolution out;
    out.v = lu.solve(reward);
    out.setting = regularized ? Setting::DiscReg : Setting::DiscStd;
    out.residual = sup_norm(reward + mdp.discount * chain.p_pi * out.v - out.v);
    out.method = "direct-solve";
    return out;
}

ValueSolution evaluate_average(const TabularMdp& mdp, const Policy& pi, bool regularized) {
    require_undiscounted(mdp, "evaluate_average");
    require_valid_policy(pi, mdp.num_states(), mdp.num_actions());
    const InducedChain chain = induce_chain(mdp, pi, true);
    const Index n = mdp.num_states();
    const Vector& w = *chain.stationary;
    const Vector reward = regularized ? Vector(chain.r_pi - chain.h_pi) : chain.r_pi;

    // [I - P^pi  1] [v  ]   [r]
    // [ w^T      0] [rho] = [0]
    Matrix bordered = Matrix::Zero(n + 1, n + 1);
    bordered.topLeftCorner(n, n) = Matrix::Identity(n, n) - chain.p_pi;
    bordered.topRightCorner(n, 1).setOnes();
    bordered.bottomLeftCorner(1, n) = w.transpose();
    Vector rhs = Vector::Zero(n + 1);
    rhs.head(n) = reward;

    Eigen::FullPivLU<Matrix> lu(bordered);
    if (!lu.isInvertible()) throw Error(ErrorCode::NonUniqueStationary, "bordered average-reward system is singular");
    const Vector sol = lu.solve(rhs);

    ValueSolution out;
    out.v = sol.head(n);
    out.rho = sol(n);
    out.setting = regularized ? Setting::AvgReg : Setting::AvgStd;
    out.residual = sup_norm(reward - *out.rho * Vector::Ones(n) + chain.p_pi * out.v - out.v);
    out.method = "bordered-solve";
    return out;
}

namespace {

template <typename Backup>
ValueSolution discounted_fixed_point(const TabularMdp& mdp, const SolverParams& params, Backup backup,
                                     Setting setting, const char* method) {
    const Scalar gamma = mdp.discount;
    const Scalar stop = params.tol * (1.0 - gamma) / (2.0 * gamma);
    Vector v = Vector::Zero(mdp.num_states());
    for (Index it = 1; it <= params.max_iters; ++it) {
        Vector next = backup(action_values(mdp, v, gamma));
        const Scalar change = sup_norm(next - v);
        v.swap(next);
        if (params.on_iteration) params.on_iteration(it, change);
        if (change <= stop) {
            ValueSolution out;
            out.residual = sup_norm(backup(action_values(mdp, v, gamma)) - v);
            out.v = std::move(v);
            out.setting = setting;
            out.iterations = it;
            out.method = method;
            return out;
        }
    }
    throw Error(ErrorCode::MaxItersExceeded, std::string(method) + " did not reach the tolerance");
}

} // namespace

ValueSolution value_iteration(const TabularMdp& mdp, const SolverParams& params) {
    require_discounted(mdp, "value_iteration");
    return discounted_fixed_point(mdp, params, row_max, Setting::DiscStd, "value-iteration");
}

ValueSolution soft_value_iteration(const TabularMdp& mdp, const SolverParams& params) {
    require_discounted(mdp, "soft_value_iteration");
    return discounted_fixed_point(mdp, params, row_log_sum_exp, Setting::DiscReg, "soft-value-iteration");
}

ValueSolution policy_iteration_average(const TabularMdp& mdp, const SolverParams& params,
                                       std::vector<Scalar>* rho_trace) {
    require_undiscounted(mdp, "policy_iteration_average");
    const Index n = mdp.num_states();
    const Index m = mdp.num_actions();

    std::vector<Index> actions = greedy_policy(mdp, Vector::Zero(n), 0.0).actions;
    for (Index it = 1; it <= params.max_iters; ++it) {
        ValueSolution current = evaluate_average(mdp, Policy::deterministic(actions, m), false);
        if (rho_trace) rho_trace->push_back(*current.rho);
        if (params.on_iteration) params.on_iteration(it, *current.rho);

        const Matrix q = action_values(mdp, current.v, 1.0);
        bool changed = false;
        for (Index s = 0; s < n; ++s) {
            Index best = actions[static_cast<std::size_t>(s)];
            for (Index a = 0; a < m; ++a) {
                // Switch only on a clear improvement; ties stay with the incumbent.
                const Scalar margin = 1e-12 * (1.0 + std::abs(q(s, best)));
                if (q(s, a) > q(s, best) + margin) best = a;
            }
            if (best != actions[static_cast<std::size_t>(s)]) {
                actions[static_cast<std::size_t>(s)] = best;
                changed = true;
            }
        }
        if (!changed) {
            current.residual = optimality_residual(mdp, Setting::AvgStd, current.v, *current.rho);
            current.iterations = it;
            current.method = "policy-iteration";
            return current;
        }
    }
    throw Error(ErrorCode::MaxItersExceeded, "policy iteration did not terminate");
}

ValueSolution soft_relative_value_iteration(const TabularMdp& mdp, const SolverParams& params) {
    require_undiscounted(mdp, "soft_relative_value_iteration");
    const Index n = mdp.num_states();
    const Scalar tau = params.damping;
    Vector v = Vector::Zero(n);
    Scalar span = kInf;
    for (Index it = 1; it <= params.max_iters; ++it) {
        const Vector backed = row_log_sum_exp(action_values(mdp, v, 1.0));
        const Vector diff = backed - v;
        span = diff.maxCoeff() - diff.minCoeff();
        if (params.on_iteration) params.on_iteration(it, span);
        if (span <= params.tol) {
            // At the fixed point backed - v = rho 1; the midpoint of the
            // remaining spread minimizes the sup-norm residual.
            const Scalar rho = 0.5 * (diff.maxCoeff() + diff.minCoeff());
            const GibbsPolicy gibbs = gibbs_policy(mdp, v, rho);
            const Vector w = stationary_distribution(induce_chain(mdp, gibbs.policy).p_pi);
            v.array() -= w.dot(v);

            ValueSolution out;
            out.v = std::move(v);
            out.rho = rho;
            out.setting = Setting::AvgReg;
            out.residual = optimality_residual(mdp, Setting::AvgReg, out.v, rho);
            out.iterations = it;
            out.method = "soft-relative-value-iteration";
            return out;
        }
        v = (1.0 - tau) * v + tau * backed;
        v.array() -= v(0);
    }
    throw Error(ErrorCode::MaxItersExceeded,
                "soft relative value iteration stalled with span " + std::to_string(span));
}

Scalar optimality_residual(const TabularMdp& mdp, Setting setting, const Vector& v, Scalar rho) {
    const Matrix q = action_values(mdp, v, mdp.discount);
    switch (setting) {
    case Setting::DiscStd: return sup_norm(row_max(q) - v);
    case Setting::DiscReg: return sup_norm(row_log_sum_exp(q) - v);
    case Setting::AvgStd: return sup_norm((row_max(q).array() - rho).matrix() - v);
    case Setting::AvgReg: return sup_norm((row_log_sum_exp(q).array() - rho).matrix() - v);
    }
    return kInf;
}

GreedyPolicy greedy_policy(const TabularMdp& mdp, const Vector& v, std::optional<Scalar> rho) {
    const Index n = mdp.num_states();
    const Index m = mdp.num_actions();
    Matrix q = action_values(mdp, v, mdp.discount);
    if (rho) q.array() -= *rho;

    GreedyPolicy out;
    out.actions.resize(static_cast<std::size_t>(n));
    out.margins = Vector::Constant(n, GreedyPolicy::kInfMargin);
    for (Index s = 0; s < n; ++s) {
        Index best = 0;
        for (Index a = 1; a < m; ++a)
            if (q(s, a) > q(s, best)) best = a;
        Scalar runner_up = -kInf;
        for (Index a = 0; a < m; ++a)
            if (a != best) runner_up = std::max(runner_up, q(s, a));
        if (m > 1) out.margins(s) = q(s, best) - runner_up;
        out.actions[static_cast<std::size_t>(s)] = best;
    }
    out.policy = Policy::deterministic(out.actions, m);
    out.min_margin = out.margins.minCoeff();
    out.has_near_ties = out.min_margin < 1e-6;
    return out;
}

GibbsPolicy gibbs_policy(const TabularMdp& mdp, const Vector& v, std::optional<Scalar> rho) {
    Matrix q = action_values(mdp, v, mdp.discount);
    q.colwise() -= v;
    if (rho) q.array() -= *rho;
    GibbsPolicy out;
    out.policy.probs.resize(q.rows(), q.cols());
    out.log_partition.resize(q.rows());
    for (Index s = 0; s < q.rows(); ++s) {
        out.policy.probs.row(s) = softmax(q.row(s).transpose()).transpose();
        out.log_partition(s) = log_sum_exp(q.row(s));
    }
    return out;
}

} // namespace mdpopt

#include "mdpopt/poligrad.hpp"

#include "mdpopt/bellman.hpp"
#include "mdpopt/numerics.hpp"
#include "mdpopt/programs.hpp"

#include <cmath>

namespace mdpopt {

Policy PolicyLogits::policy() const {
    Policy pi{Matrix(theta.rows(), theta.cols())};
    for (Index s = 0; s < theta.rows(); ++s) pi.probs.row(s) = softmax(theta.row(s).transpose()).transpose();
    return pi;
}

PolicyLogits PolicyLogits::zeros(Index num_states, Index num_actions) {
    return PolicyLogits{Matrix::Zero(num_states, num_actions)};
}

namespace {

ValueSolution evaluate(Setting setting, const TabularMdp& mdp, const Policy& pi) {
    require_setting_matches(setting, mdp);
    return is_average(setting) ? evaluate_average(mdp, pi, is_regularized(setting))
                               : evaluate_discounted(mdp, pi, is_regularized(setting));
}

} // namespace

Scalar pg_objective(Setting setting, const TabularMdp& mdp, const Policy& pi) {
    const ValueSolution sol = evaluate(setting, mdp, pi);
    return is_average(setting) ? *sol.rho : mdp.weight_e.dot(sol.v);
}

Matrix pg_gradient(Setting setting, const TabularMdp& mdp, const PolicyLogits& logits) {
    if (!logits.theta.allFinite()) throw Error(ErrorCode::ShapeMismatch, "logits must be finite");
    const Policy pi = logits.policy();
    const ValueSolution sol = evaluate(setting, mdp, pi);
    const Index n = mdp.num_states();

    // State weights: discounted visitation or stationary distribution.
    Vector w;
    const Matrix p_pi = induce_chain(mdp, pi).p_pi;
    if (is_average(setting)) {
        w = stationary_distribution(p_pi);
    } else {
        w = (Matrix::Identity(n, n) - mdp.discount * p_pi.transpose()).fullPivLu().solve(mdp.weight_e);
    }

    Matrix q = action_values(mdp, sol.v, mdp.discount);
    if (is_regularized(setting)) {
        // log softmax without forming log(pi), which may underflow.
        for (Index s = 0; s < n; ++s) {
            const Scalar lse = log_sum_exp(logits.theta.row(s));
            q.row(s) -= (logits.theta.row(s).array() - lse).matrix();
        }
    }
    Matrix grad(n, mdp.num_actions());
    for (Index s = 0; s < n; ++s) {
        const Scalar baseline = pi.probs.row(s).dot(q.row(s));
        grad.row(s) = w(s) * pi.probs.row(s).cwiseProduct((q.row(s).array() - baseline).matrix());
    }
    return grad;
}

namespace {

/// State weights of a policy: discounted visitation or stationary distribution.
Vector state_weights(Setting setting, const TabularMdp& mdp, const Policy& pi) {
    const Matrix p_pi = induce_chain(mdp, pi).p_pi;
    if (is_average(setting)) return stationary_distribution(p_pi);
    const Index n = mdp.num_states();
    return (Matrix::Identity(n, n) - mdp.discount * p_pi.transpose()).fullPivLu().solve(mdp.weight_e);
}

/// Quantities of the current iterate reused by every line-search candidate.
struct Iterate {
    PolicyLogits logits;
    Policy pi;
    Matrix q;        // r + scale P v^pi (relative values in average settings)
    Vector log_norm; // per-state log-sum-exp of the logits
};

Iterate make_iterate(Setting setting, const TabularMdp& mdp, PolicyLogits logits) {
    Iterate it;
    it.logits = std::move(logits);
    it.pi = it.logits.policy();
    const ValueSolution sol = evaluate(setting, mdp, it.pi);
    it.q = action_values(mdp, sol.v, mdp.discount);
    it.log_norm.resize(it.logits.theta.rows());
    for (Index s = 0; s < it.log_norm.size(); ++s) it.log_norm(s) = log_sum_exp(it.logits.theta.row(s));
    return it;
}

/// J(pi') - J(pi) for pi' = softmax(theta + delta), by the
/// performance-difference identity
///   sum_s w'_s [ sum_a (pi'_a - pi_a) q_a - (h(pi'_s) - h(pi_s)) ].
/// Policy differences are formed as pi_a expm1(log ratio), so the gain keeps
/// full relative precision even when both objectives agree to many digits.
Scalar objective_gain(Setting setting, const TabularMdp& mdp, const Iterate& base, const Matrix& delta,
                      const Policy& next_pi) {
    const Vector w = state_weights(setting, mdp, next_pi);
    const Index m = base.q.cols();
    Vector log_ratio(m);
    Scalar gain = 0;
    for (Index s = 0; s < w.size(); ++s) {
        // log of sum_a pi_a exp(delta_a), relative to the shift of the largest entry.
        Scalar shift_sum = 0;
        for (Index a = 0; a < m; ++a) shift_sum += base.pi.probs(s, a) * std::expm1(delta(s, a));
        const Scalar lse_change = std::log1p(shift_sum);
        Scalar b = 0;
        for (Index a = 0; a < m; ++a) {
            log_ratio(a) = delta(s, a) - lse_change;
            const Scalar diff = base.pi.probs(s, a) * std::expm1(log_ratio(a));
            b += diff * base.q(s, a);
            if (is_regularized(setting)) {
                const Scalar log_next = std::log(base.pi.probs(s, a)) + log_ratio(a);
                b -= diff * log_next + base.pi.probs(s, a) * log_ratio(a);
            }
        }
        gain += w(s) * b;
    }
    return gain;
}

} // namespace

AscentTrace pg_ascend(Setting setting, const TabularMdp& mdp, const PolicyLogits& init, const AscentParams& params) {
    constexpr Scalar kArmijo = 1e-4;
    constexpr Scalar kMaxStep = 1e8;

    AscentTrace trace;
    Iterate cur = make_iterate(setting, mdp, init);
    Scalar value = pg_objective(setting, mdp, cur.pi);
    Scalar step = 1.0;

    for (Index it = 0; it < params.max_iters; ++it) {
        const Matrix grad = pg_gradient(setting, mdp, cur.logits);
        const Scalar gnorm = sup_norm(grad);
        trace.objective.push_back(value);
        trace.grad_norm.push_back(gnorm);
        if (params.on_iteration) params.on_iteration(it, value, gnorm);
        if (gnorm <= params.tol) {
            trace.converged = true;
            trace.stop_reason = "gradient-tolerance";
            break;
        }

        // Backtracking from twice the last accepted step (1.0 on the first iteration).
        const Scalar sq = grad.squaredNorm();
        Scalar t = step;
        PolicyLogits candidate;
        Policy candidate_pi;
        Scalar gain = 0;
        bool accepted = false;
        while (t > 1e-20) {
            candidate.theta = cur.logits.theta + t * grad;
            candidate_pi = candidate.policy();
            gain = objective_gain(setting, mdp, cur, t * grad, candidate_pi);
            if (gain >= kArmijo * t * sq) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            trace.converged = true;
            trace.stop_reason = "line-search-exhausted";
            break;
        }
        cur = make_iterate(setting, mdp, std::move(candidate));
        value += gain;
        step = std::min(2.0 * t, kMaxStep);
        if (gain <= params.min_gain) {
            trace.objective.push_back(value);
            trace.grad_norm.push_back(sup_norm(pg_gradient(setting, mdp, cur.logits)));
            trace.converged = true;
            trace.stop_reason = "objective-gain";
            break;
        }
    }
    if (trace.stop_reason.empty()) trace.stop_reason = "max-iters";
    trace.final_logits = cur.logits;
    trace.final_policy = cur.pi;
    return trace;
}

} // namespace mdpopt

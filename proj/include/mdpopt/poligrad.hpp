#pragma once

#include "mdpopt/mdp.hpp"

#include <functional>
#include <string>
#include <vector>

namespace mdpopt {

/// Softmax logits theta(s, a); the induced policy is softmax over each row.
struct PolicyLogits {
    Matrix theta;

    Policy policy() const;
    static PolicyLogits zeros(Index num_states, Index num_actions);
};

struct AscentParams {
    Scalar tol = 1e-8;
    Index max_iters = 50000;
    /// Stop once an accepted step gains no more than this.
    Scalar min_gain = 1e-14;
    /// Called once per iteration with (iteration, J, gradient sup-norm).
    std::function<void(Index, Scalar, Scalar)> on_iteration;
};

struct AscentTrace {
    std::vector<Scalar> objective;
    std::vector<Scalar> grad_norm;
    PolicyLogits final_logits;
    Policy final_policy;
    bool converged = false;
    std::string stop_reason;
};

/// Exact J(pi): e^T v^pi (discounted) or the gain rho^pi (average), with the
/// entropy-adjusted reward r^pi - h^pi in regularized settings.
Scalar pg_objective(Setting setting, const TabularMdp& mdp, const Policy& pi);

/// Closed-form gradient of J(softmax(theta)):
/// dJ/dtheta(s, a) = w_s pi(s, a) (q(s, a) - sum_b pi(s, b) q(s, b)).
Matrix pg_gradient(Setting setting, const TabularMdp& mdp, const PolicyLogits& logits);

/// Gradient ascent on the logits with Armijo backtracking. A failure to reach
/// the tolerance within max_iters is reported through `converged`, not thrown.
AscentTrace pg_ascend(Setting setting, const TabularMdp& mdp, const PolicyLogits& init,
                      const AscentParams& params = {});

} // namespace mdpopt

#include "mdpopt/oracle.hpp"

#include "mdpopt/bellman.hpp"
#include "mdpopt/programs.hpp"

namespace mdpopt {

OracleResult brute_force_oracle(const TabularMdp& mdp, Setting setting) {
    require_valid(mdp);
    require_setting_matches(setting, mdp);
    const Index n = mdp.num_states();
    const Index m = mdp.num_actions();
    OracleResult out;

    if (is_regularized(setting)) {
        SolverParams params;
        params.tol = 1e-12;
        const ValueSolution sol =
            is_average(setting) ? soft_relative_value_iteration(mdp, params) : soft_value_iteration(mdp, params);
        out.v = sol.v;
        out.rho = sol.rho;
        out.objective = primal_objective(setting, mdp, sol.v, sol.rho.value_or(0.0));
        out.policy = gibbs_policy(mdp, sol.v, sol.rho).policy;
        return out;
    }

    Index count = 1;
    for (Index s = 0; s < n; ++s) {
        count *= m;
        if (count > 4096) throw Error(ErrorCode::TooLargeToEnumerate, "more than 4096 deterministic policies");
    }

    std::vector<Index> actions(static_cast<std::size_t>(n), 0);
    bool have_best = false;
    for (Index k = 0; k < count; ++k) {
        Index code = k;
        for (Index s = 0; s < n; ++s) {
            actions[static_cast<std::size_t>(s)] = code % m;
            code /= m;
        }
        const Policy pi = Policy::deterministic(actions, m);
        const ValueSolution sol = is_average(setting) ? evaluate_average(mdp, pi, false)
                                                      : evaluate_discounted(mdp, pi, false);
        const Scalar objective = primal_objective(setting, mdp, sol.v, sol.rho.value_or(0.0));
        if (!have_best || objective > out.objective) {
            have_best = true;
            out.objective = objective;
            out.actions = actions;
            out.policy = pi;
            out.v = sol.v;
            out.rho = sol.rho;
        }
    }
    out.min_margin = greedy_policy(mdp, out.v, out.rho).min_margin;
    return out;
}

} // namespace mdpopt

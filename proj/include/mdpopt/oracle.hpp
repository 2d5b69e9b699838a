#pragma once

#include "mdpopt/mdp.hpp"

#include <optional>
#include <vector>

namespace mdpopt {

struct OracleResult {
    Scalar objective = 0;
    Policy policy;
    std::vector<Index> actions; // standard settings only
    /// Smallest per-state gap between the best and runner-up action values at
    /// the optimum; +inf-like for regularized settings and single actions.
    Scalar min_margin = 1e300;
    Vector v;
    std::optional<Scalar> rho;
};

/// Independent reference optimum. Standard settings enumerate every
/// deterministic policy (|A|^|S| <= 4096) and evaluate each exactly;
/// regularized settings run the soft fixed point to 1e-12.
OracleResult brute_force_oracle(const TabularMdp& mdp, Setting setting);

} // namespace mdpopt

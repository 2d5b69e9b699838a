#pragma once

#include "mdpopt/programs.hpp"

#include <string_view>
#include <vector>

namespace mdpopt {

enum class LpStatus { Optimal, Infeasible, Unbounded, Stalled };
std::string_view to_string(LpStatus s);

struct LpSolution {
    Vector x;                 // original coordinates
    Scalar objective = 0;     // in the spec's own sense
    LpStatus status = LpStatus::Stalled;
    std::vector<Index> basis; // standard-form column indices
    Index pivot_count = 0;
    /// Standard-form data at termination (minimization form, artificials removed).
    Vector reduced_costs;
    Matrix standard_a;
    Vector standard_b;
    Vector standard_x;
};

/// Two-phase dense tableau simplex. Dantzig pricing, with Bland's rule after
/// 50 consecutive degenerate pivots. Never throws on solver outcomes: the
/// status says whether the result is a certified optimum.
LpSolution solve_lp(const LinearProgramSpec& spec);

} // namespace mdpopt

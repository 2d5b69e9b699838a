#pragma once

#include "mdpopt/programs.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace mdpopt {

struct SaddleParams {
    Scalar tol = 1e-5;
    Index max_iters = 200000;
    Index check_every = 100;
    /// Called at every gap check with (iteration, gap, Lagrangian value).
    std::function<void(Index, Scalar, Scalar)> on_check;
};

struct SaddleBounds {
    Scalar upper = 0;   // primal objective of the feasibilized primal point
    Scalar lower = 0;   // dual objective of the re-balanced occupancy measure
    Vector v;           // feasible primal point
    Scalar rho = 0;
    OccupancyMeasure mu; // feasible dual point

    Scalar gap() const { return upper - lower; }
};

struct SaddleResult {
    Vector v;
    std::optional<Scalar> rho;
    OccupancyMeasure mu;
    Scalar lagrangian = 0;     // at (v, rho, mu)
    Scalar upper_bound = 0;
    Scalar lower_bound = 0;
    std::vector<Index> gap_iterations;
    std::vector<Scalar> gap_trace;
    bool converged = false;
    Index iterations = 0;
    /// Raw iterates before recovery of feasible points.
    Vector raw_v;
    Scalar raw_rho = 0;
    Matrix raw_mu;
};

/// Value of the (possibly entropy-regularized) Lagrangian of `setting`.
Scalar lagrangian(Setting setting, const TabularMdp& mdp, const Vector& v, Scalar rho, const Matrix& mu);

/// Feasible primal and dual points recovered from an arbitrary iterate, with
/// their objectives. upper - lower bounds the distance of both to the optimum.
SaddleBounds saddle_bounds(Setting setting, const TabularMdp& mdp, const Vector& v, const Matrix& mu);

/// First-order saddle-point solve: extragradient with projection for the
/// standard settings, mirror-prox (multiplicative mu updates) for the
/// regularized ones. Non-convergence is reported through `converged`.
SaddleResult solve_saddle(Setting setting, const TabularMdp& mdp, const SaddleParams& params = {});

/// sqrt(sum_a ||I - scale P^a^T||_2^2), each norm by 50 power iterations.
Scalar coupling_norm_bound(const TabularMdp& mdp, Scalar scale);

} // namespace mdpopt

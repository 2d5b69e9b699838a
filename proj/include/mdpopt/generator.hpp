#pragma once

#include "mdpopt/mdp.hpp"

#include <cstdint>

namespace mdpopt {

struct GeneratorParams {
    Index num_states = 3;
    Index num_actions = 2;
    Scalar discount = 0.9;
    /// Added to every transition weight before normalization; in (0, 0.5).
    Scalar smoothing = 0.05;
    Scalar reward_lo = -1.0;
    Scalar reward_hi = 1.0;
    std::uint64_t seed = 1;
};

/// Random instance with strictly positive transition rows, so every policy
/// induces an irreducible aperiodic chain. Bit-identical for a given seed.
///
/// Draw order: transitions [a][s][t], then rewards [a][s], one splitmix64
/// uniform per entry.
TabularMdp generate_random_mdp(const GeneratorParams& params);

} // namespace mdpopt

#pragma once

#include "mdpopt/types.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mdpopt {

/// A finite MDP (S, A, P, r, gamma) together with the positive state weights e
/// used by the discounted objectives.
///
/// transitions[a] is the |S| x |S| row-stochastic matrix P^a, and column a of
/// `rewards` is the reward vector r^a. A discount of exactly 1 selects the
/// average-reward (undiscounted) problems.
struct TabularMdp {
    std::vector<Matrix> transitions;
    Matrix rewards;  // |S| x |A|
    Scalar discount = 0.9;
    Vector weight_e; // |S|, defaults to ones

    Index num_states() const { return rewards.rows(); }
    Index num_actions() const { return rewards.cols(); }
    bool undiscounted() const { return discount == 1.0; }

    /// Builds an instance from per-action transition matrices and a reward
    /// matrix laid out [action][state]. weight_e defaults to all ones.
    static TabularMdp from_arrays(std::vector<Matrix> transitions, const Matrix& rewards_by_action,
                                  Scalar discount, std::optional<Vector> weight_e = std::nullopt);
};

/// Per-state action distribution, stored |S| x |A|.
struct Policy {
    Matrix probs;

    Index num_states() const { return probs.rows(); }
    Index num_actions() const { return probs.cols(); }

    static Policy uniform(Index num_states, Index num_actions);
    /// Point-mass policy choosing actions[s] in state s.
    static Policy deterministic(const std::vector<Index>& actions, Index num_actions);
};

struct Violation {
    ErrorCode kind;
    Index action = -1;
    Index state = -1;
    Index entry = -1;
    std::string detail;
};

struct ValidationResult {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
};

/// Checks every instance invariant and lists all violations with indices.
ValidationResult validate_mdp(const TabularMdp& mdp);

/// Throws the first violation as an Error; no-op on valid instances.
void require_valid(const TabularMdp& mdp);

/// Checks row sums and nonnegativity. With `strictly_positive`, entries must
/// also be at least 1e-300.
void require_valid_policy(const Policy& pi, Index num_states, Index num_actions,
                          bool strictly_positive = false);

/// Negative conditional entropy of a nonnegative action vector.
Scalar entropy(const Vector& rho);

struct InducedChain {
    Matrix p_pi;  // P^pi
    Vector r_pi;  // r^pi
    Vector h_pi;  // h(pi_s)
    std::optional<Vector> stationary;
};

InducedChain induce_chain(const TabularMdp& mdp, const Policy& pi, bool with_stationary = false);

/// Unique stationary distribution of a row-stochastic matrix, by replacing one
/// row of (I - P^T) with the normalization row. Throws NonUniqueStationary when
/// the chain has more than one closed class.
Vector stationary_distribution(const Matrix& p_pi);
Vector stationary_distribution(const InducedChain& chain);

/// True when some entry of a stationary vector is below 1e-12.
bool has_negligible_mass(const Vector& w);

enum class ErgodicityVerdict { LikelyUnichainErgodic, Violated, Inconclusive };
std::string_view to_string(ErgodicityVerdict v);

struct ErgodicityReport {
    Index probed_policies = 0;
    Index irreducible_count = 0;
    Index aperiodic_count = 0;
    ErgodicityVerdict verdict = ErgodicityVerdict::Inconclusive;
    std::vector<Policy> witnesses; // capped at 8
};

/// Sampling-based unichain heuristic: probes the uniform policy, every
/// deterministic policy when |A|^|S| <= 1024, and `num_random_policies` random
/// interior policies. Never a proof.
ErgodicityReport ergodicity_probe(const TabularMdp& mdp, Index num_random_policies, std::uint64_t seed);

/// Graph-level chain diagnostics on edges with probability > 1e-12.
bool is_irreducible(const Matrix& p);
/// Period of an irreducible chain (1 means aperiodic).
Index chain_period(const Matrix& p);

struct GibbsResult {
    Vector policy;
    Scalar value; // log sum exp(q)
};

/// max over the simplex of q^T pi - h(pi): the softmax of q with value log Z.
GibbsResult gibbs_maximize(const Vector& q);

} // namespace mdpopt

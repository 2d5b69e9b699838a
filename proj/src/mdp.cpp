#include "mdpopt/mdp.hpp"

#include "mdpopt/numerics.hpp"
#include "mdpopt/random.hpp"

#include <cmath>
#include <numeric>
#include <queue>
#include <sstream>

namespace mdpopt {

std::string_view to_string(Setting s) {
    switch (s) {
    case Setting::DiscStd: return "disc-std";
    case Setting::DiscReg: return "disc-reg";
    case Setting::AvgStd: return "avg-std";
    case Setting::AvgReg: return "avg-reg";
    }
    return "?";
}

Setting parse_setting(std::string_view text) {
    if (text == "disc-std") return Setting::DiscStd;
    if (text == "disc-reg") return Setting::DiscReg;
    if (text == "avg-std") return Setting::AvgStd;
    if (text == "avg-reg") return Setting::AvgReg;
    throw Error(ErrorCode::ParseError, "unknown setting '" + std::string(text) + "'");
}

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::NonStochasticRow: return "NonStochasticRow";
    case ErrorCode::NegativeProbability: return "NegativeProbability";
    case ErrorCode::NonPositiveWeight: return "NonPositiveWeight";
    case ErrorCode::BadDiscount: return "BadDiscount";
    case ErrorCode::NonFiniteReward: return "NonFiniteReward";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::AllZeroInput: return "AllZeroInput";
    case ErrorCode::NonUniqueStationary: return "NonUniqueStationary";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::MaxItersExceeded: return "MaxItersExceeded";
    case ErrorCode::SettingMismatch: return "SettingMismatch";
    case ErrorCode::Stalled: return "Stalled";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::TooLargeToEnumerate: return "TooLargeToEnumerate";
    case ErrorCode::ParseError: return "ParseError";
    }
    return "?";
}

std::string_view to_string(ErgodicityVerdict v) {
    switch (v) {
    case ErgodicityVerdict::LikelyUnichainErgodic: return "likely-unichain-ergodic";
    case ErgodicityVerdict::Violated: return "violated";
    case ErgodicityVerdict::Inconclusive: return "inconclusive";
    }
    return "?";
}

TabularMdp TabularMdp::from_arrays(std::vector<Matrix> transitions, const Matrix& rewards_by_action,
                                   Scalar discount, std::optional<Vector> weight_e) {
    TabularMdp mdp;
    mdp.transitions = std::move(transitions);
    mdp.rewards = rewards_by_action.transpose();
    mdp.discount = discount;
    mdp.weight_e = weight_e ? *weight_e : Vector::Ones(mdp.rewards.rows());
    return mdp;
}

Policy Policy::uniform(Index num_states, Index num_actions) {
    return Policy{Matrix::Constant(num_states, num_actions, 1.0 / static_cast<Scalar>(num_actions))};
}

Policy Policy::deterministic(const std::vector<Index>& actions, Index num_actions) {
    Policy pi{Matrix::Zero(static_cast<Index>(actions.size()), num_actions)};
    for (std::size_t s = 0; s < actions.size(); ++s) pi.probs(static_cast<Index>(s), actions[s]) = 1.0;
    return pi;
}

namespace {

std::string describe(const char* what, Index a, Index s, Index t, Scalar value) {
    std::ostringstream os;
    os.precision(17);
    os << what << " at (a=" << a << ", s=" << s;
    if (t >= 0) os << ", t=" << t;
    os << "): " << value;
    return os.str();
}

} // namespace

ValidationResult validate_mdp(const TabularMdp& mdp) {
    ValidationResult out;
    auto add = [&](ErrorCode kind, Index a, Index s, Index t, std::string detail) {
        out.violations.push_back(Violation{kind, a, s, t, std::move(detail)});
    };

    const Index n = mdp.num_states();
    const Index m = mdp.num_actions();
    if (n <= 0 || m <= 0) {
        add(ErrorCode::ShapeMismatch, -1, -1, -1, "need at least one state and one action");
        return out;
    }
    if (static_cast<Index>(mdp.transitions.size()) != m) {
        add(ErrorCode::ShapeMismatch, -1, -1, -1, "transitions has wrong number of actions");
        return out;
    }
    if (mdp.weight_e.size() != n) {
        add(ErrorCode::ShapeMismatch, -1, -1, -1, "weight_e has wrong length");
        return out;
    }
    if (!(mdp.discount > 0.0 && mdp.discount <= 1.0)) {
        add(ErrorCode::BadDiscount, -1, -1, -1, describe("discount outside (0,1]", -1, -1, -1, mdp.discount));
    }
    for (Index a = 0; a < m; ++a) {
        const Matrix& p = mdp.transitions[static_cast<std::size_t>(a)];
        if (p.rows() != n || p.cols() != n) {
            add(ErrorCode::ShapeMismatch, a, -1, -1, "transition matrix is not |S| x |S|");
            continue;
        }
        for (Index s = 0; s < n; ++s) {
            for (Index t = 0; t < n; ++t) {
                if (!std::isfinite(p(s, t)) || p(s, t) < -1e-12)
                    add(ErrorCode::NegativeProbability, a, s, t, describe("negative probability", a, s, t, p(s, t)));
            }
            const Scalar sum = p.row(s).sum();
            if (!(std::abs(sum - 1.0) <= 1e-9))
                add(ErrorCode::NonStochasticRow, a, s, -1, describe("row sum", a, s, -1, sum));
        }
    }
    for (Index s = 0; s < n; ++s) {
        for (Index a = 0; a < m; ++a) {
            if (!std::isfinite(mdp.rewards(s, a)))
                add(ErrorCode::NonFiniteReward, a, s, -1, describe("non-finite reward", a, s, -1, mdp.rewards(s, a)));
        }
        if (!(mdp.weight_e(s) > 0.0))
            add(ErrorCode::NonPositiveWeight, -1, s, -1, describe("weight_e entry", -1, s, -1, mdp.weight_e(s)));
    }
    return out;
}

void require_valid(const TabularMdp& mdp) {
    const auto result = validate_mdp(mdp);
    if (!result.ok()) {
        const auto& v = result.violations.front();
        throw Error(v.kind, v.detail);
    }
}

void require_valid_policy(const Policy& pi, Index num_states, Index num_actions, bool strictly_positive) {
    if (pi.num_states() != num_states || pi.num_actions() != num_actions)
        throw Error(ErrorCode::ShapeMismatch, "policy shape does not match the MDP");
    for (Index s = 0; s < num_states; ++s) {
        if (std::abs(pi.probs.row(s).sum() - 1.0) > 1e-9)
            throw Error(ErrorCode::NonStochasticRow, "policy row " + std::to_string(s) + " does not sum to 1");
        for (Index a = 0; a < num_actions; ++a) {
            const Scalar p = pi.probs(s, a);
            if (!(p >= 0.0) || (strictly_positive && p < 1e-300))
                throw Error(ErrorCode::NegativeProbability,
                            "policy entry (s=" + std::to_string(s) + ", a=" + std::to_string(a) + ") out of range");
        }
    }
}

Scalar entropy(const Vector& rho) {
    if ((rho.array() < 0.0).any()) throw Error(ErrorCode::NegativeProbability, "entropy of a negative vector");
    if (!(rho.sum() > 0.0)) throw Error(ErrorCode::AllZeroInput, "entropy of the zero vector");
    return entropy_unchecked(rho);
}

InducedChain induce_chain(const TabularMdp& mdp, const Policy& pi, bool with_stationary) {
    const Index n = mdp.num_states();
    const Index m = mdp.num_actions();
    if (pi.num_states() != n || pi.num_actions() != m)
        throw Error(ErrorCode::ShapeMismatch, "policy shape does not match the MDP");

    InducedChain chain;
    chain.p_pi = Matrix::Zero(n, n);
    for (Index a = 0; a < m; ++a)
        chain.p_pi.noalias() += pi.probs.col(a).asDiagonal() * mdp.transitions[static_cast<std::size_t>(a)];
    chain.r_pi = mdp.rewards.cwiseProduct(pi.probs).rowwise().sum();
    chain.h_pi.resize(n);
    for (Index s = 0; s < n; ++s) chain.h_pi(s) = entropy_unchecked(pi.probs.row(s).transpose());
    if (with_stationary) chain.stationary = stationary_distribution(chain.p_pi);
    return chain;
}

Vector stationary_distribution(const Matrix& p_pi) {
    const Index n = p_pi.rows();
    Matrix system = Matrix::Identity(n, n) - p_pi.transpose();
    system.row(n - 1).setOnes();
    Vector rhs = Vector::Zero(n);
    rhs(n - 1) = 1.0;

    Eigen::FullPivLU<Matrix> lu(system);
    lu.setThreshold(1e-10);
    if (lu.rank() < n)
        throw Error(ErrorCode::NonUniqueStationary, "stationary system is rank deficient (multiple closed classes)");
    Vector w = lu.solve(rhs);
    if ((w.array() < -1e-9).any())
        throw Error(ErrorCode::NonUniqueStationary, "stationary solve produced negative mass");
    w = w.cwiseMax(0.0);
    w /= w.sum();
    return w;
}

Vector stationary_distribution(const InducedChain& chain) {
    if (chain.stationary) return *chain.stationary;
    return stationary_distribution(chain.p_pi);
}

bool has_negligible_mass(const Vector& w) { return (w.array() < 1e-12).any(); }

namespace {

constexpr Scalar kEdgeThreshold = 1e-12;

std::vector<Index> reachable(const Matrix& p, bool reverse) {
    const Index n = p.rows();
    std::vector<Index> seen(static_cast<std::size_t>(n), 0);
    std::vector<Index> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
        const Index u = stack.back();
        stack.pop_back();
        for (Index v = 0; v < n; ++v) {
            const Scalar weight = reverse ? p(v, u) : p(u, v);
            if (weight > kEdgeThreshold && !seen[static_cast<std::size_t>(v)]) {
                seen[static_cast<std::size_t>(v)] = 1;
                stack.push_back(v);
            }
        }
    }
    return seen;
}

} // namespace

bool is_irreducible(const Matrix& p) {
    const auto fwd = reachable(p, false);
    const auto bwd = reachable(p, true);
    for (std::size_t i = 0; i < fwd.size(); ++i)
        if (!fwd[i] || !bwd[i]) return false;
    return true;
}

Index chain_period(const Matrix& p) {
    const Index n = p.rows();
    std::vector<Index> level(static_cast<std::size_t>(n), -1);
    std::queue<Index> frontier;
    level[0] = 0;
    frontier.push(0);
    while (!frontier.empty()) {
        const Index u = frontier.front();
        frontier.pop();
        for (Index v = 0; v < n; ++v) {
            if (p(u, v) > kEdgeThreshold && level[static_cast<std::size_t>(v)] < 0) {
                level[static_cast<std::size_t>(v)] = level[static_cast<std::size_t>(u)] + 1;
                frontier.push(v);
            }
        }
    }
    Index g = 0;
    for (Index u = 0; u < n; ++u) {
        if (level[static_cast<std::size_t>(u)] < 0) continue;
        for (Index v = 0; v < n; ++v) {
            if (p(u, v) > kEdgeThreshold && level[static_cast<std::size_t>(v)] >= 0) {
                const Index d = level[static_cast<std::size_t>(u)] + 1 - level[static_cast<std::size_t>(v)];
                g = std::gcd(g, d < 0 ? -d : d);
            }
        }
    }
    return g == 0 ? 1 : g;
}

ErgodicityReport ergodicity_probe(const TabularMdp& mdp, Index num_random_policies, std::uint64_t seed) {
    const Index n = mdp.num_states();
    const Index m = mdp.num_actions();
    ErgodicityReport report;
    bool any_reducible = false;
    bool any_periodic = false;

    auto probe = [&](const Policy& pi) {
        const Matrix p = induce_chain(mdp, pi).p_pi;
        ++report.probed_policies;
        const bool irreducible = is_irreducible(p);
        const bool aperiodic = irreducible && chain_period(p) == 1;
        if (irreducible) ++report.irreducible_count;
        if (aperiodic) ++report.aperiodic_count;
        if (!irreducible) any_reducible = true;
        if (irreducible && !aperiodic) any_periodic = true;
        if (!aperiodic && report.witnesses.size() < 8) report.witnesses.push_back(pi);
    };

    probe(Policy::uniform(n, m));

    // |A|^|S| <= 1024 without overflow.
    Index count = 1;
    bool enumerable = true;
    for (Index s = 0; s < n && enumerable; ++s) {
        count *= m;
        if (count > 1024) enumerable = false;
    }
    if (enumerable) {
        std::vector<Index> actions(static_cast<std::size_t>(n), 0);
        for (Index k = 0; k < count; ++k) {
            Index code = k;
            for (Index s = 0; s < n; ++s) {
                actions[static_cast<std::size_t>(s)] = code % m;
                code /= m;
            }
            probe(Policy::deterministic(actions, m));
        }
    }

    SplitMix64 rng(seed);
    for (Index k = 0; k < num_random_policies; ++k) {
        Policy pi{Matrix(n, m)};
        for (Index s = 0; s < n; ++s) {
            for (Index a = 0; a < m; ++a) pi.probs(s, a) = 1e-3 + rng.uniform();
            pi.probs.row(s) /= pi.probs.row(s).sum();
        }
        probe(pi);
    }

    if (any_reducible)
        report.verdict = ErgodicityVerdict::Violated;
    else if (any_periodic)
        report.verdict = ErgodicityVerdict::Inconclusive;
    else
        report.verdict = ErgodicityVerdict::LikelyUnichainErgodic;
    return report;
}

GibbsResult gibbs_maximize(const Vector& q) {
    return GibbsResult{softmax(q), log_sum_exp(q)};
}

} // namespace mdpopt

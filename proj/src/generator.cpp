#include "mdpopt/generator.hpp"

#include "mdpopt/random.hpp"

namespace mdpopt {

TabularMdp generate_random_mdp(const GeneratorParams& params) {
    if (params.num_states < 1 || params.num_actions < 1)
        throw Error(ErrorCode::ShapeMismatch, "generator needs at least one state and one action");
    if (!(params.smoothing > 0.0 && params.smoothing < 0.5))
        throw Error(ErrorCode::ShapeMismatch, "smoothing must lie in (0, 0.5)");
    if (!(params.discount > 0.0 && params.discount <= 1.0))
        throw Error(ErrorCode::BadDiscount, "discount outside (0,1]");

    const Index n = params.num_states;
    const Index m = params.num_actions;
    SplitMix64 rng(params.seed);

    std::vector<Matrix> transitions(static_cast<std::size_t>(m), Matrix(n, n));
    for (auto& p : transitions) {
        for (Index s = 0; s < n; ++s) {
            for (Index t = 0; t < n; ++t) p(s, t) = params.smoothing + rng.uniform();
            p.row(s) /= p.row(s).sum();
        }
    }
    Matrix rewards(m, n);
    for (Index a = 0; a < m; ++a)
        for (Index s = 0; s < n; ++s) rewards(a, s) = rng.uniform(params.reward_lo, params.reward_hi);
    return TabularMdp::from_arrays(std::move(transitions), rewards, params.discount);
}

} // namespace mdpopt

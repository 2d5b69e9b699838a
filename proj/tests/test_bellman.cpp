#include "support.hpp"

#include "mdpopt/bellman.hpp"
#include "mdpopt/numerics.hpp"
#include "mdpopt/programs.hpp"
#include "mdpopt/random.hpp"

#include <doctest.h>

using namespace mdpopt;
using testing::m3;
using testing::one_state;
using testing::uniform_two_state;

TEST_SUITE("bellman") {

TEST_CASE("discounted evaluation") {
    const auto single = TabularMdp::from_arrays({Matrix::Ones(1, 1)}, Matrix::Ones(1, 1), 0.5);
    CHECK(evaluate_discounted(single, Policy::uniform(1, 1), false).v(0) == doctest::Approx(2.0).epsilon(1e-14));

    const auto mdp = one_state(0.9);
    const auto std_sol = evaluate_discounted(mdp, Policy::uniform(1, 2), false);
    CHECK(std_sol.v(0) == doctest::Approx(0.5 / 0.1).epsilon(1e-13));
    CHECK(std_sol.residual <= 1e-10);
    CHECK_FALSE(std_sol.rho);

    const auto reg_sol = evaluate_discounted(mdp, Policy::uniform(1, 2), true);
    CHECK(reg_sol.v(0) == doctest::Approx((0.5 + std::log(2.0)) / 0.1).epsilon(1e-13));
    CHECK(reg_sol.v(0) == doctest::Approx(11.931472).epsilon(1e-7));
}

TEST_CASE("average evaluation") {
    Matrix r(1, 2);
    r << 1, 0;
    const auto two = TabularMdp::from_arrays({Matrix::Constant(2, 2, 0.5)}, r, 1.0);
    const auto sol = evaluate_average(two, Policy::uniform(2, 1), false);
    REQUIRE(sol.rho);
    CHECK(*sol.rho == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(sol.v(0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(sol.v(1) == doctest::Approx(-0.5).epsilon(1e-14));

    const auto constant = TabularMdp::from_arrays({Matrix::Ones(1, 1)}, Matrix::Constant(1, 1, 3.25), 1.0);
    const auto c = evaluate_average(constant, Policy::uniform(1, 1), false);
    CHECK(*c.rho == 3.25);
    CHECK(c.v(0) == 0.0);

    Matrix r2(2, 1);
    r2 << 1, 0;
    const auto arms = TabularMdp::from_arrays({Matrix::Ones(1, 1), Matrix::Ones(1, 1)}, r2, 1.0);
    const auto reg = evaluate_average(arms, Policy::uniform(1, 2), true);
    CHECK(*reg.rho == doctest::Approx(0.5 + std::log(2.0)).epsilon(1e-14));
    CHECK(*reg.rho == doctest::Approx(1.193147).epsilon(1e-6));
}

TEST_CASE("average evaluation satisfies its equation and normalization") {
    SplitMix64 rng(17);
    for (int i = 0; i < 30; ++i) {
        const auto mdp = testing::suite_instance(i, Setting::AvgStd);
        Policy pi{Matrix(mdp.num_states(), mdp.num_actions())};
        for (Index s = 0; s < mdp.num_states(); ++s) {
            for (Index a = 0; a < mdp.num_actions(); ++a) pi.probs(s, a) = 0.05 + rng.uniform();
            pi.probs.row(s) /= pi.probs.row(s).sum();
        }
        for (bool reg : {false, true}) {
            const auto sol = evaluate_average(mdp, pi, reg);
            const auto chain = induce_chain(mdp, pi);
            const Vector w = stationary_distribution(chain.p_pi);
            const Vector rr = reg ? Vector(chain.r_pi - chain.h_pi) : chain.r_pi;
            CHECK(std::abs(w.dot(sol.v)) <= 1e-10);
            CHECK(sup_norm((rr.array() - *sol.rho + (chain.p_pi * sol.v).array() - sol.v.array()).matrix()) <= 1e-10);
        }
    }
}

TEST_CASE("value iteration") {
    CHECK(value_iteration(one_state(0.9)).v(0) == doctest::Approx(10.0).epsilon(1e-10));

    const auto sol = value_iteration(m3());
    CHECK(sol.v(0) == doctest::Approx(3.0).epsilon(1e-10));
    CHECK(sol.v(1) == doctest::Approx(4.0).epsilon(1e-10));
    CHECK(sol.residual <= 1e-10);

    auto zero = m3();
    zero.rewards.setZero();
    CHECK(value_iteration(zero).v.isZero());

    auto avg = m3(1.0);
    CHECK_THROWS_AS(value_iteration(avg), Error);
}

TEST_CASE("value iteration respects max_iters") {
    SolverParams params;
    params.max_iters = 3;
    try {
        value_iteration(testing::suite_instance(5, Setting::DiscStd), params);
        FAIL("expected MaxItersExceeded");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MaxItersExceeded);
    }
}

TEST_CASE("soft value iteration") {
    const auto sol = soft_value_iteration(one_state(0.9));
    CHECK(sol.v(0) == doctest::Approx(std::log(1 + std::exp(1.0)) / 0.1).epsilon(1e-11));
    CHECK(sol.v(0) == doctest::Approx(13.132617).epsilon(1e-7));

    const auto trivial = TabularMdp::from_arrays({Matrix::Ones(1, 1)}, Matrix::Zero(1, 1), 0.9);
    CHECK(std::abs(soft_value_iteration(trivial).v(0)) <= 1e-12);

    const auto mdp = testing::suite_instance(6, Setting::DiscReg);
    auto shifted = mdp;
    shifted.rewards.array() += 0.75;
    const Vector base = soft_value_iteration(mdp).v;
    const Vector moved = soft_value_iteration(shifted).v;
    CHECK(sup_norm(moved - base - Vector::Constant(base.size(), 0.75 / 0.1)) <= 1e-8);
}

TEST_CASE("soft fixed point is tight in every state") {
    for (int i = 0; i < 20; ++i) {
        const auto mdp = testing::suite_instance(i, Setting::DiscReg);
        const auto sol = soft_value_iteration(mdp);
        CHECK(gibbs_policy(mdp, sol.v).log_partition.cwiseAbs().maxCoeff() <= 1e-8);
        CHECK(mdp.weight_e.dot(sol.v) == doctest::Approx(testing::ref::soft_discounted_optimum(mdp)).epsilon(1e-10));
    }
}

TEST_CASE("average policy iteration") {
    const auto arms = TabularMdp::from_arrays({Matrix::Ones(1, 1), Matrix::Ones(1, 1)},
                                              (Matrix(2, 1) << 0, 1).finished(), 1.0);
    CHECK(*policy_iteration_average(arms).rho == doctest::Approx(1.0).epsilon(1e-14));

    const auto sol = policy_iteration_average(uniform_two_state());
    CHECK(*sol.rho == doctest::Approx(1.5).epsilon(1e-14));
    CHECK(sol.residual <= 1e-9);

    auto flat = uniform_two_state();
    flat.rewards.setConstant(0.3);
    CHECK(*policy_iteration_average(flat).rho == doctest::Approx(0.3).epsilon(1e-14));
}

TEST_CASE("policy iteration gains never decrease") {
    for (int i = 0; i < 40; ++i) {
        const auto mdp = testing::suite_instance(i, Setting::AvgStd);
        std::vector<Scalar> trace;
        const auto sol = policy_iteration_average(mdp, {}, &trace);
        REQUIRE_FALSE(trace.empty());
        for (std::size_t k = 1; k < trace.size(); ++k) CHECK(trace[k] >= trace[k - 1] - 1e-12);
        CHECK(*sol.rho == doctest::Approx(testing::ref::enumerate_optimum(mdp, true)).epsilon(1e-12));
        CHECK(optimality_residual(mdp, Setting::AvgStd, sol.v, *sol.rho) <= 1e-9);
    }
}

TEST_CASE("soft relative value iteration") {
    const auto arms = TabularMdp::from_arrays({Matrix::Ones(1, 1), Matrix::Ones(1, 1)},
                                              (Matrix(2, 1) << 0, 1).finished(), 1.0);
    const auto one = soft_relative_value_iteration(arms);
    CHECK(*one.rho == doctest::Approx(std::log(1 + std::exp(1.0))).epsilon(1e-10));
    CHECK(*one.rho == doctest::Approx(1.313262).epsilon(1e-6));
    CHECK(std::abs(one.v(0)) <= 1e-12);

    const auto two = soft_relative_value_iteration(uniform_two_state());
    const Scalar expected = 0.5 * (std::log(1 + std::exp(1.0)) + std::log(1 + std::exp(2.0)));
    CHECK(*two.rho == doctest::Approx(expected).epsilon(1e-10));
    CHECK(*two.rho == doctest::Approx(1.720095).epsilon(1e-6));

    const auto c = TabularMdp::from_arrays({Matrix::Ones(1, 1)}, Matrix::Constant(1, 1, -0.4), 1.0);
    CHECK(*soft_relative_value_iteration(c).rho == doctest::Approx(-0.4).epsilon(1e-12));
}

TEST_CASE("soft relative iteration solves the log-sum-exp equation on the suite") {
    for (int i = 0; i < 30; ++i) {
        const auto mdp = testing::suite_instance(i, Setting::AvgReg);
        const auto sol = soft_relative_value_iteration(mdp);
        CHECK(optimality_residual(mdp, Setting::AvgReg, sol.v, *sol.rho) <= 1e-8);
        CHECK(*sol.rho == doctest::Approx(testing::ref::soft_average_optimum(mdp)).epsilon(1e-10));
        const auto gibbs = gibbs_policy(mdp, sol.v, sol.rho);
        const Vector w = stationary_distribution(induce_chain(mdp, gibbs.policy).p_pi);
        CHECK(std::abs(w.dot(sol.v)) <= 1e-10);
    }
}

TEST_CASE("optimal operators contract with modulus gamma") {
    SplitMix64 rng(23);
    for (int i = 0; i < 20; ++i) {
        const auto mdp = testing::suite_instance(i, Setting::DiscStd);
        const Index n = mdp.num_states();
        Vector v1(n), v2(n);
        for (Index s = 0; s < n; ++s) {
            v1(s) = rng.uniform(-5, 5);
            v2(s) = rng.uniform(-5, 5);
        }
        const Matrix q1 = action_values(mdp, v1, mdp.discount);
        const Matrix q2 = action_values(mdp, v2, mdp.discount);
        const Vector hard = q1.rowwise().maxCoeff() - q2.rowwise().maxCoeff();
        Vector soft(n);
        for (Index s = 0; s < n; ++s) soft(s) = log_sum_exp(q1.row(s)) - log_sum_exp(q2.row(s));
        CHECK(sup_norm(hard) <= mdp.discount * sup_norm(v1 - v2) + 1e-12);
        CHECK(sup_norm(soft) <= mdp.discount * sup_norm(v1 - v2) + 1e-12);
    }
}

TEST_CASE("value iteration optimum is primal feasible and complementary") {
    for (int i = 0; i < 20; ++i) {
        const auto mdp = testing::suite_instance(i, Setting::DiscStd);
        const auto sol = value_iteration(mdp);
        Matrix slack = action_values(mdp, sol.v, mdp.discount);
        slack.colwise() -= sol.v;
        CHECK(slack.maxCoeff() <= 1e-8);
        const auto greedy = greedy_policy(mdp, sol.v);
        for (Index s = 0; s < mdp.num_states(); ++s)
            CHECK(std::abs(slack(s, greedy.actions[static_cast<std::size_t>(s)])) <= 1e-8);
    }
}

TEST_CASE("reward shifts move optima and keep argmax sets") {
    for (int i = 0; i < 12; ++i) {
        const auto mdp = testing::suite_instance(i, Setting::DiscStd);
        auto shifted = mdp;
        shifted.rewards.array() += -1.3;
        const auto a = value_iteration(mdp);
        const auto b = value_iteration(shifted);
        CHECK(sup_norm(b.v - a.v - Vector::Constant(a.v.size(), -1.3 / 0.1)) <= 1e-8);
        CHECK(greedy_policy(mdp, a.v).actions == greedy_policy(shifted, b.v).actions);

        const auto avg = testing::suite_instance(i, Setting::AvgStd);
        auto avg_shifted = avg;
        avg_shifted.rewards.array() += 2.0;
        const auto pa = policy_iteration_average(avg);
        const auto pb = policy_iteration_average(avg_shifted);
        CHECK(*pb.rho - *pa.rho == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(greedy_policy(avg, pa.v, pa.rho).actions == greedy_policy(avg_shifted, pb.v, pb.rho).actions);
    }
}

TEST_CASE("greedy policy") {
    const auto g = greedy_policy(m3(), (Vector(2) << 3, 4).finished());
    CHECK(g.actions == std::vector<Index>{1, 0});
    CHECK(g.min_margin == doctest::Approx(1.5));
    CHECK(g.margins(1) == doctest::Approx(2.5));
    CHECK_FALSE(g.has_near_ties);

    auto zero = m3();
    zero.rewards.setZero();
    const auto tie = greedy_policy(zero, Vector::Zero(2));
    CHECK(tie.actions == std::vector<Index>{0, 0});
    CHECK(tie.has_near_ties);

    CHECK(greedy_policy(one_state(0.9), Vector::Zero(1)).actions == std::vector<Index>{1});
}

TEST_CASE("gibbs policy") {
    const auto g = gibbs_policy(one_state(0.9), Vector::Zero(1));
    CHECK(g.policy.probs(0, 0) == doctest::Approx(0.268941).epsilon(1e-6));
    CHECK(g.policy.probs(0, 1) == doctest::Approx(0.731059).epsilon(1e-6));

    auto flat = m3();
    flat.rewards.setConstant(1.0);
    flat.transitions[1] = flat.transitions[0];
    const auto u = gibbs_policy(flat, Vector::Constant(2, 0.4));
    CHECK(u.policy.probs.isApprox(Matrix::Constant(2, 2, 0.5)));

    const auto mdp = one_state(0.9);
    const auto fixed = soft_value_iteration(mdp);
    CHECK(std::abs(gibbs_policy(mdp, fixed.v).log_partition(0)) <= 1e-9);
}

}

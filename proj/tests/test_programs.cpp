#include "support.hpp"

#include "mdpopt/bellman.hpp"
#include "mdpopt/numerics.hpp"
#include "mdpopt/programs.hpp"
#include "mdpopt/random.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace mdpopt;
using testing::one_state;

namespace {

Policy random_policy(SplitMix64& rng, Index n, Index m, Scalar floor = 0.0) {
    Policy pi{Matrix(n, m)};
    for (Index s = 0; s < n; ++s) {
        for (Index a = 0; a < m; ++a) pi.probs(s, a) = floor + rng.uniform();
        pi.probs.row(s) /= pi.probs.row(s).sum();
    }
    return pi;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_SUITE("programs") {

TEST_CASE("primal program shapes") {
    const auto disc = testing::m3(0.9);
    const auto p = std::get<LinearProgramSpec>(build_primal(Setting::DiscStd, disc));
    CHECK(p.num_variables() == 2);
    CHECK(p.a_ub.rows() == 4);
    CHECK(p.a_eq.rows() == 0);
    CHECK(p.sense == Sense::Minimize);

    const auto avg = testing::m3(1.0);
    const auto q = std::get<LinearProgramSpec>(build_primal(Setting::AvgStd, avg));
    CHECK(q.num_variables() == 3);
    CHECK(q.a_ub.rows() == 4);
    CHECK(q.names.back() == "rho");

    const auto three = testing::suite_instance(1, Setting::DiscReg);
    REQUIRE(three.num_states() == 3);
    const auto c = std::get<ConvexProgramSpec>(build_primal(Setting::DiscReg, three));
    CHECK(c.num_variables() == 3);
    CHECK(c.num_nonlinear_constraints() == 3);

    CHECK_THROWS_AS(build_primal(Setting::AvgStd, disc), Error);
    CHECK_THROWS_AS(build_dual(Setting::DiscReg, avg), Error);
}

TEST_CASE("dual program shapes") {
    const auto d = std::get<LinearProgramSpec>(build_dual(Setting::DiscStd, testing::m3(0.9)));
    CHECK(d.num_variables() == 4);
    CHECK(d.a_eq.rows() == 2);
    CHECK((d.lower.array() == 0.0).all());
    CHECK(d.sense == Sense::Maximize);
    CHECK(d.names[1] == "mu[0,1]");
    CHECK(d.names[2] == "mu[1,0]");

    const auto a = std::get<LinearProgramSpec>(build_dual(Setting::AvgStd, testing::m3(1.0)));
    CHECK(a.num_variables() == 4);
    CHECK(a.a_eq.rows() == 3);

    // (1 - gamma) sum_a mu^a = e forces sum mu = 10.
    const auto s = std::get<LinearProgramSpec>(build_dual(Setting::DiscStd, one_state(0.9)));
    CHECK(s.a_eq.rows() == 1);
    CHECK(s.a_eq(0, 0) == doctest::Approx(0.1));
    CHECK(s.a_eq(0, 1) == doctest::Approx(0.1));
    CHECK(s.b_eq(0) == 1.0);
}

TEST_CASE("canonical text dump matches the golden file") {
    const auto spec = std::get<LinearProgramSpec>(build_primal(Setting::DiscStd, testing::m3(0.5)));
    CHECK(spec.to_text() == read_file(std::string(MDPOPT_TEST_DATA) + "/golden/primal_m3.txt"));
    const auto dual = std::get<LinearProgramSpec>(build_dual(Setting::AvgStd, testing::m3(1.0)));
    CHECK(dual.to_text() == read_file(std::string(MDPOPT_TEST_DATA) + "/golden/dual_m3_avg.txt"));
}

TEST_CASE("program consistency checks") {
    auto spec = std::get<LinearProgramSpec>(build_primal(Setting::DiscStd, testing::m3(0.5)));
    CHECK_NOTHROW(spec.check());
    spec.names[1] = spec.names[0];
    CHECK_THROWS_AS(spec.check(), Error);
    spec = std::get<LinearProgramSpec>(build_primal(Setting::DiscStd, testing::m3(0.5)));
    spec.b_ub.resize(3);
    CHECK_THROWS_AS(spec.check(), Error);
}

TEST_CASE("occupancy from policy") {
    const auto mdp = one_state(0.9);
    const auto mu = occupancy_from_policy(mdp, Policy::deterministic({1}, 2), Setting::DiscStd);
    CHECK(mu.mu(0, 0) == 0.0);
    CHECK(mu.mu(0, 1) == doctest::Approx(10.0).epsilon(1e-13));

    const auto half = one_state(0.5);
    const auto u = occupancy_from_policy(half, Policy::uniform(1, 2), Setting::DiscStd);
    CHECK(u.mu(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(u.mu(0, 1) == doctest::Approx(1.0).epsilon(1e-14));

    const auto avg = testing::uniform_two_state();
    const auto a = occupancy_from_policy(avg, Policy::deterministic({0, 0}, 2), Setting::AvgStd);
    CHECK(a.mu.col(0).isApprox(Vector::Constant(2, 0.5)));
    CHECK(a.mu.col(1).isZero());
}

TEST_CASE("policy from occupancy") {
    OccupancyMeasure mu{(Matrix(1, 2) << 0, 10).finished(), Setting::DiscStd};
    const auto p = policy_from_occupancy(mu);
    CHECK(p.policy.probs(0, 1) == 1.0);
    CHECK(p.marginal(0) == 10.0);

    OccupancyMeasure flat{Matrix::Constant(2, 2, 0.25), Setting::AvgStd};
    const auto q = policy_from_occupancy(flat);
    CHECK(q.policy.probs.isApprox(Matrix::Constant(2, 2, 0.5)));
    CHECK(q.marginal.isApprox(Vector::Constant(2, 0.5)));

    OccupancyMeasure empty{(Matrix(2, 2) << 1, 0, 0, 0).finished(), Setting::AvgStd};
    const auto e = policy_from_occupancy(empty);
    CHECK(e.flagged_states == std::vector<Index>{1});
    CHECK(e.policy.probs.row(1).isApprox(Matrix::Constant(1, 2, 0.5)));
}

TEST_CASE("occupancy round trip and dual feasibility for any policy") {
    SplitMix64 rng(29);
    for (int i = 0; i < 40; ++i) {
        for (Setting setting : testing::kAllSettings) {
            const auto mdp = testing::suite_instance(i, setting);
            const Policy pi = random_policy(rng, mdp.num_states(), mdp.num_actions());
            const auto mu = occupancy_from_policy(mdp, pi, setting);
            CHECK(dual_constraint_residual(setting, mdp, mu.mu) <= 1e-8);
            CHECK(sup_norm(policy_from_occupancy(mu).policy.probs - pi.probs) <= 1e-12);
        }
    }
}

TEST_CASE("dual objective of a policy's occupancy equals its value") {
    SplitMix64 rng(31);
    for (int i = 0; i < 40; ++i) {
        const auto disc = testing::suite_instance(i, Setting::DiscStd);
        const Policy pi = random_policy(rng, disc.num_states(), disc.num_actions(), 0.01);
        for (bool reg : {false, true}) {
            const Setting s = reg ? Setting::DiscReg : Setting::DiscStd;
            const Scalar value = disc.weight_e.dot(evaluate_discounted(disc, pi, reg).v);
            CHECK(dual_objective(s, disc, occupancy_from_policy(disc, pi, s)) == doctest::Approx(value).epsilon(1e-10));
        }
        const auto avg = testing::suite_instance(i, Setting::AvgStd);
        for (bool reg : {false, true}) {
            const Setting s = reg ? Setting::AvgReg : Setting::AvgStd;
            const Scalar rho = *evaluate_average(avg, pi, reg).rho;
            CHECK(std::abs(dual_objective(s, avg, occupancy_from_policy(avg, pi, s)) - rho) <= 1e-10);
        }
    }
}

TEST_CASE("convex program derivatives match central differences") {
    SplitMix64 rng(37);
    auto rel = [](const Matrix& a, const Matrix& b) { return sup_norm(a - b) / std::max(1.0, sup_norm(b)); };
    for (int i = 0; i < 20; ++i) {
        for (Setting setting : {Setting::DiscReg, Setting::AvgReg}) {
            const auto mdp = testing::suite_instance(i, setting);
            for (ProgramSide side : {ProgramSide::Primal, ProgramSide::Dual}) {
                const ConvexProgramSpec spec(side, setting, mdp);
                const Index k = spec.num_variables();
                Vector x(k);
                for (Index j = 0; j < k; ++j)
                    x(j) = side == ProgramSide::Dual ? rng.uniform(0.2, 2.0) : rng.uniform(-2.0, 2.0);
                constexpr Scalar h = 1e-6;
                Vector fd_grad(k);
                Matrix fd_jac(spec.num_nonlinear_constraints(), k);
                for (Index j = 0; j < k; ++j) {
                    Vector up = x, down = x;
                    up(j) += h;
                    down(j) -= h;
                    fd_grad(j) = (spec.objective(up) - spec.objective(down)) / (2 * h);
                    if (fd_jac.rows() > 0) fd_jac.col(j) = (spec.constraint_values(up) - spec.constraint_values(down)) / (2 * h);
                }
                CHECK(rel(spec.objective_gradient(x), fd_grad) <= 1e-5);
                if (fd_jac.rows() > 0) CHECK(rel(spec.constraint_jacobian(x), fd_jac) <= 1e-5);
            }
        }
    }
}

TEST_CASE("log-sum-exp constraint equals log Z of the Gibbs policy") {
    SplitMix64 rng(41);
    for (int i = 0; i < 20; ++i) {
        for (Setting setting : {Setting::DiscReg, Setting::AvgReg}) {
            const auto mdp = testing::suite_instance(i, setting);
            const ConvexProgramSpec spec(ProgramSide::Primal, setting, mdp);
            Vector x(spec.num_variables());
            for (Index j = 0; j < x.size(); ++j) x(j) = rng.uniform(-3, 3);
            const Vector v = x.head(mdp.num_states());
            const std::optional<Scalar> rho = is_average(setting) ? std::optional<Scalar>(x(mdp.num_states())) : std::nullopt;
            // The max form: max_pi sum_a pi_a (q_a - v_s) - h(pi) equals the constraint value.
            const auto g = gibbs_policy(mdp, v, rho);
            const Vector c = spec.constraint_values(x);
            CHECK(sup_norm(c - g.log_partition) <= 1e-10);
            Matrix q = action_values(mdp, v, mdp.discount);
            q.colwise() -= v;
            if (rho) q.array() -= *rho;
            for (Index s = 0; s < mdp.num_states(); ++s) {
                const Vector pi = g.policy.probs.row(s).transpose();
                CHECK(std::abs(q.row(s).dot(pi.transpose()) - entropy(pi) - c(s)) <= 1e-10);
            }
        }
    }
}

TEST_CASE("kkt residuals on the one-state instance") {
    const auto mdp = one_state(0.9);
    const OccupancyMeasure mu{(Matrix(1, 2) << 0, 10).finished(), Setting::DiscStd};
    const auto ok = kkt_residuals(Setting::DiscStd, mdp, Vector::Constant(1, 10.0), std::nullopt, mu);
    CHECK(ok.pass);
    CHECK(ok.primal_feasibility <= 1e-8);
    CHECK(ok.stationarity <= 1e-8);
    CHECK(ok.complementary_slackness <= 1e-8);

    // slack 1 + 0.9 * 10.1 - 10.1 = -0.01, times mu = 10.
    const auto bad = kkt_residuals(Setting::DiscStd, mdp, Vector::Constant(1, 10.1), std::nullopt, mu);
    CHECK(bad.complementary_slackness == doctest::Approx(0.1).epsilon(1e-9));
    CHECK_FALSE(bad.pass);

    const OccupancyMeasure zero{Matrix::Zero(1, 2), Setting::DiscStd};
    const auto z = kkt_residuals(Setting::DiscStd, mdp, Vector::Constant(1, 10.0), std::nullopt, zero);
    CHECK(z.stationarity == doctest::Approx(1.0));
    CHECK_FALSE(z.pass);
}

TEST_CASE("kkt residuals in the regularized settings") {
    const auto mdp = one_state(0.9);
    const auto fixed = soft_value_iteration(mdp);
    const auto pi = gibbs_policy(mdp, fixed.v).policy;
    const auto mu = occupancy_from_policy(mdp, pi, Setting::DiscReg);
    const auto rep = kkt_residuals(Setting::DiscReg, mdp, fixed.v, std::nullopt, mu);
    CHECK(rep.pass);
    CHECK(rep.complementary_slackness <= 1e-8);

    // A non-Gibbs split of the same mass fails stationarity.
    OccupancyMeasure off = mu;
    off.mu << 5, 5;
    CHECK_FALSE(kkt_residuals(Setting::DiscReg, mdp, fixed.v, std::nullopt, off).pass);
}

TEST_CASE("objectives") {
    const auto mdp = one_state(0.9);
    CHECK(primal_objective(Setting::DiscStd, mdp, Vector::Constant(1, 10.0)) == 10.0);
    CHECK(primal_objective(Setting::AvgStd, testing::m3(1.0), Vector::Zero(2), 0.7) == 0.7);
    const OccupancyMeasure mu{(Matrix(1, 2) << 0, 10).finished(), Setting::DiscStd};
    CHECK(dual_objective(Setting::DiscStd, mdp, mu) == 10.0);
    CHECK(dual_objective(Setting::DiscReg, mdp, mu) == 10.0);
}

}

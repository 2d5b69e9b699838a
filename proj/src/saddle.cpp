#include "mdpopt/saddle.hpp"

#include "mdpopt/bellman.hpp"
#include "mdpopt/numerics.hpp"
#include "mdpopt/random.hpp"

#include <cmath>

namespace mdpopt {

namespace {

Scalar transition_scale(Setting setting, const TabularMdp& mdp) { return is_average(setting) ? 1.0 : mdp.discount; }

Matrix slack_matrix(Setting setting, const TabularMdp& mdp, const Vector& v, Scalar rho) {
    Matrix slack = action_values(mdp, v, transition_scale(setting, mdp));
    slack.colwise() -= v;
    if (is_average(setting)) slack.array() -= rho;
    return slack;
}

Scalar entropy_sum(const Matrix& mu) {
    Scalar total = 0;
    for (Index s = 0; s < mu.rows(); ++s) total += entropy_unchecked(mu.row(s).transpose());
    return total;
}

struct Point {
    Vector v;
    Scalar rho = 0;
    Matrix mu;
};

/// Descent direction data for (v, rho): dL/dv and dL/drho.
void primal_gradient(Setting setting, const TabularMdp& mdp, const Matrix& mu, Vector& gv, Scalar& grho) {
    const Scalar scale = transition_scale(setting, mdp);
    gv = is_average(setting) ? Vector(Vector::Zero(mdp.num_states())) : mdp.weight_e;
    gv -= mu.rowwise().sum();
    for (Index a = 0; a < mdp.num_actions(); ++a)
        gv.noalias() += scale * mdp.transitions[static_cast<std::size_t>(a)].transpose() * mu.col(a);
    grho = is_average(setting) ? 1.0 - mu.sum() : 0.0;
}

/// dL/dmu: the constraint slack, minus log(mu^a_s / w_s) when regularized.
Matrix dual_gradient(Setting setting, const TabularMdp& mdp, const Vector& v, Scalar rho, const Matrix& mu) {
    Matrix g = slack_matrix(setting, mdp, v, rho);
    if (is_regularized(setting)) {
        const Vector w = mu.rowwise().sum();
        for (Index s = 0; s < mu.rows(); ++s)
            for (Index a = 0; a < mu.cols(); ++a) g(s, a) -= std::log(mu(s, a) / w(s));
    }
    return g;
}

Scalar operator_norm(const Matrix& m) {
    SplitMix64 rng(42);
    Vector x(m.cols());
    for (Index i = 0; i < x.size(); ++i) x(i) = 0.5 + rng.uniform();
    x.normalize();
    Scalar estimate = 0;
    for (int k = 0; k < 50; ++k) {
        Vector y = m.transpose() * (m * x);
        const Scalar norm = y.norm();
        if (norm == 0.0) return 0.0;
        estimate = std::sqrt(norm);
        x = y / norm;
    }
    return estimate;
}

} // namespace

Scalar coupling_norm_bound(const TabularMdp& mdp, Scalar scale) {
    const Index n = mdp.num_states();
    Scalar total = 0;
    for (const Matrix& p : mdp.transitions) {
        const Scalar norm = operator_norm(Matrix::Identity(n, n) - scale * p.transpose());
        total += norm * norm;
    }
    return std::sqrt(total);
}

Scalar lagrangian(Setting setting, const TabularMdp& mdp, const Vector& v, Scalar rho, const Matrix& mu) {
    Scalar value = primal_objective(setting, mdp, v, rho) + mu.cwiseProduct(slack_matrix(setting, mdp, v, rho)).sum();
    if (is_regularized(setting)) value -= entropy_sum(mu);
    return value;
}

SaddleBounds saddle_bounds(Setting setting, const TabularMdp& mdp, const Vector& v, const Matrix& mu) {
    SaddleBounds b;
    const Index n = mdp.num_states();

    // Primal: shift v (or raise rho) until every constraint holds.
    Vector worst(n);
    if (is_regularized(setting)) {
        Matrix z = action_values(mdp, v, transition_scale(setting, mdp));
        for (Index s = 0; s < n; ++s) worst(s) = log_sum_exp(z.row(s)) - v(s);
    } else {
        worst = action_values(mdp, v, transition_scale(setting, mdp)).rowwise().maxCoeff() - v;
    }
    if (is_average(setting)) {
        b.v = v;
        b.rho = worst.maxCoeff();
        b.upper = b.rho;
    } else {
        b.v = (v.array() + worst.maxCoeff() / (1.0 - mdp.discount)).matrix();
        b.upper = mdp.weight_e.dot(b.v);
    }

    // Dual: re-balance mu through its policy.
    OccupancyMeasure raw{mu, setting};
    Policy pi = policy_from_occupancy(raw).policy;
    if (is_regularized(setting)) {
        pi.probs = pi.probs.cwiseMax(1e-300);
        for (Index s = 0; s < n; ++s) pi.probs.row(s) /= pi.probs.row(s).sum();
    }
    b.mu = occupancy_from_policy(mdp, pi, setting);
    b.lower = dual_objective(setting, mdp, b.mu);
    return b;
}

namespace {

/// Bookkeeping shared by both iterations: running averages and gap checks.
class GapMonitor {
public:
    GapMonitor(Setting setting, const TabularMdp& mdp, const SaddleParams& params, SaddleResult& result)
        : setting_(setting), mdp_(mdp), params_(params), result_(result) {}

    /// Records the new iterate; returns true once the gap reaches the tolerance.
    bool record(Index it, const Point& cur) {
        if (sum_.v.size() == 0) sum_ = Point{Vector::Zero(cur.v.size()), 0.0, Matrix::Zero(cur.mu.rows(), cur.mu.cols())};
        sum_.v += cur.v;
        sum_.rho += cur.rho;
        sum_.mu += cur.mu;
        ++averaged_;
        result_.iterations = it;
        if (it % params_.check_every != 0 && it != params_.max_iters) return false;

        const Scalar inv = 1.0 / static_cast<Scalar>(averaged_);
        const Point avg_point{sum_.v * inv, sum_.rho * inv, sum_.mu * inv};
        const SaddleBounds last_b = saddle_bounds(setting_, mdp_, cur.v, cur.mu);
        const SaddleBounds avg_b = saddle_bounds(setting_, mdp_, avg_point.v, avg_point.mu);
        const bool use_last = last_b.gap() <= avg_b.gap();
        best_ = use_last ? last_b : avg_b;
        best_point_ = use_last ? cur : avg_point;

        const Scalar gap = best_.gap();
        result_.gap_iterations.push_back(it);
        result_.gap_trace.push_back(gap);
        if (params_.on_check) params_.on_check(it, gap, lagrangian(setting_, mdp_, best_.v, best_.rho, best_.mu.mu));
        if (gap <= params_.tol) result_.converged = true;
        return result_.converged;
    }

    void finish() {
        result_.v = best_.v;
        if (is_average(setting_)) result_.rho = best_.rho;
        result_.mu = best_.mu;
        result_.upper_bound = best_.upper;
        result_.lower_bound = best_.lower;
        result_.lagrangian = lagrangian(setting_, mdp_, best_.v, best_.rho, best_.mu.mu);
        result_.raw_v = best_point_.v;
        result_.raw_rho = best_point_.rho;
        result_.raw_mu = best_point_.mu;
    }

private:
    Setting setting_;
    const TabularMdp& mdp_;
    const SaddleParams& params_;
    SaddleResult& result_;
    Point sum_;
    Index averaged_ = 0;
    SaddleBounds best_;
    Point best_point_;
};

/// Extragradient with projection on the bilinear Lagrangian.
void solve_standard(Setting setting, const TabularMdp& mdp, const SaddleParams& params, SaddleResult& result) {
    const Index n = mdp.num_states();
    const Index m = mdp.num_actions();
    const bool avg = is_average(setting);
    const Scalar mass = avg ? 1.0 : mdp.weight_e.sum() / (1.0 - mdp.discount);
    Scalar lip = coupling_norm_bound(mdp, transition_scale(setting, mdp));
    if (avg) lip = std::sqrt(lip * lip + static_cast<Scalar>(n * m));
    const Scalar step = 0.9 / lip;

    GapMonitor monitor(setting, mdp, params, result);
    Point cur{Vector::Zero(n), 0.0, Matrix::Constant(n, m, mass / static_cast<Scalar>(n * m))};
    Vector gv;
    Scalar grho = 0;
    for (Index it = 1; it <= params.max_iters; ++it) {
        primal_gradient(setting, mdp, cur.mu, gv, grho);
        Point half;
        half.v = cur.v - step * gv;
        half.rho = cur.rho - step * grho;
        half.mu = (cur.mu + step * dual_gradient(setting, mdp, cur.v, cur.rho, cur.mu)).cwiseMax(0.0);

        primal_gradient(setting, mdp, half.mu, gv, grho);
        Point next;
        next.v = cur.v - step * gv;
        next.rho = cur.rho - step * grho;
        next.mu = (cur.mu + step * dual_gradient(setting, mdp, half.v, half.rho, half.mu)).cwiseMax(0.0);
        cur = std::move(next);
        if (monitor.record(it, cur)) break;
    }
    monitor.finish();
}

/// Regularized Lagrangian with mu = w pi. The conditional pi enters only
/// through the entropy-regularized inner maximization, whose exact solution is
/// the Gibbs policy of (v, rho), leaving
///   L(v, rho, w) = e^T v [+ rho] + sum_s w_s log Z_s(v, rho).
/// Mirror-prox: entropic (multiplicative) steps on w, gradient steps on
/// (v, rho), with a common step scale that backtracks on the local Lipschitz
/// test and grows slowly after accepted steps.
void solve_regularized(Setting setting, const TabularMdp& mdp, const SaddleParams& params, SaddleResult& result) {
    const Index n = mdp.num_states();
    const bool avg = is_average(setting);
    const Scalar mass = avg ? 1.0 : mdp.weight_e.sum() / (1.0 - mdp.discount);
    Scalar lip = coupling_norm_bound(mdp, transition_scale(setting, mdp));
    if (avg) lip = std::sqrt(lip * lip + static_cast<Scalar>(n * mdp.num_actions()));
    constexpr Scalar kGrowth = 1.05;
    constexpr int kMaxHalvings = 60;

    const Scalar step0 = 1.0 / (lip * std::sqrt(mass));
    const Scalar max_step = 1e4 * step0;
    // Any feasible occupancy has state mass at least e_s when discounted, so
    // clamping there keeps w off zero without cutting off the optimum.
    const Vector w_floor = avg ? Vector::Constant(n, 1e-20) : Vector(mdp.weight_e);
    Scalar step_x = step0;
    Scalar step_w = step0;

    struct State {
        Vector v;
        Scalar rho = 0;
        Vector w;
        Matrix mu;      // w_s times the Gibbs policy of (v, rho)
        Vector log_z;   // constraint values, the gradient in w
        Vector gv;      // gradient in v
        Scalar grho = 0;
    };
    auto complete = [&](State& st) {
        const GibbsPolicy g = gibbs_policy(mdp, st.v, avg ? std::optional<Scalar>(st.rho) : std::nullopt);
        st.log_z = g.log_partition;
        st.mu = st.w.asDiagonal() * g.policy.probs;
        primal_gradient(setting, mdp, st.mu, st.gv, st.grho);
    };
    auto step_from = [&](const State& base, const State& dir) {
        State out;
        out.v = base.v - step_x * dir.gv;
        out.rho = base.rho - step_x * dir.grho;
        out.w = base.w.cwiseProduct((step_w * dir.log_z).cwiseMax(-50.0).cwiseMin(50.0).array().exp().matrix()).cwiseMax(w_floor);
        complete(out);
        return out;
    };

    GapMonitor monitor(setting, mdp, params, result);
    State cur;
    cur.v = Vector::Zero(n);
    cur.w = Vector::Constant(n, mass / static_cast<Scalar>(n));
    complete(cur);

    for (Index it = 1; it <= params.max_iters; ++it) {
        State half;
        for (int halvings = 0;; ++halvings) {
            half = step_from(cur, cur);
            // ||F(half) - F(cur)|| <= 0.9 ||half - cur||, in the metric of the
            // step with diag(1 / w) on the w block.
            const Scalar lhs = step_x * ((half.gv - cur.gv).squaredNorm() + (half.grho - cur.grho) * (half.grho - cur.grho)) +
                               step_w * cur.w.dot((half.log_z - cur.log_z).cwiseAbs2());
            const Scalar rhs =
                ((half.v - cur.v).squaredNorm() + (half.rho - cur.rho) * (half.rho - cur.rho)) / step_x +
                (half.w - cur.w).cwiseAbs2().cwiseQuotient(cur.w).sum() / step_w;
            if (std::isfinite(lhs) && lhs <= 0.81 * rhs) break;
            // Both sides at roundoff level: the iterate is already stationary.
            if (halvings >= kMaxHalvings && std::isfinite(rhs)) break;
            if (halvings >= 2 * kMaxHalvings) throw Error(ErrorCode::Stalled, "saddle step size collapsed");
            step_x *= 0.5;
            step_w *= 0.5;
        }
        cur = step_from(cur, half);
        step_x = std::min(step_x * kGrowth, max_step);
        step_w = std::min(step_w * kGrowth, max_step);
        if (monitor.record(it, Point{cur.v, cur.rho, cur.mu})) break;
    }
    monitor.finish();
}

} // namespace

SaddleResult solve_saddle(Setting setting, const TabularMdp& mdp, const SaddleParams& params) {
    require_valid(mdp);
    require_setting_matches(setting, mdp);
    SaddleResult result;
    if (is_regularized(setting))
        solve_regularized(setting, mdp, params, result);
    else
        solve_standard(setting, mdp, params, result);
    return result;
}

} // namespace mdpopt

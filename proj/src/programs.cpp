#include "mdpopt/programs.hpp"

#include "mdpopt/bellman.hpp"
#include "mdpopt/numerics.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace mdpopt {

namespace {

std::string num(Scalar x) {
    x += 0.0; // turns -0 into +0
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string v_name(Index s) { return "v[" + std::to_string(s) + "]"; }
std::string mu_name(Index a, Index s) { return "mu[" + std::to_string(a) + "," + std::to_string(s) + "]"; }

/// Scale in front of P^a: gamma, or 1 in average settings.
Scalar transition_scale(Setting setting, const TabularMdp& mdp) { return is_average(setting) ? 1.0 : mdp.discount; }

/// Shared equality block of every dual: sum_a (I - scale P^a^T) mu^a = e (or 0),
/// plus sum mu = 1 in average settings.
void dual_equalities(Setting setting, const TabularMdp& mdp, Matrix& a_eq, Vector& b_eq) {
    const Index n = mdp.num_states();
    const Index m = mdp.num_actions();
    const Scalar scale = transition_scale(setting, mdp);
    const bool avg = is_average(setting);
    a_eq = Matrix::Zero(n + (avg ? 1 : 0), n * m);
    b_eq = Vector::Zero(a_eq.rows());
    for (Index a = 0; a < m; ++a)
        a_eq.block(0, a * n, n, n) =
            Matrix::Identity(n, n) - scale * mdp.transitions[static_cast<std::size_t>(a)].transpose();
    if (avg) {
        a_eq.row(n).setOnes();
        b_eq(n) = 1.0;
    } else {
        b_eq.head(n) = mdp.weight_e;
    }
}

std::vector<std::string> primal_names(Setting setting, Index n) {
    std::vector<std::string> names;
    for (Index s = 0; s < n; ++s) names.push_back(v_name(s));
    if (is_average(setting)) names.push_back("rho");
    return names;
}

std::vector<std::string> dual_names(Index n, Index m) {
    std::vector<std::string> names;
    for (Index a = 0; a < m; ++a)
        for (Index s = 0; s < n; ++s) names.push_back(mu_name(a, s));
    return names;
}

LinearProgramSpec standard_primal(Setting setting, const TabularMdp& mdp) {
    const Index n = mdp.num_states();
    const Index m = mdp.num_actions();
    const bool avg = is_average(setting);
    const Scalar scale = transition_scale(setting, mdp);
    const Index nv = n + (avg ? 1 : 0);

    LinearProgramSpec lp;
    lp.sense = Sense::Minimize;
    lp.names = primal_names(setting, n);
    lp.c = Vector::Zero(nv);
    if (avg)
        lp.c(n) = 1.0;
    else
        lp.c = mdp.weight_e;
    lp.lower = Vector::Constant(nv, -kInf);

    // Row a|S| + s:  scale (P^a v)_s - v_s [- rho] <= -r^a_s
    lp.a_ub = Matrix::Zero(n * m, nv);
    lp.b_ub = Vector::Zero(n * m);
    for (Index a = 0; a < m; ++a) {
        const Matrix& p = mdp.transitions[static_cast<std::size_t>(a)];
        for (Index s = 0; s < n; ++s) {
            const Index row = a * n + s;
            lp.a_ub.row(row).head(n) = scale * p.row(s);
            lp.a_ub(row, s) -= 1.0;
            if (avg) lp.a_ub(row, n) = -1.0;
            lp.b_ub(row) = -mdp.rewards(s, a);
        }
    }
    lp.a_eq = Matrix::Zero(0, nv);
    lp.b_eq = Vector::Zero(0);
    return lp;
}

LinearProgramSpec standard_dual(Setting setting, const TabularMdp& mdp) {
    const Index n = mdp.num_states();
    const Index m = mdp.num_actions();
    LinearProgramSpec lp;
    lp.sense = Sense::Maximize;
    lp.names = dual_names(n, m);
    lp.c = Eigen::Map<const Vector>(mdp.rewards.data(), n * m);
    lp.lower = Vector::Zero(n * m);
    lp.a_ub = Matrix::Zero(0, n * m);
    lp.b_ub = Vector::Zero(0);
    dual_equalities(setting, mdp, lp.a_eq, lp.b_eq);
    return lp;
}

} // namespace

void LinearProgramSpec::check() const {
    const Index nv = c.size();
    const bool ok = a_ub.cols() == nv && a_eq.cols() == nv && a_ub.rows() == b_ub.size() &&
                    a_eq.rows() == b_eq.size() && lower.size() == nv && static_cast<Index>(names.size()) == nv;
    if (!ok) throw Error(ErrorCode::ShapeMismatch, "linear program dimensions are inconsistent");
    std::set<std::string> unique(names.begin(), names.end());
    if (static_cast<Index>(unique.size()) != nv) throw Error(ErrorCode::ShapeMismatch, "duplicate variable names");
    for (Index j = 0; j < nv; ++j)
        if (!(lower(j) == 0.0 || lower(j) == -kInf))
            throw Error(ErrorCode::ShapeMismatch, "lower bounds must be 0 or -inf");
}

std::string LinearProgramSpec::to_text() const {
    std::ostringstream os;
    auto row_text = [&](const Matrix& a, Index i) {
        for (Index j = 0; j < a.cols(); ++j) os << (j ? " " : "") << num(a(i, j));
    };
    os << "sense " << (sense == Sense::Minimize ? "minimize" : "maximize") << "\n";
    os << "variables " << c.size() << "\n";
    for (Index j = 0; j < c.size(); ++j)
        os << "var " << j << " " << names[static_cast<std::size_t>(j)] << " "
           << (lower(j) == 0.0 ? "nonneg" : "free") << "\n";
    os << "objective";
    for (Index j = 0; j < c.size(); ++j) os << " " << num(c(j));
    os << "\n";
    os << "ub_rows " << a_ub.rows() << "\n";
    for (Index i = 0; i < a_ub.rows(); ++i) {
        os << "ub " << i << ": ";
        row_text(a_ub, i);
        os << " <= " << num(b_ub(i)) << "\n";
    }
    os << "eq_rows " << a_eq.rows() << "\n";
    for (Index i = 0; i < a_eq.rows(); ++i) {
        os << "eq " << i << ": ";
        row_text(a_eq, i);
        os << " = " << num(b_eq(i)) << "\n";
    }
    return os.str();
}

ConvexProgramSpec::ConvexProgramSpec(ProgramSide side, Setting setting, const TabularMdp& mdp)
    : side_(side), setting_(setting), mdp_(mdp) {
    if (!is_regularized(setting))
        throw Error(ErrorCode::SettingMismatch, "convex programs describe the regularized settings");
    const Index n = mdp.num_states();
    const Index m = mdp.num_actions();
    if (side == ProgramSide::Primal) {
        names_ = primal_names(setting, n);
        a_eq_ = Matrix::Zero(0, num_variables());
        b_eq_ = Vector::Zero(0);
        lower_ = Vector::Constant(num_variables(), -kInf);
    } else {
        names_ = dual_names(n, m);
        dual_equalities(setting, mdp, a_eq_, b_eq_);
        lower_ = Vector::Zero(num_variables());
    }
}

Scalar ConvexProgramSpec::objective(const Vector& x) const {
    const Index n = mdp_.num_states();
    if (side_ == ProgramSide::Primal) return is_average(setting_) ? x(n) : mdp_.weight_e.dot(x.head(n));
    return dual_objective(setting_, mdp_, OccupancyMeasure::from_flat(x, n, mdp_.num_actions(), setting_));
}

Vector ConvexProgramSpec::objective_gradient(const Vector& x) const {
    const Index n = mdp_.num_states();
    const Index m = mdp_.num_actions();
    Vector g = Vector::Zero(x.size());
    if (side_ == ProgramSide::Primal) {
        if (is_average(setting_))
            g(n) = 1.0;
        else
            g.head(n) = mdp_.weight_e;
        return g;
    }
    // d/dmu^a_s [r.mu - h(mu_s)] = r^a_s - log(mu^a_s / w_s)
    const OccupancyMeasure mu = OccupancyMeasure::from_flat(x, n, m, setting_);
    const Vector w = mu.state_marginal();
    for (Index a = 0; a < m; ++a)
        for (Index s = 0; s < n; ++s) g(a * n + s) = mdp_.rewards(s, a) - std::log(mu.mu(s, a) / w(s));
    return g;
}

Vector ConvexProgramSpec::constraint_values(const Vector& x) const {
    if (side_ == ProgramSide::Dual) return Vector::Zero(0);
    const Index n = mdp_.num_states();
    const Scalar rho = is_average(setting_) ? x(n) : 0.0;
    Matrix z = action_values(mdp_, x.head(n), transition_scale(setting_, mdp_));
    z.array() -= rho;
    Vector g(n);
    for (Index s = 0; s < n; ++s) g(s) = log_sum_exp(z.row(s)) - x(s);
    return g;
}

Matrix ConvexProgramSpec::constraint_jacobian(const Vector& x) const {
    if (side_ == ProgramSide::Dual) return Matrix::Zero(0, x.size());
    const Index n = mdp_.num_states();
    const Index m = mdp_.num_actions();
    const Scalar scale = transition_scale(setting_, mdp_);
    const Scalar rho = is_average(setting_) ? x(n) : 0.0;
    Matrix z = action_values(mdp_, x.head(n), scale);
    z.array() -= rho;

    Matrix jac = Matrix::Zero(n, x.size());
    for (Index s = 0; s < n; ++s) {
        const Vector pi = softmax(z.row(s).transpose());
        for (Index a = 0; a < m; ++a)
            jac.row(s).head(n) += scale * pi(a) * mdp_.transitions[static_cast<std::size_t>(a)].row(s);
        jac(s, s) -= 1.0;
        if (is_average(setting_)) jac(s, n) = -1.0;
    }
    return jac;
}

void require_setting_matches(Setting setting, const TabularMdp& mdp) {
    if (is_average(setting) != mdp.undiscounted())
        throw Error(ErrorCode::SettingMismatch, std::string(to_string(setting)) + " does not match gamma = " +
                                                    std::to_string(mdp.discount));
}

ProgramSpec build_primal(Setting setting, const TabularMdp& mdp) {
    require_setting_matches(setting, mdp);
    if (is_regularized(setting)) return ConvexProgramSpec(ProgramSide::Primal, setting, mdp);
    return standard_primal(setting, mdp);
}

ProgramSpec build_dual(Setting setting, const TabularMdp& mdp) {
    require_setting_matches(setting, mdp);
    if (is_regularized(setting)) return ConvexProgramSpec(ProgramSide::Dual, setting, mdp);
    return standard_dual(setting, mdp);
}

OccupancyMeasure OccupancyMeasure::from_flat(const Vector& x, Index num_states, Index num_actions, Setting setting) {
    if (x.size() != num_states * num_actions) throw Error(ErrorCode::ShapeMismatch, "occupancy vector has wrong size");
    return OccupancyMeasure{Eigen::Map<const Matrix>(x.data(), num_states, num_actions), setting};
}

OccupancyMeasure occupancy_from_policy(const TabularMdp& mdp, const Policy& pi, Setting setting) {
    require_valid_policy(pi, mdp.num_states(), mdp.num_actions());
    const InducedChain chain = induce_chain(mdp, pi);
    const Index n = mdp.num_states();
    Vector w;
    if (is_average(setting)) {
        w = stationary_distribution(chain.p_pi);
    } else {
        Eigen::FullPivLU<Matrix> lu(Matrix::Identity(n, n) - mdp.discount * chain.p_pi.transpose());
        if (!lu.isInvertible()) throw Error(ErrorCode::SingularSystem, "I - gamma P^pi^T is singular");
        w = lu.solve(mdp.weight_e);
    }
    return OccupancyMeasure{w.asDiagonal() * pi.probs, setting};
}

PolicyFromOccupancy policy_from_occupancy(const OccupancyMeasure& mu) {
    const Index n = mu.mu.rows();
    const Index m = mu.mu.cols();
    PolicyFromOccupancy out;
    out.marginal = mu.state_marginal();
    out.policy.probs.resize(n, m);
    for (Index s = 0; s < n; ++s) {
        if (out.marginal(s) <= 1e-12) {
            out.policy.probs.row(s).setConstant(1.0 / static_cast<Scalar>(m));
            out.flagged_states.push_back(s);
        } else {
            out.policy.probs.row(s) = mu.mu.row(s).cwiseMax(0.0) / mu.mu.row(s).cwiseMax(0.0).sum();
        }
    }
    return out;
}

Scalar primal_objective(Setting setting, const TabularMdp& mdp, const Vector& v, Scalar rho) {
    return is_average(setting) ? rho : mdp.weight_e.dot(v);
}

Scalar dual_objective(Setting setting, const TabularMdp& mdp, const OccupancyMeasure& mu) {
    Scalar value = mdp.rewards.cwiseProduct(mu.mu).sum();
    if (is_regularized(setting))
        for (Index s = 0; s < mu.mu.rows(); ++s) value -= entropy_unchecked(mu.mu.row(s).transpose());
    return value;
}

Scalar dual_constraint_residual(Setting setting, const TabularMdp& mdp, const Matrix& mu) {
    const Index n = mdp.num_states();
    const Scalar scale = transition_scale(setting, mdp);
    Vector balance = mu.rowwise().sum();
    for (Index a = 0; a < mdp.num_actions(); ++a)
        balance.noalias() -= scale * mdp.transitions[static_cast<std::size_t>(a)].transpose() * mu.col(a);
    if (is_average(setting)) return std::max(sup_norm(balance), std::abs(1.0 - mu.sum()));
    return sup_norm(balance - mdp.weight_e.head(n));
}

KktReport kkt_residuals(Setting setting, const TabularMdp& mdp, const Vector& v, std::optional<Scalar> rho,
                        const OccupancyMeasure& mu, Scalar tolerance) {
    const Index n = mdp.num_states();
    if (v.size() != n || mu.mu.rows() != n || mu.mu.cols() != mdp.num_actions())
        throw Error(ErrorCode::ShapeMismatch, "kkt_residuals inputs do not match the MDP");
    const Scalar gain = rho.value_or(0.0);

    // slack(s, a) = r^a_s + scale (P^a v)_s - v_s - rho
    Matrix slack = action_values(mdp, v, transition_scale(setting, mdp));
    slack.colwise() -= v;
    slack.array() -= gain;

    KktReport report;
    report.tolerance = tolerance;
    report.dual_feasibility = std::max(0.0, -mu.mu.minCoeff());
    report.stationarity = dual_constraint_residual(setting, mdp, mu.mu);
    bool interior_ok = true;

    if (is_regularized(setting)) {
        const Vector w = mu.state_marginal();
        Scalar worst_gibbs = 0;
        Scalar worst_log_z = -kInf;
        Scalar worst_tight = 0;
        for (Index s = 0; s < n; ++s) {
            const Vector q = slack.row(s).transpose();
            const Scalar log_z = log_sum_exp(q);
            const Vector target = w(s) * softmax(q);
            worst_gibbs = std::max(worst_gibbs, sup_norm(mu.mu.row(s).transpose() - target));
            worst_log_z = std::max(worst_log_z, log_z);
            worst_tight = std::max(worst_tight, std::abs(w(s) * log_z));
        }
        report.primal_feasibility = std::max(0.0, worst_log_z);
        report.complementary_slackness = worst_gibbs;
        report.tightness = worst_tight;
        interior_ok = mu.mu.minCoeff() > 0.0;
    } else {
        report.primal_feasibility = std::max(0.0, slack.maxCoeff());
        report.complementary_slackness = mu.mu.cwiseProduct(slack).cwiseAbs().maxCoeff();
    }

    report.pass = interior_ok && report.primal_feasibility <= tolerance && report.dual_feasibility <= tolerance &&
                  report.stationarity <= tolerance && report.complementary_slackness <= tolerance &&
                  report.tightness <= tolerance;
    return report;
}

} // namespace mdpopt

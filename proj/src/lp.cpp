#include "mdpopt/lp.hpp"

#include "mdpopt/numerics.hpp"

#include <cmath>

namespace mdpopt {

std::string_view to_string(LpStatus s) {
    switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
    case LpStatus::Stalled: return "stalled";
    }
    return "?";
}

namespace {

constexpr Scalar kPivotTol = 1e-9;
constexpr Scalar kCostTol = 1e-9;
constexpr Scalar kDegenerateStep = 1e-12;
constexpr Index kBlandAfter = 50;

/// min c^T x, A x = b, x >= 0, with b >= 0.
struct StandardForm {
    Matrix a;
    Vector b;
    Vector c;
    std::vector<Index> pos_col; // per original variable
    std::vector<Index> neg_col; // -1 when the variable is nonnegative
    std::vector<Index> slack_basis_row_col; // per row: slack usable as initial basis, or -1
};

StandardForm to_standard_form(const LinearProgramSpec& spec) {
    const Index nv = spec.num_variables();
    const Index m_ub = spec.a_ub.rows();
    const Index m_eq = spec.a_eq.rows();
    const Index m = m_ub + m_eq;

    StandardForm sf;
    Index cols = 0;
    for (Index j = 0; j < nv; ++j) {
        sf.pos_col.push_back(cols++);
        sf.neg_col.push_back(spec.lower(j) == 0.0 ? -1 : cols++);
    }
    const Index first_slack = cols;
    cols += m_ub;

    sf.a = Matrix::Zero(m, cols);
    sf.b = Vector::Zero(m);
    sf.c = Vector::Zero(cols);
    const Scalar sign = spec.sense == Sense::Minimize ? 1.0 : -1.0;
    for (Index j = 0; j < nv; ++j) {
        sf.c(sf.pos_col[j]) = sign * spec.c(j);
        if (sf.neg_col[j] >= 0) sf.c(sf.neg_col[j]) = -sign * spec.c(j);
    }
    auto place = [&](Index row, const auto& coeffs) {
        for (Index j = 0; j < nv; ++j) {
            sf.a(row, sf.pos_col[j]) = coeffs(j);
            if (sf.neg_col[j] >= 0) sf.a(row, sf.neg_col[j]) = -coeffs(j);
        }
    };
    for (Index i = 0; i < m_ub; ++i) {
        place(i, spec.a_ub.row(i));
        sf.a(i, first_slack + i) = 1.0;
        sf.b(i) = spec.b_ub(i);
    }
    for (Index i = 0; i < m_eq; ++i) {
        place(m_ub + i, spec.a_eq.row(i));
        sf.b(m_ub + i) = spec.b_eq(i);
    }
    sf.slack_basis_row_col.assign(static_cast<std::size_t>(m), -1);
    for (Index i = 0; i < m; ++i) {
        if (sf.b(i) < 0.0) {
            sf.a.row(i) *= -1.0;
            sf.b(i) *= -1.0;
        } else if (i < m_ub) {
            sf.slack_basis_row_col[static_cast<std::size_t>(i)] = first_slack + i;
        }
    }
    return sf;
}

enum class Outcome { Optimal, Unbounded, Stalled };

/// Dense tableau: rows 0..m-1 are constraints, row m holds reduced costs;
/// the last column is the right-hand side (row m stores -objective).
class Tableau {
public:
    Tableau(Matrix t, std::vector<Index> basis) : t_(std::move(t)), basis_(std::move(basis)) {}

    Index rows() const { return t_.rows() - 1; }
    Index cols() const { return t_.cols() - 1; }
    Matrix& data() { return t_; }
    std::vector<Index>& basis() { return basis_; }

    void pivot(Index r, Index c) {
        t_.row(r) /= t_(r, c);
        for (Index i = 0; i < t_.rows(); ++i) {
            if (i == r) continue;
            const Scalar f = t_(i, c);
            if (f != 0.0) t_.row(i) -= f * t_.row(r);
        }
        t_(r, c) = 1.0;
        basis_[static_cast<std::size_t>(r)] = c;
    }

    Outcome run(Index allowed_cols, Index pivot_limit, Index& pivots) {
        Index degenerate_run = 0;
        const Index m = rows();
        const Index rhs = cols();
        while (true) {
            const bool bland = degenerate_run >= kBlandAfter;
            Index enter = -1;
            Scalar best = -kCostTol;
            for (Index j = 0; j < allowed_cols; ++j) {
                const Scalar d = t_(m, j);
                if (d < -kCostTol && (bland ? enter < 0 : d < best)) {
                    enter = j;
                    best = d;
                    if (bland) break;
                }
            }
            if (enter < 0) return Outcome::Optimal;

            Index leave = -1;
            Scalar best_ratio = kInf;
            for (Index i = 0; i < m; ++i) {
                const Scalar a = t_(i, enter);
                if (a <= kPivotTol) continue;
                const Scalar ratio = t_(i, rhs) / a;
                const bool tie = leave >= 0 && std::abs(ratio - best_ratio) <= 1e-12 * (1.0 + std::abs(best_ratio));
                if ((!tie && ratio < best_ratio) ||
                    (tie && basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)])) {
                    leave = i;
                    best_ratio = std::min(ratio, best_ratio);
                }
            }
            if (leave < 0) return Outcome::Unbounded;
            if (pivots >= pivot_limit) return Outcome::Stalled;

            degenerate_run = best_ratio <= kDegenerateStep ? degenerate_run + 1 : 0;
            pivot(leave, enter);
            ++pivots;
        }
    }

    void remove_row(Index r) {
        const Index n = t_.rows();
        Matrix next(n - 1, t_.cols());
        next << t_.topRows(r), t_.bottomRows(n - r - 1);
        t_.swap(next);
        basis_.erase(basis_.begin() + r);
    }

private:
    Matrix t_;
    std::vector<Index> basis_;
};

} // namespace

LpSolution solve_lp(const LinearProgramSpec& spec) {
    spec.check();
    const StandardForm sf = to_standard_form(spec);
    const Index m = sf.a.rows();
    const Index n = sf.a.cols();

    std::vector<Index> artificial_rows;
    for (Index i = 0; i < m; ++i)
        if (sf.slack_basis_row_col[static_cast<std::size_t>(i)] < 0) artificial_rows.push_back(i);
    const Index num_art = static_cast<Index>(artificial_rows.size());

    Matrix t = Matrix::Zero(m + 1, n + num_art + 1);
    t.topLeftCorner(m, n) = sf.a;
    t.col(n + num_art).head(m) = sf.b;
    std::vector<Index> basis(static_cast<std::size_t>(m));
    for (Index i = 0; i < m; ++i) basis[static_cast<std::size_t>(i)] = sf.slack_basis_row_col[static_cast<std::size_t>(i)];
    for (Index k = 0; k < num_art; ++k) {
        const Index row = artificial_rows[static_cast<std::size_t>(k)];
        t(row, n + k) = 1.0;
        basis[static_cast<std::size_t>(row)] = n + k;
        t.row(m) -= t.row(row);
        t(m, n + k) = 0.0;
    }

    const Index dims = m + n;
    const Index pivot_limit = 10 * dims * dims;
    LpSolution out;
    Tableau tab(std::move(t), std::move(basis));

    // Phase 1: minimize the sum of artificials.
    if (num_art > 0) {
        const Outcome o = tab.run(n + num_art, pivot_limit, out.pivot_count);
        if (o == Outcome::Stalled) {
            out.status = LpStatus::Stalled;
            out.basis = tab.basis();
            return out;
        }
        const Scalar infeasibility = -tab.data()(tab.rows(), tab.cols());
        if (infeasibility > 1e-9 * (1.0 + sup_norm(sf.b))) {
            out.status = LpStatus::Infeasible;
            out.basis = tab.basis();
            return out;
        }
        // Pivot degenerate artificials out; rows with no structural entry are redundant.
        for (Index r = tab.rows() - 1; r >= 0; --r) {
            if (tab.basis()[static_cast<std::size_t>(r)] < n) continue;
            Index col = -1;
            for (Index j = 0; j < n; ++j)
                if (std::abs(tab.data()(r, j)) > kPivotTol && (col < 0 || std::abs(tab.data()(r, j)) > std::abs(tab.data()(r, col))))
                    col = j;
            if (col >= 0) {
                tab.pivot(r, col);
                ++out.pivot_count;
            } else {
                tab.remove_row(r);
            }
        }
    }

    // Phase 2 on the structural + slack columns.
    Matrix& data = tab.data();
    const Index mr = tab.rows();
    const Index rhs = tab.cols();
    data.row(mr).setZero();
    data.row(mr).head(n) = sf.c.transpose();
    for (Index i = 0; i < mr; ++i) {
        const Scalar cb = sf.c(tab.basis()[static_cast<std::size_t>(i)]);
        if (cb != 0.0) data.row(mr) -= cb * data.row(i);
    }
    const Outcome o = tab.run(n, pivot_limit, out.pivot_count);
    out.basis = tab.basis();
    if (o == Outcome::Unbounded) {
        out.status = LpStatus::Unbounded;
        return out;
    }
    if (o == Outcome::Stalled) {
        out.status = LpStatus::Stalled;
        return out;
    }

    // Recover the basic solution from the original data for accuracy.
    Vector xs = Vector::Zero(n);
    for (Index i = 0; i < mr; ++i) xs(tab.basis()[static_cast<std::size_t>(i)]) = data(i, rhs);

    // Rows that survived phase 1: re-solve B x_B = b on an independent row subset.
    {
        // Greedy choice of linearly independent original rows.
        std::vector<Index> rows_kept;
        Matrix picked(0, n);
        for (Index i = 0; i < m && static_cast<Index>(rows_kept.size()) < mr; ++i) {
            Matrix trial(picked.rows() + 1, n);
            trial << picked, sf.a.row(i);
            Eigen::FullPivLU<Matrix> lu(trial);
            lu.setThreshold(1e-10);
            if (lu.rank() == trial.rows()) {
                picked.swap(trial);
                rows_kept.push_back(i);
            }
        }
        if (static_cast<Index>(rows_kept.size()) == mr) {
            Matrix b_mat(mr, mr);
            Vector b_rhs(mr);
            for (Index k = 0; k < mr; ++k) {
                for (Index i = 0; i < mr; ++i)
                    b_mat(k, i) = sf.a(rows_kept[static_cast<std::size_t>(k)], tab.basis()[static_cast<std::size_t>(i)]);
                b_rhs(k) = sf.b(rows_kept[static_cast<std::size_t>(k)]);
            }
            Eigen::FullPivLU<Matrix> blu(b_mat);
            if (blu.isInvertible()) {
                const Vector xb = blu.solve(b_rhs);
                if ((xb.array() >= -1e-9).all()) {
                    for (Index i = 0; i < mr; ++i) xs(tab.basis()[static_cast<std::size_t>(i)]) = std::max(0.0, xb(i));
                    const Vector y = blu.transpose().solve([&] {
                        Vector cb(mr);
                        for (Index i = 0; i < mr; ++i) cb(i) = sf.c(tab.basis()[static_cast<std::size_t>(i)]);
                        return cb;
                    }());
                    Vector d = sf.c;
                    for (Index k = 0; k < mr; ++k) d -= y(k) * sf.a.row(rows_kept[static_cast<std::size_t>(k)]).transpose();
                    out.reduced_costs = d;
                }
            }
        }
    }
    if (out.reduced_costs.size() == 0) out.reduced_costs = data.row(mr).head(n).transpose();

    out.x = Vector::Zero(spec.num_variables());
    for (Index j = 0; j < spec.num_variables(); ++j) {
        out.x(j) = xs(sf.pos_col[static_cast<std::size_t>(j)]);
        if (sf.neg_col[static_cast<std::size_t>(j)] >= 0) out.x(j) -= xs(sf.neg_col[static_cast<std::size_t>(j)]);
    }
    out.objective = spec.c.dot(out.x);
    out.status = LpStatus::Optimal;
    out.standard_a = sf.a;
    out.standard_b = sf.b;
    out.standard_x = xs;
    return out;
}

} // namespace mdpopt

#pragma once

// Shared instances and independent reference computations for the tests.
// The reference code below deliberately avoids the library and Eigen: plain
// vectors and Gaussian elimination, so agreement is a real cross-check.

#include "mdpopt/generator.hpp"
#include "mdpopt/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace testing {

using mdpopt::Index;
using mdpopt::Matrix;
using mdpopt::Scalar;
using mdpopt::Setting;
using mdpopt::TabularMdp;
using mdpopt::Vector;

/// One state, two actions with rewards (0, 1).
inline TabularMdp one_state(Scalar gamma) {
    return TabularMdp::from_arrays({Matrix::Ones(1, 1), Matrix::Ones(1, 1)}, (Matrix(2, 1) << 0, 1).finished(), gamma);
}

/// Two states; stay = identity, go = swap; r^stay = (0, 2), r^go = (1, 0).
inline TabularMdp m3(Scalar gamma = 0.5) {
    Matrix stay = Matrix::Identity(2, 2);
    Matrix go(2, 2);
    go << 0, 1, 1, 0;
    Matrix r(2, 2);
    r << 0, 2, 1, 0;
    return TabularMdp::from_arrays({stay, go}, r, gamma);
}

/// Two states, both actions move uniformly; r^a1 = (1, 0), r^a2 = (0, 2).
inline TabularMdp uniform_two_state(Scalar gamma = 1.0) {
    Matrix p = Matrix::Constant(2, 2, 0.5);
    Matrix r(2, 2);
    r << 1, 0, 0, 2;
    return TabularMdp::from_arrays({p, p}, r, gamma);
}

/// Suite instance i in [0, 100): sizes cycle through |S| in 2..5 and |A| in
/// 2..4; i % 12 == 0 gives the 2 x 2 instances.
inline mdpopt::GeneratorParams suite_params(int i, Setting setting) {
    mdpopt::GeneratorParams p;
    p.seed = static_cast<std::uint64_t>(i) + 1;
    p.num_states = 2 + i % 4;
    p.num_actions = 2 + (i / 4) % 3;
    p.discount = mdpopt::is_average(setting) ? 1.0 : 0.9;
    return p;
}

inline TabularMdp suite_instance(int i, Setting setting) {
    return mdpopt::generate_random_mdp(suite_params(i, setting));
}

inline constexpr Setting kAllSettings[] = {Setting::DiscStd, Setting::DiscReg, Setting::AvgStd, Setting::AvgReg};

namespace ref {

using Dense = std::vector<std::vector<double>>;

/// Gaussian elimination with partial pivoting.
inline std::vector<double> solve(Dense a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a[i][k]) > std::abs(a[piv][k])) piv = i;
        std::swap(a[k], a[piv]);
        std::swap(b[k], b[piv]);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = a[i][k] / a[k][k];
            for (std::size_t j = k; j < n; ++j) a[i][j] -= f * a[k][j];
            b[i] -= f * b[k];
        }
    }
    std::vector<double> x(n);
    for (std::size_t k = n; k-- > 0;) {
        double s = b[k];
        for (std::size_t j = k + 1; j < n; ++j) s -= a[k][j] * x[j];
        x[k] = s / a[k][k];
    }
    return x;
}

inline double p(const TabularMdp& m, Index a, Index s, Index t) { return m.transitions[static_cast<std::size_t>(a)](s, t); }

/// e^T v of a deterministic policy, from (I - gamma P) v = r.
inline double discounted_value(const TabularMdp& m, const std::vector<Index>& act) {
    const Index n = m.num_states();
    Dense a(n, std::vector<double>(n));
    std::vector<double> b(n);
    for (Index s = 0; s < n; ++s) {
        for (Index t = 0; t < n; ++t) a[s][t] = (s == t) - m.discount * p(m, act[s], s, t);
        b[s] = m.rewards(s, act[s]);
    }
    const auto v = solve(a, b);
    double total = 0;
    for (Index s = 0; s < n; ++s) total += m.weight_e(s) * v[s];
    return total;
}

/// Gain of a deterministic policy: stationary w from w^T P = w^T, sum w = 1.
inline double average_gain(const TabularMdp& m, const std::vector<Index>& act) {
    const Index n = m.num_states();
    Dense a(n, std::vector<double>(n));
    std::vector<double> b(n, 0.0);
    for (Index s = 0; s < n; ++s)
        for (Index t = 0; t < n; ++t) a[t][s] = (s == t) - p(m, act[s], s, t);
    for (Index s = 0; s < n; ++s) a[n - 1][s] = 1.0;
    b[n - 1] = 1.0;
    const auto w = solve(a, b);
    double rho = 0;
    for (Index s = 0; s < n; ++s) rho += w[s] * m.rewards(s, act[s]);
    return rho;
}

/// Best objective over all deterministic policies.
inline double enumerate_optimum(const TabularMdp& m, bool average) {
    const Index n = m.num_states();
    const Index k = m.num_actions();
    std::vector<Index> act(n, 0);
    double best = -1e300;
    for (;;) {
        best = std::max(best, average ? average_gain(m, act) : discounted_value(m, act));
        Index s = 0;
        while (s < n && ++act[s] == k) act[s++] = 0;
        if (s == n) break;
    }
    return best;
}

inline double lse(const std::vector<double>& x) {
    const double mx = *std::max_element(x.begin(), x.end());
    double s = 0;
    for (double xi : x) s += std::exp(xi - mx);
    return mx + std::log(s);
}

inline std::vector<double> soft_backup(const TabularMdp& m, const std::vector<double>& v, double scale) {
    const Index n = m.num_states();
    std::vector<double> out(n);
    for (Index s = 0; s < n; ++s) {
        std::vector<double> q(m.num_actions());
        for (Index a = 0; a < m.num_actions(); ++a) {
            q[a] = m.rewards(s, a);
            for (Index t = 0; t < n; ++t) q[a] += scale * p(m, a, s, t) * v[t];
        }
        out[s] = lse(q);
    }
    return out;
}

/// e^T v for the fixed point of v = lse(r + gamma P v), plain iteration.
inline double soft_discounted_optimum(const TabularMdp& m) {
    std::vector<double> v(m.num_states(), 0.0);
    for (int it = 0; it < 2000; ++it) v = soft_backup(m, v, m.discount);
    double total = 0;
    for (Index s = 0; s < m.num_states(); ++s) total += m.weight_e(s) * v[s];
    return total;
}

/// rho of v + rho = lse(r + P v) by undamped relative iteration; valid for
/// strictly positive transition rows.
inline double soft_average_optimum(const TabularMdp& m) {
    std::vector<double> v(m.num_states(), 0.0);
    double rho = 0;
    for (int it = 0; it < 5000; ++it) {
        auto t = soft_backup(m, v, 1.0);
        rho = t[0];
        for (auto& x : t) x -= rho;
        v = t;
    }
    return rho;
}

inline double optimum(const TabularMdp& m, Setting setting) {
    switch (setting) {
    case Setting::DiscStd: return enumerate_optimum(m, false);
    case Setting::AvgStd: return enumerate_optimum(m, true);
    case Setting::DiscReg: return soft_discounted_optimum(m);
    case Setting::AvgReg: return soft_average_optimum(m);
    }
    return 0;
}

} // namespace ref

} // namespace testing

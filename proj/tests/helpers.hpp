#pragma once

// Shared test oracles. Everything here is intentionally independent of the
// library implementation paths it checks: brute-force counting, exhaustive
// enumeration and dense linear algebra stand in for the fast routes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ktc/kernel_matrix.hpp"
#include "ktc/rng.hpp"
#include "ktc/vecset.hpp"

namespace oracle {

// ---- string kernel ------------------------------------------------------

inline std::vector<uint32_t> to_codepoints_ascii(const std::string& s) {
    return std::vector<uint32_t>(s.begin(), s.end());
}

// Brute-force histogram intersection: enumerate every distinct n-gram by
// scanning window positions; count occurrences in both strings by direct
// position comparison; sum the minima. O(L^3), exact integers.
inline int64_t hisk_brute(const std::vector<uint32_t>& x, const std::vector<uint32_t>& y,
                          const std::vector<int>& n_range) {
    const auto window_eq = [](const std::vector<uint32_t>& a, size_t i,
                              const std::vector<uint32_t>& b, size_t j, int n) {
        for (int t = 0; t < n; ++t)
            if (a[i + t] != b[j + t]) return false;
        return true;
    };
    int64_t sum = 0;
    for (int n : n_range) {
        if (x.size() < static_cast<size_t>(n)) continue;
        const size_t wx = x.size() - n + 1;
        for (size_t i = 0; i < wx; ++i) {
            bool seen_before = false;
            for (size_t p = 0; p < i; ++p)
                if (window_eq(x, p, x, i, n)) {
                    seen_before = true;
                    break;
                }
            if (seen_before) continue;
            int64_t cx = 0;
            for (size_t p = 0; p < wx; ++p)
                if (window_eq(x, p, x, i, n)) ++cx;
            int64_t cy = 0;
            if (y.size() >= static_cast<size_t>(n))
                for (size_t p = 0; p + n <= y.size(); ++p)
                    if (window_eq(y, p, x, i, n)) ++cy;
            sum += std::min(cx, cy);
        }
    }
    return sum;
}

// ---- PQ kernel ------------------------------------------------------------

// Definitional O(k^2) double loop over ordered pairs.
inline int64_t pq_naive(const std::vector<int32_t>& h, const std::vector<int32_t>& g) {
    const auto sign = [](int64_t v) { return v > 0 ? 1 : (v < 0 ? -1 : 0); };
    int64_t sum = 0;
    for (size_t i = 0; i < h.size(); ++i)
        for (size_t j = 0; j < h.size(); ++j) {
            if (i == j) continue;
            sum += static_cast<int64_t>(sign(static_cast<int64_t>(h[i]) - h[j]) *
                                        sign(static_cast<int64_t>(g[i]) - g[j]));
        }
    return sum;
}

// ---- spectra ------------------------------------------------------------

inline double smallest_eigenvalue(const ktc::KernelMatrix& k) {
    const size_t n = k.rows();
    Eigen::MatrixXd m(n, n);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) m(static_cast<long>(i), static_cast<long>(j)) = k.at(i, j);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
}

inline double trace_of(const ktc::KernelMatrix& k) {
    double t = 0.0;
    for (size_t i = 0; i < k.rows(); ++i) t += k.at(i, i);
    return t;
}

// PSD within the spec tolerance: lambda_min >= -1e-8 * trace / n.
inline bool psd_within_tolerance(const ktc::KernelMatrix& k) {
    return smallest_eigenvalue(k) >=
           -1e-8 * trace_of(k) / static_cast<double>(k.rows());
}

// ---- SVM dual ------------------------------------------------------------

// Exhaustive active-set QP oracle for the C-SVM dual with n <= ~8 samples:
// every {at-0, at-C, free} pattern is enumerated; free variables solve the
// equality-constrained KKT system; the best feasible objective is optimal.
inline double svm_dual_optimum(const ktc::KernelMatrix& k, const std::vector<int>& y,
                               double C) {
    const size_t n = k.rows();
    const auto dual_objective = [&](const std::vector<double>& a) {
        double obj = 0.0;
        for (size_t i = 0; i < n; ++i) {
            obj += a[i];
            for (size_t j = 0; j < n; ++j)
                obj -= 0.5 * a[i] * a[j] * y[i] * y[j] * k.at(i, j);
        }
        return obj;
    };

    double best = -std::numeric_limits<double>::infinity();
    std::vector<int> state(n); // 0 = at 0, 1 = at C, 2 = free
    size_t patterns = 1;
    for (size_t i = 0; i < n; ++i) patterns *= 3;

    for (size_t code = 0; code < patterns; ++code) {
        size_t rem = code;
        for (size_t i = 0; i < n; ++i) {
            state[i] = static_cast<int>(rem % 3);
            rem /= 3;
        }
        std::vector<double> alpha(n, 0.0);
        std::vector<size_t> free_idx;
        double fixed_ya = 0.0;
        for (size_t i = 0; i < n; ++i) {
            if (state[i] == 1) {
                alpha[i] = C;
                fixed_ya += y[i] * C;
            } else if (state[i] == 2) {
                free_idx.push_back(i);
            }
        }
        const size_t f = free_idx.size();
        if (f == 0) {
            if (std::abs(fixed_ya) > 1e-9) continue;
            best = std::max(best, dual_objective(alpha));
            continue;
        }
        // KKT system: [Q_FF y_F; y_F' 0] [alpha_F; nu] = [e - Q_FB alpha_B; -fixed_ya]
        Eigen::MatrixXd A(f + 1, f + 1);
        Eigen::VectorXd b(f + 1);
        A.setZero();
        for (size_t r = 0; r < f; ++r) {
            const size_t i = free_idx[r];
            for (size_t c = 0; c < f; ++c) {
                const size_t j = free_idx[c];
                A(static_cast<long>(r), static_cast<long>(c)) = y[i] * y[j] * k.at(i, j);
            }
            A(static_cast<long>(r), static_cast<long>(f)) = y[i];
            A(static_cast<long>(f), static_cast<long>(r)) = y[i];
            double rhs = 1.0;
            for (size_t j = 0; j < n; ++j)
                if (state[j] == 1) rhs -= y[i] * y[j] * k.at(i, j) * C;
            b(static_cast<long>(r)) = rhs;
        }
        b(static_cast<long>(f)) = -fixed_ya;

        const Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
        if (!lu.isInvertible()) continue;
        const Eigen::VectorXd sol = lu.solve(b);
        bool feasible = true;
        for (size_t r = 0; r < f; ++r) {
            const double v = sol(static_cast<long>(r));
            if (v < -1e-9 || v > C + 1e-9) {
                feasible = false;
                break;
            }
            alpha[free_idx[r]] = std::clamp(v, 0.0, C);
        }
        if (!feasible) continue;
        best = std::max(best, dual_objective(alpha));
    }
    return best;
}

inline double svm_dual_objective(const ktc::KernelMatrix& k, const std::vector<int>& y,
                                 const std::vector<double>& signed_alphas) {
    // signed_alphas[i] = alpha_i * y_i
    const size_t n = k.rows();
    double obj = 0.0;
    for (size_t i = 0; i < n; ++i) {
        obj += signed_alphas[i] * y[i]; // alpha_i
        for (size_t j = 0; j < n; ++j)
            obj -= 0.5 * signed_alphas[i] * signed_alphas[j] * k.at(i, j);
    }
    return obj;
}

// ---- statistics ------------------------------------------------------------

inline std::vector<double> average_ranks(const std::vector<double>& v) {
    const size_t n = v.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && v[order[j]] == v[order[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j - 1)) / 2.0 + 1.0;
        for (size_t t = i; t < j; ++t) ranks[order[t]] = avg;
        i = j;
    }
    return ranks;
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    const std::vector<double> ra = average_ranks(a), rb = average_ranks(b);
    const size_t n = a.size();
    double ma = 0.0, mb = 0.0;
    for (size_t i = 0; i < n; ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (size_t i = 0; i < n; ++i) {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    return cov / std::sqrt(va * vb);
}

// ---- synthetic data ------------------------------------------------------------

// Zipf-weighted Gaussian mixture: component r in 1..components holds
// floor(head/r) points around a standard-normal center, with enough spread
// (sigma = 2) that components overlap and density, not partition geometry,
// drives cluster occupancy.
inline ktc::VecSet zipf_mixture(int components, int head, int dim, uint64_t seed) {
    ktc::Rng rng(seed);
    ktc::VecSet centers;
    centers.dim = dim;
    for (int c = 0; c < components; ++c)
        for (int d = 0; d < dim; ++d) centers.data.push_back(rng.gaussian());
    ktc::VecSet out;
    out.dim = dim;
    constexpr double kComponentStd = 2.0;
    for (int r = 1; r <= components; ++r) {
        const int count = head / r;
        for (int i = 0; i < count; ++i)
            for (int d = 0; d < dim; ++d)
                out.data.push_back(centers.row(r - 1)[d] + kComponentStd * rng.gaussian());
    }
    return out;
}

} // namespace oracle

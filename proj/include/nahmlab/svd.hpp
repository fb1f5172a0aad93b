#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "nahmlab/matrix.hpp"

namespace nahmlab {

/// Default relative tolerance for numerical rank decisions.
inline constexpr double kRankTol = 1e-8;

namespace detail {

/// Minimal rectangular complex matrix, column-major free functions only.
/// Public API stays on the square Matrix type; rectangular storage exists
/// for the stacked least-squares operators.
struct RectMat {
    int rows = 0;
    int cols = 0;
    std::vector<Complex> a; // row-major

    RectMat() = default;
    RectMat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

    Complex& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
    Complex operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }
};

inline RectMat to_rect(const Matrix& m) {
    RectMat r(m.dim(), m.dim());
    r.a = m.entries();
    return r;
}

struct SvdResult {
    std::vector<double> sigma; // descending
    RectMat v;                 // cols x cols, right singular vectors in columns
    RectMat u;                 // rows x cols, left singular vectors in columns (thin)
};

/// One-sided Jacobi SVD.  Orthogonalizes the columns of the working copy by
/// plane rotations; right rotations are accumulated into V.  Robust and
/// deterministic for the small sizes used here.
inline SvdResult jacobi_svd(const RectMat& input) {
    const int m = input.rows, n = input.cols;
    RectMat w = input;
    RectMat v(n, n);
    for (int i = 0; i < n; ++i) v(i, i) = 1.0;

    const double eps = 2.220446049250313e-16;
    for (int sweep = 0; sweep < 64; ++sweep) {
        bool rotated = false;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double app = 0.0, aqq = 0.0;
                Complex apq = 0.0;
                for (int i = 0; i < m; ++i) {
                    app += std::norm(w(i, p));
                    aqq += std::norm(w(i, q));
                    apq += std::conj(w(i, p)) * w(i, q);
                }
                const double mag = std::abs(apq);
                if (mag <= 1e-300 || mag <= 16.0 * eps * std::sqrt(app * aqq)) continue;
                rotated = true;

                // Phase-align column q, then apply the real Jacobi rotation
                // diagonalizing [[app, |apq|], [|apq|, aqq]].
                const Complex phase = apq / mag;
                const double tau = (aqq - app) / (2.0 * mag);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double cs = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = cs * t;
                for (int i = 0; i < m; ++i) {
                    const Complex wq = w(i, q) * std::conj(phase);
                    const Complex wp = w(i, p);
                    w(i, p) = cs * wp - sn * wq;
                    w(i, q) = sn * wp + cs * wq;
                }
                for (int i = 0; i < n; ++i) {
                    const Complex vq = v(i, q) * std::conj(phase);
                    const Complex vp = v(i, p);
                    v(i, p) = cs * vp - sn * vq;
                    v(i, q) = sn * vp + cs * vq;
                }
            }
        }
        if (!rotated) break;
    }

    SvdResult res;
    res.sigma.resize(static_cast<size_t>(n));
    res.u = RectMat(m, n);
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int i = 0; i < m; ++i) s += std::norm(w(i, j));
        s = std::sqrt(s);
        res.sigma[static_cast<size_t>(j)] = s;
        if (s > 0.0)
            for (int i = 0; i < m; ++i) res.u(i, j) = w(i, j) / s;
    }

    // Sort singular values descending, permuting U and V along.
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int x, int y) { return res.sigma[static_cast<size_t>(x)] > res.sigma[static_cast<size_t>(y)]; });
    SvdResult sorted;
    sorted.sigma.resize(static_cast<size_t>(n));
    sorted.u = RectMat(m, n);
    sorted.v = RectMat(n, n);
    for (int j = 0; j < n; ++j) {
        const int src = order[static_cast<size_t>(j)];
        sorted.sigma[static_cast<size_t>(j)] = res.sigma[static_cast<size_t>(src)];
        for (int i = 0; i < m; ++i) sorted.u(i, j) = res.u(i, src);
        for (int i = 0; i < n; ++i) sorted.v(i, j) = v(i, src);
    }
    return sorted;
}

} // namespace detail

/// Singular values of a square matrix, descending.
inline std::vector<double> singular_values(const Matrix& m) {
    return detail::jacobi_svd(detail::to_rect(m)).sigma;
}

/// Count of singular values >= tol * sigma_max.  An optional absolute floor
/// lets callers working at a known ambient scale treat an (almost exactly)
/// vanishing matrix as rank zero instead of ranking its roundoff junk.
inline int numerical_rank(const Matrix& m, double tol = kRankTol, double floor = 0.0) {
    if (tol <= 0.0) throw std::invalid_argument("numerical_rank: tolerance must be positive");
    const auto s = singular_values(m);
    if (s.empty() || s.front() <= floor || s.front() == 0.0) return 0;
    int r = 0;
    for (double v : s)
        if (v >= tol * s.front() && v > floor) ++r;
    return r;
}

/// Dimension of the lambda-eigenspace of M decided by numerical rank of
/// M - lambda I.
inline int eigen_multiplicity(const Matrix& m, Complex lambda, double rank_tol = kRankTol,
                              double floor = 0.0) {
    if (rank_tol <= 0.0) throw std::invalid_argument("eigen_multiplicity: tolerance must be positive");
    Matrix shifted = m;
    for (int i = 0; i < m.dim(); ++i) shifted(i, i) -= lambda;
    return m.dim() - numerical_rank(shifted, rank_tol, floor);
}

/// Orthonormal basis of the numerical null space (columns), via the right
/// singular vectors with sigma < max(tol * sigma_max, floor).
inline std::vector<std::vector<Complex>> null_space(const Matrix& m, double tol = kRankTol,
                                                    double floor = 0.0) {
    const auto svd = detail::jacobi_svd(detail::to_rect(m));
    const int n = m.dim();
    const double smax = svd.sigma.empty() ? 0.0 : svd.sigma.front();
    const double cut = std::max(tol * std::max(smax, 1e-300), floor);
    std::vector<std::vector<Complex>> basis;
    for (int j = 0; j < n; ++j) {
        if (svd.sigma[static_cast<size_t>(j)] < cut || smax == 0.0) {
            std::vector<Complex> col(static_cast<size_t>(n));
            for (int i = 0; i < n; ++i) col[static_cast<size_t>(i)] = svd.v(i, j);
            basis.push_back(std::move(col));
        }
    }
    return basis;
}

namespace detail {

/// Minimum-norm least-squares solution of A x = b via the SVD
/// pseudo-inverse; rank decided at `tol` relative to sigma_max.
inline std::vector<Complex> lstsq_min_norm(const RectMat& a, const std::vector<Complex>& b,
                                           double tol, double* residual_norm = nullptr) {
    if (static_cast<int>(b.size()) != a.rows)
        throw std::invalid_argument("lstsq_min_norm: rhs size mismatch");
    const auto svd = jacobi_svd(a);
    const double smax = svd.sigma.empty() ? 0.0 : svd.sigma.front();
    std::vector<Complex> x(static_cast<size_t>(a.cols), 0.0);
    for (int j = 0; j < a.cols; ++j) {
        const double s = svd.sigma[static_cast<size_t>(j)];
        if (smax == 0.0 || s < tol * smax) continue;
        Complex proj = 0.0;
        for (int i = 0; i < a.rows; ++i) proj += std::conj(svd.u(i, j)) * b[static_cast<size_t>(i)];
        proj /= s;
        for (int i = 0; i < a.cols; ++i) x[static_cast<size_t>(i)] += proj * svd.v(i, j);
    }
    if (residual_norm) {
        double rn = 0.0;
        for (int i = 0; i < a.rows; ++i) {
            Complex ri = -b[static_cast<size_t>(i)];
            for (int j = 0; j < a.cols; ++j) ri += a(i, j) * x[static_cast<size_t>(j)];
            rn += std::norm(ri);
        }
        *residual_norm = std::sqrt(rn);
    }
    return x;
}

} // namespace detail

} // namespace nahmlab

#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "nahmlab/matrix.hpp"
#include "nahmlab/matrix_poly.hpp"
#include "nahmlab/poly.hpp"
#include "nahmlab/svd.hpp"

namespace nahmlab {

/// Default residual threshold deciding whether a stationarity witness is
/// exact, calibrated for unit max-norm fields.
inline constexpr double kFixTol = 1e-8;

/// Max norm of the three defects [T0,Ti] - [Tj,Tk] (cyclic) of a would-be
/// commuting quadruple.
inline double quadruple_residual(const Matrix& t0, const Matrix& t1, const Matrix& t2,
                                 const Matrix& t3) {
    t0.check_same_dim(t1);
    t0.check_same_dim(t2);
    t0.check_same_dim(t3);
    double r = 0.0;
    r = std::max(r, max_norm_diff(commutator(t0, t1), commutator(t2, t3)));
    r = std::max(r, max_norm_diff(commutator(t0, t2), commutator(t3, t1)));
    r = std::max(r, max_norm_diff(commutator(t0, t3), commutator(t1, t2)));
    return r;
}

namespace detail {

inline void require_degree2(const MatrixPoly& phi, const char* who) {
    if (phi.degree() != 2)
        throw std::invalid_argument(std::string(who) + ": degree-2 field required");
}

} // namespace detail

/// Max norm of the stationarity defects
///   [psi,phi0] - 1/2 [phi0,phi1],  [psi,phi1] - [phi0,phi2],
///   [psi,phi2] - 1/2 [phi1,phi2].
inline double fixed_residual_phi(const Matrix& psi, const MatrixPoly& phi) {
    detail::require_degree2(phi, "fixed_residual_phi");
    if (psi.dim() != phi.n) throw std::invalid_argument("fixed_residual_phi: dimension mismatch");
    const Matrix& p0 = phi.c[0];
    const Matrix& p1 = phi.c[1];
    const Matrix& p2 = phi.c[2];
    double r = 0.0;
    r = std::max(r, max_norm_diff(commutator(psi, p0), Complex(0.5) * commutator(p0, p1)));
    r = std::max(r, max_norm_diff(commutator(psi, p1), commutator(p0, p2)));
    r = std::max(r, max_norm_diff(commutator(psi, p2), Complex(0.5) * commutator(p1, p2)));
    return r;
}

struct FixedPointWitness {
    Matrix psi;
    double residual = 0.0;
    bool exact = false;
};

/// Solves the stationarity system for psi in the least-squares sense.  The
/// map psi -> ([psi,phi0], [psi,phi1], [psi,phi2]) is assembled as a
/// 3n^2 x n^2 operator and the minimum-norm minimizer is returned; the
/// solution kernel (everything commuting with all phi_k) is projected out,
/// which makes the witness deterministic.  The reported residual is the
/// defect max norm of the returned psi on the unscaled input.
inline FixedPointWitness solve_psi(const MatrixPoly& phi, double fix_tol = kFixTol) {
    detail::require_degree2(phi, "solve_psi");
    const int n = phi.n;
    const int nn = n * n;

    // Work on unit-normalized data for conditioning; psi scales linearly.
    const double s = std::max(phi.max_norm(), 1e-300);
    std::vector<Matrix> ph;
    for (const auto& m : phi.c) ph.push_back(m * Complex(1.0 / s));

    detail::RectMat op(3 * nn, nn);
    for (int b = 0; b < 3; ++b) {
        const Matrix& a = ph[static_cast<size_t>(b)];
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const int row = b * nn + i * n + j;
                // [psi, A]_{ij} = sum_q psi_{iq} A_{qj} - sum_p A_{ip} psi_{pj}
                for (int q = 0; q < n; ++q) op(row, i * n + q) += a(q, j);
                for (int p = 0; p < n; ++p) op(row, p * n + j) -= a(i, p);
            }
    }

    std::vector<Complex> rhs(static_cast<size_t>(3 * nn));
    const Matrix r0 = Complex(0.5) * commutator(ph[0], ph[1]);
    const Matrix r1 = commutator(ph[0], ph[2]);
    const Matrix r2 = Complex(0.5) * commutator(ph[1], ph[2]);
    const Matrix* rs[3] = {&r0, &r1, &r2};
    for (int b = 0; b < 3; ++b)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                rhs[static_cast<size_t>(b * nn + i * n + j)] = (*rs[b])(i, j);

    const auto x = detail::lstsq_min_norm(op, rhs, 1e-12);

    Matrix psi(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) psi(i, j) = x[static_cast<size_t>(i * n + j)] * s;

    FixedPointWitness w;
    w.psi = psi;
    w.residual = fixed_residual_phi(psi, phi);
    w.exact = w.residual < fix_tol;
    return w;
}

/// The commuting pair of a stationary field:
///   phi_minus = phi0 + z (phi1/2 - psi),   phi_plus = (phi1/2 + psi) + z phi2,
/// so that phi_minus + z phi_plus = phi coefficientwise.
inline std::pair<MatrixPoly, MatrixPoly> phi_pm(const MatrixPoly& phi, const Matrix& psi) {
    detail::require_degree2(phi, "phi_pm");
    if (psi.dim() != phi.n) throw std::invalid_argument("phi_pm: dimension mismatch");
    const Matrix half1 = Complex(0.5) * phi.c[1];
    MatrixPoly plus(phi.n, {half1 + psi, phi.c[2]});
    MatrixPoly minus(phi.n, {phi.c[0], half1 - psi});
    return {plus, minus};
}

/// A point of the lifted curve in affine coordinates (z, x, y) with the
/// invariant w = x z + y stored explicitly.
struct LiftedPoint {
    Complex z, x, y, w;

    static LiftedPoint make(Complex z, Complex x, Complex y) {
        return LiftedPoint{z, x, y, x * z + y};
    }
};

/// The affine translation action (x, y) -> (x + t, y - z t).  The stored w
/// is carried over unchanged: (x+t) z + (y - z t) = x z + y identically.
inline LiftedPoint c_action(const LiftedPoint& p, Complex t) {
    return LiftedPoint{p.z, p.x + t, p.y - p.z * t, p.w};
}

struct SupportPoint {
    LiftedPoint point;
    int mult = 1;
};

struct SupportResult {
    std::vector<SupportPoint> points;
    bool generalized_fallback = false; // defective eigenstructure handled
    double max_det_residual = 0.0;     // pencil determinant check, relative
};

namespace detail {

inline Matrix shift(const Matrix& m, Complex lambda) {
    Matrix r = m;
    for (int i = 0; i < m.dim(); ++i) r(i, i) -= lambda;
    return r;
}

inline Matrix restrict_to(const Matrix& b, const std::vector<std::vector<Complex>>& basis) {
    const int k = static_cast<int>(basis.size());
    const int n = b.dim();
    Matrix sub(k);
    for (int c = 0; c < k; ++c) {
        std::vector<Complex> bv(static_cast<size_t>(n), 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                bv[static_cast<size_t>(i)] += b(i, j) * basis[static_cast<size_t>(c)][static_cast<size_t>(j)];
        for (int r = 0; r < k; ++r) {
            Complex dot = 0.0;
            for (int i = 0; i < n; ++i)
                dot += std::conj(basis[static_cast<size_t>(r)][static_cast<size_t>(i)]) *
                       bv[static_cast<size_t>(i)];
            sub(r, c) = dot;
        }
    }
    return sub;
}

} // namespace detail

/// Simultaneous spectrum of the commuting pair at a fixed z: for every
/// eigenvalue x of phi_plus(z) the restriction of phi_minus(z) to its
/// eigenspace is decomposed, producing points (z, x, y, xz+y) with
/// multiplicities summing to n.  Defective eigenspaces fall back to
/// generalized eigenspaces (flagged in the result).  Each point is checked
/// against the commuting-pencil equation det(u(x - phi_+) + v(y - phi_-)) = 0
/// at seeded random (u, v).
inline SupportResult support_points(const MatrixPoly& phi_plus, const MatrixPoly& phi_minus,
                                    Complex z, double comm_tol = 1e-8,
                                    double rank_tol = kRankTol, unsigned seed = 20260808u) {
    const Matrix a = eval_matrix_poly(phi_plus, z);
    const Matrix b = eval_matrix_poly(phi_minus, z);
    a.check_same_dim(b);
    const int n = a.dim();

    const double scale = std::max(1.0, a.max_norm()) * std::max(1.0, b.max_norm());
    if (commutator(a, b).max_norm() > comm_tol * scale)
        throw std::invalid_argument("support_points: pair does not commute at this z");

    SupportResult res;
    // an m-fold eigenvalue is only recoverable to ~(root-finder floor)^(1/m);
    // cluster at the n-fold worst case so repeated spectra coalesce
    const double cluster_tol = std::max(1e-6, std::pow(1e-13, 1.0 / n));
    for (const auto& [x, alg_mult] : cluster_roots(poly_roots(char_poly(a)), cluster_tol)) {
        // the clustered eigenvalue is only known to ~cluster_tol, so singular
        // values below that uncertainty count as null directions
        const double floor = 2.0 * cluster_tol * (1.0 + std::abs(x)) * std::max(1.0, a.max_norm());
        auto basis = null_space(detail::shift(a, x), rank_tol, floor);
        if (static_cast<int>(basis.size()) < alg_mult) {
            // defective: use the generalized eigenspace ker (A - x)^n
            Matrix power = Matrix::identity(n);
            const Matrix sh = detail::shift(a, x);
            for (int i = 0; i < n; ++i) power = power * sh;
            basis = null_space(power, rank_tol, std::pow(floor, n));
            res.generalized_fallback = true;
        }
        if (basis.empty()) continue;
        // clustered roots carry the m-fold accuracy loss; averaging over the
        // invariant subspace restores the eigenvalue (the nilpotent part of
        // the restriction is traceless)
        const Complex x_ref =
            detail::restrict_to(a, basis).trace() / static_cast<double>(basis.size());
        const Matrix bsub = detail::restrict_to(b, basis);
        const double sub_tol =
            std::max(1e-6, std::pow(1e-13, 1.0 / static_cast<double>(basis.size())));
        for (const auto& [y, ym] : cluster_roots(poly_roots(char_poly(bsub)), sub_tol)) {
            Complex y_ref = y;
            const double y_floor = 2.0 * sub_tol * (1.0 + std::abs(y)) * std::max(1.0, bsub.max_norm());
            const auto ybasis = null_space(detail::shift(bsub, y), rank_tol, y_floor);
            if (!ybasis.empty())
                y_ref = detail::restrict_to(bsub, ybasis).trace() /
                        static_cast<double>(ybasis.size());
            res.points.push_back({LiftedPoint::make(z, x_ref, y_ref), ym});
        }
    }

    // Pencil check at seeded (u, v).
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        const Complex u(unit(rng), unit(rng));
        const Complex v(unit(rng), unit(rng));
        for (const auto& sp : res.points) {
            // u (x - A) + v (y - B)
            const Matrix pencil =
                u * -detail::shift(a, sp.point.x) + v * -detail::shift(b, sp.point.y);
            const double det_scale =
                std::pow(std::abs(u) * (std::abs(sp.point.x) + a.max_norm() * n) +
                             std::abs(v) * (std::abs(sp.point.y) + b.max_norm() * n) + 1.0,
                         n);
            res.max_det_residual =
                std::max(res.max_det_residual, std::abs(determinant(pencil)) / det_scale);
        }
    }
    if (res.max_det_residual > 1e-8)
        throw std::runtime_error("support_points: pencil determinant check failed");
    return res;
}

enum class ImageSingularity { Node, Cusp, TwoLines };

inline const char* singularity_name(ImageSingularity s) {
    switch (s) {
        case ImageSingularity::Node: return "Node";
        case ImageSingularity::Cusp: return "Cusp";
        case ImageSingularity::TwoLines: return "TwoLines";
    }
    return "?";
}

/// The stationary rank-2 family built from the nilpotent basepoint
/// phi0 = e: phi = (e, phi1, a phi1 - a^2 e), psi = a e - phi1/2.
struct Rank2Family {
    Complex a;
    Matrix phi1;

    MatrixPoly phi() const {
        const Matrix e = Matrix{{Complex(0.0), Complex(1.0)}, {Complex(0.0), Complex(0.0)}};
        return MatrixPoly(2, {e, phi1, a * phi1 - (a * a) * e});
    }
    Matrix psi() const {
        const Matrix e = Matrix{{Complex(0.0), Complex(1.0)}, {Complex(0.0), Complex(0.0)}};
        return a * e - Complex(0.5) * phi1;
    }
};

/// Singularity type of the image curve for the stationary family:
/// TwoLines when tr(phi0 phi1) = 0, otherwise Cusp when
/// -2a(1+a^2) tr(phi0 phi1) + a^2 tr(phi1^2) = 0, otherwise Node.
inline ImageSingularity classify_image(Complex a, const Matrix& phi1, double tol = 1e-8) {
    if (phi1.dim() != 2) throw std::invalid_argument("classify_image: rank-2 data required");
    const Matrix e = Matrix{{Complex(0.0), Complex(1.0)}, {Complex(0.0), Complex(0.0)}};
    const Complex tr01 = (e * phi1).trace();
    const Complex tr11 = (phi1 * phi1).trace();
    const double s01 = std::abs(tr01);
    if (s01 < tol * std::max(1.0, phi1.max_norm())) return ImageSingularity::TwoLines;
    const Complex value = -2.0 * a * (1.0 + a * a) * tr01 + (a * a) * tr11;
    const double scale = std::max(1.0, std::abs(2.0 * a * (1.0 + a * a) * tr01) +
                                           std::abs(a * a * tr11));
    if (std::abs(value) < tol * scale) return ImageSingularity::Cusp;
    return ImageSingularity::Node;
}

} // namespace nahmlab

#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "nahmlab/flow.hpp"
#include "nahmlab/matrix_poly.hpp"
#include "nahmlab/poly.hpp"

namespace nahmlab {

/// Relative tolerance for spectral degree bounds and nilpotency tests.
inline constexpr double kSpectralTol = 1e-9;

/// Raised when interpolated characteristic coefficients violate the
/// degree bounds deg a_k <= 2k, i.e. the input is not shaped like a
/// twisted Higgs field of the supported kind.
struct shape_error : std::domain_error {
    using std::domain_error::domain_error;
};

/// Raised where an operation requires a reduced rank-2 curve but the
/// field is nilpotent (q identically zero).
struct nilpotent_curve_error : std::domain_error {
    using std::domain_error::domain_error;
};

/// Coefficients a_1..a_n of det(x - phi(z)) = x^n + a_1(z) x^{n-1} + ...,
/// each a polynomial in z of degree at most 2k.
struct SpectralData {
    int n = 0;
    std::vector<Poly> a; // a[k-1] = a_k

    const Poly& ak(int k) const { return a.at(static_cast<size_t>(k - 1)); }

    double max_coeff() const {
        double m = 0.0;
        for (const auto& p : a) m = std::max(m, p.max_coeff());
        return m;
    }
};

/// Characteristic coefficients of phi(z), recovered by evaluating the
/// characteristic polynomial at roots of unity and inverting the DFT.
/// Degree-2 fields use 2n+1 nodes, degree-3 fields 3n+1; in both cases the
/// interpolated a_k must drop off beyond degree 2k, which is asserted.
inline SpectralData spectral_data(const MatrixPoly& phi) {
    const int n = phi.n;
    const int d = phi.degree();
    if (d > 3) throw shape_error("spectral_data: field degree above 3 unsupported");
    const int nodes = (d <= 2 ? 2 * n : 3 * n) + 1;

    // Values of every a_k at the nodes.
    std::vector<std::vector<Complex>> vals(static_cast<size_t>(n),
                                           std::vector<Complex>(static_cast<size_t>(nodes)));
    for (int j = 0; j < nodes; ++j) {
        const double th = 2.0 * M_PI * j / nodes;
        const Complex z(std::cos(th), std::sin(th));
        const Poly cp = char_poly(eval_matrix_poly(phi, z));
        for (int k = 1; k <= n; ++k)
            vals[static_cast<size_t>(k - 1)][static_cast<size_t>(j)] = cp.coeff(n - k);
    }

    SpectralData out;
    out.n = n;
    out.a.resize(static_cast<size_t>(n));

    // Inverse DFT; exact for polynomials of degree < nodes.
    std::vector<std::vector<Complex>> coeff(static_cast<size_t>(n),
                                            std::vector<Complex>(static_cast<size_t>(nodes), 0.0));
    for (int k = 0; k < n; ++k)
        for (int m = 0; m < nodes; ++m) {
            Complex s = 0.0;
            for (int j = 0; j < nodes; ++j) {
                const double th = -2.0 * M_PI * j * m / nodes;
                s += vals[static_cast<size_t>(k)][static_cast<size_t>(j)] *
                     Complex(std::cos(th), std::sin(th));
            }
            coeff[static_cast<size_t>(k)][static_cast<size_t>(m)] = s / static_cast<double>(nodes);
        }

    double scale = 1.0;
    for (int k = 0; k < n; ++k)
        for (const auto& v : coeff[static_cast<size_t>(k)]) scale = std::max(scale, std::abs(v));

    for (int k = 1; k <= n; ++k) {
        auto& cs = coeff[static_cast<size_t>(k - 1)];
        for (int m = 2 * k + 1; m < nodes; ++m)
            if (std::abs(cs[static_cast<size_t>(m)]) > kSpectralTol * scale)
                throw shape_error("spectral_data: a_" + std::to_string(k) +
                                  " exceeds degree bound " + std::to_string(2 * k));
        cs.resize(static_cast<size_t>(2 * k + 1));
        out.a[static_cast<size_t>(k - 1)] = Poly(std::move(cs));
    }
    return out;
}

/// Per-coefficient conservation report along a trajectory: for each a_k the
/// maximum absolute coefficient deviation from the initial sample and the
/// time at which it occurs.
struct DriftReport {
    struct Entry {
        int k = 0;
        double max_dev = 0.0;
        double t_at_max = 0.0;
    };
    std::vector<Entry> per_ak;
    double max_dev = 0.0;
    double t_at_max = 0.0;
};

inline DriftReport conservation_drift(const Trajectory& traj) {
    if (traj.samples.empty()) throw std::invalid_argument("conservation_drift: empty trajectory");
    const SpectralData ref = spectral_data(traj.samples.front().higgs_field());
    DriftReport rep;
    rep.per_ak.resize(static_cast<size_t>(ref.n));
    for (int k = 1; k <= ref.n; ++k) rep.per_ak[static_cast<size_t>(k - 1)].k = k;

    for (const auto& s : traj.samples) {
        const SpectralData cur = spectral_data(s.higgs_field());
        for (int k = 1; k <= ref.n; ++k) {
            // raw coefficient comparison; Poly subtraction would trim the
            // sub-1e-12 drift signal away
            const int top = std::max(cur.ak(k).degree(), ref.ak(k).degree());
            double dev = 0.0;
            for (int cidx = 0; cidx <= top; ++cidx)
                dev = std::max(dev, std::abs(cur.ak(k).coeff(cidx) - ref.ak(k).coeff(cidx)));
            auto& e = rep.per_ak[static_cast<size_t>(k - 1)];
            if (dev > e.max_dev) {
                e.max_dev = dev;
                e.t_at_max = s.t;
            }
            if (dev > rep.max_dev) {
                rep.max_dev = dev;
                rep.t_at_max = s.t;
            }
        }
    }
    return rep;
}

/// For traceless rank-2 fields the spectral curve is w^2 = q(z) with
/// q = -a_2 of degree at most 4.
inline Poly rank2_q(const SpectralData& s) {
    if (s.n != 2) throw std::invalid_argument("rank2_q: rank-2 data required");
    const double scale = std::max(1.0, s.max_coeff());
    if (s.ak(1).max_coeff() > kSpectralTol * scale)
        throw std::invalid_argument("rank2_q: field is not traceless");
    return -s.ak(2);
}

inline Poly rank2_q(const MatrixPoly& phi) { return rank2_q(spectral_data(phi)); }

/// Multiple roots of q: the z where the rank-2 curve w^2 = q(z) is singular.
/// A vanishing q signals the non-reduced (nilpotent) case instead.
inline std::vector<Complex> singular_points_rank2(const Poly& q) {
    if (q.is_zero())
        throw nilpotent_curve_error("singular_points_rank2: q == 0 (non-reduced: nilpotent case)");
    std::vector<Complex> out;
    if (q.degree() < 1) return out; // nonzero constant: no affine roots
    const Poly dq = q.derivative();
    const double dscale = std::max(dq.max_coeff(), 1e-300);
    for (const auto& [root, mult] : cluster_roots(poly_roots(q), 1e-6)) {
        (void)mult;
        if (std::abs(dq(root)) <= 1e-8 * dscale) out.push_back(root);
    }
    return out;
}

/// True when every characteristic coefficient vanishes identically, i.e.
/// phi(z) is nilpotent for all z.
inline bool is_nilpotent_field(const MatrixPoly& phi) {
    const SpectralData s = spectral_data(phi);
    const double base = std::max(1.0, phi.max_norm());
    for (int k = 1; k <= s.n; ++k) {
        const double tol = kSpectralTol * std::pow(base, k);
        if (s.ak(k).max_coeff() > tol) return false;
    }
    return true;
}

} // namespace nahmlab

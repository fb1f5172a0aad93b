#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "nahmlab/flow.hpp"
#include "nahmlab/matrix_poly.hpp"
#include "nahmlab/poly.hpp"
#include "nahmlab/spectral.hpp"

namespace nahmlab {

/// Raised when the lower-left entry c(z) vanishes identically (the
/// would-be invariant subbundle that stability forbids).
struct stability_error : std::domain_error {
    using std::domain_error::domain_error;
};

/// Raised when the marked zero z0 of c(z) leaves the finite chart
/// (c1 = 0 or a chart breakdown along a trajectory).
struct chart_error : std::domain_error {
    using std::domain_error::domain_error;
};

/// Coordinates of a rank-2 parabolic field on the universal curve:
/// the marked zero z0 of the lower-left entry, w0 = a(z0), and the curve
/// datum q with w0^2 = q(z0).
struct ModuliPoint {
    Complex z0;
    Complex w0;
    Poly q;
};

namespace detail {

struct Rank2Entries {
    Poly a, b, c, d;
};

/// Validates the (2,1)-parabolic shape and extracts the entry polynomials:
/// degrees at most (2,3,1,2) and tr phi == 0 coefficientwise.
inline Rank2Entries rank2_parabolic_entries(const MatrixPoly& phi) {
    if (phi.n != 2) throw std::invalid_argument("rank2 moduli: rank-2 field required");
    if (phi.degree() > 3) throw std::invalid_argument("rank2 moduli: degree above 3");
    Rank2Entries e;
    e.a = phi.entry_poly(0, 0);
    e.b = phi.entry_poly(0, 1);
    e.c = phi.entry_poly(1, 0);
    e.d = phi.entry_poly(1, 1);
    const double tol = 1e-10 * std::max(1.0, phi.max_norm());
    if (e.a.degree() > 2 || e.c.degree() > 1 || e.d.degree() > 2)
        throw shape_error("rank2 moduli: entry degrees exceed the (2,3,1,2) pattern");
    const Poly tr = e.a + e.d;
    if (tr.max_coeff() > tol)
        throw std::invalid_argument("rank2 moduli: field is not traceless");
    return e;
}

} // namespace detail

/// Moduli coordinates of a rank-2 parabolic field: z0 = -c0/c1, w0 = a(z0),
/// q = -a_2.  The on-curve identity w0^2 = q(z0) is asserted.
inline ModuliPoint moduli_coords(const MatrixPoly& phi) {
    const auto e = detail::rank2_parabolic_entries(phi);
    const double scale = std::max(1.0, phi.max_norm());
    const Complex c0 = e.c.coeff(0), c1 = e.c.coeff(1);
    if (std::abs(c0) <= 1e-12 * scale && std::abs(c1) <= 1e-12 * scale)
        throw stability_error("moduli_coords: c == 0 contradicts stability");
    if (std::abs(c1) <= 1e-12 * scale)
        throw chart_error("moduli_coords: zero of c at infinity (c1 = 0)");

    ModuliPoint p;
    p.z0 = -c0 / c1;
    p.w0 = e.a(p.z0);
    p.q = rank2_q(spectral_data(phi));
    const double on_curve = std::abs(p.w0 * p.w0 - p.q(p.z0));
    const double qscale = std::max({1.0, p.q.max_coeff(), std::norm(p.w0)});
    if (on_curve > 1e-9 * qscale * std::pow(1.0 + std::abs(p.z0), 4))
        throw std::domain_error("moduli_coords: w0^2 = q(z0) violated");
    return p;
}

/// Finite-difference audit of the induced moduli flow along a parabolic
/// rank-2 trajectory integrated with phi3 = [[0,1],[0,0]].  Reports the
/// worst defect of each motion law over the interior samples, the drift of
/// q's coefficients, and how far the point leaves the curve.  The time
/// normalization is zdot0 = -2 w0, i.e. the generator scale below.
struct ModuliFlowReport {
    double z0_law = 0.0;        // max |zdot0_fd + 2 a(z0)|
    double w0_law = 0.0;        // max |wdot0_fd + q'(z0)|
    double c0_law = 0.0;        // max |cdot0_fd - 2 (c1 a0 - a1 c0)|
    double c1_law = 0.0;        // max |cdot1_fd + 2 a2 c0|
    double z0_vs_w0 = 0.0;      // max |zdot0_fd + 2 w0|
    double q_drift = 0.0;       // max coefficient drift of q
    double on_curve = 0.0;      // max |w0^2 - q(z0)|
    bool chart_ok = true;
    double chart_fail_time = 0.0;

    static constexpr double generator_scale = -2.0;
};

inline ModuliFlowReport moduli_flow_check(const Trajectory& traj) {
    if (traj.form != FlowForm::parabolic)
        throw std::invalid_argument("moduli_flow_check: parabolic trajectory required");
    if (traj.samples.size() < 3)
        throw std::invalid_argument("moduli_flow_check: need at least three samples");
    {
        const Matrix& p3 = traj.samples.front().c[3];
        const Matrix e = Matrix{{Complex(0.0), Complex(1.0)}, {Complex(0.0), Complex(0.0)}};
        if (max_norm_diff(p3, e) > 1e-12 * std::max(1.0, p3.max_norm()))
            throw std::invalid_argument("moduli_flow_check: trajectory must carry phi3 = [[0,1],[0,0]]");
    }

    ModuliFlowReport rep;
    const size_t nsamp = traj.samples.size();
    std::vector<ModuliPoint> pts(nsamp);
    std::vector<detail::Rank2Entries> ents(nsamp);
    for (size_t i = 0; i < nsamp; ++i) {
        const MatrixPoly phi = traj.samples[i].higgs_field();
        ents[i] = detail::rank2_parabolic_entries(phi);
        try {
            pts[i] = moduli_coords(phi);
        } catch (const chart_error&) {
            rep.chart_ok = false;
            rep.chart_fail_time = traj.samples[i].t;
            return rep;
        }
        rep.on_curve = std::max(rep.on_curve, std::abs(pts[i].w0 * pts[i].w0 - pts[i].q(pts[i].z0)));
        for (int k = 0; k <= 4; ++k)
            rep.q_drift = std::max(rep.q_drift, std::abs(pts[i].q.coeff(k) - pts[0].q.coeff(k)));
    }

    // Three-point central differences (general spacing, for the final
    // partial step).
    const auto fd = [&](auto value, size_t i) -> Complex {
        const double t0 = traj.samples[i - 1].t, t1 = traj.samples[i].t, t2 = traj.samples[i + 1].t;
        const double h1 = t1 - t0, h2 = t2 - t1;
        const Complex f0 = value(i - 1), f1 = value(i), f2 = value(i + 1);
        return (h1 * h1 * f2 - h2 * h2 * f0 - (h1 * h1 - h2 * h2) * f1) / (h1 * h2 * (h1 + h2));
    };

    for (size_t i = 1; i + 1 < nsamp; ++i) {
        const Complex zdot = fd([&](size_t j) { return pts[j].z0; }, i);
        const Complex wdot = fd([&](size_t j) { return pts[j].w0; }, i);
        const Complex c0dot = fd([&](size_t j) { return ents[j].c.coeff(0); }, i);
        const Complex c1dot = fd([&](size_t j) { return ents[j].c.coeff(1); }, i);

        const auto& e = ents[i];
        const Complex a0 = e.a.coeff(0), a1 = e.a.coeff(1), a2 = e.a.coeff(2);
        const Complex c0 = e.c.coeff(0), c1 = e.c.coeff(1);

        rep.z0_law = std::max(rep.z0_law, std::abs(zdot + 2.0 * e.a(pts[i].z0)));
        rep.w0_law = std::max(rep.w0_law, std::abs(wdot + pts[i].q.derivative()(pts[i].z0)));
        rep.c0_law = std::max(rep.c0_law, std::abs(c0dot - 2.0 * (c1 * a0 - a1 * c0)));
        rep.c1_law = std::max(rep.c1_law, std::abs(c1dot + 2.0 * a2 * c0));
        rep.z0_vs_w0 = std::max(rep.z0_vs_w0, std::abs(zdot + 2.0 * pts[i].w0));
    }
    return rep;
}

/// Vanishing test for the moduli vector field: true where w0 = 0 and
/// q'(z0) = 0 (a singular point of the curve), or where q == 0 entirely
/// (the nilpotent locus).
inline bool vector_field_zero(const ModuliPoint& p, double tol = 1e-8) {
    if (p.q.is_zero()) return true;
    const Poly dq = p.q.derivative();
    const double dscale = std::max(dq.max_coeff(), 1e-300);
    return std::abs(p.w0) < tol && std::abs(dq(p.z0)) < tol * dscale;
}

} // namespace nahmlab

#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "nahmlab/matrix.hpp"
#include "nahmlab/matrix_poly.hpp"

namespace nahmlab {

enum class FlowForm { symmetric, asymmetric, parabolic, t_form };

inline std::string form_name(FlowForm f) {
    switch (f) {
        case FlowForm::symmetric: return "symmetric";
        case FlowForm::asymmetric: return "asymmetric";
        case FlowForm::parabolic: return "parabolic";
        case FlowForm::t_form: return "t";
    }
    return "?";
}

inline FlowForm parse_form(const std::string& s) {
    if (s == "symmetric") return FlowForm::symmetric;
    if (s == "asymmetric") return FlowForm::asymmetric;
    if (s == "parabolic") return FlowForm::parabolic;
    if (s == "t" || s == "t_form") return FlowForm::t_form;
    throw std::invalid_argument("unknown flow form: " + s);
}

/// A point of a flow: time stamp, form tag, and the coefficient matrices
/// (three for symmetric/asymmetric/t, four for parabolic).  Parabolic
/// states carry the block split (k, n-k): phi2 must be block upper
/// triangular and phi3 strictly block upper triangular for that split.
struct NahmState {
    double t = 0.0;
    FlowForm form = FlowForm::symmetric;
    int block_split = 0; // k of the (k, n-k) split; parabolic only
    std::vector<Matrix> c;

    int dim() const { return c.empty() ? 0 : c.front().dim(); }

    void validate() const {
        const size_t want = (form == FlowForm::parabolic) ? 4 : 3;
        if (c.size() != want)
            throw std::invalid_argument("NahmState: expected " + std::to_string(want) +
                                        " coefficient matrices for form " + form_name(form));
        const int n = dim();
        for (const auto& m : c)
            if (m.dim() != n) throw std::invalid_argument("NahmState: mixed matrix dimensions");
        if (form == FlowForm::parabolic) {
            const int k = block_split;
            if (k < 1 || k >= n)
                throw std::invalid_argument("NahmState: parabolic block split must satisfy 1 <= k < n");
            const double tol = 1e-10 * std::max(1.0, max_norm());
            for (int i = k; i < n; ++i)
                for (int j = 0; j < k; ++j)
                    if (std::abs(c[2](i, j)) > tol)
                        throw std::invalid_argument("NahmState: phi2 not block upper triangular for split");
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    const bool nilradical = i < k && j >= k;
                    if (!nilradical && std::abs(c[3](i, j)) > tol)
                        throw std::invalid_argument("NahmState: phi3 not strictly block upper triangular");
                }
        }
    }

    double max_norm() const {
        double v = 0.0;
        for (const auto& m : c) v = std::max(v, m.max_norm());
        return v;
    }

    /// The Higgs field phi(z) attached to this state; t-form triples are
    /// first rewritten in phi coordinates.
    MatrixPoly higgs_field() const;
};

/// (T1,T2,T3) -> (phi0,phi1,phi2) = (-(T1+iT2), -2iT3, -(T1-iT2)).
inline std::array<Matrix, 3> to_phi(const Matrix& t1, const Matrix& t2, const Matrix& t3) {
    t1.check_same_dim(t2);
    t1.check_same_dim(t3);
    const Complex i(0.0, 1.0);
    return {-(t1 + i * t2), -2.0 * i * t3, -(t1 - i * t2)};
}

/// Inverse of to_phi: T1 = -(phi0+phi2)/2, T2 = (phi2-phi0)/(2i), T3 = i phi1/2.
inline std::array<Matrix, 3> from_phi(const Matrix& p0, const Matrix& p1, const Matrix& p2) {
    p0.check_same_dim(p1);
    p0.check_same_dim(p2);
    const Complex i(0.0, 1.0);
    return {Complex(-0.5) * (p0 + p2), (p2 - p0) * (1.0 / (2.0 * i)), (i * 0.5) * p1};
}

namespace detail {
inline void require_form(const NahmState& s, FlowForm f, const char* who) {
    if (s.form != f)
        throw std::invalid_argument(std::string(who) + ": state has form " + form_name(s.form));
}
} // namespace detail

/// d(phi0,phi1,phi2)/dt = (-1/2 [phi1,phi0], [phi0,phi2], 1/2 [phi1,phi2]).
inline std::vector<Matrix> rhs_symmetric(const NahmState& s) {
    detail::require_form(s, FlowForm::symmetric, "rhs_symmetric");
    return {Complex(-0.5) * commutator(s.c[1], s.c[0]), commutator(s.c[0], s.c[2]),
            Complex(0.5) * commutator(s.c[1], s.c[2])};
}

/// d(phi0,phi1,phi2)/dt = ([phi0,phi1], [phi0,phi2], 0).
inline std::vector<Matrix> rhs_asymmetric(const NahmState& s) {
    detail::require_form(s, FlowForm::asymmetric, "rhs_asymmetric");
    return {commutator(s.c[0], s.c[1]), commutator(s.c[0], s.c[2]), Matrix::zero(s.dim())};
}

/// Degree-3 parabolic flow.  Oriented so that the induced motion of the
/// rank-2 moduli point is zdot0 = -2 a(z0); see moduli.hpp.
inline std::vector<Matrix> rhs_parabolic(const NahmState& s) {
    detail::require_form(s, FlowForm::parabolic, "rhs_parabolic");
    s.validate();
    return {commutator(s.c[1], s.c[0]), commutator(s.c[2], s.c[0]), commutator(s.c[3], s.c[0]),
            Matrix::zero(s.dim())};
}

/// dT1/dt = [T2,T3], dT2/dt = [T3,T1], dT3/dt = [T1,T2].
inline std::vector<Matrix> rhs_t_form(const NahmState& s) {
    detail::require_form(s, FlowForm::t_form, "rhs_t_form");
    return {commutator(s.c[1], s.c[2]), commutator(s.c[2], s.c[0]), commutator(s.c[0], s.c[1])};
}

inline std::vector<Matrix> rhs(const NahmState& s) {
    switch (s.form) {
        case FlowForm::symmetric: return rhs_symmetric(s);
        case FlowForm::asymmetric: return rhs_asymmetric(s);
        case FlowForm::parabolic: return rhs_parabolic(s);
        case FlowForm::t_form: return rhs_t_form(s);
    }
    throw std::logic_error("rhs: bad form tag");
}

inline MatrixPoly NahmState::higgs_field() const {
    if (form == FlowForm::t_form) {
        const auto p = to_phi(c[0], c[1], c[2]);
        return MatrixPoly(dim(), {p[0], p[1], p[2]});
    }
    return MatrixPoly(dim(), c);
}

struct Trajectory {
    FlowForm form = FlowForm::symmetric;
    int block_split = 0;
    double step = 0.0;           // nominal dt
    std::vector<NahmState> samples;
    bool blew_up = false;
    double blow_up_time = 0.0;
    double error_estimate = 0.0; // max per-step Richardson estimate

    int dim() const { return samples.empty() ? 0 : samples.front().dim(); }
};

struct IntegrateOptions {
    double blow_up_limit = 1e12;
    bool reversed = false;       // integrate the negated vector field
    bool estimate_error = true;  // shadow each step with two half steps
};

namespace detail {

inline std::vector<Matrix> axpy(const std::vector<Matrix>& y, double a, const std::vector<Matrix>& k) {
    std::vector<Matrix> r = y;
    for (size_t i = 0; i < r.size(); ++i) r[i] += Complex(a) * k[i];
    return r;
}

inline NahmState with_coeffs(const NahmState& proto, double t, std::vector<Matrix> c) {
    NahmState s = proto;
    s.t = t;
    s.c = std::move(c);
    return s;
}

inline std::vector<Matrix> rk4_step(const NahmState& s, double h, double sign) {
    const auto eval = [&](const std::vector<Matrix>& c) {
        std::vector<Matrix> k = rhs(with_coeffs(s, s.t, c));
        if (sign != 1.0)
            for (auto& m : k) m *= Complex(sign);
        return k;
    };
    const auto k1 = eval(s.c);
    const auto k2 = eval(axpy(s.c, h / 2.0, k1));
    const auto k3 = eval(axpy(s.c, h / 2.0, k2));
    const auto k4 = eval(axpy(s.c, h, k3));
    std::vector<Matrix> next = s.c;
    for (size_t i = 0; i < next.size(); ++i)
        next[i] += Complex(h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return next;
}

inline bool state_ok(const std::vector<Matrix>& c, double limit) {
    for (const auto& m : c) {
        if (!m.all_finite()) return false;
        if (m.max_norm() > limit) return false;
    }
    return true;
}

} // namespace detail

/// Classical fixed-step RK4 from s0.t to t_end (final partial step allowed).
/// Every accepted step is recorded.  A per-step halved-step shadow provides
/// the trajectory error estimate.  Blow-up (non-finite entries or entries
/// beyond the guard limit) aborts the run; the trajectory keeps the last
/// finite state and sets blew_up.
inline Trajectory integrate(const NahmState& s0, double t_end, double dt,
                            const IntegrateOptions& opts = {}) {
    if (dt <= 0.0) throw std::invalid_argument("integrate: dt must be positive");
    if (t_end <= s0.t) throw std::invalid_argument("integrate: t_end must exceed the initial time");
    s0.validate();

    const double sign = opts.reversed ? -1.0 : 1.0;
    Trajectory traj;
    traj.form = s0.form;
    traj.block_split = s0.block_split;
    traj.step = dt;
    traj.samples.push_back(s0);

    NahmState cur = s0;
    while (cur.t < t_end - 1e-12 * dt) {
        const double h = std::min(dt, t_end - cur.t);
        auto full = detail::rk4_step(cur, h, sign);
        if (!detail::state_ok(full, opts.blow_up_limit)) {
            traj.blew_up = true;
            traj.blow_up_time = cur.t + h;
            break;
        }
        if (opts.estimate_error) {
            auto half = detail::rk4_step(cur, h / 2.0, sign);
            if (detail::state_ok(half, opts.blow_up_limit)) {
                const NahmState mid = detail::with_coeffs(cur, cur.t + h / 2.0, std::move(half));
                auto two = detail::rk4_step(mid, h / 2.0, sign);
                double diff = 0.0;
                for (size_t i = 0; i < full.size(); ++i)
                    diff = std::max(diff, max_norm_diff(full[i], two[i]));
                traj.error_estimate = std::max(traj.error_estimate, diff);
            }
        }
        cur = detail::with_coeffs(cur, cur.t + h, std::move(full));
        traj.samples.push_back(cur);
    }
    return traj;
}

} // namespace nahmlab

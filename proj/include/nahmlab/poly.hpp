#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <initializer_list>
#include <stdexcept>
#include <vector>

#include "nahmlab/matrix.hpp"

namespace nahmlab {

/// Absolute tolerance for dropping trailing polynomial coefficients.
inline constexpr double kPolyTrimTol = 1e-12;

/// Univariate polynomial with complex coefficients, lowest degree first.
/// The zero polynomial is represented by an empty coefficient list.
class Poly {
  public:
    Poly() = default;
    Poly(std::initializer_list<Complex> cs) : c_(cs) { trim(); }
    explicit Poly(std::vector<Complex> cs) : c_(std::move(cs)) { trim(); }

    static Poly zero() { return Poly{}; }
    static Poly constant(Complex v) { return Poly{v}; }

    /// Degree of the trimmed polynomial; -1 for the zero polynomial.
    int degree() const { return static_cast<int>(c_.size()) - 1; }
    bool is_zero() const { return c_.empty(); }

    const std::vector<Complex>& coeffs() const { return c_; }

    Complex coeff(int k) const {
        if (k < 0 || k >= static_cast<int>(c_.size())) return 0.0;
        return c_[static_cast<size_t>(k)];
    }

    Complex operator()(Complex z) const {
        Complex v = 0.0;
        for (auto it = c_.rbegin(); it != c_.rend(); ++it) v = v * z + *it;
        return v;
    }

    Poly derivative() const {
        if (c_.size() <= 1) return Poly{};
        std::vector<Complex> d(c_.size() - 1);
        for (size_t k = 1; k < c_.size(); ++k) d[k - 1] = c_[k] * static_cast<double>(k);
        return Poly(std::move(d));
    }

    double max_coeff() const {
        double m = 0.0;
        for (const auto& v : c_) m = std::max(m, std::abs(v));
        return m;
    }

    friend Poly operator+(const Poly& a, const Poly& b) {
        std::vector<Complex> r(std::max(a.c_.size(), b.c_.size()), 0.0);
        for (size_t i = 0; i < a.c_.size(); ++i) r[i] += a.c_[i];
        for (size_t i = 0; i < b.c_.size(); ++i) r[i] += b.c_[i];
        return Poly(std::move(r));
    }
    friend Poly operator-(const Poly& a, const Poly& b) {
        std::vector<Complex> r(std::max(a.c_.size(), b.c_.size()), 0.0);
        for (size_t i = 0; i < a.c_.size(); ++i) r[i] += a.c_[i];
        for (size_t i = 0; i < b.c_.size(); ++i) r[i] -= b.c_[i];
        return Poly(std::move(r));
    }
    friend Poly operator*(const Poly& a, const Poly& b) {
        if (a.is_zero() || b.is_zero()) return Poly{};
        std::vector<Complex> r(a.c_.size() + b.c_.size() - 1, 0.0);
        for (size_t i = 0; i < a.c_.size(); ++i)
            for (size_t j = 0; j < b.c_.size(); ++j) r[i + j] += a.c_[i] * b.c_[j];
        return Poly(std::move(r));
    }
    friend Poly operator*(const Poly& a, Complex s) {
        std::vector<Complex> r = a.c_;
        for (auto& v : r) v *= s;
        return Poly(std::move(r));
    }
    friend Poly operator*(Complex s, const Poly& a) { return a * s; }
    friend Poly operator-(const Poly& a) { return a * Complex(-1.0); }

    void trim(double tol = kPolyTrimTol) {
        while (!c_.empty() && std::abs(c_.back()) <= tol) c_.pop_back();
    }

  private:
    std::vector<Complex> c_;
};

namespace detail {

// One Aberth-Ehrlich pass: simultaneous Newton corrections with mutual
// repulsion.  Returns the largest applied correction.
inline double aberth_pass(const Poly& p, const Poly& dp, std::vector<Complex>& z) {
    const size_t d = z.size();
    double worst = 0.0;
    for (size_t j = 0; j < d; ++j) {
        const Complex pv = p(z[j]);
        if (pv == Complex(0.0)) continue;
        Complex dv = dp(z[j]);
        Complex newton;
        if (std::abs(dv) > 1e-300) {
            newton = pv / dv;
        } else {
            newton = Complex(1e-8, 1e-8); // nudge off a critical point
        }
        Complex rep = 0.0;
        for (size_t k = 0; k < d; ++k) {
            if (k == j) continue;
            Complex diff = z[j] - z[k];
            if (std::abs(diff) < 1e-300) diff = Complex(1e-30, 0.0);
            rep += 1.0 / diff;
        }
        const Complex denom = 1.0 - newton * rep;
        Complex w = (std::abs(denom) > 1e-300) ? newton / denom : newton;
        z[j] -= w;
        worst = std::max(worst, std::abs(w));
    }
    return worst;
}

// Evaluation-error scale: eps * sum |c_i| |z|^i.
inline double eval_floor(const Poly& p, Complex z) {
    double s = 0.0, zp = 1.0;
    const double az = std::abs(z);
    for (const auto& c : p.coeffs()) {
        s += std::abs(c) * zp;
        zp *= az;
    }
    return 4.0 * 2.220446049250313e-16 * s;
}

} // namespace detail

/// All complex roots, with multiplicity, of a polynomial of degree >= 1.
/// Aberth-Ehrlich simultaneous iteration followed by Newton polishing;
/// deterministic initial configuration, so results are reproducible.
inline std::vector<Complex> poly_roots(const Poly& input) {
    Poly p = input;
    p.trim();
    if (p.degree() < 1)
        throw std::domain_error("poly_roots: need degree >= 1 after normalization");

    // Factor out exact (to trimming tolerance) roots at the origin.
    std::vector<Complex> coeffs = p.coeffs();
    std::vector<Complex> roots;
    size_t lead = 0;
    const double scale = p.max_coeff();
    while (lead + 1 < coeffs.size() && std::abs(coeffs[lead]) <= kPolyTrimTol * scale) {
        roots.push_back(0.0);
        ++lead;
    }
    coeffs.erase(coeffs.begin(), coeffs.begin() + static_cast<long>(lead));
    const int d = static_cast<int>(coeffs.size()) - 1;
    if (d == 0) return roots;

    // Monic normalization.
    const Complex lc = coeffs.back();
    for (auto& c : coeffs) c /= lc;
    Poly q(coeffs);
    q = Poly(coeffs); // keep untrimmed-by-construction copy
    const Poly dq = q.derivative();

    if (d == 1) {
        roots.push_back(-coeffs[0]);
        return roots;
    }

    // Initial guesses on a circle inside the Cauchy bound.
    double cmax = 0.0;
    for (int i = 0; i < d; ++i) cmax = std::max(cmax, std::abs(coeffs[static_cast<size_t>(i)]));
    const double bound = 1.0 + cmax;
    double r0 = std::pow(std::max(std::abs(coeffs[0]), 1e-12), 1.0 / d);
    r0 = std::clamp(r0, 0.1, bound);
    std::vector<Complex> z(static_cast<size_t>(d));
    for (int j = 0; j < d; ++j) {
        const double th = 2.0 * M_PI * j / d + 0.7;
        z[static_cast<size_t>(j)] = r0 * Complex(std::cos(th), std::sin(th));
    }

    for (int it = 0; it < 400; ++it) {
        const double worst = detail::aberth_pass(q, dq, z);
        bool done = worst < 1e-14;
        if (!done) {
            done = true;
            for (const auto& zj : z)
                if (std::abs(q(zj)) > detail::eval_floor(q, zj)) { done = false; break; }
        }
        if (done) break;
    }

    // Newton polishing (no-op at multiple roots, where Aberth already
    // stalls at the attainable accuracy).
    for (auto& zj : z) {
        for (int it = 0; it < 3; ++it) {
            const Complex pv = q(zj);
            const Complex dv = dq(zj);
            if (std::abs(dv) < 1e-300) break;
            const Complex step = pv / dv;
            if (std::abs(q(zj - step)) < std::abs(pv)) zj -= step;
            else break;
        }
    }

    roots.insert(roots.end(), z.begin(), z.end());
    return roots;
}

/// Groups a root list into (value, multiplicity) clusters.  Roots within
/// `tol * (1 + |root|)` of an existing cluster centroid are merged.
inline std::vector<std::pair<Complex, int>> cluster_roots(const std::vector<Complex>& roots,
                                                          double tol = 1e-7) {
    std::vector<std::pair<Complex, int>> out;
    for (const Complex& r : roots) {
        bool merged = false;
        for (auto& [c, m] : out) {
            if (std::abs(r - c) <= tol * (1.0 + std::abs(c))) {
                c = (c * static_cast<double>(m) + r) / static_cast<double>(m + 1);
                ++m;
                merged = true;
                break;
            }
        }
        if (!merged) out.emplace_back(r, 1);
    }
    return out;
}

} // namespace nahmlab

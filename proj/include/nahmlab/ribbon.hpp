#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "nahmlab/flow.hpp"
#include "nahmlab/matrix.hpp"
#include "nahmlab/matrix_poly.hpp"
#include "nahmlab/poly.hpp"
#include "nahmlab/spectral.hpp"
#include "nahmlab/svd.hpp"

namespace nahmlab {

/// Bivariate polynomial p(w, z), stored by w-power: wc[j] is the z-polynomial
/// multiplying w^j.  Monic means wc.back() = 1.
struct Bivariate {
    std::vector<Poly> wc;

    int w_degree() const { return static_cast<int>(wc.size()) - 1; }

    Complex operator()(Complex w, Complex z) const {
        Complex v = 0.0;
        for (auto it = wc.rbegin(); it != wc.rend(); ++it) v = v * w + (*it)(z);
        return v;
    }

    /// The univariate polynomial p(., z).
    Poly at_z(Complex z) const {
        std::vector<Complex> cs(wc.size());
        for (size_t j = 0; j < wc.size(); ++j) cs[j] = wc[j](z);
        return Poly(std::move(cs));
    }

    double max_coeff() const {
        double m = 0.0;
        for (const auto& p : wc) m = std::max(m, p.max_coeff());
        return m;
    }

    friend Bivariate operator*(const Bivariate& a, const Bivariate& b) {
        Bivariate r;
        r.wc.assign(a.wc.size() + b.wc.size() - 1, Poly{});
        for (size_t i = 0; i < a.wc.size(); ++i)
            for (size_t j = 0; j < b.wc.size(); ++j) r.wc[i + j] = r.wc[i + j] + a.wc[i] * b.wc[j];
        return r;
    }
};

/// The full characteristic surface datum det(w - phi) as a bivariate
/// polynomial: w^n + a_1(z) w^{n-1} + ... + a_n(z).
inline Bivariate characteristic_bivariate(const SpectralData& s) {
    Bivariate b;
    b.wc.assign(static_cast<size_t>(s.n) + 1, Poly{});
    b.wc[static_cast<size_t>(s.n)] = Poly::constant(1.0);
    for (int k = 1; k <= s.n; ++k) b.wc[static_cast<size_t>(s.n - k)] = s.ak(k);
    return b;
}

/// Attempts to write the characteristic datum as a perfect square p^2 with
/// p monic of w-degree n/2.  Coefficients are matched degree by degree; the
/// residual of the overdetermined tail decides success.  Odd rank is an
/// error; an imperfect square returns nullopt.
inline std::optional<Bivariate> extract_square_root(const SpectralData& s) {
    if (s.n % 2 != 0) throw std::invalid_argument("extract_square_root: rank must be even");
    const int m = s.n / 2;
    const Bivariate target = characteristic_bivariate(s);
    const double scale = std::max(1.0, target.max_coeff());

    // b[0] = 1; the w^{2m-j} coefficient of p^2 is sum_{i+k=j} b_i b_k.
    std::vector<Poly> b(static_cast<size_t>(m) + 1);
    b[0] = Poly::constant(1.0);
    for (int j = 1; j <= m; ++j) {
        Poly acc = target.wc[static_cast<size_t>(2 * m - j)];
        for (int i = 1; i < j; ++i) acc = acc - b[static_cast<size_t>(i)] * b[static_cast<size_t>(j - i)];
        b[static_cast<size_t>(j)] = acc * Complex(0.5);
    }

    Bivariate p;
    p.wc.assign(static_cast<size_t>(m) + 1, Poly{});
    for (int j = 0; j <= m; ++j) p.wc[static_cast<size_t>(m - j)] = b[static_cast<size_t>(j)];

    const Bivariate sq = p * p;
    for (size_t j = 0; j < target.wc.size(); ++j) {
        const Poly diff = sq.wc[j] - target.wc[j];
        if (diff.max_coeff() > kSpectralTol * scale) return std::nullopt;
    }
    return p;
}

inline std::optional<Bivariate> extract_square_root(const MatrixPoly& phi) {
    return extract_square_root(spectral_data(phi));
}

enum class SheafCase { BundleOnS, GeneralizedLineBundle };

inline const char* sheaf_case_name(SheafCase c) {
    return c == SheafCase::BundleOnS ? "BundleOnS" : "GeneralizedLineBundle";
}

/// Matrix polynomial substitution p(phi(z), z).
inline Matrix eval_bivariate_at_matrix(const Bivariate& p, const MatrixPoly& phi, Complex z) {
    const Matrix m = eval_matrix_poly(phi, z);
    Matrix v = Matrix::zero(phi.n);
    for (auto it = p.wc.rbegin(); it != p.wc.rend(); ++it) {
        v = v * m;
        const Complex c = (*it)(z);
        for (int i = 0; i < phi.n; ++i) v(i, i) += c;
    }
    return v;
}

/// Splits the two sheaf cases on a ribbon: the minimal polynomial is p
/// itself (a rank-2 bundle on the reduced curve) exactly when p(phi) = 0;
/// otherwise the cokernel data is a generalized line bundle.
inline SheafCase case_split(const MatrixPoly& phi, const Bivariate& p) {
    const int m = p.w_degree();
    const int nodes = 4 * m + 1;
    const double fs = std::max(1.0, phi.max_norm());
    for (int j = 0; j < nodes; ++j) {
        const double th = 2.0 * M_PI * j / nodes;
        const Complex z(std::cos(th), std::sin(th));
        double scale = std::pow(1.0 + eval_matrix_poly(phi, z).max_norm(), m);
        scale = std::max(scale, std::max(1.0, p.max_coeff()) * std::pow(1.0 + fs, m));
        if (eval_bivariate_at_matrix(p, phi, z).max_norm() > kSpectralTol * scale)
            return SheafCase::GeneralizedLineBundle;
    }
    return SheafCase::BundleOnS;
}

/// A located point of the divisor D: the eigenspace of phi(z) at lambda has
/// dimension mult >= 2; order is the local intersection multiplicity used by
/// the degree bookkeeping.
struct DivisorPoint {
    Complex z;
    Complex lambda;
    int mult = 0;
    int order = 1;
};

struct DivisorSet {
    std::vector<DivisorPoint> points;
    std::vector<Complex> unconverged; // candidate seeds whose refinement failed
};

namespace detail {

inline Complex polish_lambda(const Bivariate& p, Complex z, Complex lambda) {
    const Poly pz = p.at_z(z);
    const Poly dpz = pz.derivative();
    for (int it = 0; it < 6; ++it) {
        const Complex dv = dpz(lambda);
        if (std::abs(dv) < 1e-14 * std::max(1.0, dpz.max_coeff())) break;
        const Complex step = pz(lambda) / dv;
        lambda -= step;
        if (std::abs(step) < 1e-15 * (1.0 + std::abs(lambda))) break;
    }
    return lambda;
}

/// Holomorphic rank-defect witness: a seeded linear combination of the
/// adjugate entries of phi(z) - lambda(z).  It vanishes exactly where the
/// eigenspace dimension reaches 2, and unlike the second-smallest singular
/// value it has simple (Newton-friendly) zeros generically.
struct DefectWitness {
    const MatrixPoly* phi;
    const Bivariate* p;
    std::vector<Complex> weights;

    DefectWitness(const MatrixPoly& f, const Bivariate& q) : phi(&f), p(&q) {
        std::mt19937_64 rng(0x5eedull);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        weights.resize(static_cast<size_t>(f.n) * f.n);
        for (auto& w : weights) w = Complex(u(rng), u(rng));
    }

    Complex operator()(Complex z, Complex& lambda) const {
        lambda = polish_lambda(*p, z, lambda);
        Matrix a = eval_matrix_poly(*phi, z);
        for (int i = 0; i < a.dim(); ++i) a(i, i) -= lambda;
        const Matrix adj = adjugate(a);
        Complex g = 0.0;
        const int n = a.dim();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) g += weights[static_cast<size_t>(i * n + j)] * adj(i, j);
        return g;
    }
};

} // namespace detail

/// Locates the divisor D of a generalized line bundle: scans concentric
/// circles (|z| in {0.5, 1, 2}, `grid` samples each) for dips of the
/// second-smallest singular value of phi(z) - lambda over the roots lambda
/// of p(., z), then refines each candidate by Newton iteration on a
/// holomorphic rank-defect witness.  A refined point is accepted when
/// |p(lambda, z)| is small and the eigenspace dimension is >= 2 at
/// rank tolerance `rank_tol`; its order is the local vanishing order of the
/// witness.  Failed refinements are reported in `unconverged`.
inline DivisorSet divisor_D(const MatrixPoly& phi, const Bivariate& p, int grid = 256,
                            double rank_tol = kRankTol) {
    if (grid < 8) throw std::invalid_argument("divisor_D: grid must be at least 8");
    const int n = phi.n;
    const int m = p.w_degree();
    const double phi_scale = std::max(1.0, phi.max_norm());
    // deepest local minima kept per circle and branch; genuine points are
    // always among them and spurious seeds fail the acceptance gates
    const size_t max_seeds_per_branch = 12;

    const detail::DefectWitness witness(phi, p);

    // --- scan for candidate (z, lambda) seeds -------------------------
    struct Candidate {
        Complex z, lambda;
    };
    std::vector<Candidate> cand;
    const double radii[3] = {0.5, 1.0, 2.0};
    for (double r : radii) {
        // per-branch dip profile along the circle, branches continued by
        // nearest-neighbor matching
        std::vector<std::vector<double>> prof(static_cast<size_t>(m),
                                              std::vector<double>(static_cast<size_t>(grid)));
        std::vector<std::vector<Complex>> lam(static_cast<size_t>(m),
                                              std::vector<Complex>(static_cast<size_t>(grid)));
        std::vector<Complex> prev;
        for (int j = 0; j < grid; ++j) {
            const double th = 2.0 * M_PI * j / grid;
            const Complex z = r * Complex(std::cos(th), std::sin(th));
            std::vector<Complex> roots = poly_roots(p.at_z(z));
            if (!prev.empty()) {
                // continue branches
                std::vector<Complex> matched(roots.size());
                std::vector<bool> used(roots.size(), false);
                for (size_t b = 0; b < prev.size(); ++b) {
                    size_t best = 0;
                    double bd = 1e300;
                    for (size_t k = 0; k < roots.size(); ++k) {
                        if (used[k]) continue;
                        const double d = std::abs(roots[k] - prev[b]);
                        if (d < bd) { bd = d; best = k; }
                    }
                    used[best] = true;
                    matched[b] = roots[best];
                }
                roots = std::move(matched);
            }
            prev = roots;
            const Matrix a = eval_matrix_poly(phi, z);
            for (int b = 0; b < m; ++b) {
                Matrix sh = a;
                for (int i = 0; i < n; ++i) sh(i, i) -= roots[static_cast<size_t>(b)];
                const auto sv = singular_values(sh);
                prof[static_cast<size_t>(b)][static_cast<size_t>(j)] =
                    sv[static_cast<size_t>(n - 2)] / phi_scale;
                lam[static_cast<size_t>(b)][static_cast<size_t>(j)] = roots[static_cast<size_t>(b)];
            }
        }
        for (int b = 0; b < m; ++b) {
            std::vector<std::pair<double, int>> minima; // (value, sample index)
            for (int j = 0; j < grid; ++j) {
                const double v = prof[static_cast<size_t>(b)][static_cast<size_t>(j)];
                const double lo = prof[static_cast<size_t>(b)][static_cast<size_t>((j + grid - 1) % grid)];
                const double hi = prof[static_cast<size_t>(b)][static_cast<size_t>((j + 1) % grid)];
                if (v <= lo && v <= hi) minima.emplace_back(v, j);
            }
            std::sort(minima.begin(), minima.end());
            if (minima.size() > max_seeds_per_branch) minima.resize(max_seeds_per_branch);
            for (const auto& [v, j] : minima) {
                (void)v;
                const double th = 2.0 * M_PI * j / grid;
                cand.push_back({r * Complex(std::cos(th), std::sin(th)),
                                lam[static_cast<size_t>(b)][static_cast<size_t>(j)]});
            }
        }
    }

    // --- Newton refinement on the defect witness ----------------------
    DivisorSet out;
    const double pscale = std::max(1.0, p.max_coeff());
    for (const auto& c : cand) {
        Complex z = c.z;
        Complex lambda = c.lambda;
        bool converged = false;
        for (int it = 0; it < 60; ++it) {
            const double h = 1e-6 * (1.0 + std::abs(z));
            Complex lm = lambda, lp = lambda, l0 = lambda;
            const Complex gp = witness(z + h, lp);
            const Complex gm = witness(z - h, lm);
            const Complex g0 = witness(z, l0);
            lambda = l0;
            const Complex dg = (gp - gm) / (2.0 * h);
            if (std::abs(dg) < 1e-300) break;
            Complex step = g0 / dg;
            const double cap = 0.5 * (1.0 + std::abs(z));
            if (std::abs(step) > cap) step *= cap / std::abs(step);
            z -= step;
            if (std::abs(step) < 1e-13 * (1.0 + std::abs(z))) {
                converged = true;
                break;
            }
        }
        lambda = detail::polish_lambda(p, z, lambda);
        const double pz_scale = pscale * std::pow(1.0 + std::abs(z), 2 * m) *
                                std::pow(1.0 + std::abs(lambda), m);
        const bool on_curve = std::abs(p(lambda, z)) <= 1e-8 * pz_scale;
        // absolute rank floor at the ambient field scale: a matrix that
        // vanishes to roundoff must count as rank zero
        const double floor =
            1e-10 * phi_scale * std::pow(1.0 + std::abs(z), std::max(phi.degree(), 0));
        const int mult = eigen_multiplicity(eval_matrix_poly(phi, z), lambda, rank_tol, floor);
        if (on_curve && mult >= 2) {
            // dedupe against already accepted points
            bool dup = false;
            for (auto& q : out.points)
                if (std::abs(q.z - z) + std::abs(q.lambda - lambda) < 1e-6 * (1.0 + std::abs(z))) {
                    dup = true;
                    break;
                }
            if (!dup) out.points.push_back({z, lambda, mult, 1});
        } else if (!converged) {
            out.unconverged.push_back(c.z);
        }
    }

    // --- local vanishing order of the witness at each accepted point ---
    for (auto& q : out.points) {
        const double d1 = 1e-4 * (1.0 + std::abs(q.z));
        double m1 = 0.0, m2 = 0.0;
        for (int a = 0; a < 8; ++a) {
            const double th = 2.0 * M_PI * a / 8 + 0.31;
            const Complex dir(std::cos(th), std::sin(th));
            Complex l1 = q.lambda, l2 = q.lambda;
            m1 = std::max(m1, std::abs(witness(q.z + d1 * dir, l1)));
            m2 = std::max(m2, std::abs(witness(q.z + 2.0 * d1 * dir, l2)));
        }
        if (m1 > 0.0 && m2 > 0.0) {
            const int est = static_cast<int>(std::lround(std::log(m2 / m1) / std::log(2.0)));
            q.order = std::clamp(est, 1, 8);
        }
    }

    std::sort(out.points.begin(), out.points.end(), [](const DivisorPoint& a, const DivisorPoint& b) {
        if (a.z.real() != b.z.real()) return a.z.real() < b.z.real();
        return a.z.imag() < b.z.imag();
    });
    return out;
}

/// Degree bookkeeping: the divisor orders must sum to 2 m^2 - 2 d for the
/// declared extension degree d.  A mismatch is reported, not thrown.
inline bool degree_consistency(const DivisorSet& d_set, int m, int d) {
    int total = 0;
    for (const auto& q : d_set.points) total += q.order;
    return total == 2 * m * m - 2 * d;
}

/// The complete ribbon datum of a field: the square root p, the sheaf case,
/// and (in the generalized-line-bundle case) the located divisor.
struct RibbonData {
    Bivariate p;
    SheafCase sheaf_case = SheafCase::BundleOnS;
    DivisorSet divisor;

    int m() const { return p.w_degree(); }
};

/// Assembles RibbonData or fails where the characteristic datum is not a
/// perfect square.  The returned divisor points already passed the on-curve
/// and eigenspace-dimension gates.
inline std::optional<RibbonData> ribbon_data(const MatrixPoly& phi, int grid = 256,
                                             double rank_tol = kRankTol) {
    const auto p = extract_square_root(spectral_data(phi));
    if (!p) return std::nullopt;
    RibbonData out;
    out.p = *p;
    out.sheaf_case = case_split(phi, *p);
    if (out.sheaf_case == SheafCase::GeneralizedLineBundle)
        out.divisor = divisor_D(phi, *p, grid, rank_tol);
    return out;
}

/// Conservation audit of the divisor along a trajectory: D is recomputed at
/// every sample and matched against the initial divisor.  Reports the
/// maximum positional drift and any change of the point count (a failure,
/// with the times at which it happened).
struct DivisorConservationReport {
    int initial_count = 0;
    bool count_constant = true;
    std::vector<double> count_change_times;
    double max_drift = 0.0;
    double spectral_drift = 0.0;
};

inline DivisorConservationReport divisor_conservation(const Trajectory& traj, const Bivariate& p,
                                                      int grid = 64, double spectral_tol = 1e-6) {
    if (traj.samples.empty())
        throw std::invalid_argument("divisor_conservation: empty trajectory");
    DivisorConservationReport rep;
    rep.spectral_drift = conservation_drift(traj).max_dev;
    if (rep.spectral_drift > spectral_tol)
        throw std::invalid_argument("divisor_conservation: spectral data not conserved; p is not constant");

    const DivisorSet d0 = divisor_D(traj.samples.front().higgs_field(), p, grid);
    rep.initial_count = static_cast<int>(d0.points.size());
    for (size_t i = 1; i < traj.samples.size(); ++i) {
        const DivisorSet di = divisor_D(traj.samples[i].higgs_field(), p, grid);
        if (di.points.size() != d0.points.size()) {
            rep.count_constant = false;
            rep.count_change_times.push_back(traj.samples[i].t);
            continue;
        }
        std::vector<bool> used(d0.points.size(), false);
        for (const auto& q : di.points) {
            double best = 1e300;
            size_t bi = 0;
            for (size_t k = 0; k < d0.points.size(); ++k) {
                if (used[k]) continue;
                const double dist = std::abs(q.z - d0.points[k].z) +
                                    std::abs(q.lambda - d0.points[k].lambda);
                if (dist < best) { best = dist; bi = k; }
            }
            used[bi] = true;
            rep.max_drift = std::max(rep.max_drift, best);
        }
    }
    return rep;
}

/// Degree of the kernel subbundle for the rank-2, m = 1 case: the primitive
/// kernel section of the nilpotent part phi - s(z) is extracted from a row
/// of the matrix, common roots of its two components are divided out, and
/// the remaining maximal component degree is -deg W1 = d.
inline int kernel_degree_rank2(const MatrixPoly& phi, const Bivariate& p) {
    if (phi.n != 2 || p.w_degree() != 1)
        throw std::invalid_argument("kernel_degree_rank2: rank-2, m = 1 data required");
    const Poly s = -p.wc[0]; // p = w + b1(z)
    // N = phi - s I
    Poly n11 = phi.entry_poly(0, 0) - s;
    Poly n12 = phi.entry_poly(0, 1);
    Poly n21 = phi.entry_poly(1, 0);
    Poly n22 = phi.entry_poly(1, 1) - s;

    // kernel vector from a nonzero row: (N12, -N11) or (N22, -N21)
    Poly v1, v2;
    if (!n11.is_zero() || !n12.is_zero()) {
        v1 = n12;
        v2 = -n11;
    } else if (!n21.is_zero() || !n22.is_zero()) {
        v1 = n22;
        v2 = -n21;
    } else {
        throw std::invalid_argument("kernel_degree_rank2: nilpotent part vanishes identically");
    }
    if (v1.is_zero() || v2.is_zero()) return 0; // the other component is the content

    // divide out common roots
    const Poly lead = (v1.degree() <= v2.degree()) ? v1 : v2;
    if (lead.degree() < 1) return std::max(v1.degree(), v2.degree());
    const double scale1 = std::max(v1.max_coeff(), 1e-300);
    const double scale2 = std::max(v2.max_coeff(), 1e-300);
    for (const auto& [cluster_root, mult] : cluster_roots(poly_roots(lead), 1e-7)) {
        const Complex root = cluster_root;
        for (int k = 0; k < mult; ++k) {
            if (std::abs(v1(root)) > 1e-8 * scale1 || std::abs(v2(root)) > 1e-8 * scale2) break;
            // synthetic division by (z - root)
            const auto deflate = [&](const Poly& q) {
                std::vector<Complex> cs(q.coeffs());
                std::vector<Complex> out(cs.size() - 1);
                Complex carry = 0.0;
                for (size_t i = cs.size(); i-- > 1;) {
                    out[i - 1] = cs[i] + carry;
                    carry = out[i - 1] * root;
                }
                return Poly(std::move(out));
            };
            v1 = deflate(v1);
            v2 = deflate(v2);
            if (v1.is_zero() || v2.is_zero()) return std::max(v1.degree(), v2.degree());
        }
    }
    return std::max({v1.degree(), v2.degree(), 0});
}

} // namespace nahmlab

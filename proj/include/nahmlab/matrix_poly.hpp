#pragma once

#include <stdexcept>
#include <vector>

#include "nahmlab/matrix.hpp"
#include "nahmlab/poly.hpp"

namespace nahmlab {

/// Matrix-coefficient polynomial phi(z) = sum phi_k z^k.  Degree-2 fields
/// are the trivial-bundle Higgs fields, degree-3 the parabolic ones; other
/// degrees appear as intermediate values (e.g. the degree-1 commuting pair),
/// so the type itself allows any degree and operations check what they need.
struct MatrixPoly {
    int n = 0;
    std::vector<Matrix> c;

    MatrixPoly() = default;
    MatrixPoly(int dim, std::vector<Matrix> coeffs) : n(dim), c(std::move(coeffs)) {
        if (c.empty()) throw std::invalid_argument("MatrixPoly: need at least one coefficient");
        for (const auto& m : c)
            if (m.dim() != n) throw std::invalid_argument("MatrixPoly: coefficient dimension mismatch");
    }

    int degree() const { return static_cast<int>(c.size()) - 1; }

    double max_norm() const {
        double v = 0.0;
        for (const auto& m : c) v = std::max(v, m.max_norm());
        return v;
    }

    /// Scalar entry (i,j) as a polynomial in z.
    Poly entry_poly(int i, int j) const {
        std::vector<Complex> cs(c.size());
        for (size_t k = 0; k < c.size(); ++k) cs[k] = c[k](i, j);
        return Poly(std::move(cs));
    }
};

/// Horner evaluation phi(z).
inline Matrix eval_matrix_poly(const MatrixPoly& phi, Complex z) {
    Matrix v = phi.c.back();
    for (size_t k = phi.c.size() - 1; k-- > 0;) v = v * z + phi.c[k];
    return v;
}

/// Monic characteristic polynomial det(xI - M), lowest degree first, by the
/// Faddeev-LeVerrier trace recursion.
inline Poly char_poly(const Matrix& m) {
    const int n = m.dim();
    std::vector<Complex> a(static_cast<size_t>(n) + 1, 0.0); // a[n-k] pairs with x^{n-k}
    a[static_cast<size_t>(n)] = 1.0;
    Matrix b = Matrix::identity(n);
    for (int k = 1; k <= n; ++k) {
        const Matrix mb = m * b;
        const Complex ck = -mb.trace() / static_cast<double>(k);
        a[static_cast<size_t>(n - k)] = ck;
        b = mb;
        for (int i = 0; i < n; ++i) b(i, i) += ck;
    }
    return Poly(std::move(a)); // leading coefficient is exactly 1
}

} // namespace nahmlab

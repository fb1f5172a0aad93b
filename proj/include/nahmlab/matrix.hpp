#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace nahmlab {

using Complex = std::complex<double>;

inline bool is_finite(Complex z) {
    return std::isfinite(z.real()) && std::isfinite(z.imag());
}

/// Dense complex n x n matrix, row-major.  Sizes stay small (n <= 16), so
/// everything is plain loops over contiguous storage.
class Matrix {
  public:
    Matrix() : n_(0) {}
    explicit Matrix(int n) : n_(n), a_(static_cast<size_t>(n) * n) {
        if (n < 1 || n > 16) throw std::invalid_argument("Matrix: dimension must be in [1,16]");
    }
    Matrix(int n, std::vector<Complex> entries) : n_(n), a_(std::move(entries)) {
        if (n < 1 || n > 16) throw std::invalid_argument("Matrix: dimension must be in [1,16]");
        if (a_.size() != static_cast<size_t>(n) * n)
            throw std::invalid_argument("Matrix: entry count does not match dimension");
    }
    /// Row-major nested initializer, e.g. Matrix{{ {0,1},{0,0} }}.
    Matrix(std::initializer_list<std::initializer_list<Complex>> rows) {
        n_ = static_cast<int>(rows.size());
        if (n_ < 1 || n_ > 16) throw std::invalid_argument("Matrix: dimension must be in [1,16]");
        a_.reserve(static_cast<size_t>(n_) * n_);
        for (const auto& r : rows) {
            if (static_cast<int>(r.size()) != n_)
                throw std::invalid_argument("Matrix: ragged initializer");
            for (const auto& v : r) a_.push_back(v);
        }
    }

    static Matrix zero(int n) { return Matrix(n); }
    static Matrix identity(int n) {
        Matrix m(n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    int dim() const { return n_; }

    Complex& operator()(int i, int j) { return a_[static_cast<size_t>(i) * n_ + j]; }
    Complex operator()(int i, int j) const { return a_[static_cast<size_t>(i) * n_ + j]; }

    const std::vector<Complex>& entries() const { return a_; }
    std::vector<Complex>& entries() { return a_; }

    Matrix& operator+=(const Matrix& o) {
        check_same_dim(o);
        for (size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
        return *this;
    }
    Matrix& operator-=(const Matrix& o) {
        check_same_dim(o);
        for (size_t i = 0; i < a_.size(); ++i) a_[i] -= o.a_[i];
        return *this;
    }
    Matrix& operator*=(Complex s) {
        for (auto& v : a_) v *= s;
        return *this;
    }

    friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
    friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
    friend Matrix operator*(Matrix a, Complex s) { return a *= s; }
    friend Matrix operator*(Complex s, Matrix a) { return a *= s; }
    friend Matrix operator-(Matrix a) { return a *= Complex(-1.0); }

    friend Matrix operator*(const Matrix& a, const Matrix& b) {
        a.check_same_dim(b);
        const int n = a.n_;
        Matrix c(n);
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k) {
                const Complex aik = a(i, k);
                if (aik == Complex(0.0)) continue;
                for (int j = 0; j < n; ++j) c(i, j) += aik * b(k, j);
            }
        return c;
    }

    Complex trace() const {
        Complex t = 0.0;
        for (int i = 0; i < n_; ++i) t += (*this)(i, i);
        return t;
    }

    Matrix adjoint() const {
        Matrix m(n_);
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j) m(j, i) = std::conj((*this)(i, j));
        return m;
    }

    /// Largest entry magnitude.
    double max_norm() const {
        double m = 0.0;
        for (const auto& v : a_) m = std::max(m, std::abs(v));
        return m;
    }

    double frobenius_norm() const {
        double s = 0.0;
        for (const auto& v : a_) s += std::norm(v);
        return std::sqrt(s);
    }

    bool all_finite() const {
        for (const auto& v : a_)
            if (!is_finite(v)) return false;
        return true;
    }

    void check_same_dim(const Matrix& o) const {
        if (n_ != o.n_) throw std::invalid_argument("Matrix: dimension mismatch");
    }

  private:
    int n_;
    std::vector<Complex> a_;
};

/// [A,B] = AB - BA.
inline Matrix commutator(const Matrix& a, const Matrix& b) {
    a.check_same_dim(b);
    return a * b - b * a;
}

inline double max_norm_diff(const Matrix& a, const Matrix& b) {
    return (a - b).max_norm();
}

namespace detail {

/// Partial-pivot LU in place; returns the permutation sign, or 0 when the
/// matrix is numerically singular.  `lu` is overwritten with the factors.
inline int lu_factor(Matrix& lu, std::vector<int>& piv) {
    const int n = lu.dim();
    piv.resize(n);
    int sign = 1;
    for (int i = 0; i < n; ++i) piv[i] = i;
    for (int k = 0; k < n; ++k) {
        int p = k;
        double best = std::abs(lu(k, k));
        for (int i = k + 1; i < n; ++i) {
            const double v = std::abs(lu(i, k));
            if (v > best) { best = v; p = i; }
        }
        if (best == 0.0) return 0;
        if (p != k) {
            for (int j = 0; j < n; ++j) std::swap(lu(p, j), lu(k, j));
            std::swap(piv[p], piv[k]);
            sign = -sign;
        }
        const Complex d = lu(k, k);
        for (int i = k + 1; i < n; ++i) {
            const Complex m = lu(i, k) / d;
            lu(i, k) = m;
            for (int j = k + 1; j < n; ++j) lu(i, j) -= m * lu(k, j);
        }
    }
    return sign;
}

} // namespace detail

inline Complex determinant(Matrix m) {
    std::vector<int> piv;
    const int sign = detail::lu_factor(m, piv);
    if (sign == 0) return 0.0;
    Complex d = static_cast<double>(sign);
    for (int i = 0; i < m.dim(); ++i) d *= m(i, i);
    return d;
}

inline Matrix inverse(const Matrix& a) {
    const int n = a.dim();
    Matrix lu = a;
    std::vector<int> piv;
    if (detail::lu_factor(lu, piv) == 0)
        throw std::domain_error("inverse: singular matrix");
    Matrix inv(n);
    std::vector<Complex> col(n), x(n);
    for (int c = 0; c < n; ++c) {
        for (int i = 0; i < n; ++i) col[i] = (piv[i] == c) ? 1.0 : 0.0;
        for (int i = 0; i < n; ++i) {
            x[i] = col[i];
            for (int j = 0; j < i; ++j) x[i] -= lu(i, j) * x[j];
        }
        for (int i = n - 1; i >= 0; --i) {
            for (int j = i + 1; j < n; ++j) x[i] -= lu(i, j) * x[j];
            x[i] /= lu(i, i);
        }
        for (int i = 0; i < n; ++i) inv(i, c) = x[i];
    }
    return inv;
}

/// Classical adjugate, adj(A) * A = det(A) * I.  Used as a rank-defect
/// witness: adj(A) = 0 exactly when rank(A) <= n-2.
inline Matrix adjugate(const Matrix& a) {
    const int n = a.dim();
    Matrix adj(n);
    if (n == 1) {
        adj(0, 0) = 1.0;
        return adj;
    }
    Matrix minor(n - 1);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            int r = 0;
            for (int ii = 0; ii < n; ++ii) {
                if (ii == i) continue;
                int c = 0;
                for (int jj = 0; jj < n; ++jj) {
                    if (jj == j) continue;
                    minor(r, c) = a(ii, jj);
                    ++c;
                }
                ++r;
            }
            const double sgn = ((i + j) % 2 == 0) ? 1.0 : -1.0;
            adj(j, i) = sgn * determinant(minor);
        }
    return adj;
}

} // namespace nahmlab

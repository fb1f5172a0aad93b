#include <catch2/catch.hpp>

#include "nahmlab/spectral.hpp"
#include "test_support.hpp"

using namespace nahmlab;
using testsup::Rng;

namespace {

MatrixPoly running_example() {
    // phi(z) = [[z, 1], [z^2, -z]]
    Matrix c0(2), c1(2), c2(2);
    c0(0, 1) = 1.0;
    c1(0, 0) = 1.0;
    c1(1, 1) = -1.0;
    c2(1, 0) = 1.0;
    return MatrixPoly(2, {c0, c1, c2});
}

MatrixPoly nilpotent_family() {
    // phi(z) = (z-1)(z+2) e
    const Matrix e = testsup::e_matrix();
    return MatrixPoly(2, {Complex(-2.0) * e, e, e});
}

} // namespace

TEST_CASE("spectral_data") {
    SECTION("nilpotent family: every a_k vanishes") {
        const auto s = spectral_data(nilpotent_family());
        CHECK(s.ak(1).is_zero());
        CHECK(s.ak(2).max_coeff() < 1e-12);
    }
    SECTION("[[z,1],[z^2,-z]] gives a1 = 0, a2 = -2z^2") {
        const auto s = spectral_data(running_example());
        CHECK(s.ak(1).max_coeff() < 1e-13);
        CHECK(std::abs(s.ak(2).coeff(2) + 2.0) < 1e-13);
        for (int k : {0, 1, 3, 4}) CHECK(std::abs(s.ak(2).coeff(k)) < 1e-13);
    }
    SECTION("constant h field: a1 = 0, a2 = -1") {
        const MatrixPoly phi(2, {testsup::h_matrix(), Matrix::zero(2), Matrix::zero(2)});
        const auto s = spectral_data(phi);
        CHECK(s.ak(1).max_coeff() < 1e-14);
        CHECK(std::abs(s.ak(2).coeff(0) + 1.0) < 1e-14);
        CHECK(s.ak(2).degree() <= 0);
    }
    SECTION("conjugation invariance under constant gauge") {
        Rng rng(121);
        const MatrixPoly phi(3, {testsup::random_matrix(rng, 3), testsup::random_matrix(rng, 3),
                                 testsup::random_matrix(rng, 3)});
        Matrix g = testsup::random_matrix(rng, 3);
        for (int i = 0; i < 3; ++i) g(i, i) += 2.0;
        const Matrix gi = inverse(g);
        std::vector<Matrix> conj;
        for (const auto& m : phi.c) conj.push_back(g * m * gi);
        const auto s1 = spectral_data(phi);
        const auto s2 = spectral_data(MatrixPoly(3, conj));
        for (int k = 1; k <= 3; ++k) {
            const int top = std::max(s1.ak(k).degree(), s2.ak(k).degree());
            for (int c = 0; c <= top; ++c)
                CHECK(std::abs(s1.ak(k).coeff(c) - s2.ak(k).coeff(c)) <
                      1e-9 * std::max(1.0, s1.max_coeff()));
        }
    }
    SECTION("degree bounds hold on seeded degree-2 fields") {
        Rng rng(232);
        for (int trial = 0; trial < 10; ++trial) {
            const int n = 2 + static_cast<int>(rng.next() % 3);
            const MatrixPoly phi(n, {testsup::random_matrix(rng, n), testsup::random_matrix(rng, n),
                                     testsup::random_matrix(rng, n)});
            const auto s = spectral_data(phi); // shape assertion inside
            for (int k = 1; k <= n; ++k) CHECK(s.ak(k).degree() <= 2 * k);
        }
    }
    SECTION("additivity over direct sums") {
        Rng rng(343);
        const MatrixPoly a(2, {testsup::random_matrix(rng, 2), testsup::random_matrix(rng, 2),
                               testsup::random_matrix(rng, 2)});
        const MatrixPoly b(2, {testsup::random_matrix(rng, 2), testsup::random_matrix(rng, 2),
                               testsup::random_matrix(rng, 2)});
        std::vector<Matrix> cs;
        for (int k = 0; k < 3; ++k) {
            Matrix m(4);
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) {
                    m(i, j) = a.c[static_cast<size_t>(k)](i, j);
                    m(i + 2, j + 2) = b.c[static_cast<size_t>(k)](i, j);
                }
            cs.push_back(m);
        }
        const auto sa = spectral_data(a);
        const auto sb = spectral_data(b);
        const auto sd = spectral_data(MatrixPoly(4, cs));
        // coefficient convolution: det(x - phi) = det(x - A) det(x - B)
        std::vector<Poly> pa{Poly::constant(1.0), sa.ak(1), sa.ak(2)};
        std::vector<Poly> pb{Poly::constant(1.0), sb.ak(1), sb.ak(2)};
        std::vector<Poly> conv(5);
        for (int i = 0; i <= 2; ++i)
            for (int j = 0; j <= 2; ++j)
                conv[static_cast<size_t>(i + j)] =
                    conv[static_cast<size_t>(i + j)] + pa[static_cast<size_t>(i)] * pb[static_cast<size_t>(j)];
        for (int k = 1; k <= 4; ++k) {
            const Poly& want = conv[static_cast<size_t>(k)];
            const int top = std::max(want.degree(), sd.ak(k).degree());
            for (int c = 0; c <= top; ++c)
                CHECK(std::abs(sd.ak(k).coeff(c) - want.coeff(c)) < 1e-10 * std::max(1.0, want.max_coeff()));
        }
    }
    SECTION("misshapen degree-3 input is rejected") {
        Rng rng(454);
        // generic degree-3 coefficients violate the parabolic degree bounds
        const MatrixPoly bad(2, {testsup::random_matrix(rng, 2), testsup::random_matrix(rng, 2),
                                 testsup::random_matrix(rng, 2), testsup::random_matrix(rng, 2)});
        CHECK_THROWS_AS(spectral_data(bad), shape_error);
    }
    SECTION("parabolic-shaped degree-3 input passes the degree bounds") {
        const auto s0 = testsup::moduli_audit_state();
        const auto sd = spectral_data(s0.higgs_field());
        CHECK(sd.ak(1).max_coeff() < 1e-12);
        CHECK(sd.ak(2).degree() <= 4);
    }
}

TEST_CASE("conservation_drift") {
    SECTION("constant trajectory has zero drift") {
        Matrix d(2);
        d(0, 0) = 1.0;
        d(1, 1) = -1.0;
        const NahmState s{0.0, FlowForm::symmetric, 0, {d, Complex(2.0) * d, Complex(3.0) * d}};
        const auto traj = integrate(s, 0.1, 1e-2);
        const auto rep = conservation_drift(traj);
        CHECK(rep.max_dev == 0.0);
    }
    SECTION("seeded symmetric flow conserves the spectral data") {
        const auto traj = integrate(testsup::spectral_drift_state(), 1.0, 1e-3,
                                    {.estimate_error = false});
        const auto rep = conservation_drift(traj);
        CHECK(rep.max_dev < 1e-8);
        CHECK(rep.per_ak.size() == 3);
    }
    SECTION("drift shrinks ~16x when dt is halved") {
        const auto s = testsup::spectral_drift_state();
        const double d1 =
            conservation_drift(integrate(s, 1.0, 1e-3, {.estimate_error = false})).max_dev;
        const double d2 =
            conservation_drift(integrate(s, 1.0, 5e-4, {.estimate_error = false})).max_dev;
        CHECK(d1 / d2 >= 8.0);
    }
    SECTION("the asymmetric flow is isospectral with the same decay") {
        NahmState s = testsup::spectral_drift_state();
        s.form = FlowForm::asymmetric;
        const double d1 =
            conservation_drift(integrate(s, 1.0, 2e-3, {.estimate_error = false})).max_dev;
        const double d2 =
            conservation_drift(integrate(s, 1.0, 1e-3, {.estimate_error = false})).max_dev;
        CHECK(d1 < 1e-7);
        CHECK(d1 / d2 >= 8.0);
    }
    SECTION("Euler trajectory conserves a2, a3") {
        const auto traj = integrate(testsup::euler_state(0.5, 0.8, 1.0), 0.2, 1e-3);
        CHECK(conservation_drift(traj).max_dev < 1e-9);
    }
}

TEST_CASE("rank2_q") {
    SECTION("nilpotent family: q == 0") {
        CHECK(rank2_q(nilpotent_family()).is_zero());
    }
    SECTION("running example: q = 2 z^2") {
        const Poly q = rank2_q(running_example());
        CHECK(std::abs(q.coeff(2) - 2.0) < 1e-13);
        CHECK(q.degree() == 2);
    }
    SECTION("constant h: q = 1") {
        const MatrixPoly phi(2, {testsup::h_matrix(), Matrix::zero(2), Matrix::zero(2)});
        const Poly q = rank2_q(phi);
        CHECK(q.degree() == 0);
        CHECK(std::abs(q.coeff(0) - 1.0) < 1e-14);
    }
    SECTION("non-traceless input throws") {
        const MatrixPoly phi(2, {Matrix::identity(2), Matrix::zero(2), Matrix::zero(2)});
        CHECK_THROWS_AS(rank2_q(phi), std::invalid_argument);
    }
}

TEST_CASE("singular_points_rank2") {
    SECTION("double root is found") {
        // q = z^2 (z - 1)
        const Poly q{Complex(0.0), Complex(0.0), Complex(-1.0), Complex(1.0)};
        const auto s = singular_points_rank2(q);
        REQUIRE(s.size() == 1);
        CHECK(std::abs(s[0]) < 1e-7);
    }
    SECTION("four simple roots give no singular points") {
        const Poly q{Complex(-1.0), Complex(0.0), Complex(0.0), Complex(0.0), Complex(1.0)};
        CHECK(singular_points_rank2(q).empty());
    }
    SECTION("q = 2 z^2 has its node at the origin") {
        const Poly q{Complex(0.0), Complex(0.0), Complex(2.0)};
        const auto s = singular_points_rank2(q);
        REQUIRE(s.size() == 1);
        CHECK(std::abs(s[0]) < 1e-8);
    }
    SECTION("q == 0 signals the nilpotent case distinctly") {
        CHECK_THROWS_AS(singular_points_rank2(Poly{}), nilpotent_curve_error);
    }
}

TEST_CASE("is_nilpotent_field") {
    CHECK(is_nilpotent_field(nilpotent_family()));
    CHECK_FALSE(is_nilpotent_field(
        MatrixPoly(2, {testsup::h_matrix(), Matrix::zero(2), Matrix::zero(2)})));
    SECTION("rank-one family N(z) is nilpotent everywhere") {
        Matrix c0(2), c1(2), c2(2);
        c0(0, 1) = 1.0;
        c1(0, 0) = -1.0;
        c1(1, 1) = 1.0;
        c2(1, 0) = -1.0;
        CHECK(is_nilpotent_field(MatrixPoly(2, {c0, c1, c2})));
    }
}

// Truncated-current-algebra arithmetic, pairing, lifted coordinates,
// the graded bracket closure, and quadratic Casimirs.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "isolab/takiff.hpp"

using namespace isolab;

namespace {

Matrix<GaussRat> random_matrix(RatSampler& s, std::size_t m) {
    Matrix<GaussRat> a(m, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) a(i, j) = s.gauss();
    return a;
}

TakiffElement<GaussRat> random_element(RatSampler& s, int r, std::size_t m) {
    TakiffElement<GaussRat> x(r, m);
    for (auto& c : x.X) c = random_matrix(s, m);
    return x;
}

TakiffCoElement<GaussRat> random_co_element(RatSampler& s, int r, std::size_t m) {
    TakiffCoElement<GaussRat> a(r, m);
    for (auto& c : a.A) c = random_matrix(s, m);
    return a;
}

}  // namespace

TEST_CASE("degree-0 bracket is the plain commutator") {
    RatSampler s(1);
    auto X = random_element(s, 0, 3);
    auto Y = random_element(s, 0, 3);
    auto Z = takiff_bracket(X, Y);
    CHECK(Z.X[0] == commutator(X.X[0], Y.X[0]));
}

TEST_CASE("degree-1 bracket convolves coefficients and truncates") {
    RatSampler s(2);
    auto X = random_element(s, 1, 2);
    auto Y = random_element(s, 1, 2);
    auto Z = takiff_bracket(X, Y);
    CHECK(Z.X[0] == commutator(X.X[0], Y.X[0]));
    CHECK(Z.X[1] == commutator(X.X[0], Y.X[1]) + commutator(X.X[1], Y.X[0]));

    // Pure z-coefficients (X_0 = Y_0 = 0) bracket into z^2, which truncates.
    TakiffElement<GaussRat> U(1, 2), V(1, 2);
    U.X[1] = random_matrix(s, 2);
    V.X[1] = random_matrix(s, 2);
    auto W = takiff_bracket(U, V);
    CHECK(W.X[0].is_zero());
    CHECK(W.X[1].is_zero());
}

TEST_CASE("pairing sums coefficientwise traces") {
    // <I/z, I> over gl_2 is Tr I = 2.
    TakiffCoElement<GaussRat> A(0, 2);
    A.A[0] = Matrix<GaussRat>::identity(2);
    TakiffElement<GaussRat> X(0, 2);
    X.X[0] = Matrix<GaussRat>::identity(2);
    CHECK(pairing(A, X) == GaussRat(2));

    // Dual bases pair to deltas: E_{dc} z^{-j-1} is dual to E_{cd} z^i.
    const std::size_t m = 2;
    const int r = 2;
    LieStructure<GaussRat> g(m);
    for (int i = 0; i <= r; ++i)
        for (int j = 0; j <= r; ++j)
            for (std::size_t alpha = 0; alpha < m * m; ++alpha)
                for (std::size_t beta = 0; beta < m * m; ++beta) {
                    TakiffCoElement<GaussRat> co(r, m);
                    co.A[i] = g.basis_element(alpha).transpose();
                    TakiffElement<GaussRat> el(r, m);
                    el.X[j] = g.basis_element(beta);
                    GaussRat expect((i == j && alpha == beta) ? 1 : 0);
                    CHECK(pairing(co, el) == expect);
                }

    // Random degree-2 pairing against an independent term-by-term sum.
    RatSampler s(3);
    auto A2 = random_co_element(s, 2, 3);
    auto X2 = random_element(s, 2, 3);
    GaussRat direct(0);
    for (int i = 0; i <= 2; ++i)
        for (std::size_t a = 0; a < 3; ++a)
            for (std::size_t b = 0; b < 3; ++b) direct += A2.A[i](a, b) * X2.X[i](b, a);
    CHECK(pairing(A2, X2) == direct);
}

TEST_CASE("lifted coefficients are the diagonal row sums of Q_i P_{i+k}") {
    const std::size_t m = 2;
    SUBCASE("rank 0") {
        auto s = symbolic_lifted_slots<GaussRat>(0, 0, m);
        auto A = lifted_A(s.Q, s.P);
        CHECK(A.A[0] == s.Q[0] * s.P[0]);
        auto L = lifted_moment(s.Q, s.P);
        CHECK(L.A[0] == s.P[0] * s.Q[0]);
    }
    SUBCASE("rank 1") {
        auto s = symbolic_lifted_slots<GaussRat>(0, 1, m);
        auto A = lifted_A(s.Q, s.P);
        CHECK(A.A[1] == s.Q[0] * s.P[1]);
        CHECK(A.A[0] == s.Q[0] * s.P[0] + s.Q[1] * s.P[1]);
        auto L = lifted_moment(s.Q, s.P);
        CHECK(L.A[1] == s.P[1] * s.Q[0]);
        CHECK(L.A[0] == s.P[0] * s.Q[0] + s.P[1] * s.Q[1]);
    }
    SUBCASE("rank 2") {
        auto s = symbolic_lifted_slots<GaussRat>(0, 2, m);
        auto A = lifted_A(s.Q, s.P);
        CHECK(A.A[2] == s.Q[0] * s.P[2]);
        CHECK(A.A[1] == s.Q[0] * s.P[1] + s.Q[1] * s.P[2]);
        CHECK(A.A[0] == s.Q[0] * s.P[0] + s.Q[1] * s.P[1] + s.Q[2] * s.P[2]);
    }
}

TEST_CASE("moment entries commute with orbit entries") {
    // Inner and outer actions commute, so every Lambda entry brackets to
    // zero with every A entry.
    for (int r : {0, 1, 2}) {
        auto s = symbolic_lifted_slots<GaussRat>(0, r, 2);
        auto A = lifted_A(s.Q, s.P);
        auto L = lifted_moment(s.Q, s.P);
        for (int k = 0; k <= r; ++k)
            for (int l = 0; l <= r; ++l)
                for (std::size_t i = 0; i < 4; ++i)
                    for (std::size_t j = 0; j < 4; ++j)
                        CHECK(canonical_bracket(L.A[k](i / 2, i % 2), A.A[l](j / 2, j % 2))
                                  .is_zero());
    }
}

TEST_CASE("expected graded bracket vanishes past the degree and matches tensors") {
    const std::size_t m = 2;
    auto s = symbolic_lifted_slots<GaussRat>(0, 1, m);
    auto A = lifted_A(s.Q, s.P);

    CHECK(kks_expected(A, 1, 1) == Matrix<PolyQ>(m * m, m * m));  // k + l = 2 > r = 1
    CHECK(kks_expected(A, 0, 1) == -pi_commutator_left(A.A[1]));
    // -[Pi, X (x) I] = [Pi, I (x) X] on the tensor space.
    CHECK(kks_expected(A, 0, 0) == pi_commutator_right(A.A[0]));

    auto s0 = symbolic_lifted_slots<GaussRat>(0, 0, 1);
    auto A0 = lifted_A(s0.Q, s0.P);
    CHECK(kks_expected(A0, 0, 0) == Matrix<PolyQ>(1, 1));  // gl_1 brackets vanish
}

TEST_CASE("canonical bracket on lifted coordinates realizes the graded structure") {
    CHECK(verify_kks<GaussRat>(0, 1).ok());
    CHECK(verify_kks<GaussRat>(1, 2).ok());
    CHECK(verify_kks<GaussRat>(2, 2).ok());
    auto rep = verify_kks<GaussRat>(3, 2);
    CHECK(rep.ok());
    CHECK(rep.checks == 16 * 16);  // (r+1)^2 bracket pairs, m^4 components each
}

TEST_CASE("quadratic casimirs") {
    // Symbolic forms for small degree.
    auto s1 = symbolic_lifted_slots<GaussRat>(0, 1, 2);
    auto A1 = lifted_A(s1.Q, s1.P);
    CHECK(casimir(A1, 1) == (A1.A[0] * A1.A[1]).trace() + (A1.A[1] * A1.A[0]).trace());

    auto s2 = symbolic_lifted_slots<GaussRat>(0, 2, 2);
    auto A2 = lifted_A(s2.Q, s2.P);
    CHECK(casimir(A2, 2) == (A2.A[1] * A2.A[2]).trace() + (A2.A[2] * A2.A[1]).trace());

    // Residue oracle: I_k = coefficient of z^{-r-k-1} in Tr A(z)^2, summed
    // over all index pairs with j + l = r + k - 1.
    RatSampler s(17);
    for (int r : {1, 2, 3}) {
        auto a = random_co_element(s, r, 2);
        for (int k = 1; k <= r; ++k) {
            GaussRat oracle(0);
            for (int j = 0; j <= r; ++j)
                for (int l = 0; l <= r; ++l)
                    if (j + l == r + k - 1) oracle += (a.A[j] * a.A[l]).trace();
            CHECK(casimir(a, k) == oracle);
        }
    }

    // Casimir property: exact commutation with every coefficient entry.
    for (int r : {1, 2, 3}) {
        auto sl = symbolic_lifted_slots<GaussRat>(0, r, 2);
        auto A = lifted_A(sl.Q, sl.P);
        for (int k = 1; k <= r; ++k) {
            PolyQ I = casimir(A, k);
            for (int i = 0; i <= r; ++i)
                for (std::size_t a = 0; a < 2; ++a)
                    for (std::size_t b = 0; b < 2; ++b)
                        CHECK(canonical_bracket(I, A.A[i](a, b)).is_zero());
        }
    }

    CHECK_THROWS_AS(casimir(A1, 0), std::out_of_range);
    CHECK_THROWS_AS(casimir(A1, 2), std::out_of_range);
}

TEST_CASE("constant gauge action conjugates every coefficient") {
    RatSampler s(23);
    auto A = random_co_element(s, 2, 2);
    CHECK(gauge_transform(A, Matrix<GaussRat>::identity(2)).A == A.A);

    Matrix<GaussRat> g(2, 2);
    do { g = random_matrix(s, 2); } while (determinant(g) == GaussRat(0));
    auto B = gauge_transform(A, g);
    // Casimirs are conjugation invariants.
    for (int k = 1; k <= 2; ++k) CHECK(casimir(B, k) == casimir(A, k));
    // Explicit conjugation of one coefficient.
    CHECK(B.A[1] == inverse(g) * A.A[1] * g);
    CHECK_THROWS_AS(gauge_transform(A, Matrix<GaussRat>(2, 2)), std::domain_error);
}

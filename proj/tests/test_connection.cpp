// Connections with higher-order poles: assembly, Laurent expansion,
// spectral invariants, pole/time Hamiltonians, dimension counts. Identity
// checks run over exact rationals; series resummation uses doubles.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "isolab/connection.hpp"
#include "isolab/takiff.hpp"

#include <complex>
#include <vector>

using namespace isolab;

namespace {

using CD = std::complex<double>;
using DR = Dual<GaussRat>;

Matrix<GaussRat> random_matrix(RatSampler& s, std::size_t m) {
    Matrix<GaussRat> A(m, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) A(i, j) = s.gauss();
    return A;
}

Matrix<PolyQ> sym_coeff(int family, std::size_t m) {
    Matrix<PolyQ> M(m, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            M(i, j) = PolyQ::generator(coef_gen(family, 0, int(i), int(j)));
    return M;
}

// Distinct random rational positions.
std::vector<GaussRat> distinct_points(RatSampler& s, int n) {
    std::vector<GaussRat> u;
    while (int(u.size()) < n) {
        GaussRat x = s.gauss();
        bool fresh = true;
        for (auto& v : u)
            if (v == x) fresh = false;
        if (fresh) u.push_back(x);
    }
    return u;
}

}  // namespace

TEST_CASE("assembly") {
    SUBCASE("identity residue over lambda") {
        Connection<GaussRat, GaussRat> c(2, {{GaussRat(0), {Matrix<GaussRat>::identity(2)}, {}}});
        Matrix<GaussRat> v = assemble(c, GaussRat(2));
        CHECK(v == Matrix<GaussRat>::identity(2) * (GaussRat(1) / GaussRat(2)));
        CHECK_THROWS_AS(assemble(c, GaussRat(0)), std::domain_error);
    }
    SUBCASE("four-term partial fraction matches a direct sum") {
        RatSampler s(0x5eed0401);
        auto A0 = random_matrix(s, 2), A1 = random_matrix(s, 2);
        auto B0 = random_matrix(s, 2), B1 = random_matrix(s, 2);
        GaussRat u(Rat(7), Rat(1));
        GaussRat t1 = s.nonzero_gauss();
        Connection<GaussRat, GaussRat> c(2, {{GaussRat(0), {A0}, {}},
                                             {GaussRat(1), {A1}, {}},
                                             {u, {B0, B1}, {t1}}});
        GaussRat x = GaussRat(Rat(5), Rat(3));
        Matrix<GaussRat> direct = A0 * (GaussRat(1) / x) + A1 * (GaussRat(1) / (x - GaussRat(1))) +
                                  B0 * (GaussRat(1) / (x - u)) +
                                  (B1 * t1) * (GaussRat(1) / ((x - u) * (x - u)));
        CHECK(assemble(c, x) == direct);
    }
    SUBCASE("polynomial part at infinity") {
        RatSampler s(0x5eed0402);
        auto A0 = random_matrix(s, 2), C1 = random_matrix(s, 2), C2 = random_matrix(s, 2);
        Connection<GaussRat, GaussRat> c(2, {{GaussRat(0), {A0}, {}}}, {C1, C2});
        GaussRat x(Rat(3), Rat(2));
        CHECK(assemble(c, x) == A0 * (GaussRat(1) / x) + C1 + C2 * x);
    }
    SUBCASE("coincident poles are rejected") {
        auto I = Matrix<GaussRat>::identity(2);
        CHECK_THROWS_AS((Connection<GaussRat, GaussRat>(
                            2, {{GaussRat(1), {I}, {}}, {GaussRat(1), {I}, {}}})),
                        std::invalid_argument);
    }
}

TEST_CASE("local Laurent expansion") {
    SUBCASE("principal part only") {
        auto I = Matrix<GaussRat>::identity(2);
        Connection<GaussRat, GaussRat> c(2, {{GaussRat(0), {I}, {}}});
        auto L = local_laurent(c, 0, 3);
        CHECK(L.at(-1) == I);
        for (int j = 0; j <= 3; ++j) CHECK(L.at(j).is_zero());
    }
    SUBCASE("geometric series from a neighbor pole") {
        RatSampler s(0x5eed0403);
        auto C = random_matrix(s, 2);
        auto Z = Matrix<GaussRat>(2, 2);
        Connection<GaussRat, GaussRat> c(2, {{GaussRat(0), {Z}, {}}, {GaussRat(1), {C}, {}}});
        auto L = local_laurent(c, 0, 4);
        // C/(lambda-1) about 0 is -C(1 + lambda + lambda^2 + ...).
        for (int j = 0; j <= 4; ++j) CHECK(L.at(j) == Matrix<GaussRat>(2, 2) - C);
    }
    SUBCASE("truncated series resums to the assembled value") {
        Matrix<CD> B0(2, 2), B1(2, 2), A1(2, 2);
        B0(0, 0) = {1.0, 0.5};
        B0(0, 1) = {-2.0, 0.0};
        B0(1, 0) = {0.3, -1.0};
        B0(1, 1) = {0.0, 2.0};
        B1 = Matrix<CD>::identity(2) * CD(0.7, -0.2);
        A1(0, 1) = {1.5, 0.0};
        A1(1, 0) = {0.0, -0.4};
        Connection<CD, CD> c(2, {{CD(0.0), {B0, B1}, {CD(1.0)}}, {CD(1.0), {A1}, {}}});
        auto L = local_laurent(c, 0, 30);
        CD x(0.05, 0.02);
        Matrix<CD> sum(2, 2);
        for (int j = L.min_order; j <= L.max_order(); ++j)
            sum += L.at(j) * std::pow(x, double(j));
        Matrix<CD> direct = assemble(c, x);
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 2; ++j)
                CHECK(std::abs(sum(i, j) - direct(i, j)) < 1e-12);
    }
}

TEST_CASE("spectral invariants at simple poles") {
    SUBCASE("lone simple pole has S_0 = 0 and S_1 = Tr A^2/2") {
        RatSampler s(0x5eed0404);
        auto A = random_matrix(s, 3);
        Connection<GaussRat, GaussRat> c(3, {{GaussRat(2), {A}, {}}});
        CHECK(spectral_invariant(c, 0, 0) == GaussRat(0));
        CHECK(spectral_invariant(c, 0, 1) == (A * A).trace() * (GaussRat(1) / GaussRat(2)));
    }
    SUBCASE("two-pole pinned value") {
        Matrix<GaussRat> A1(2, 2), A2(2, 2);
        A1(0, 0) = GaussRat(1);
        A1(1, 1) = GaussRat(-1);
        A2(0, 0) = GaussRat(1);
        A2(0, 1) = GaussRat(2);
        A2(1, 0) = GaussRat(3);
        A2(1, 1) = GaussRat(-1);
        Connection<GaussRat, GaussRat> c(2, {{GaussRat(0), {A1}, {}}, {GaussRat(1), {A2}, {}}});
        CHECK(spectral_invariant(c, 0, 0) == GaussRat(-2));
    }
    SUBCASE("Fuchsian pole Hamiltonian is the pairwise-trace sum") {
        RatSampler s(0x5eed0405);
        auto u = distinct_points(s, 4);
        std::vector<PoleData<GaussRat, GaussRat>> poles;
        std::vector<Matrix<GaussRat>> A;
        for (int i = 0; i < 4; ++i) {
            A.push_back(random_matrix(s, 2));
            poles.push_back({u[std::size_t(i)], {A.back()}, {}});
        }
        Connection<GaussRat, GaussRat> c(2, poles);
        for (std::size_t i = 0; i < 4; ++i) {
            GaussRat expect(0);
            for (std::size_t j = 0; j < 4; ++j)
                if (j != i) expect += (A[i] * A[j]).trace() / (u[i] - u[j]);
            CHECK(pole_hamiltonian(c, i) == expect);
        }
    }
}

TEST_CASE("printed rank-1 example Hamiltonians") {
    RatSampler s(0x5eed0406);
    auto A0 = sym_coeff(10, 2), A1 = sym_coeff(11, 2);
    auto B0 = sym_coeff(0, 2), B1 = sym_coeff(1, 2);
    for (int trial = 0; trial < 3; ++trial) {
        GaussRat u = s.nonzero_gauss() + GaussRat(5);  // keep clear of 0 and 1
        GaussRat t1 = s.nonzero_gauss();
        Connection<GaussRat, PolyQ> c(2, {{GaussRat(0), {A0}, {}},
                                          {GaussRat(1), {A1}, {}},
                                          {u, {B0, B1}, {t1}}});
        auto inv = [](const GaussRat& x) { return GaussRat(1) / x; };
        Matrix<PolyQ> R = A0 * PolyQ(inv(u)) + A1 * PolyQ(inv(u - GaussRat(1)));
        Matrix<PolyQ> Rp = A0 * PolyQ(inv(u * u)) + A1 * PolyQ(inv((u - GaussRat(1)) * (u - GaussRat(1))));

        PolyQ Hu = (B0 * R).trace() - (B1 * Rp).trace() * PolyQ(t1);
        CHECK(pole_hamiltonian(c, 2) == Hu);

        PolyQ H1 = (B1 * R).trace() + (B0 * B0).trace() * PolyQ(GaussRat(1) / (GaussRat(2) * t1));
        auto H = irregular_hamiltonians(c, 2);
        REQUIRE(H.size() == 1);
        CHECK(H[0] == H1);

        // Triangular solve round trip: M^(1) H = S_1.
        CHECK(H[0] * PolyQ(t1) == spectral_invariant(c, 2, 1));
    }
}

TEST_CASE("printed rank-2 example Hamiltonians") {
    RatSampler s(0x5eed0407);
    auto A0 = sym_coeff(10, 2), A1 = sym_coeff(11, 2);
    auto B0 = sym_coeff(0, 2), B1 = sym_coeff(1, 2), B2 = sym_coeff(2, 2);
    for (int trial = 0; trial < 3; ++trial) {
        GaussRat u = s.nonzero_gauss() + GaussRat(5);
        GaussRat t1 = s.nonzero_gauss(), t2 = s.gauss();
        Connection<GaussRat, PolyQ> c(2, {{GaussRat(0), {A0}, {}},
                                          {GaussRat(1), {A1}, {}},
                                          {u, {B0, B1, B2}, {t1, t2}}});
        auto inv = [](const GaussRat& x) { return GaussRat(1) / x; };
        GaussRat um1 = u - GaussRat(1);
        Matrix<PolyQ> R = A0 * PolyQ(inv(u)) + A1 * PolyQ(inv(um1));
        Matrix<PolyQ> Rp = A0 * PolyQ(inv(u * u)) + A1 * PolyQ(inv(um1 * um1));
        Matrix<PolyQ> Rpp = A0 * PolyQ(inv(u * u * u)) + A1 * PolyQ(inv(um1 * um1 * um1));

        PolyQ Hu = (B0 * R).trace() - (B1 * Rp).trace() * PolyQ(t1) +
                   (B2 * Rpp).trace() * PolyQ(t1 * t1) - (B2 * Rp).trace() * PolyQ(t2);
        CHECK(pole_hamiltonian(c, 2) == Hu);

        auto H = irregular_hamiltonians(c, 2);
        REQUIRE(H.size() == 2);
        PolyQ H1 = (B1 * R).trace() - (B2 * Rp).trace() * PolyQ(t1) +
                   (B0 * B0).trace() * PolyQ(GaussRat(1) / (GaussRat(2) * t1)) -
                   (B0 * B1).trace() * PolyQ(t2 / (t1 * t1)) -
                   (B0 * B2).trace() * PolyQ((t2 * t2) / (t1 * t1 * t1));
        PolyQ H2 = (B2 * R).trace() + (B0 * B1).trace() * PolyQ(inv(t1)) +
                   (B0 * B2).trace() * PolyQ(t2 / (t1 * t1));
        CHECK(H[0] == H1);
        CHECK(H[1] == H2);

        // M^(2)(t) H = (S_1, S_2) exactly.
        CHECK(H[0] * PolyQ(t1) + H[1] * PolyQ(t2) == spectral_invariant(c, 2, 1));
        CHECK(H[1] * PolyQ(t1 * t1) == spectral_invariant(c, 2, 2));
    }
}

TEST_CASE("time Hamiltonians Poisson-commute on the lifted phase space") {
    RatSampler s(0x5eed0408);
    const std::size_t m = 2;
    auto P0 = symbolic_slot<GaussRat>(GenKind::Q, 0, m) * symbolic_slot<GaussRat>(GenKind::P, 0, m);
    auto P1 = symbolic_slot<GaussRat>(GenKind::Q, 1, m) * symbolic_slot<GaussRat>(GenKind::P, 1, m);

    SUBCASE("rank 1 at u") {
        auto lift = symbolic_lifted_slots<GaussRat>(2, 1, m);
        std::vector<Matrix<PolyQ>> bare = lifted_A(lift.Q, lift.P).A;
        for (int trial = 0; trial < 3; ++trial) {
            GaussRat u = s.nonzero_gauss() + GaussRat(4);
            GaussRat t1 = s.nonzero_gauss();
            Connection<GaussRat, PolyQ> c(m, {{GaussRat(0), {P0}, {}},
                                              {GaussRat(1), {P1}, {}},
                                              {u, bare, {t1}}});
            PolyQ Hu = pole_hamiltonian(c, 2);
            auto H = irregular_hamiltonians(c, 2);
            CHECK(canonical_bracket(Hu, H[0]).is_zero());
        }
    }
    SUBCASE("rank 2 at u, all pairs") {
        auto lift = symbolic_lifted_slots<GaussRat>(2, 2, m);
        std::vector<Matrix<PolyQ>> bare = lifted_A(lift.Q, lift.P).A;
        GaussRat u = s.nonzero_gauss() + GaussRat(4);
        GaussRat t1 = s.nonzero_gauss(), t2 = s.gauss();
        Connection<GaussRat, PolyQ> c(m, {{GaussRat(0), {P0}, {}},
                                          {GaussRat(1), {P1}, {}},
                                          {u, bare, {t1, t2}}});
        PolyQ Hu = pole_hamiltonian(c, 2);
        auto H = irregular_hamiltonians(c, 2);
        CHECK(canonical_bracket(Hu, H[0]).is_zero());
        CHECK(canonical_bracket(Hu, H[1]).is_zero());
        CHECK(canonical_bracket(H[0], H[1]).is_zero());
    }
}

TEST_CASE("cross derivatives in position and time vanish") {
    RatSampler s(0x5eed0409);
    const std::size_t m = 2;
    auto mk = [&](int) {
        Matrix<DR> A(m, m);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) A(i, j) = DR(s.gauss());
        return A;
    };
    auto A0 = mk(0), A1 = mk(1), B0 = mk(2), B1 = mk(3), B2 = mk(4);
    GaussRat u0 = s.nonzero_gauss() + GaussRat(4);
    GaussRat t10 = s.nonzero_gauss(), t20 = s.gauss();

    auto build = [&](DR u, DR t1, DR t2) {
        return Connection<DR, DR>(m, {{DR(0), {A0}, {}},
                                      {DR(1), {A1}, {}},
                                      {u, {B0, B1, B2}, {t1, t2}}});
    };
    // dH_u/dt_1 vs dH_1/du
    {
        auto c_t = build(DR(u0), DR::variable(t10), DR(t20));
        auto c_u = build(DR::variable(u0), DR(t10), DR(t20));
        CHECK(pole_hamiltonian(c_t, 2).der == irregular_hamiltonians(c_u, 2)[0].der);
    }
    // dH_u/dt_2 vs dH_2/du
    {
        auto c_t = build(DR(u0), DR(t10), DR::variable(t20));
        auto c_u = build(DR::variable(u0), DR(t10), DR(t20));
        CHECK(pole_hamiltonian(c_t, 2).der == irregular_hamiltonians(c_u, 2)[1].der);
    }
    // dH_2/dt_1 vs dH_1/dt_2
    {
        auto c_1 = build(DR(u0), DR::variable(t10), DR(t20));
        auto c_2 = build(DR(u0), DR(t10), DR::variable(t20));
        CHECK(irregular_hamiltonians(c_1, 2)[1].der == irregular_hamiltonians(c_2, 2)[0].der);
    }
}

TEST_CASE("global residue sum of Tr A^2/2 vanishes") {
    RatSampler s(0x5eed040a);
    for (int trial = 0; trial < 4; ++trial) {
        auto u = distinct_points(s, 3);
        std::vector<PoleData<GaussRat, GaussRat>> poles;
        poles.push_back({u[0], {random_matrix(s, 2)}, {}});
        poles.push_back({u[1], {random_matrix(s, 2), random_matrix(s, 2)}, {s.nonzero_gauss()}});
        poles.push_back(
            {u[2], {random_matrix(s, 2), random_matrix(s, 2), random_matrix(s, 2)},
             {s.nonzero_gauss(), s.gauss()}});
        std::vector<Matrix<GaussRat>> inf_part{random_matrix(s, 2), random_matrix(s, 2)};
        Connection<GaussRat, GaussRat> c(2, poles, inf_part);
        GaussRat total = infinity_residue(c);
        for (std::size_t i = 0; i < poles.size(); ++i) total += pole_hamiltonian(c, i);
        CHECK(total == GaussRat(0));
    }
}

TEST_CASE("spectral invariants are constant-gauge invariant") {
    RatSampler s(0x5eed040b);
    auto u = distinct_points(s, 2);
    std::vector<PoleData<GaussRat, GaussRat>> poles{
        {u[0], {random_matrix(s, 2)}, {}},
        {u[1], {random_matrix(s, 2), random_matrix(s, 2)}, {s.nonzero_gauss()}}};
    Connection<GaussRat, GaussRat> c(2, poles);

    Matrix<GaussRat> g = random_matrix(s, 2);
    g(0, 0) += GaussRat(20);  // comfortably invertible
    g(1, 1) += GaussRat(20);
    Matrix<GaussRat> gi = inverse(g);
    auto conj = poles;
    for (auto& p : conj)
        for (auto& A : p.bare) A = gi * A * g;
    Connection<GaussRat, GaussRat> cg(2, conj);

    for (int k = 0; k <= 3; ++k) {
        CHECK(spectral_invariant(c, 1, k) == spectral_invariant(cg, 1, k));
        CHECK(spectral_invariant(c, 0, k) == spectral_invariant(cg, 0, k));
    }
}

TEST_CASE("overflow invariant of an isolated pole commutes with all generators") {
    RatSampler s(0x5eed040c);
    const std::size_t m = 2;
    for (int r = 1; r <= 2; ++r) {
        auto lift = symbolic_lifted_slots<GaussRat>(0, r, m);
        std::vector<Matrix<PolyQ>> bare = lifted_A(lift.Q, lift.P).A;
        std::vector<GaussRat> t;
        t.push_back(s.nonzero_gauss());
        for (int i = 1; i < r; ++i) t.push_back(s.gauss());
        Connection<GaussRat, PolyQ> c(m, {{GaussRat(0), bare, t}});
        PolyQ S = spectral_invariant(c, 0, r + 1);
        CHECK(!S.is_zero());
        // A Casimir combination: it commutes with every entry of every
        // local coefficient A_k (the generators of the local algebra).
        for (int k = 0; k <= r; ++k)
            for (std::size_t a = 0; a < m; ++a)
                for (std::size_t b = 0; b < m; ++b)
                    CHECK(canonical_bracket(S, bare[std::size_t(k)](a, b)).is_zero());
    }
}

TEST_CASE("dimension counts") {
    SUBCASE("four semisimple points on sl2 give a two-dimensional space") {
        std::vector<std::vector<int>> mult{{1, 1}, {1, 1}, {1, 1}, {1, 1}};
        CHECK(katz_dimension(2, mult) == 2);
        CHECK(symplectic_dimension_count(2, mult) == 2);
    }
    SUBCASE("scalar orbits degenerate") {
        std::vector<std::vector<int>> mult{{2}, {2}};
        CHECK(katz_dimension(2, mult) == 2 - 4 - 4);  // 2 - (1-1)m^2 - m^2 - m^2
    }
    SUBCASE("random semisimple data: the two counts agree") {
        RatSampler s(0x5eed040d);
        for (int trial = 0; trial < 20; ++trial) {
            std::size_t m = std::size_t(s.integer(2, 4));
            int npoles = s.integer(2, 5);
            std::vector<std::vector<int>> mult;
            for (int i = 0; i < npoles; ++i) {
                std::vector<int> part;
                int left = int(m);
                while (left > 0) {
                    int take = s.integer(1, left);
                    part.push_back(take);
                    left -= take;
                }
                mult.push_back(part);
            }
            CHECK(katz_dimension(m, mult) == symplectic_dimension_count(m, mult));
        }
    }
    SUBCASE("bad multiplicities are rejected") {
        CHECK_THROWS_AS(katz_dimension(2, {{1, 1}, {3}}), std::invalid_argument);
        CHECK_THROWS_AS(katz_dimension(2, {{1, 1}}), std::invalid_argument);
    }
}

TEST_CASE("residue sum as gauge moment map") {
    RatSampler s(0x5eed040e);
    SUBCASE("balanced Fuchsian tuple sums to zero") {
        auto u = distinct_points(s, 3);
        auto A0 = random_matrix(s, 2), A1 = random_matrix(s, 2);
        Matrix<GaussRat> A2 = Matrix<GaussRat>(2, 2) - A0 - A1;
        Connection<GaussRat, GaussRat> c(
            2, {{u[0], {A0}, {}}, {u[1], {A1}, {}}, {u[2], {A2}, {}}});
        CHECK(fuchs_residue_sum(c).is_zero());
    }
    SUBCASE("random spec matches the direct sum of effective residues") {
        auto u = distinct_points(s, 2);
        PoleData<GaussRat, GaussRat> p0{u[0], {random_matrix(s, 2)}, {}};
        PoleData<GaussRat, GaussRat> p1{
            u[1], {random_matrix(s, 2), random_matrix(s, 2)}, {s.nonzero_gauss()}};
        Connection<GaussRat, GaussRat> c(2, {p0, p1});
        CHECK(fuchs_residue_sum(c) == p0.bare[0] + p1.bare[0]);
    }
}

TEST_CASE("degenerate inputs") {
    auto I = Matrix<GaussRat>::identity(2);
    SUBCASE("vanishing leading time") {
        Connection<GaussRat, GaussRat> c(2, {{GaussRat(0), {I, I}, {GaussRat(0)}}});
        CHECK_THROWS_AS(irregular_hamiltonians(c, 0), std::domain_error);
    }
    SUBCASE("simple pole has no time Hamiltonians") {
        Connection<GaussRat, GaussRat> c(2, {{GaussRat(0), {I}, {}}});
        CHECK_THROWS_AS(irregular_hamiltonians(c, 0), std::invalid_argument);
    }
}

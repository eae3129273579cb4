// The classical Painleve families realized on rank-one orbits: connection
// builders with explicit sl2 blocks, the expanded Hamiltonians, reduction
// by the residual torus action to one degree of freedom, the scalar charts
// (Gambier, Okamoto, P34), and finite-difference residual checks that a
// trajectory satisfies its scalar form.
//
// Conventions. Lifted scalar pairs sit in slots 0, 1 (0, 1, 2 for the
// four-point Fuchsian kind) as the (0,0) entries of Q/P generators. The
// deformation time enters Hamiltonians through param 0 and, wherever the
// closed form divides by t, through param 1 carrying t^{-1}. Scalar flows
// follow du/dt = +dH/dv, dv/dt = -dH/du; the mirrored orientation flips
// both signs and matches the projection of the lifted flow for the kinds
// whose torus chart reverses the scalar area element.
#pragma once

#include "isolab/connection.hpp"
#include "isolab/isoflow.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace isolab {

enum class PainleveKind { VI, V, IV, III, II };

inline const char* painleve_kind_name(PainleveKind k) {
    switch (k) {
        case PainleveKind::VI: return "VI";
        case PainleveKind::V: return "V";
        case PainleveKind::IV: return "IV";
        case PainleveKind::III: return "III";
        case PainleveKind::II: return "II";
    }
    return "?";
}

inline PainleveKind painleve_kind_from_name(const std::string& s) {
    if (s == "VI" || s == "6") return PainleveKind::VI;
    if (s == "V" || s == "5") return PainleveKind::V;
    if (s == "IV" || s == "4") return PainleveKind::IV;
    if (s == "III" || s == "3") return PainleveKind::III;
    if (s == "II" || s == "2") return PainleveKind::II;
    throw std::invalid_argument("unknown Painleve kind: " + s);
}

// Exponents and the constant diagonal entry; each kind reads its own
// subset. VI: theta0, theta1, thetat. V: theta0, thetat, k. IV: thetat,
// theta2, theta3. III: theta1, theta2, theta3. II: theta2, theta3, theta4.
template <class F>
struct PainleveParams {
    F theta0{};
    F theta1{};
    F thetat{};
    F theta2{};
    F theta3{};
    F theta4{};
    F k{};
};

// Scalar point after the torus reduction. The coordinates are (u, v) in
// the torus chart for V, III, II and the Okamoto pair (x, y) for IV; the
// charge is the conserved torus moment fixed by the reduction.
template <class V>
struct PainleveReduced {
    V u{};
    V v{};
    V charge{};
};

inline std::size_t painleve_pair_count(PainleveKind k) {
    return k == PainleveKind::VI ? 3 : 2;
}

namespace detail {

// Rank-one residue block in the scalar pair of the given slot.
template <class F>
Matrix<Poly<F>> babich_block(int slot, const F& theta) {
    using P = Poly<F>;
    P q = P::generator(q_gen(slot, 0, 0));
    P p = P::generator(p_gen(slot, 0, 0));
    P th(theta);
    Matrix<P> B(2, 2);
    B(0, 0) = p * q - th;
    B(0, 1) = -((p * q - P(F(2) * theta)) * p);
    B(1, 0) = q;
    B(1, 1) = -(p * q) + th;
    return B;
}

template <class F>
Matrix<Poly<F>> constant_diag(const F& d) {
    Matrix<Poly<F>> C(2, 2);
    C(0, 0) = Poly<F>(d);
    C(1, 1) = Poly<F>(F(0) - d);
    return C;
}

}  // namespace detail

// Assembles the connection of a family at time t. Matrix entries are
// polynomials in the slot pairs, positions and times are numeric, so the
// result feeds both the exact residue calculus and numeric evaluation.
//
//   VI : A^(0)/lambda + A^(1)/(lambda-1) + A^(t)/(lambda-t)
//   V  : A^(0)/lambda + A^(t)/(lambda-t) + diag(k, -k)
//   IV : A^(t)/(lambda-t) - B1 - B2 lambda
//   III: B0/lambda + t B1/lambda^2 + diag(theta3, -theta3)
//   II : B3 lambda^2 + B2 lambda + B3 t + B1        (no finite poles)
//
// III is stored as a rank-one pole with bare coefficients {B0, B1} and
// time list {t}; the degree-one automorphism then produces exactly the
// effective pair {B0, t B1}.
template <class F>
Connection<F, Poly<F>> painleve_connection(PainleveKind kind, const PainleveParams<F>& par,
                                           const F& t) {
    using P = Poly<F>;
    using PoleT = PoleData<F, P>;
    auto q = [](int slot) { return P::generator(q_gen(slot, 0, 0)); };
    auto p = [](int slot) { return P::generator(p_gen(slot, 0, 0)); };

    switch (kind) {
        case PainleveKind::VI: {
            std::vector<PoleT> poles;
            poles.push_back({F(0), {detail::babich_block(0, par.theta0)}, {}});
            poles.push_back({F(1), {detail::babich_block(1, par.theta1)}, {}});
            poles.push_back({t, {detail::babich_block(2, par.thetat)}, {}});
            return Connection<F, P>(2, std::move(poles));
        }
        case PainleveKind::V: {
            std::vector<PoleT> poles;
            poles.push_back({F(0), {detail::babich_block(0, par.theta0)}, {}});
            poles.push_back({t, {detail::babich_block(1, par.thetat)}, {}});
            return Connection<F, P>(2, std::move(poles), {detail::constant_diag(par.k)});
        }
        case PainleveKind::IV: {
            if (par.theta3 == F(0)) throw flow_error("leading spectral scalar must not vanish");
            Matrix<P> B1(2, 2);
            B1(0, 0) = P(par.theta2);
            B1(0, 1) = P(F(0) - F(2) * par.theta3) * q(1);
            B1(1, 0) = p(1);
            B1(1, 1) = P(F(0) - par.theta2);
            std::vector<PoleT> poles;
            poles.push_back({t, {detail::babich_block(0, par.thetat)}, {}});
            return Connection<F, P>(2, std::move(poles),
                                    {-B1, -detail::constant_diag(par.theta3)});
        }
        case PainleveKind::III: {
            if (par.theta2 == F(0)) throw flow_error("leading spectral scalar must not vanish");
            const F& h1 = par.theta1;
            const F& h2 = par.theta2;
            Matrix<P> B0(2, 2);
            B0(0, 0) = p(0) * q(0) - p(1) * q(1) + P(h1);
            B0(0, 1) = -(p(0) * q(0) * q(0)) + (P(F(2)) * q(0) * q(1) + P(1)) * p(1) -
                       P(F(2) * h1) * q(0);
            B0(1, 0) = p(0);
            B0(1, 1) = -B0(0, 0);
            Matrix<P> B1(2, 2);
            B1(0, 0) = P(F(2) * h2) * q(0) * q(1) + P(h2);
            B1(0, 1) = P(F(0) - F(2) * h2) * (q(0) * q(1) + P(1)) * q(0);
            B1(1, 0) = P(F(2) * h2) * q(1);
            B1(1, 1) = -B1(0, 0);
            std::vector<PoleT> poles;
            poles.push_back({F(0), {B0, B1}, {t}});
            return Connection<F, P>(2, std::move(poles), {detail::constant_diag(par.theta3)});
        }
        case PainleveKind::II: {
            if (par.theta4 == F(0)) throw flow_error("leading spectral scalar must not vanish");
            const F& h2 = par.theta2;
            const F& h3 = par.theta3;
            const F& h4 = par.theta4;
            Matrix<P> B3 = detail::constant_diag(h4);
            Matrix<P> B2(2, 2);
            B2(0, 0) = P(h3);
            B2(0, 1) = P(F(0) - F(2) * h4) * q(0);
            B2(1, 0) = P(F(2) * h4) * q(1);
            B2(1, 1) = P(F(0) - h3);
            Matrix<P> B1(2, 2);
            B1(0, 0) = P(F(2) * h4) * q(0) * q(1) + P(h2);
            B1(0, 1) = P(F(0) - h4) * q(0) * q(0) * q(0) * q(1) * q(1) +
                       P(h3 - F(4) * h4) * q(1) * q(0) * q(0) - P(h4) * q(0) + p(1);
            B1(1, 0) = P(F(0) - h4) * q(0) * q(0) * q(1) * q(1) * q(1) +
                       P(h3 - F(4) * h4) * q(1) * q(1) * q(0) +
                       P(F(2) * h3 - h4) * q(1) + p(0);
            B1(1, 1) = -B1(0, 0);
            Matrix<P> constant = B3 * P(t) + B1;
            return Connection<F, P>(2, {}, {constant, B2, B3});
        }
    }
    throw std::invalid_argument("unknown Painleve kind");
}

// Expanded Hamiltonian of the lifted flow, a polynomial in the slot pairs
// with the time in param 0 (and t^{-1} in param 1 for V and III). VI runs
// through the generic pole Hamiltonians and has no expanded scalar form.
template <class F>
Poly<F> lifted_hamiltonian(PainleveKind kind, const PainleveParams<F>& par) {
    using P = Poly<F>;
    auto q = [](int slot) { return P::generator(q_gen(slot, 0, 0)); };
    auto p = [](int slot) { return P::generator(p_gen(slot, 0, 0)); };
    P t = P::generator(param_gen(0));
    P invt = P::generator(param_gen(1));

    switch (kind) {
        case PainleveKind::VI:
            throw std::invalid_argument("no scalar reduction for the four-point Fuchsian kind");
        case PainleveKind::V: {
            P q0 = q(0), p0 = p(0), qt = q(1), pt = p(1);
            P th0(par.theta0), tht(par.thetat);
            P d = pt - p0;
            P inner = qt * q0 * d * d - P(F(2)) * (q0 * tht - qt * th0) * d -
                      P(F(2) * par.theta0 * par.thetat);
            return P(F(4) * par.k) * (pt * qt - tht) - P(F(2)) * invt * inner;
        }
        case PainleveKind::IV: {
            P qt = q(0), pt = p(0), q3 = q(1), p3 = p(1);
            P tht(par.thetat);
            return (pt * qt - P(F(2) * par.thetat)) * pt * p3 -
                   P(F(2)) * (pt * qt - tht) * (t * P(par.theta3) + P(par.theta2)) +
                   P(F(2) * par.theta3) * q3 * qt;
        }
        case PainleveKind::III: {
            P q1 = q(0), p1 = p(0), q2 = q(1), p2 = p(1);
            return invt * (p2 * p2 * q2 * q2 - P(F(2) * par.theta1) * p2 * q2 + p1 * p2) +
                   P(F(4) * par.theta2 * par.theta3) * q1 * q2;
        }
        case PainleveKind::II: {
            P q3 = q(0), p3 = p(0), q4 = q(1), p4 = p(1);
            const F& h3 = par.theta3;
            const F& h4 = par.theta4;
            P a = P(F(2) * h4) * q3 * q4 + P(par.theta2);
            P b = P(F(0) - h4) * q3 * q3 * q3 * q4 * q4 + P(h3 - F(4) * h4) * q4 * q3 * q3 -
                  P(h4) * q3 + p4;
            P c = P(F(0) - h4) * q3 * q3 * q4 * q4 * q4 + P(h3 - F(4) * h4) * q4 * q4 * q3 +
                  P(F(2) * h3 - h4) * q4 + p3;
            return -(a * a) - P(F(2) * par.theta4) * t * a - b * c;
        }
    }
    throw std::invalid_argument("unknown Painleve kind");
}

// Moment of the residual torus action; Poisson-commutes with the lifted
// Hamiltonian and is the charge fixed by the scalar reduction.
template <class F>
Poly<F> torus_charge(PainleveKind kind) {
    using P = Poly<F>;
    P q0 = P::generator(q_gen(0, 0, 0)), p0 = P::generator(p_gen(0, 0, 0));
    P q1 = P::generator(q_gen(1, 0, 0)), p1 = P::generator(p_gen(1, 0, 0));
    switch (kind) {
        case PainleveKind::VI:
            throw std::invalid_argument("no scalar reduction for the four-point Fuchsian kind");
        case PainleveKind::V: return q0 * p0 + q1 * p1;
        case PainleveKind::IV: return q1 * p1 - q0 * p0;
        case PainleveKind::III: return q0 * p0 - q1 * p1;
        case PainleveKind::II: return q0 * p0 - q1 * p1;
    }
    throw std::invalid_argument("unknown Painleve kind");
}

// Projects a lifted point onto the scalar chart. The pivot coordinate
// resolves the angle, so it must not vanish; IV additionally needs a
// nonzero torus momentum to land in the Okamoto pair.
template <class V>
PainleveReduced<V> reduce(PainleveKind kind, const PainleveParams<V>& par,
                          const std::vector<V>& q, const std::vector<V>& p) {
    if (q.size() != painleve_pair_count(kind) || p.size() != q.size())
        throw std::invalid_argument("lifted point has the wrong number of pairs");
    PainleveReduced<V> out;
    switch (kind) {
        case PainleveKind::VI:
            throw std::invalid_argument("no scalar reduction for the four-point Fuchsian kind");
        case PainleveKind::V:
            if (q[0] == V(0)) throw flow_error("reduction chart pivot vanishes");
            out.charge = q[0] * p[0] + q[1] * p[1];
            out.u = -(q[1] / q[0]);
            out.v = p[1] * q[0];
            return out;
        case PainleveKind::IV: {
            if (q[1] == V(0)) throw flow_error("reduction chart pivot vanishes");
            out.charge = q[1] * p[1] - q[0] * p[0];
            V u = q[0] * q[1];
            V v = p[0] / q[1];
            if (v == V(0)) throw flow_error("Okamoto chart singular: v = 0");
            out.u = par.theta3 / v;
            out.v = v * (u * v + out.charge) / par.theta3;
            return out;
        }
        case PainleveKind::III:
            if (q[0] == V(0)) throw flow_error("reduction chart pivot vanishes");
            out.charge = q[0] * p[0] - q[1] * p[1];
            out.u = -(q[1] * q[0]);
            out.v = -(p[1] / q[0]);
            return out;
        case PainleveKind::II:
            if (q[0] == V(0)) throw flow_error("reduction chart pivot vanishes");
            out.charge = q[0] * p[0] - q[1] * p[1];
            out.u = q[1] * q[0];
            out.v = p[1] / q[0];
            return out;
    }
    throw std::invalid_argument("unknown Painleve kind");
}

// Hamiltonian on the reduced chart at charge level I. Coordinates are
// (u, v) for V, III, II and the Okamoto (x, y) for IV. V divides by u,
// III and V divide by t.
template <class V>
V reduced_hamiltonian(PainleveKind kind, const PainleveParams<V>& par, const V& charge,
                      const V& t, const V& u, const V& v) {
    const V two(2), four(4);
    switch (kind) {
        case PainleveKind::VI:
            throw std::invalid_argument("no scalar reduction for the four-point Fuchsian kind");
        case PainleveKind::V: {
            V w = v - charge - u * v + par.thetat / u + par.theta0;
            return -(four * par.k) * (u * v + par.thetat) + two * (u / t) * w * w -
                   (two / t) * (par.thetat * par.thetat / u + par.theta0 * par.theta0 * u);
        }
        case PainleveKind::IV: {
            const V& x = u;
            const V& y = v;
            return two * y * x * x +
                   (par.theta3 * y * y - two * (t * par.theta3 + par.theta2) * y -
                    two * charge) * x -
                   (charge * par.theta3 + two * par.theta3 * par.thetat) * y;
        }
        case PainleveKind::III:
            return (v * v * u * u -
                    (v * v + two * par.theta1 * v + four * t * par.theta2 * par.theta3) * u -
                    charge * v) / t;
        case PainleveKind::II: {
            V a = two * par.theta4 * u + par.theta2;
            V left = v - par.theta4 * u * u + (par.theta3 - four * par.theta4) * u - par.theta4;
            V right = u * v + (par.theta3 - four * par.theta4) * u * u +
                      (two * par.theta3 - par.theta4) * u + charge -
                      par.theta4 * u * u * u;
            return -(a * a) - two * t * a * par.theta4 - left * right;
        }
    }
    throw std::invalid_argument("unknown Painleve kind");
}

// Okamoto pair from the torus chart for IV and its inverse.
template <class V>
std::pair<V, V> okamoto_from_torus(const PainleveParams<V>& par, const V& charge, const V& u,
                                   const V& v) {
    if (v == V(0)) throw flow_error("Okamoto chart singular: v = 0");
    return {par.theta3 / v, v * (u * v + charge) / par.theta3};
}

template <class V>
std::pair<V, V> torus_from_okamoto(const PainleveParams<V>& par, const V& charge, const V& x,
                                   const V& y) {
    if (x == V(0)) throw flow_error("Okamoto chart singular: x = 0");
    return {x * (x * y - charge) / par.theta3, par.theta3 / x};
}

// Momentum shift of the parabolic double cover u = -q^2/2 used by II.
template <class V>
V p34_shift(const PainleveParams<V>& par, const V& charge, const V& u) {
    if (u == V(0)) throw flow_error("scalar chart singular: u = 0");
    const V two(2), eight(8);
    return (two * par.theta4 * u * u * u + (eight * par.theta4 - two * par.theta3) * u * u +
            (two * par.theta4 - two * par.theta3) * u - charge) /
           (two * u);
}

// Torus chart from a P34 point; rational in (q, p), so it also serves the
// exact identity checks.
template <class V>
std::pair<V, V> torus_from_p34(const PainleveParams<V>& par, const V& charge, const V& q,
                               const V& p) {
    if (q == V(0)) throw flow_error("scalar chart singular: q = 0");
    V u = -(q * q) / V(2);
    return {u, p34_shift(par, charge, u) - p / q};
}

// P34 point over a torus point on the principal branch of the cover.
inline std::pair<Complex, Complex> p34_from_torus(const PainleveParams<Complex>& par,
                                                  const Complex& charge, const Complex& u,
                                                  const Complex& v) {
    if (u == Complex(0)) throw flow_error("scalar chart singular: u = 0");
    Complex q = std::sqrt(Complex(-2.0) * u);
    Complex p = (p34_shift(par, charge, u) - v) * q;
    return {q, p};
}

template <class V>
V p34_hamiltonian(const PainleveParams<V>& par, const V& charge, const V& t, const V& q,
                  const V& p) {
    if (q == V(0)) throw flow_error("scalar chart singular: q = 0");
    const V two(2);
    V q2 = q * q;
    return p * p / two - par.theta4 * par.theta4 * q2 * q2 +
           (two * par.theta4 * par.theta4 * t + two * par.theta2 * par.theta4 -
            par.theta3 * par.theta3 / two) * q2 -
           charge * charge / (two * q2);
}

// Coefficients (alpha, beta, gamma, delta) of the Gambier form of the
// scalar second-order equation for V at charge level I.
template <class V>
std::array<V, 4> gambier_constants(const PainleveParams<V>& par, const V& charge) {
    const V four(4), eight(8);
    return {eight * par.theta0 * par.theta0, -(eight * par.thetat * par.thetat),
            four * par.k * (four * (charge - par.theta0 - par.thetat) - V(1)),
            -(eight * par.k * par.k)};
}

// Principal-branch inverse of gambier_constants.
inline std::pair<PainleveParams<Complex>, Complex> pv_params_from_gambier(
    const std::array<Complex, 4>& c) {
    const Complex eight(8.0);
    PainleveParams<Complex> par;
    par.theta0 = std::sqrt(c[0] / eight);
    par.thetat = std::sqrt(-c[1] / eight);
    par.k = std::sqrt(-c[3] / eight);
    if (par.k == Complex(0)) throw std::domain_error("degenerate constants: delta = 0");
    Complex charge = c[2] / (Complex(16.0) * par.k) + Complex(0.25) + par.theta0 + par.thetat;
    return {par, charge};
}

// Acceleration prescribed by the Gambier form: the value of u'' given
// (u, u') at time t. Regular away from u = 0, 1.
template <class V>
V gambier_acceleration(const PainleveParams<V>& par, const V& charge, const V& t, const V& u,
                       const V& du) {
    const V one(1), two(2), four(4), eight(8);
    V um1 = u - one;
    if (u == V(0) || um1 == V(0)) throw flow_error("scalar form singular at u in {0, 1}");
    auto [alpha, beta, gamma, delta] = gambier_constants(par, charge);
    return (one / um1 + one / (two * u)) * du * du - du / t +
           um1 * um1 * (alpha * u + beta / u) / (t * t) + gamma * u / t +
           delta * u * (u + one) / um1;
}

template <class V>
PainleveParams<Dual<V>> dual_params(const PainleveParams<V>& par) {
    PainleveParams<Dual<V>> d;
    d.theta0 = Dual<V>(par.theta0);
    d.theta1 = Dual<V>(par.theta1);
    d.thetat = Dual<V>(par.thetat);
    d.theta2 = Dual<V>(par.theta2);
    d.theta3 = Dual<V>(par.theta3);
    d.theta4 = Dual<V>(par.theta4);
    d.k = Dual<V>(par.k);
    return d;
}

enum class FlowOrientation { standard, mirrored };

// Scalar Hamiltonian vector field at (u, v); partials come from dual
// numbers, so the field stays exact for exact scalars.
template <class V>
std::pair<V, V> reduced_vector_field(PainleveKind kind, const PainleveParams<V>& par,
                                     const V& charge, const V& t, const V& u, const V& v,
                                     FlowOrientation orientation = FlowOrientation::standard) {
    auto dpar = dual_params(par);
    Dual<V> dc(charge), dt(t);
    V hu = reduced_hamiltonian(kind, dpar, dc, dt, Dual<V>::variable(u), Dual<V>(v)).der;
    V hv = reduced_hamiltonian(kind, dpar, dc, dt, Dual<V>(u), Dual<V>::variable(v)).der;
    if (orientation == FlowOrientation::mirrored) return {-hv, hu};
    return {hv, -hu};
}

// Reduced trajectory sampled on a uniform grid; dense interpolation keeps
// the samples at the integrator's order, which the residual checks need.
struct ScalarTrajectory {
    std::vector<double> times;
    std::vector<Complex> u, v;
};

inline ScalarTrajectory integrate_reduced(PainleveKind kind, const PainleveParams<Complex>& par,
                                          const Complex& charge, const Complex& u0,
                                          const Complex& v0, double t0, double t1,
                                          std::size_t samples = 101, double tol = 1e-10,
                                          FlowOrientation orientation =
                                              FlowOrientation::standard) {
    namespace ode = boost::numeric::odeint;
    if (samples < 2) throw std::invalid_argument("need at least two samples");
    if (t0 == t1) throw std::invalid_argument("empty time interval");
    using State = std::vector<Complex>;

    auto sys = [&](const State& x, State& dx, double t) {
        auto [du, dv] = reduced_vector_field(kind, par, charge, Complex(t), x[0], x[1],
                                             orientation);
        dx[0] = du;
        dx[1] = dv;
    };

    std::vector<double> times(samples);
    const double h = (t1 - t0) / double(samples - 1);
    for (std::size_t i = 0; i < samples; ++i) times[i] = t0 + h * double(i);
    times.back() = t1;

    ScalarTrajectory traj;
    traj.times = times;
    traj.u.reserve(samples);
    traj.v.reserve(samples);

    State x{u0, v0};
    // controlled stepper: sample points are exact integration steps, so the
    // stencil differentiation below sees no interpolation noise
    auto stepper = ode::make_controlled(tol, tol, ode::runge_kutta_dopri5<State>());
    ode::integrate_times(stepper, sys, x, times.begin(), times.end(), h,
                         [&](const State& y, double) {
                             traj.u.push_back(y[0]);
                             traj.v.push_back(y[1]);
                         });
    for (std::size_t i = 0; i < samples; ++i)
        if (!std::isfinite(traj.u[i].real()) || !std::isfinite(traj.u[i].imag()) ||
            !std::isfinite(traj.v[i].real()) || !std::isfinite(traj.v[i].imag()))
            throw flow_error("scalar flow left the chart");
    return traj;
}

// Lifted trajectory of one family in its slot pairs. The vector field is
// read off the expanded Hamiltonian: dq = +dH/dp, dp = -dH/dq.
struct LiftedTrajectory {
    std::vector<double> times;
    std::vector<std::vector<Complex>> q, p;  // one slot-aligned vector per sample
};

inline LiftedTrajectory integrate_lifted(PainleveKind kind, const PainleveParams<Complex>& par,
                                         const std::vector<Complex>& q0,
                                         const std::vector<Complex>& p0, double t0, double t1,
                                         std::size_t samples = 2, double tol = 1e-10) {
    namespace ode = boost::numeric::odeint;
    const std::size_t n = painleve_pair_count(kind);
    if (q0.size() != n || p0.size() != n)
        throw std::invalid_argument("lifted point has the wrong number of pairs");
    if (samples < 2) throw std::invalid_argument("need at least two samples");
    if (t0 == t1) throw std::invalid_argument("empty time interval");
    using State = std::vector<Complex>;

    Poly<Complex> H = lifted_hamiltonian(kind, par);
    std::vector<Poly<Complex>> dHdq(n), dHdp(n);
    for (std::size_t s = 0; s < n; ++s) {
        dHdq[s] = H.derivative(q_gen(int(s), 0, 0));
        dHdp[s] = H.derivative(p_gen(int(s), 0, 0));
    }

    auto sys = [&](const State& x, State& dx, double t) {
        auto value_of = [&](const Gen& g) -> Complex {
            if (g.kind == GenKind::Q) return x[g.slot];
            if (g.kind == GenKind::P) return x[n + g.slot];
            if (g.kind == GenKind::Param && g.slot == 0) return Complex(t);
            if (g.kind == GenKind::Param && g.slot == 1) return Complex(1.0 / t);
            throw flow_error("state does not cover a Hamiltonian generator");
        };
        for (std::size_t s = 0; s < n; ++s) {
            dx[s] = dHdp[s].template evaluate<Complex>(value_of);
            dx[n + s] = -dHdq[s].template evaluate<Complex>(value_of);
        }
    };

    std::vector<double> times(samples);
    const double h = (t1 - t0) / double(samples - 1);
    for (std::size_t i = 0; i < samples; ++i) times[i] = t0 + h * double(i);
    times.back() = t1;

    LiftedTrajectory traj;
    traj.times = times;
    traj.q.reserve(samples);
    traj.p.reserve(samples);

    State x(2 * n);
    for (std::size_t s = 0; s < n; ++s) {
        x[s] = q0[s];
        x[n + s] = p0[s];
    }
    auto stepper = ode::make_controlled(tol, tol, ode::runge_kutta_dopri5<State>());
    ode::integrate_times(stepper, sys, x, times.begin(), times.end(), h,
                         [&](const State& y, double) {
                             traj.q.emplace_back(y.begin(), y.begin() + std::ptrdiff_t(n));
                             traj.p.emplace_back(y.begin() + std::ptrdiff_t(n), y.end());
                         });
    for (auto& qs : traj.q)
        for (auto& z : qs)
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
                throw flow_error("lifted flow left the chart");
    return traj;
}

// Conjugate momentum over a scalar series from the first Hamilton
// equation: the Okamoto y from (x, x') for IV, the torus v from (u, u')
// for III. This is what lets a position series alone certify the flow.
template <class V>
V scalar_momentum(PainleveKind kind, const PainleveParams<V>& par, const V& charge, const V& t,
                  const V& u, const V& du) {
    const V two(2);
    switch (kind) {
        case PainleveKind::IV:
            if (u == V(0) || par.theta3 == V(0))
                throw flow_error("Okamoto chart singular: x = 0");
            return (du - two * u * u + two * (t * par.theta3 + par.theta2) * u +
                    charge * par.theta3 + two * par.theta3 * par.thetat) /
                   (two * par.theta3 * u);
        case PainleveKind::III:
            if (u == V(0) || u == V(1)) throw flow_error("scalar form singular at u in {0, 1}");
            return (t * du + two * par.theta1 * u + charge) / (two * u * (u - V(1)));
        default:
            throw std::invalid_argument("no momentum completion for this kind");
    }
}

namespace detail {

// Five-point centered stencils on a uniform grid; valid on [2, n-3].
inline Complex stencil_d1(const std::vector<Complex>& f, std::size_t i, double h) {
    return (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h);
}

inline Complex stencil_d2(const std::vector<Complex>& f, std::size_t i, double h) {
    return (-f[i - 2] + 16.0 * f[i - 1] - 30.0 * f[i] + 16.0 * f[i + 1] - f[i + 2]) /
           (12.0 * h * h);
}

inline double uniform_step(const std::vector<double>& times) {
    const double h = times[1] - times[0];
    for (std::size_t i = 1; i + 1 < times.size(); ++i)
        if (std::abs(times[i + 1] - times[i] - h) > 1e-9 * std::max(1.0, std::abs(h)))
            throw std::invalid_argument("residual grid must be uniformly spaced");
    return h;
}

}  // namespace detail

// Largest defect of the scalar form along a sampled trajectory. Every
// derivative comes from finite differences of the samples alone, so the
// check is independent of the vector field that produced them:
//   V  : second differences of u against the Gambier acceleration,
//   IV : y rebuilt from (x, x'), then y' against -dH/dx,
//   III: v rebuilt from (u, u'), then v' against -dH/du,
//   II : the P34 pair (q, p) against q' = p, p' = -dH/dq.
inline double scalar_residual(PainleveKind kind, const PainleveParams<Complex>& par,
                              const Complex& charge, const ScalarTrajectory& traj) {
    const std::size_t n = traj.times.size();
    if (traj.u.size() != n || traj.v.size() != n)
        throw std::invalid_argument("trajectory components disagree in length");
    if (n < 9) throw flow_error("differentiation stencil underflow near trajectory ends");
    const double h = detail::uniform_step(traj.times);
    auto dpar = dual_params(par);
    Dual<Complex> dc(charge);
    double worst = 0.0;
    auto record = [&](const Complex& r) { worst = std::max(worst, std::abs(r)); };

    switch (kind) {
        case PainleveKind::VI:
            throw std::invalid_argument("no scalar reduction for the four-point Fuchsian kind");
        case PainleveKind::V: {
            for (std::size_t i = 2; i + 2 < n; ++i) {
                Complex t(traj.times[i]);
                Complex du = detail::stencil_d1(traj.u, i, h);
                Complex ddu = detail::stencil_d2(traj.u, i, h);
                record(ddu - gambier_acceleration(par, charge, t, traj.u[i], du));
            }
            return worst;
        }
        case PainleveKind::IV: {
            std::vector<Complex> y(n);
            for (std::size_t i = 2; i + 2 < n; ++i) {
                Complex t(traj.times[i]);
                Complex dx = detail::stencil_d1(traj.u, i, h);
                y[i] = scalar_momentum(kind, par, charge, t, traj.u[i], dx);
            }
            for (std::size_t i = 4; i + 4 < n; ++i) {
                Complex t(traj.times[i]);
                Complex dy = detail::stencil_d1(y, i, h);
                Complex hx = reduced_hamiltonian(PainleveKind::IV, dpar, dc, Dual<Complex>(t),
                                                 Dual<Complex>::variable(traj.u[i]),
                                                 Dual<Complex>(y[i]))
                                 .der;
                record(dy + hx);
            }
            return worst;
        }
        case PainleveKind::III: {
            std::vector<Complex> v(n);
            for (std::size_t i = 2; i + 2 < n; ++i) {
                Complex t(traj.times[i]);
                Complex du = detail::stencil_d1(traj.u, i, h);
                v[i] = scalar_momentum(kind, par, charge, t, traj.u[i], du);
            }
            for (std::size_t i = 4; i + 4 < n; ++i) {
                Complex t(traj.times[i]);
                Complex dv = detail::stencil_d1(v, i, h);
                Complex hu = reduced_hamiltonian(PainleveKind::III, dpar, dc, Dual<Complex>(t),
                                                 Dual<Complex>::variable(traj.u[i]),
                                                 Dual<Complex>(v[i]))
                                 .der;
                record(dv + hu);
            }
            return worst;
        }
        case PainleveKind::II: {
            std::vector<Complex> qs(n), ps(n);
            for (std::size_t i = 0; i < n; ++i) {
                auto [qq, pp] = p34_from_torus(par, charge, traj.u[i], traj.v[i]);
                // stay on one branch of the double cover along the path
                if (i > 0 && (std::conj(qs[i - 1]) * qq).real() < 0.0) {
                    qq = -qq;
                    pp = -pp;
                }
                qs[i] = qq;
                ps[i] = pp;
            }
            for (std::size_t i = 2; i + 2 < n; ++i) {
                Complex t(traj.times[i]);
                Complex dq = detail::stencil_d1(qs, i, h);
                Complex dp = detail::stencil_d1(ps, i, h);
                Complex hq = p34_hamiltonian(dpar, dc, Dual<Complex>(t),
                                             Dual<Complex>::variable(qs[i]),
                                             Dual<Complex>(ps[i]))
                                 .der;
                record(dq - ps[i]);
                record(dp + hq);
            }
            return worst;
        }
    }
    throw std::invalid_argument("unknown Painleve kind");
}

}  // namespace isolab

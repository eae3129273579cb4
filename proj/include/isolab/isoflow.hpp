// Non-autonomous Hamiltonian flows in the lifted (Q, P) coordinates:
// velocity-weighted direction Hamiltonians along piecewise-linear routes in
// time space, adaptive integration with log tau accumulated by the same
// quadrature, one-form and zero-curvature diagnostics, the pointwise action
// identity, and the explicit 2 x 2 Darboux parametrizations of rank 1..3.
//
// Scalars are generic where the operation is algebraic (exact fields, dual
// numbers, complex doubles); the integrator itself runs over complex
// doubles. Time coordinates are never part of the integrated state: the
// route prescribes them and the state carries only phase-space entries.
#pragma once

#include "isolab/connection.hpp"
#include "isolab/monomial_matrix.hpp"
#include "isolab/poly.hpp"
#include "isolab/rational.hpp"
#include "isolab/takiff.hpp"

#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace isolab {

using Complex = std::complex<double>;

// Dynamical failures: routes through collisions, collapsed steps, states
// that do not cover a Hamiltonian's generators, singular parametrizations.
struct flow_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Phase point of a multi-pole system. Pole i owns lifted slots
// slot_base(i) .. slot_base(i) + rank(i) in the global numbering used by
// the Q/P generators of its Hamiltonians.
template <class V>
struct FlowState {
    std::size_t m = 0;
    std::vector<V> positions;               // u_1 .. u_n
    std::vector<std::vector<V>> times;      // per pole: t_1 .. t_r (empty for rank 0)
    std::vector<std::vector<Matrix<V>>> Q;  // per pole: slots 0 .. r
    std::vector<std::vector<Matrix<V>>> P;
    std::vector<Matrix<V>> infinity_part;   // constant polynomial part

    std::size_t pole_count() const { return positions.size(); }
    int rank(std::size_t i) const { return int(Q.at(i).size()) - 1; }

    int slot_base(std::size_t i) const {
        int base = 0;
        for (std::size_t j = 0; j < i; ++j) base += rank(j) + 1;
        return base;
    }
    std::size_t total_slots() const { return std::size_t(slot_base(pole_count())); }
};

template <class V>
void validate_state(const FlowState<V>& st) {
    const std::size_t n = st.pole_count();
    if (st.times.size() != n || st.Q.size() != n || st.P.size() != n)
        throw std::invalid_argument("state pole lists disagree");
    if (st.m == 0) throw std::invalid_argument("state dimension is zero");
    for (std::size_t i = 0; i < n; ++i) {
        if (st.Q[i].empty() || st.Q[i].size() != st.P[i].size())
            throw std::invalid_argument("state slot lists disagree");
        if (st.times[i].size() + 1 != st.Q[i].size())
            throw std::invalid_argument("time count must equal pole rank");
        for (const auto& fam : {st.Q[i], st.P[i]})
            for (const auto& M : fam)
                if (M.rows() != st.m || M.cols() != st.m)
                    throw std::invalid_argument("state matrix shape mismatch");
    }
    for (const auto& M : st.infinity_part)
        if (M.rows() != st.m || M.cols() != st.m)
            throw std::invalid_argument("state matrix shape mismatch");
}

// One deformation coordinate: the position u_i (k = 0) or the time t_k of
// pole i (k >= 1).
struct TimeCoord {
    std::size_t pole = 0;
    int k = 0;
};

inline std::string time_coord_name(const TimeCoord& c) {
    if (c.k == 0) return "u_" + std::to_string(c.pole + 1);
    return "t_" + std::to_string(c.k) + "^(" + std::to_string(c.pole + 1) + ")";
}

// Flat layout of the deformation coordinates: all positions first, then the
// times of each pole in pole order.
template <class V>
std::size_t time_dimension(const FlowState<V>& st) {
    std::size_t d = st.pole_count();
    for (const auto& t : st.times) d += t.size();
    return d;
}

template <class V>
std::vector<TimeCoord> time_coords(const FlowState<V>& st) {
    std::vector<TimeCoord> out;
    for (std::size_t i = 0; i < st.pole_count(); ++i) out.push_back({i, 0});
    for (std::size_t i = 0; i < st.pole_count(); ++i)
        for (int k = 1; k <= int(st.times[i].size()); ++k) out.push_back({i, k});
    return out;
}

template <class V>
std::vector<V> time_point(const FlowState<V>& st) {
    std::vector<V> out = st.positions;
    for (const auto& t : st.times) out.insert(out.end(), t.begin(), t.end());
    return out;
}

template <class V>
void set_time_point(FlowState<V>& st, const std::vector<V>& coords) {
    if (coords.size() != time_dimension(st)) throw std::invalid_argument("time point dimension");
    std::size_t idx = 0;
    for (auto& u : st.positions) u = coords[idx++];
    for (auto& t : st.times)
        for (auto& tk : t) tk = coords[idx++];
}

// Connection whose matrix coefficients are the lifted products of the slot
// generators, with positions and times taken numerically from the state.
template <class V>
Connection<V, Poly<V>> symbolic_connection(const FlowState<V>& st) {
    validate_state(st);
    std::vector<PoleData<V, Poly<V>>> poles;
    for (std::size_t i = 0; i < st.pole_count(); ++i) {
        auto slots = symbolic_lifted_slots<V>(st.slot_base(i), st.rank(i), st.m);
        poles.push_back({st.positions[i], lifted_A(slots.Q, slots.P).A, st.times[i]});
    }
    std::vector<Matrix<Poly<V>>> inf;
    for (const auto& M : st.infinity_part) inf.push_back(to_poly_matrix(M));
    return Connection<V, Poly<V>>(st.m, std::move(poles), std::move(inf));
}

// The same connection with the slot products evaluated at the state.
template <class V>
Connection<V, V> numeric_connection(const FlowState<V>& st) {
    validate_state(st);
    std::vector<PoleData<V, V>> poles;
    for (std::size_t i = 0; i < st.pole_count(); ++i)
        poles.push_back({st.positions[i], lifted_A(st.Q[i], st.P[i]).A, st.times[i]});
    return Connection<V, V>(st.m, std::move(poles), st.infinity_part);
}

// Value of one phase generator at the state; anything the state does not
// carry (parameters, foreign slots, out-of-range entries) is an error.
template <class V>
V phase_value(const FlowState<V>& st, const Gen& g) {
    if (g.kind == GenKind::Q || g.kind == GenKind::P) {
        int slot = int(g.slot);
        for (std::size_t i = 0; i < st.pole_count(); ++i) {
            int base = st.slot_base(i);
            if (slot < base + st.rank(i) + 1) {
                if (g.row >= st.m || g.col >= st.m) break;
                const auto& fam = (g.kind == GenKind::Q) ? st.Q[i] : st.P[i];
                return fam[std::size_t(slot - base)](g.row, g.col);
            }
        }
    }
    throw flow_error("state does not cover generator " + gen_name(g));
}

template <class V>
V evaluate_phase(const Poly<V>& f, const FlowState<V>& st) {
    return f.template evaluate<V>([&](const Gen& g) { return phase_value(st, g); });
}

// Gradient of f in the phase generators, evaluated at the state. Products
// are split around each factor instead of divided, so zero values are safe.
template <class V>
std::map<std::uint64_t, V> phase_gradient(const Poly<V>& f, const FlowState<V>& st) {
    std::map<std::uint64_t, V> grad;
    std::vector<V> vals;
    for (const auto& [mono, c] : f.terms()) {
        vals.clear();
        for (const auto& factor : mono) vals.push_back(phase_value(st, Gen::from_key(factor.first)));
        for (std::size_t i = 0; i < mono.size(); ++i) {
            V g = c * V(int(mono[i].second));
            for (std::size_t j = 0; j < mono.size(); ++j) {
                std::uint32_t e = mono[j].second - (j == i ? 1 : 0);
                for (std::uint32_t rep = 0; rep < e; ++rep) g = g * vals[j];
            }
            auto [it, fresh] = grad.try_emplace(mono[i].first, g);
            if (!fresh) it->second += g;
        }
    }
    return grad;
}

// X_H in lifted coordinates: Qdot_{j,ab} = dH/dP_{j,ba} and
// Pdot_{j,ab} = -dH/dQ_{j,ba}; the transposition matches the trace pairing.
// Positions and times are carried externally, so their components are zero.
template <class V>
FlowState<V> hamiltonian_vector_field(const Poly<V>& H, const FlowState<V>& st) {
    validate_state(st);
    auto grad = phase_gradient(H, st);
    auto at = [&](const Gen& g) -> V {
        auto it = grad.find(g.key());
        return it == grad.end() ? V(0) : it->second;
    };
    FlowState<V> X = st;
    for (auto& u : X.positions) u = V(0);
    for (auto& t : X.times)
        for (auto& tk : t) tk = V(0);
    for (auto& M : X.infinity_part) M = Matrix<V>(st.m, st.m);
    for (std::size_t i = 0; i < st.pole_count(); ++i) {
        int base = st.slot_base(i);
        for (int l = 0; l <= st.rank(i); ++l)
            for (std::size_t a = 0; a < st.m; ++a)
                for (std::size_t b = 0; b < st.m; ++b) {
                    X.Q[i][std::size_t(l)](a, b) = at(p_gen(base + l, int(b), int(a)));
                    X.P[i][std::size_t(l)](a, b) = -at(q_gen(base + l, int(b), int(a)));
                }
    }
    return X;
}

// Hamiltonian attached to one coordinate: the order-zero spectral invariant
// for a position, the triangular-system solution for a time.
template <class V>
Poly<V> direction_hamiltonian(const FlowState<V>& st, const TimeCoord& c) {
    auto conn = symbolic_connection(st);
    if (c.pole >= st.pole_count()) throw std::invalid_argument("direction pole index");
    if (c.k == 0) return pole_hamiltonian(conn, c.pole);
    if (c.k < 1 || c.k > st.rank(c.pole)) throw std::invalid_argument("direction time index");
    return irregular_hamiltonians(conn, c.pole)[std::size_t(c.k - 1)];
}

// All direction Hamiltonians in flat-coordinate order.
template <class V>
std::vector<Poly<V>> all_direction_hamiltonians(const FlowState<V>& st) {
    auto conn = symbolic_connection(st);
    std::vector<Poly<V>> out;
    for (std::size_t i = 0; i < st.pole_count(); ++i) out.push_back(pole_hamiltonian(conn, i));
    for (std::size_t i = 0; i < st.pole_count(); ++i) {
        if (st.rank(i) < 1) continue;
        auto irr = irregular_hamiltonians(conn, i);
        out.insert(out.end(), irr.begin(), irr.end());
    }
    return out;
}

// sum_a velocity_a H_a over the flat coordinates; zero-velocity directions
// cost nothing.
template <class V>
Poly<V> combined_hamiltonian(const FlowState<V>& st, const std::vector<V>& velocity) {
    if (velocity.size() != time_dimension(st))
        throw std::invalid_argument("velocity dimension mismatch");
    auto conn = symbolic_connection(st);
    Poly<V> H;
    const std::size_t n = st.pole_count();
    for (std::size_t i = 0; i < n; ++i)
        if (!(velocity[i] == V(0))) H += velocity[i] * pole_hamiltonian(conn, i);
    std::size_t idx = n;
    for (std::size_t i = 0; i < n; ++i) {
        const int r = st.rank(i);
        if (r < 1) continue;
        bool needed = false;
        for (int k = 0; k < r; ++k)
            if (!(velocity[idx + std::size_t(k)] == V(0))) needed = true;
        if (needed) {
            auto irr = irregular_hamiltonians(conn, i);
            for (int k = 0; k < r; ++k)
                if (!(velocity[idx + std::size_t(k)] == V(0)))
                    H += velocity[idx + std::size_t(k)] * irr[std::size_t(k)];
        }
        idx += std::size_t(r);
    }
    return H;
}

// sum_j Tr(P_j Qdot_j) - 2 H at one state: both sides reduce to generator
// sums, so the value is exact over exact fields. Vanishes identically for
// Hamiltonians of homogeneous degree two in P.
template <class V>
V action_identity_defect(const Poly<V>& H, const FlowState<V>& st) {
    auto grad = phase_gradient(H, st);
    V lhs(0);
    for (const auto& [key, g] : grad) {
        Gen gen = Gen::from_key(key);
        if (gen.kind == GenKind::P) lhs += phase_value(st, gen) * g;
    }
    return lhs - V(2) * evaluate_phase(H, st);
}

// Casimirs of every pole's lifted co-element, flattened pole by pole. They
// commute with any function of the co-elements, so every flow here
// conserves them.
template <class V>
std::vector<V> casimir_values(const FlowState<V>& st) {
    std::vector<V> out;
    for (std::size_t i = 0; i < st.pole_count(); ++i) {
        auto A = lifted_A(st.Q[i], st.P[i]);
        for (int k = 1; k <= st.rank(i); ++k) out.push_back(casimir(A, k));
    }
    return out;
}

// Moment coefficients of one pole; spectral Hamiltonians are invariant
// under the dual slot action, so these matrices are constant along flows.
template <class V>
std::vector<Matrix<V>> moment_values(const FlowState<V>& st, std::size_t pole) {
    return lifted_moment(st.Q.at(pole), st.P.at(pole)).A;
}

// State with every scalar promoted to a dual number and one deformation
// coordinate seeded as the differentiation variable; phase entries stay
// constant, so derived quantities expose explicit time partials.
template <class V>
FlowState<Dual<V>> seed_time_coordinate(const FlowState<V>& st, const TimeCoord& c) {
    FlowState<Dual<V>> out;
    out.m = st.m;
    auto lift = [](const Matrix<V>& M) {
        return M.template map<Dual<V>>([](const V& x) { return Dual<V>(x); });
    };
    for (std::size_t i = 0; i < st.pole_count(); ++i) {
        out.positions.push_back(Dual<V>(st.positions[i]));
        out.times.emplace_back();
        for (const V& t : st.times[i]) out.times.back().push_back(Dual<V>(t));
        out.Q.emplace_back();
        out.P.emplace_back();
        for (const auto& M : st.Q[i]) out.Q.back().push_back(lift(M));
        for (const auto& M : st.P[i]) out.P.back().push_back(lift(M));
    }
    for (const auto& M : st.infinity_part) out.infinity_part.push_back(lift(M));
    if (c.k == 0) out.positions.at(c.pole).der = V(1);
    else out.times.at(c.pole).at(std::size_t(c.k - 1)).der = V(1);
    return out;
}

// ---------------------------------------------------------------------------
// Rational matrix functions of the spectral variable.

// sum_i sum_k principal[i][k] / (lambda - centers[i])^{k+1}
//   + sum_k polynomial[k] lambda^k.
template <class V>
struct RationalMatrixFunction {
    std::size_t m = 0;
    std::vector<V> centers;
    std::vector<std::vector<Matrix<V>>> principal;
    std::vector<Matrix<V>> polynomial;

    bool is_zero() const {
        for (const auto& block : principal)
            for (const auto& C : block)
                if (!C.is_zero()) return false;
        for (const auto& C : polynomial)
            if (!C.is_zero()) return false;
        return true;
    }

    Matrix<V> eval(const V& lambda) const {
        Matrix<V> out(m, m);
        for (std::size_t i = 0; i < centers.size(); ++i) {
            V d = lambda - centers[i];
            if (d == V(0)) throw std::domain_error("evaluation at a pole");
            V inv = V(1) / d;
            V w = inv;
            for (const auto& C : principal[i]) {
                out += w * C;
                w = w * inv;
            }
        }
        V w(1);
        for (const auto& C : polynomial) {
            out += w * C;
            w = w * lambda;
        }
        return out;
    }

    RationalMatrixFunction lambda_derivative() const {
        RationalMatrixFunction d;
        d.m = m;
        d.centers = centers;
        for (const auto& block : principal) {
            d.principal.emplace_back();
            auto& db = d.principal.back();
            db.push_back(Matrix<V>(m, m));
            for (std::size_t k = 0; k < block.size(); ++k)
                db.push_back(V(-int(k) - 1) * block[k]);
        }
        for (std::size_t k = 1; k < polynomial.size(); ++k)
            d.polynomial.push_back(V(int(k)) * polynomial[k]);
        return d;
    }
};

// Spectral one-form coefficient for one coordinate: the termwise lambda
// antiderivative of dA/d(coordinate) with all matrix coefficients frozen,
// and the lambda-independent constant fixed to zero. For a position the
// result is minus the full local principal part; for a time t_k it is
// -sum_{j>=1} (dB_j/dt_k)/j per (lambda-u)^{-j}, where the 1/j cancels
// against the weighted-monomial derivative.
template <class V>
RationalMatrixFunction<V> omega_form(const FlowState<V>& st, const TimeCoord& c) {
    validate_state(st);
    if (c.pole >= st.pole_count()) throw std::invalid_argument("direction pole index");
    const int r = st.rank(c.pole);
    if (c.k < 0 || c.k > r) throw std::invalid_argument("direction time index");
    auto bare = lifted_A(st.Q[c.pole], st.P[c.pole]).A;

    RationalMatrixFunction<V> omega;
    omega.m = st.m;
    std::vector<Matrix<V>> block;
    if (c.k == 0) {
        auto eff = bare;
        if (!st.times[c.pole].empty()) eff = apply_automorphism(bare, st.times[c.pole]);
        for (const auto& B : eff) block.push_back(-B);
    } else {
        // Coefficient of (lambda-u)^{-j}: -sum_{l>=k} A_l [eps^{l-k}] T(eps)^{j-1};
        // the antiderivative's 1/j cancels against the power-rule factor.
        for (int j = 1; j <= r; ++j) {
            auto pw = monomial_power(st.times[c.pole], j - 1, std::size_t(r));
            Matrix<V> C(st.m, st.m);
            for (int l = c.k; l <= r; ++l) C += pw[std::size_t(l - c.k)] * bare[std::size_t(l)];
            block.push_back(-C);
        }
    }
    while (!block.empty() && block.back().is_zero()) block.pop_back();
    if (!block.empty()) {
        omega.centers.push_back(st.positions[c.pole]);
        omega.principal.push_back(std::move(block));
    }
    return omega;
}

// ---------------------------------------------------------------------------
// Routes, integration, trajectories.

enum class RKMethod { dopri5, cash_karp54, fehlberg78 };

struct IntegratorConfig {
    RKMethod method = RKMethod::dopri5;
    double abs_tol = 1e-10;
    double rel_tol = 1e-10;
    double max_step = 0.1;
    double collision_margin = 1e-3;  // lower bound on |u_i - u_j| and |t_1|
};

// Piecewise-linear route through the flat deformation coordinates.
struct FlowPath {
    std::vector<std::vector<Complex>> vertices;
};

namespace detail {

inline double segment_min_modulus(Complex a, Complex b) {
    // min over s in [0,1] of |a + s b|.
    double nb = std::norm(b);
    if (nb == 0.0) return std::abs(a);
    double s = -(a.real() * b.real() + a.imag() * b.imag()) / nb;
    s = std::clamp(s, 0.0, 1.0);
    return std::abs(a + s * b);
}

}  // namespace detail

// Exact closest-approach check of every collision locus along every
// segment: positions pairwise, and the leading time of each pole.
inline void validate_path(const FlowState<Complex>& st, const FlowPath& path, double margin) {
    const std::size_t dim = time_dimension(st);
    if (path.vertices.empty()) throw flow_error("route has no vertices");
    for (const auto& v : path.vertices)
        if (v.size() != dim) throw flow_error("route vertex dimension mismatch");
    auto coords = time_coords(st);
    const std::size_t n = st.pole_count();
    for (std::size_t seg = 0; seg + 1 < path.vertices.size(); ++seg) {
        const auto& v0 = path.vertices[seg];
        const auto& v1 = path.vertices[seg + 1];
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                Complex a = v0[i] - v0[j];
                Complex b = (v1[i] - v0[i]) - (v1[j] - v0[j]);
                if (detail::segment_min_modulus(a, b) < margin)
                    throw flow_error("route passes within the collision margin of u_" +
                                     std::to_string(i + 1) + " = u_" + std::to_string(j + 1) +
                                     " on segment " + std::to_string(seg + 1));
            }
        for (std::size_t idx = n; idx < dim; ++idx) {
            if (coords[idx].k != 1) continue;
            if (detail::segment_min_modulus(v0[idx], v1[idx] - v0[idx]) < margin)
                throw flow_error("route passes within the collision margin of " +
                                 time_coord_name(coords[idx]) + " = 0 on segment " +
                                 std::to_string(seg + 1));
        }
    }
}

struct TauAccumulator {
    Complex log_tau{};
};

struct TrajectorySample {
    double s = 0;          // segment index plus local parameter
    double arclength = 0;  // cumulative route length in time space
    FlowState<Complex> state;
    std::vector<Complex> hamiltonians;  // flat-coordinate order
    Complex log_tau{};
    double action_defect = 0;  // |sum Tr(P Qdot) - 2H| under the active velocity
};

struct Trajectory {
    std::vector<TrajectorySample> samples;
    TauAccumulator tau;
    FlowPath path;
    IntegratorConfig config;
};

namespace detail {

inline std::size_t packed_size(const FlowState<Complex>& st) {
    return 2 * st.total_slots() * st.m * st.m + 1;  // trailing slot: log tau
}

inline void pack_state(const FlowState<Complex>& st, Complex log_tau, std::vector<Complex>& x) {
    x.clear();
    x.reserve(packed_size(st));
    for (const auto& fam : {st.Q, st.P})
        for (const auto& slots : fam)
            for (const auto& M : slots)
                for (std::size_t a = 0; a < M.rows(); ++a)
                    for (std::size_t b = 0; b < M.cols(); ++b) x.push_back(M(a, b));
    x.push_back(log_tau);
}

inline void unpack_state(const std::vector<Complex>& x, FlowState<Complex>& st,
                         Complex* log_tau = nullptr) {
    std::size_t idx = 0;
    for (auto fam : {&FlowState<Complex>::Q, &FlowState<Complex>::P})
        for (auto& slots : st.*fam)
            for (auto& M : slots)
                for (std::size_t a = 0; a < M.rows(); ++a)
                    for (std::size_t b = 0; b < M.cols(); ++b) M(a, b) = x[idx++];
    if (log_tau) *log_tau = x[idx];
}

inline std::string time_location(const FlowState<Complex>& st) {
    std::ostringstream os;
    auto coords = time_coords(st);
    auto vals = time_point(st);
    for (std::size_t i = 0; i < coords.size(); ++i) {
        if (i) os << ", ";
        os << time_coord_name(coords[i]) << " = " << vals[i].real();
        if (vals[i].imag() != 0) os << (vals[i].imag() > 0 ? "+" : "") << vals[i].imag() << "i";
    }
    return os.str();
}

// Right-hand side on one segment: phase entries move under the
// velocity-weighted Hamiltonian, log tau integrates its value.
class SegmentSystem {
public:
    SegmentSystem(FlowState<Complex> shape, std::vector<Complex> start, std::vector<Complex> delta)
        : st_(std::move(shape)), start_(std::move(start)), delta_(std::move(delta)) {}

    void operator()(const std::vector<Complex>& x, std::vector<Complex>& dxdt, double sigma) {
        place(x, sigma);
        Poly<Complex> H = combined_hamiltonian(st_, delta_);
        auto grad = phase_gradient(H, st_);
        auto at = [&](const Gen& g) -> Complex {
            auto it = grad.find(g.key());
            return it == grad.end() ? Complex(0) : it->second;
        };
        dxdt.assign(x.size(), Complex(0));
        std::size_t idx = 0;
        for (std::size_t i = 0; i < st_.pole_count(); ++i) {
            int base = st_.slot_base(i);
            for (int l = 0; l <= st_.rank(i); ++l)
                for (std::size_t a = 0; a < st_.m; ++a)
                    for (std::size_t b = 0; b < st_.m; ++b)
                        dxdt[idx++] = at(p_gen(base + l, int(b), int(a)));
        }
        for (std::size_t i = 0; i < st_.pole_count(); ++i) {
            int base = st_.slot_base(i);
            for (int l = 0; l <= st_.rank(i); ++l)
                for (std::size_t a = 0; a < st_.m; ++a)
                    for (std::size_t b = 0; b < st_.m; ++b)
                        dxdt[idx++] = -at(q_gen(base + l, int(b), int(a)));
        }
        dxdt[idx] = evaluate_phase(H, st_);
    }

    // State view at (x, sigma); shares the shape buffers.
    const FlowState<Complex>& place(const std::vector<Complex>& x, double sigma) {
        std::vector<Complex> coords(start_.size());
        for (std::size_t a = 0; a < coords.size(); ++a) coords[a] = start_[a] + sigma * delta_[a];
        set_time_point(st_, coords);
        unpack_state(x, st_);
        return st_;
    }

    const std::vector<Complex>& velocity() const { return delta_; }

private:
    FlowState<Complex> st_;
    std::vector<Complex> start_, delta_;
};

template <class Stepper, class System, class Observer>
void drive_segment(const IntegratorConfig& cfg, System& sys, std::vector<Complex>& x,
                   Observer&& observe) {
    namespace ode = boost::numeric::odeint;
    auto ctrl = ode::make_controlled<Stepper>(cfg.abs_tol, cfg.rel_tol);
    double sigma = 0.0;
    double dt = std::min(cfg.max_step, 0.25);
    int rejected = 0;
    while (sigma < 1.0 - 1e-14) {
        dt = std::min({dt, cfg.max_step, 1.0 - sigma});
        if (ode::fail == ctrl.try_step(sys, x, sigma, dt)) {
            if (++rejected > 120 || dt < 1e-15)
                throw flow_error("adaptive step collapsed at " +
                                 time_location(sys.place(x, sigma)));
            continue;
        }
        rejected = 0;
        observe(x, sigma);
    }
}

template <class System, class Observer>
void drive_segment(const IntegratorConfig& cfg, System& sys, std::vector<Complex>& x,
                   Observer&& observe) {
    namespace ode = boost::numeric::odeint;
    using state = std::vector<Complex>;
    switch (cfg.method) {
        case RKMethod::dopri5:
            drive_segment<ode::runge_kutta_dopri5<state>>(cfg, sys, x, observe);
            break;
        case RKMethod::cash_karp54:
            drive_segment<ode::runge_kutta_cash_karp54<state>>(cfg, sys, x, observe);
            break;
        case RKMethod::fehlberg78:
            drive_segment<ode::runge_kutta_fehlberg78<state>>(cfg, sys, x, observe);
            break;
    }
}

}  // namespace detail

// Integrates the phase state along the route. The route prescribes the
// time coordinates; log tau rides as an extra component driven by the
// velocity-weighted Hamiltonian value, so its quadrature matches the
// integrator order. Samples record every accepted step.
inline Trajectory integrate_flow(const FlowState<Complex>& initial, const FlowPath& path,
                                 const IntegratorConfig& config = {}) {
    validate_state(initial);
    validate_path(initial, path, config.collision_margin);
    {
        auto own = time_point(initial);
        double err = 0;
        for (std::size_t a = 0; a < own.size(); ++a)
            err = std::max(err, std::abs(own[a] - path.vertices[0][a]));
        if (err > 1e-9)
            throw flow_error("route must start at the state's time point (offset " +
                             std::to_string(err) + ")");
    }

    Trajectory traj;
    traj.path = path;
    traj.config = config;

    std::vector<Complex> x;
    detail::pack_state(initial, Complex(0), x);
    std::vector<double> seg_len;
    for (std::size_t seg = 0; seg + 1 < path.vertices.size(); ++seg) {
        double L = 0;
        for (std::size_t a = 0; a < path.vertices[seg].size(); ++a)
            L += std::norm(path.vertices[seg + 1][a] - path.vertices[seg][a]);
        seg_len.push_back(std::sqrt(L));
    }

    auto record = [&](detail::SegmentSystem& sys, const std::vector<Complex>& xv, double sigma,
                      std::size_t seg) {
        TrajectorySample smp;
        smp.state = sys.place(xv, sigma);
        smp.s = double(seg) + sigma;
        smp.arclength = seg_len.empty() ? 0.0 : sigma * seg_len[seg];
        for (std::size_t k = 0; k < seg && k < seg_len.size(); ++k) smp.arclength += seg_len[k];
        detail::unpack_state(xv, smp.state, &smp.log_tau);
        auto hams = all_direction_hamiltonians(smp.state);
        for (const auto& H : hams) smp.hamiltonians.push_back(evaluate_phase(H, smp.state));
        Poly<Complex> Hseg = combined_hamiltonian(smp.state, sys.velocity());
        smp.action_defect = std::abs(action_identity_defect(Hseg, smp.state));
        traj.samples.push_back(std::move(smp));
    };

    bool first = true;
    for (std::size_t seg = 0; seg + 1 < path.vertices.size(); ++seg) {
        std::vector<Complex> delta(path.vertices[seg].size());
        for (std::size_t a = 0; a < delta.size(); ++a)
            delta[a] = path.vertices[seg + 1][a] - path.vertices[seg][a];
        detail::SegmentSystem sys(initial, path.vertices[seg], delta);
        if (first) {
            record(sys, x, 0.0, seg);
            first = false;
        }
        detail::drive_segment(config, sys, x,
                              [&](const std::vector<Complex>& xv, double sigma) {
                                  record(sys, xv, sigma, seg);
                              });
    }
    if (path.vertices.size() == 1) {
        detail::SegmentSystem sys(initial, path.vertices[0],
                                  std::vector<Complex>(path.vertices[0].size(), Complex(0)));
        record(sys, x, 0.0, 0);
    }
    traj.tau.log_tau = traj.samples.empty() ? Complex(0) : traj.samples.back().log_tau;
    return traj;
}

// Largest pointwise defect of the action identity along the trajectory,
// recomputed from the stored states under each segment's velocity.
inline double malgrange_action_check(const Trajectory& traj) {
    double worst = 0;
    const std::size_t nseg =
        traj.path.vertices.size() > 1 ? traj.path.vertices.size() - 1 : 1;
    for (const auto& smp : traj.samples) {
        std::size_t seg = smp.s <= 0 ? 0 : std::min(std::size_t(std::ceil(smp.s)) - 1, nseg - 1);
        std::vector<Complex> delta(time_dimension(smp.state), Complex(0));
        if (traj.path.vertices.size() > 1)
            for (std::size_t a = 0; a < delta.size(); ++a)
                delta[a] = traj.path.vertices[seg + 1][a] - traj.path.vertices[seg][a];
        Poly<Complex> H = combined_hamiltonian(smp.state, delta);
        worst = std::max(worst, std::abs(action_identity_defect(H, smp.state)));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Zero-curvature diagnostics.

namespace detail {

// Classical fixed-step fourth-order sweep of the one-coordinate flow; the
// velocity is 1 in the chosen coordinate, so delta is a coordinate offset.
inline FlowState<Complex> rk4_displace(const FlowState<Complex>& st, const TimeCoord& dir,
                                       double delta, double step) {
    FlowState<Complex> cur = st;
    auto coords = time_coords(st);
    std::size_t dir_idx = coords.size();
    for (std::size_t a = 0; a < coords.size(); ++a)
        if (coords[a].pole == dir.pole && coords[a].k == dir.k) dir_idx = a;
    if (dir_idx == coords.size()) throw std::invalid_argument("direction not in state");

    std::vector<Complex> vel(coords.size(), Complex(0));
    vel[dir_idx] = Complex(1);
    auto base_point = time_point(st);

    std::vector<Complex> x;
    pack_state(cur, Complex(0), x);
    auto rhs = [&](const std::vector<Complex>& xv, double s) {
        auto pt = base_point;
        pt[dir_idx] += Complex(s);
        set_time_point(cur, pt);
        unpack_state(xv, cur);
        Poly<Complex> H = combined_hamiltonian(cur, vel);
        auto grad = phase_gradient(H, cur);
        auto at = [&](const Gen& g) -> Complex {
            auto it = grad.find(g.key());
            return it == grad.end() ? Complex(0) : it->second;
        };
        std::vector<Complex> d(xv.size(), Complex(0));
        std::size_t idx = 0;
        for (std::size_t i = 0; i < cur.pole_count(); ++i) {
            int base = cur.slot_base(i);
            for (int l = 0; l <= cur.rank(i); ++l)
                for (std::size_t a = 0; a < cur.m; ++a)
                    for (std::size_t b = 0; b < cur.m; ++b)
                        d[idx++] = at(p_gen(base + l, int(b), int(a)));
        }
        for (std::size_t i = 0; i < cur.pole_count(); ++i) {
            int base = cur.slot_base(i);
            for (int l = 0; l <= cur.rank(i); ++l)
                for (std::size_t a = 0; a < cur.m; ++a)
                    for (std::size_t b = 0; b < cur.m; ++b)
                        d[idx++] = -at(q_gen(base + l, int(b), int(a)));
        }
        return d;
    };
    auto axpy = [](const std::vector<Complex>& a, double c, const std::vector<Complex>& b) {
        std::vector<Complex> r(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + c * b[i];
        return r;
    };

    int n = std::max(1, int(std::ceil(std::abs(delta) / step)));
    double h = delta / n;
    double s = 0;
    for (int it = 0; it < n; ++it) {
        auto k1 = rhs(x, s);
        auto k2 = rhs(axpy(x, h / 2, k1), s + h / 2);
        auto k3 = rhs(axpy(x, h / 2, k2), s + h / 2);
        auto k4 = rhs(axpy(x, h, k3), s + h);
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] += (h / 6) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        s += h;
    }
    auto pt = base_point;
    pt[dir_idx] += Complex(delta);
    set_time_point(cur, pt);
    unpack_state(x, cur);
    return cur;
}

// Offsets +-h, +-2h for the five-point central first derivative.
inline std::array<FlowState<Complex>, 4> fd_stencil(const FlowState<Complex>& st,
                                                    const TimeCoord& dir, double h,
                                                    double step) {
    return {rk4_displace(st, dir, h, step), rk4_displace(st, dir, -h, step),
            rk4_displace(st, dir, 2 * h, step), rk4_displace(st, dir, -2 * h, step)};
}

inline double fd_step_width(const IntegratorConfig& cfg, double fd_scale) {
    return fd_scale * std::pow(std::max(cfg.abs_tol, 1e-14), 0.25);
}

inline double max_abs(const Matrix<Complex>& M) {
    double worst = 0;
    for (std::size_t a = 0; a < M.rows(); ++a)
        for (std::size_t b = 0; b < M.cols(); ++b) worst = std::max(worst, std::abs(M(a, b)));
    return worst;
}

}  // namespace detail

// d/d(coordinate) of the assembled A(lambda) along the one-coordinate flow:
// fourth-order central difference of states displaced by fixed-step sweeps.
// The difference width follows the tolerance, so the probe error scales
// linearly with it.
inline Matrix<Complex> flow_time_derivative(const FlowState<Complex>& st, const TimeCoord& dir,
                                            const Complex& lambda,
                                            const IntegratorConfig& config = {},
                                            double fd_scale = 0.8) {
    const double h = detail::fd_step_width(config, fd_scale);
    auto stencil = detail::fd_stencil(st, dir, h, h / 16);
    Matrix<Complex> ap = assemble(numeric_connection(stencil[0]), lambda);
    Matrix<Complex> am = assemble(numeric_connection(stencil[1]), lambda);
    Matrix<Complex> ap2 = assemble(numeric_connection(stencil[2]), lambda);
    Matrix<Complex> am2 = assemble(numeric_connection(stencil[3]), lambda);
    return Complex(8.0 / (12 * h)) * (ap - am) - Complex(1.0 / (12 * h)) * (ap2 - am2);
}

// Max over the sample points of |dA - d(Omega)/d(lambda) + [A, Omega]|,
// with dA the flow finite difference above and Omega the frozen-coefficient
// one-form at the given state.
inline double zero_curvature_residual(const FlowState<Complex>& st, const TimeCoord& dir,
                                      const std::vector<Complex>& lambda_samples,
                                      const IntegratorConfig& config = {},
                                      double fd_scale = 0.8) {
    validate_state(st);
    for (const Complex& lam : lambda_samples)
        for (const Complex& u : st.positions)
            if (std::abs(lam - u) < config.collision_margin)
                throw flow_error("spectral sample within the collision margin of a pole");

    const double h = detail::fd_step_width(config, fd_scale);
    auto stencil = detail::fd_stencil(st, dir, h, h / 16);
    auto conn = numeric_connection(st);
    auto omega = omega_form(st, dir);
    auto omega_prime = omega.lambda_derivative();

    double worst = 0;
    for (const Complex& lam : lambda_samples) {
        Matrix<Complex> dA =
            Complex(8.0 / (12 * h)) * (assemble(numeric_connection(stencil[0]), lam) -
                                       assemble(numeric_connection(stencil[1]), lam)) -
            Complex(1.0 / (12 * h)) * (assemble(numeric_connection(stencil[2]), lam) -
                                       assemble(numeric_connection(stencil[3]), lam));
        Matrix<Complex> A0 = assemble(conn, lam);
        Matrix<Complex> R = dA - omega_prime.eval(lam) + commutator(A0, omega.eval(lam));
        worst = std::max(worst, detail::max_abs(R));
    }
    return worst;
}

// Public wrapper for the displacement sweep used by the stencil; exposed so
// mismatched-state diagnostics can be composed from the same pieces.
inline FlowState<Complex> flow_displace(const FlowState<Complex>& st, const TimeCoord& dir,
                                        double delta, double step) {
    validate_state(st);
    return detail::rk4_displace(st, dir, delta, step);
}

// ---------------------------------------------------------------------------
// Explicit 2 x 2 Darboux parametrizations of one pole of rank 1, 2, or 3.

template <class V>
struct SlotFamily {
    std::vector<Matrix<V>> Q, P;
};

namespace detail {

template <class V>
Matrix<V> diag_pm(const V& t) {
    Matrix<V> D(2, 2);
    D(0, 0) = t;
    D(1, 1) = V(0) - t;
    return D;
}

// Solves [X, theta_top diag(1,-1)] = T for off-diagonal X; T must have zero
// diagonal, which holds identically for the rank-3 chain below.
template <class V>
Matrix<V> solve_offdiag(const Matrix<V>& T, const V& theta_top) {
    Matrix<V> X(2, 2);
    V two_t = V(2) * theta_top;
    X(0, 1) = (V(0) - T(0, 1)) / two_t;
    X(1, 0) = T(1, 0) / two_t;
    return X;
}

}  // namespace detail

// Lifted slots whose co-element matches the explicit 2 x 2 normal forms:
// moment coefficients theta_k diag(1,-1), leading coefficient
// theta_top diag(1,-1) after the diagonal gauge. theta has degree+1 entries
// (level order), and the local chart carries degree+1 canonical pairs.
template <class V>
SlotFamily<V> sl2_takiff_parametrization(int degree, const std::vector<V>& theta,
                                         const std::vector<V>& q, const std::vector<V>& p) {
    if (degree < 1 || degree > 3) throw std::invalid_argument("degree must be 1, 2, or 3");
    const std::size_t nc = std::size_t(degree) + 1;
    if (theta.size() != nc) throw std::invalid_argument("need degree+1 spectral scalars");
    if (q.size() != nc || p.size() != nc) throw std::invalid_argument("need degree+1 coordinate pairs");
    if (theta.back() == V(0)) throw flow_error("leading spectral scalar must not vanish");

    using detail::diag_pm;
    const V two(2);
    SlotFamily<V> out;

    if (degree == 1) {
        // Q_0 is the unipotent product [[1,q1],[0,1]] [[1,0],[q2,1]].
        Matrix<V> Q0(2, 2);
        Q0(0, 0) = V(1) + q[0] * q[1];
        Q0(0, 1) = q[0];
        Q0(1, 0) = q[1];
        Q0(1, 1) = V(1);
        Matrix<V> L1(2, 2);
        L1(0, 1) = (V(0) - p[1]) / (two * theta[1]);
        L1(1, 0) = (p[1] * q[1] * q[1] - two * theta[0] * q[1] + p[0]) / (two * theta[1]);
        Matrix<V> Q0i = inverse(Q0);
        Matrix<V> Q1 = Q0 * L1;
        Matrix<V> P1 = diag_pm(theta[1]) * Q0i;
        Matrix<V> P0 = (diag_pm(theta[0]) - P1 * Q1) * Q0i;
        out.Q = {Q0, Q1};
        out.P = {P0, P1};
        return out;
    }

    if (degree == 2) {
        Matrix<V> Q0(2, 2);
        Q0(0, 0) = V(1);
        Q0(0, 1) = q[0];
        Q0(1, 0) = q[1];
        Q0(1, 1) = V(1);
        V det = V(1) - q[0] * q[1];
        if (det == V(0)) throw flow_error("coordinate chart singular: q1 q2 = 1");
        Matrix<V> L1(2, 2);
        L1(0, 1) = (V(0) - p[2]) / (two * theta[2]);
        L1(1, 0) = q[2];
        // M11 is the (1,1) entry of the gauged residue; its off-diagonal
        // completions make (q_i, p_i) canonical.
        V M11 = theta[0] - p[2] * q[2];
        Matrix<V> L2(2, 2);
        L2(0, 1) = ((V(0) - p[1]) * det + theta[1] * p[2] / theta[2] - q[0] * M11) /
                   (two * theta[2]);
        L2(1, 0) = (p[0] * det - two * theta[1] * q[2] - q[1] * M11) / (two * theta[2]);
        Matrix<V> Q0i = inverse(Q0);
        Matrix<V> Q1 = Q0 * L1;
        Matrix<V> Q2 = Q0 * L2;
        Matrix<V> P2 = diag_pm(theta[2]) * Q0i;
        Matrix<V> P1 = (diag_pm(theta[1]) - P2 * Q1) * Q0i;
        Matrix<V> P0 = (diag_pm(theta[0]) - P1 * Q1 - P2 * Q2) * Q0i;
        out.Q = {Q0, Q1, Q2};
        out.P = {P0, P1, P2};
        return out;
    }

    // Degree 3: diagonal-gauge section with Q_0 = 1. The co-element
    // coefficients are prescribed in closed form; the slots are recovered
    // level by level, each step solving an off-diagonal commutator.
    const V &t1 = theta[0], &t2 = theta[1], &t3 = theta[2], &t4 = theta[3];
    const V &q2c = q[1], &q3 = q[2], &q4 = q[3];
    const V &p1 = p[0], &p2 = p[1], &p3 = p[2], &p4 = p[3];
    const V four(4);

    Matrix<V> T2(2, 2);
    T2(0, 0) = t3;
    T2(0, 1) = V(0) - two * t4 * q3;
    T2(1, 0) = two * t4 * q4;
    T2(1, 1) = V(0) - t3;
    Matrix<V> T1(2, 2);
    T1(0, 0) = two * t4 * q3 * q4 + t2;
    T1(0, 1) = (V(0) - t4) * q3 * q3 * q3 * q4 * q4 + (t3 - four * t4) * q4 * q3 * q3 -
               t4 * q3 + p4;
    T1(1, 0) = (V(0) - t4) * q3 * q3 * q4 * q4 * q4 + (t3 - four * t4) * q4 * q4 * q3 +
               (two * t3 - t4) * q4 + p3;
    T1(1, 1) = V(0) - T1(0, 0);
    Matrix<V> T0(2, 2);
    T0(0, 0) = q3 * p3 - q4 * p4 + t1;
    T0(0, 1) = p2;
    T0(1, 0) = p2 * q2c * q2c - two * p3 * q2c * q3 + two * p4 * q2c * q4 -
               two * t1 * q2c + p1;
    T0(1, 1) = V(0) - T0(0, 0);

    Matrix<V> Q0 = Matrix<V>::identity(2);
    Matrix<V> P3 = detail::diag_pm(t4);
    Matrix<V> Q1 = detail::solve_offdiag(T2 - detail::diag_pm(t3), t4);
    Matrix<V> P2 = detail::diag_pm(t3) - P3 * Q1;
    Matrix<V> Q2 = detail::solve_offdiag(T1 - detail::diag_pm(t2) - commutator(Q1, P2), t4);
    Matrix<V> P1 = detail::diag_pm(t2) - P2 * Q1 - P3 * Q2;
    Matrix<V> Q3 = detail::solve_offdiag(
        T0 - detail::diag_pm(t1) - commutator(Q1, P1) - commutator(Q2, P2), t4);
    Matrix<V> P0 = detail::diag_pm(t1) - P1 * Q1 - P2 * Q2 - P3 * Q3;
    out.Q = {Q0, Q1, Q2, Q3};
    out.P = {P0, P1, P2, P3};
    return out;
}

}  // namespace isolab

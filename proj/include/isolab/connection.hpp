// Rational connections with higher-order poles: assembly, exact local
// Laurent analysis, spectral invariants, and the Hamiltonians attached to
// pole positions and deformation times.
//
// Two scalar types: F is the coefficient field of positions and times
// (exact rationals for identity checks, complex doubles for flows); T is
// the entry ring of the matrix coefficients (F itself, or polynomials in
// phase-space generators). All residues come from truncated Laurent
// convolution, never from quadrature.
#pragma once

#include "isolab/matrix.hpp"
#include "isolab/monomial_matrix.hpp"
#include "isolab/poly.hpp"

#include <stdexcept>
#include <vector>

namespace isolab {

// One finite pole: position u, Poincare rank r, bare coefficients A_0..A_r
// and times t_1..t_r. The effective principal-part coefficients
// B_k = sum_{j>=k} A_j M_{k,j}(t) are always derived, never stored.
template <class F, class T>
struct PoleData {
    F position{};
    std::vector<Matrix<T>> bare;  // A_0..A_r
    std::vector<F> times;         // t_1..t_r (empty for a simple pole)

    int rank() const { return int(bare.size()) - 1; }

    std::vector<Matrix<T>> effective() const {
        if (times.empty()) return bare;
        return apply_automorphism(bare, times);
    }
};

// A(lambda) = sum_i sum_k B_k^(i)/(lambda-u_i)^{k+1} + sum_k A_k^inf lambda^{k-1}.
template <class F, class T>
struct Connection {
    std::size_t m = 0;
    std::vector<PoleData<F, T>> poles;
    std::vector<Matrix<T>> infinity_part;  // A_1^inf, A_2^inf, ...

    Connection(std::size_t m_, std::vector<PoleData<F, T>> poles_,
               std::vector<Matrix<T>> inf_part = {})
        : m(m_), poles(std::move(poles_)), infinity_part(std::move(inf_part)) {
        for (auto& p : poles) {
            if (p.bare.empty()) throw std::invalid_argument("pole without coefficients");
            if (!p.times.empty() && int(p.times.size()) != p.rank())
                throw std::invalid_argument("time count must equal pole rank");
            for (auto& B : p.bare)
                if (B.rows() != m || B.cols() != m)
                    throw std::invalid_argument("coefficient shape mismatch");
        }
        for (auto& B : infinity_part)
            if (B.rows() != m || B.cols() != m)
                throw std::invalid_argument("coefficient shape mismatch");
        for (std::size_t i = 0; i < poles.size(); ++i)
            for (std::size_t j = i + 1; j < poles.size(); ++j)
                if (poles[i].position == poles[j].position)
                    throw std::invalid_argument("coincident pole positions");
    }
};

namespace detail {
// C(n+k, k) style binomials landed in the scalar field.
template <class F>
F binom(int n, int k) {
    if (k < 0 || k > n) return F(0);
    F num(1), den(1);
    for (int i = 1; i <= k; ++i) {
        num = num * F(n - k + i);
        den = den * F(i);
    }
    return num / den;
}

template <class F>
F int_pow(const F& x, int n) {
    F r(1);
    for (int i = 0; i < n; ++i) r = r * x;
    return r;
}
}  // namespace detail

template <class F, class T>
Matrix<T> assemble(const Connection<F, T>& conn, const F& lambda) {
    Matrix<T> out(conn.m, conn.m);
    for (auto& p : conn.poles) {
        F d = lambda - p.position;
        if (d == F(0)) throw std::domain_error("evaluation at a pole");
        auto B = p.effective();
        F inv = F(1) / d;
        F w = inv;
        for (auto& Bk : B) {
            out += Bk * T(w);
            w = w * inv;
        }
    }
    F w(1);
    for (auto& Ak : conn.infinity_part) {
        out += Ak * T(w);
        w = w * lambda;
    }
    return out;
}

// Laurent window of A at a finite pole: coefficients of (lambda-u)^j for
// j in [-(r+1), top].
template <class T>
struct LocalLaurent {
    int min_order = 0;
    std::vector<Matrix<T>> coeff;

    int max_order() const { return min_order + int(coeff.size()) - 1; }
    const Matrix<T>& at(int j) const { return coeff.at(std::size_t(j - min_order)); }
    Matrix<T>& at(int j) { return coeff.at(std::size_t(j - min_order)); }
};

template <class F, class T>
LocalLaurent<T> local_laurent(const Connection<F, T>& conn, std::size_t pole_index, int top) {
    if (top < 0) throw std::invalid_argument("expansion order must be nonnegative");
    const auto& center = conn.poles.at(pole_index);
    const int r = center.rank();
    LocalLaurent<T> L;
    L.min_order = -(r + 1);
    L.coeff.assign(std::size_t(top + r + 2), Matrix<T>(conn.m, conn.m));

    auto B = center.effective();
    for (int k = 0; k <= r; ++k) L.at(-(k + 1)) = B[std::size_t(k)];

    for (std::size_t j = 0; j < conn.poles.size(); ++j) {
        if (j == pole_index) continue;
        const auto& other = conn.poles[j];
        F d = center.position - other.position;  // (lambda - u_j) = d + x
        auto C = other.effective();
        for (int k = 0; k <= other.rank(); ++k) {
            // (d+x)^{-(k+1)} = sum_n (-1)^n C(k+n,n) d^{-(k+1+n)} x^n
            for (int n = 0; n <= top; ++n) {
                F c = detail::binom<F>(k + n, n) / detail::int_pow(d, k + 1 + n);
                if (n % 2 == 1) c = F(0) - c;
                L.at(n) += C[std::size_t(k)] * T(c);
            }
        }
    }
    for (int k = 1; k <= int(conn.infinity_part.size()); ++k) {
        // lambda^{k-1} = (u + x)^{k-1}
        for (int n = 0; n <= k - 1 && n <= top; ++n) {
            F c = detail::binom<F>(k - 1, n) * detail::int_pow(center.position, k - 1 - n);
            L.at(n) += conn.infinity_part[std::size_t(k - 1)] * T(c);
        }
    }
    return L;
}

// S_k at a finite pole: the residue of (lambda-u)^k Tr A^2/2, read off as
// the (-1-k)-th Laurent coefficient of Tr A^2/2.
template <class F, class T>
T spectral_invariant(const Connection<F, T>& conn, std::size_t pole_index, int k) {
    if (k < 0) throw std::invalid_argument("spectral invariant order must be nonnegative");
    const int r = conn.poles.at(pole_index).rank();
    LocalLaurent<T> L = local_laurent(conn, pole_index, r);
    T sum(0);
    const int target = -k - 1;
    for (int a = L.min_order; a <= L.max_order(); ++a) {
        int b = target - a;
        if (b < L.min_order || b > L.max_order()) continue;
        sum += (L.at(a) * L.at(b)).trace();
    }
    return sum * T(F(1) / F(2));
}

template <class F, class T>
T pole_hamiltonian(const Connection<F, T>& conn, std::size_t pole_index) {
    return spectral_invariant(conn, pole_index, 0);
}

// Hamiltonians dual to the times of a rank-r pole: the triangular system
// M^(r)(t) H = (S_1..S_r) solved exactly.
template <class F, class T>
std::vector<T> irregular_hamiltonians(const Connection<F, T>& conn, std::size_t pole_index) {
    const auto& p = conn.poles.at(pole_index);
    const int r = p.rank();
    if (r < 1) throw std::invalid_argument("pole has no deformation times");
    if (p.times.empty() || p.times[0] == F(0)) throw std::domain_error("leading time must not vanish");
    Matrix<F> X = invert_upper_triangular(monomial_matrix(p.times));
    std::vector<T> S;
    for (int k = 1; k <= r; ++k) S.push_back(spectral_invariant(conn, pole_index, k));
    std::vector<T> H(std::size_t(r), T(0));
    for (int i = 1; i <= r; ++i)
        for (int j = i; j <= r; ++j)
            H[std::size_t(i - 1)] += S[std::size_t(j - 1)] * T(X(i - 1, j - 1));
    return H;
}

// Residue of Tr A^2/2 at infinity (with respect to lambda); with the finite
// residues it sums to zero, which is the global residue theorem used as a
// cross-check on every assembled connection.
template <class F, class T>
T infinity_residue(const Connection<F, T>& conn) {
    // Expansion at infinity: A = poly part + sum_{n>=1} G_n lambda^{-n};
    // the lambda^{-1} coefficient of Tr A^2/2 pairs A_k^inf with G_k.
    T res(0);
    for (int k = 1; k <= int(conn.infinity_part.size()); ++k) {
        Matrix<T> G(conn.m, conn.m);
        for (auto& p : conn.poles) {
            auto B = p.effective();
            for (int l = 0; l <= p.rank() && l <= k - 1; ++l)
                G += B[std::size_t(l)] *
                     T(detail::binom<F>(k - 1, l) * detail::int_pow(p.position, k - 1 - l));
        }
        res += (conn.infinity_part[std::size_t(k - 1)] * G).trace();
    }
    return T(0) - res;
}

// Sum of finite residues: the moment map of constant conjugation. The
// caller compares with -A^inf (or zero in a trace-free normalization).
template <class F, class T>
Matrix<T> fuchs_residue_sum(const Connection<F, T>& conn) {
    Matrix<T> sum(conn.m, conn.m);
    for (auto& p : conn.poles) sum += p.effective()[0];
    return sum;
}

// Dimension count for semisimple spectral data: multiplicity lists of the
// residue eigenvalues, finite poles first, the point at infinity last.
inline int katz_dimension(std::size_t m, const std::vector<std::vector<int>>& multiplicities) {
    if (multiplicities.size() < 2)
        throw std::invalid_argument("need at least one finite pole and infinity");
    const int n = int(multiplicities.size()) - 1;
    long long N = 2 - (1 - n) * (long long)(m * m);
    for (auto& mult : multiplicities) {
        long long s = 0;
        for (int mj : mult) {
            if (mj <= 0) throw std::invalid_argument("multiplicities must be positive");
            s += mj;
            N -= (long long)mj * mj;
        }
        if (s != (long long)m) throw std::invalid_argument("multiplicities must sum to m");
    }
    return int(N);
}

// The same count as a symplectic reduction: orbit dimensions of the finite
// residues minus dim SL_m minus the infinity stabilizer inside sl_m.
inline int symplectic_dimension_count(std::size_t m,
                                      const std::vector<std::vector<int>>& multiplicities) {
    if (multiplicities.size() < 2)
        throw std::invalid_argument("need at least one finite pole and infinity");
    const long long m2 = (long long)(m * m);
    long long N = 0;
    for (std::size_t i = 0; i + 1 < multiplicities.size(); ++i) {
        long long s = 0;
        for (int mj : multiplicities[i]) s += (long long)mj * mj;
        N += m2 - s;  // orbit dimension of a semisimple element
    }
    long long stab = 0;
    for (int mj : multiplicities.back()) stab += (long long)mj * mj;
    N -= (m2 - 1) + (stab - 1);
    return int(N);
}

}  // namespace isolab

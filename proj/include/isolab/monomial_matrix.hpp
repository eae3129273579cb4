// Weighted-monomial matrices M^(r)(t): the r x r upper-triangular matrices
// with M_{i,k} = [eps^k] (t_1 eps + ... + t_r eps^r)^i. They encode how a
// simple pole sliding along v = w + sum t_i eps^i feeds the principal part
// of the limiting higher-rank pole, and they classify the linear Poisson
// automorphisms of the truncated current co-algebra.
//
// Entries are generic over a commutative ring T (exact scalars, polynomials
// in symbolic times, complex doubles, dual numbers).
#pragma once

#include "isolab/matrix.hpp"
#include "isolab/poly.hpp"
#include "isolab/rational.hpp"
#include "isolab/takiff.hpp"

#include <stdexcept>
#include <vector>

namespace isolab {

// Truncated product of eps-polynomials a, b (index = eps power).
template <class T>
std::vector<T> eps_mul(const std::vector<T>& a, const std::vector<T>& b, std::size_t len) {
    std::vector<T> r(len, T(0));
    for (std::size_t i = 0; i < a.size() && i < len; ++i)
        for (std::size_t j = 0; j < b.size() && i + j < len; ++j) r[i + j] += a[i] * b[j];
    return r;
}

// Coefficients of P(t, eps)^i through eps^top, where P = sum t_j eps^j.
template <class T>
std::vector<T> monomial_power(const std::vector<T>& t, int i, std::size_t top) {
    std::vector<T> base(top + 1, T(0));
    for (std::size_t j = 0; j < t.size() && j + 1 <= top; ++j) base[j + 1] = t[j];
    std::vector<T> acc(top + 1, T(0));
    acc[0] = T(1);
    for (int k = 0; k < i; ++k) acc = eps_mul(acc, base, top + 1);
    return acc;
}

// M^(r) with rows i = 1..r, columns k = 1..r, entry (i,k) stored 0-based.
template <class T>
Matrix<T> monomial_matrix(const std::vector<T>& t) {
    const std::size_t r = t.size();
    if (r == 0) throw std::invalid_argument("empty time vector");
    Matrix<T> M(r, r);
    for (std::size_t i = 1; i <= r; ++i) {
        auto pw = monomial_power(t, int(i), r);
        for (std::size_t k = 1; k <= r; ++k) M(i - 1, k - 1) = pw[k];
    }
    return M;
}

// Same entry by the weighted-partition sum: over multi-indices alpha with
// |alpha| = i and weight sum_j j*alpha_j = k, the multinomial i!/prod(alpha!)
// times prod t_j^{alpha_j}.
template <class T>
T monomial_entry_combinatorial(const std::vector<T>& t, int i, int k) {
    const int r = int(t.size());
    T total(0);
    std::vector<int> alpha(r, 0);
    // Recursive enumeration of alpha with running degree and weight bounds.
    auto rec = [&](auto&& self, int pos, int deg_left, int weight_left) -> void {
        if (pos == r) {
            if (deg_left == 0 && weight_left == 0) {
                Rat multi = 1;
                int placed = 0;
                for (int j = 0; j < r; ++j)
                    for (int c = 1; c <= alpha[j]; ++c) multi = multi * Rat(++placed) / Rat(c);
                T term(T(1));
                for (int j = 0; j < r; ++j)
                    for (int c = 0; c < alpha[j]; ++c) term = term * t[j];
                // multinomial coefficients are integers
                total += T(int(multi.convert_to<long long>())) * term;
            }
            return;
        }
        for (int a = 0; a <= deg_left && a * (pos + 1) <= weight_left; ++a) {
            alpha[pos] = a;
            self(self, pos + 1, deg_left - a, weight_left - a * (pos + 1));
        }
        alpha[pos] = 0;
    };
    rec(rec, 0, i, k);
    return total;
}

template <class T>
Matrix<T> monomial_matrix_combinatorial(const std::vector<T>& t) {
    const std::size_t r = t.size();
    Matrix<T> M(r, r);
    for (std::size_t i = 1; i <= r; ++i)
        for (std::size_t k = 1; k <= r; ++k)
            M(i - 1, k - 1) = monomial_entry_combinatorial(t, int(i), int(k));
    return M;
}

// Exact inverse of an upper-triangular matrix by back substitution;
// requires invertible diagonal (t_1 != 0 for monomial matrices).
template <class F>
Matrix<F> invert_upper_triangular(const Matrix<F>& M) {
    const std::size_t n = M.rows();
    for (std::size_t i = 0; i < n; ++i)
        if (M(i, i) == F(0)) throw std::domain_error("singular triangular matrix");
    Matrix<F> X(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        // Solve M x = e_j for column j, bottom-up.
        for (std::size_t ii = n; ii-- > 0;) {
            F rhs = (ii == j) ? F(1) : F(0);
            for (std::size_t k = ii + 1; k < n; ++k) rhs -= M(ii, k) * X(k, j);
            X(ii, j) = rhs / M(ii, ii);
        }
    }
    return X;
}

// B_0 = A_0, B_i = sum_{k=i..r} A_k M_{i,k}; the general orbit element in
// deformed coordinates. Scalar times are injected into the entry ring.
template <class T, class S>
std::vector<Matrix<T>> apply_automorphism(const std::vector<Matrix<T>>& A,
                                          const std::vector<S>& t) {
    const int r = int(A.size()) - 1;
    if (int(t.size()) != r) throw std::invalid_argument("time count must equal rank");
    std::vector<Matrix<T>> B(A.size(), Matrix<T>(A[0].rows(), A[0].cols()));
    B[0] = A[0];
    if (r == 0) return B;
    std::vector<T> tt;
    tt.reserve(t.size());
    for (const S& x : t) tt.push_back(T(x));
    Matrix<T> M = monomial_matrix(tt);
    for (int i = 1; i <= r; ++i)
        for (int k = i; k <= r; ++k) B[i] += A[k] * M(i - 1, k - 1);
    return B;
}

// w_i = sum_{k=i..r} theta_k M_{i,k}(t): deformed spectral scalars matching
// the exponential-part parameters of a rank-r pole.
template <class S>
std::vector<S> jmu_map(const std::vector<S>& theta, const std::vector<S>& t) {
    const std::size_t r = t.size();
    if (theta.size() != r) throw std::invalid_argument("theta count must equal rank");
    Matrix<S> M = monomial_matrix(t);
    std::vector<S> w(r, S(0));
    for (std::size_t i = 1; i <= r; ++i)
        for (std::size_t k = i; k <= r; ++k) w[i - 1] += theta[k - 1] * M(i - 1, k - 1);
    return w;
}

inline std::vector<PolyQ> symbolic_times(int r, int first_id = 1) {
    std::vector<PolyQ> t;
    for (int i = 0; i < r; ++i) t.push_back(PolyQ::generator(param_gen(first_id + i)));
    return t;
}

// Identities of the monomial family, checked exactly in symbolic times:
//  - power-series and weighted-partition constructions agree;
//  - rank stability: the top-left block of M^(r+1) is M^(r);
//  - top-row law M_{1,k} = t_k and new-column top entry t_{r+1};
//  - untruncated master-matrix law: with only t_{r+1} nonzero, the
//    eps^{(r+1)i} coefficient of P^i is t_{r+1}^i;
//  - convolution M_{j,k} = sum_p M_{j-i,p} M_{i,k-p} for every split i,
//    with the empty power contributing M_{0,p} = delta_{p0};
//  - determinant t_1^{r(r+1)/2}.
inline CheckReport verify_monomial_identities(int r) {
    CheckReport rep;
    auto fail = [&](const std::string& msg) { rep.failures.push_back({msg}); };
    auto t_big = symbolic_times(r + 1);
    std::vector<PolyQ> t(t_big.begin(), t_big.begin() + r);

    Matrix<PolyQ> M = monomial_matrix(t);
    Matrix<PolyQ> Mc = monomial_matrix_combinatorial(t);
    ++rep.checks;
    if (M != Mc) fail("power-series and combinatorial forms differ at r=" + std::to_string(r));

    Matrix<PolyQ> M1 = monomial_matrix(t_big);
    for (int i = 1; i <= r; ++i)
        for (int k = 1; k <= r; ++k) {
            ++rep.checks;
            if (M1(i - 1, k - 1) != M(i - 1, k - 1))
                fail("rank stability fails at (" + std::to_string(i) + "," + std::to_string(k) + ")");
        }

    for (int k = 1; k <= r + 1; ++k) {
        ++rep.checks;
        if (M1(0, k - 1) != t_big[k - 1]) fail("top row entry is not t_k at k=" + std::to_string(k));
    }

    // Master-matrix law at t = (0,...,0,t_{r+1}).
    std::vector<PolyQ> only_last(r + 1, PolyQ(0));
    only_last[r] = t_big[r];
    for (int i = 1; i <= r + 1; ++i) {
        auto pw = monomial_power(only_last, i, std::size_t((r + 1) * i));
        ++rep.checks;
        if (pw[std::size_t((r + 1) * i)] != t_big[r].pow(unsigned(i)))
            fail("master-matrix column law fails at i=" + std::to_string(i));
        for (std::size_t k = 0; k < pw.size(); ++k) {
            if (k == std::size_t((r + 1) * i)) continue;
            ++rep.checks;
            if (!pw[k].is_zero()) fail("stray eps coefficient in master-matrix law");
        }
    }

    auto entry = [&](int i, int k) -> PolyQ {
        if (i == 0) return PolyQ(k == 0 ? 1 : 0);
        if (k == 0) return PolyQ(0);
        if (i > r || k > r) throw std::out_of_range("entry");
        return M(i - 1, k - 1);
    };
    for (int j = 1; j <= r; ++j)
        for (int i = 0; i <= j; ++i)
            for (int k = 0; k <= r; ++k) {
                PolyQ conv;
                for (int p = 0; p <= k; ++p) conv += entry(j - i, p) * entry(i, k - p);
                ++rep.checks;
                if (conv != entry(j, k))
                    fail("convolution identity fails at j=" + std::to_string(j) +
                         " i=" + std::to_string(i) + " k=" + std::to_string(k));
            }

    PolyQ det(1);
    for (int i = 1; i <= r; ++i) det *= M(i - 1, i - 1);
    ++rep.checks;
    if (det != t[0].pow(unsigned(r * (r + 1) / 2))) fail("determinant law fails");
    return rep;
}

// The bordered matrix T with T_{00} = 1 and T_{ik} = M_{i,k} satisfies the
// defining relations of the Poisson-automorphism ideal:
// zero border, zero below the diagonal, and the row convolution
// T_{sl} = sum_{i+j=l, i,j>0} T_{pi} T_{mj} for every split p + m = s.
inline CheckReport verify_automorphism_ideal(int r) {
    CheckReport rep;
    auto fail = [&](const std::string& msg) { rep.failures.push_back({msg}); };
    auto t = symbolic_times(r);
    Matrix<PolyQ> M = monomial_matrix(t);
    auto T = [&](int i, int k) -> PolyQ {
        if (i == 0) return PolyQ(k == 0 ? 1 : 0);
        if (k == 0) return PolyQ(0);
        return M(i - 1, k - 1);
    };
    ++rep.checks;
    if (T(0, 0) != PolyQ(1)) fail("T_00 != 1");
    for (int k = 1; k <= r; ++k) {
        rep.checks += 2;
        if (!T(0, k).is_zero()) fail("T_0k != 0");
        if (!T(k, 0).is_zero()) fail("T_k0 != 0");
    }
    for (int i = 1; i <= r; ++i)
        for (int k = 0; k < i; ++k) {
            ++rep.checks;
            if (!T(i, k).is_zero()) fail("lower-triangular entry nonzero");
        }
    for (int s = 2; s <= r; ++s)
        for (int p = 1; p < s; ++p) {
            int m = s - p;
            for (int l = 0; l <= r; ++l) {
                PolyQ sum;
                for (int i = 1; i < l; ++i) sum += T(p, i) * T(m, l - i);
                ++rep.checks;
                if (sum != T(s, l))
                    fail("ideal convolution fails at s=" + std::to_string(s) +
                         " p=" + std::to_string(p) + " l=" + std::to_string(l));
            }
        }
    return rep;
}

}  // namespace isolab

// Truncated current algebra of degree r over gl_m, its co-algebra, the
// trace pairing, quadratic Casimirs, and the canonical (Q, P) realization of
// coadjoint orbit coefficients A_k = sum_i Q_i P_{i+k}.
#pragma once

#include "isolab/lie.hpp"
#include "isolab/matrix.hpp"
#include "isolab/poly.hpp"

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace isolab {

// Element sum_i X_i z^i, truncated past z^r.
template <class T>
struct TakiffElement {
    int r = 0;
    std::vector<Matrix<T>> X;  // size r + 1

    TakiffElement(int rank, std::size_t m) : r(rank), X(rank + 1, Matrix<T>(m, m)) {}
    explicit TakiffElement(std::vector<Matrix<T>> coeffs)
        : r(int(coeffs.size()) - 1), X(std::move(coeffs)) {
        if (X.empty()) throw std::invalid_argument("empty element");
    }
};

// Co-element A_r / z^{r+1} + ... + A_0 / z; coefficient k multiplies z^{-k-1}.
template <class T>
struct TakiffCoElement {
    int r = 0;
    std::vector<Matrix<T>> A;  // size r + 1, index k

    TakiffCoElement(int rank, std::size_t m) : r(rank), A(rank + 1, Matrix<T>(m, m)) {}
    explicit TakiffCoElement(std::vector<Matrix<T>> coeffs)
        : r(int(coeffs.size()) - 1), A(std::move(coeffs)) {
        if (A.empty()) throw std::invalid_argument("empty co-element");
    }

    std::size_t dim() const { return A[0].rows(); }
};

template <class T>
using MomentValue = TakiffCoElement<T>;  // same shape discipline, factors reversed

// Coefficient i of the bracket is sum_{j<=i} [X_j, Y_{i-j}]; powers past z^r
// are truncated away.
template <class T>
TakiffElement<T> takiff_bracket(const TakiffElement<T>& X, const TakiffElement<T>& Y) {
    if (X.r != Y.r || X.X[0].rows() != Y.X[0].rows())
        throw std::invalid_argument("takiff_bracket shape mismatch");
    TakiffElement<T> Z(X.r, X.X[0].rows());
    for (int i = 0; i <= X.r; ++i)
        for (int j = 0; j <= i; ++j) Z.X[i] += commutator(X.X[j], Y.X[i - j]);
    return Z;
}

// <A, X> = sum_i Tr(A_i X_i): the residue pairing with the contour
// normalization absorbed.
template <class T>
T pairing(const TakiffCoElement<T>& A, const TakiffElement<T>& X) {
    if (A.r != X.r || A.A[0].rows() != X.X[0].rows())
        throw std::invalid_argument("pairing shape mismatch");
    T s(0);
    for (int i = 0; i <= A.r; ++i) s += (A.A[i] * X.X[i]).trace();
    return s;
}

// A_k = sum_{i=0}^{r-k} Q_i P_{i+k}.
template <class T>
TakiffCoElement<T> lifted_A(const std::vector<Matrix<T>>& Q, const std::vector<Matrix<T>>& P) {
    if (Q.size() != P.size() || Q.empty()) throw std::invalid_argument("lifted_A slot mismatch");
    const int r = int(Q.size()) - 1;
    TakiffCoElement<T> A(r, Q[0].rows());
    for (int k = 0; k <= r; ++k)
        for (int i = 0; i + k <= r; ++i) A.A[k] += Q[i] * P[i + k];
    return A;
}

// Lambda_k = sum_{i=0}^{r-k} P_{i+k} Q_i.
template <class T>
MomentValue<T> lifted_moment(const std::vector<Matrix<T>>& Q, const std::vector<Matrix<T>>& P) {
    if (Q.size() != P.size() || Q.empty()) throw std::invalid_argument("lifted_moment slot mismatch");
    const int r = int(Q.size()) - 1;
    MomentValue<T> L(r, Q[0].rows());
    for (int k = 0; k <= r; ++k)
        for (int i = 0; i + k <= r; ++i) L.A[k] += P[i + k] * Q[i];
    return L;
}

// Symbolic Q/P slot family for one pole: slots slot_base .. slot_base + r.
template <class F>
struct LiftedSlots {
    std::vector<Matrix<Poly<F>>> Q, P;
};

template <class F>
LiftedSlots<F> symbolic_lifted_slots(int slot_base, int r, std::size_t m) {
    LiftedSlots<F> s;
    for (int i = 0; i <= r; ++i) {
        s.Q.push_back(symbolic_slot<F>(GenKind::Q, slot_base + i, m));
        s.P.push_back(symbolic_slot<F>(GenKind::P, slot_base + i, m));
    }
    return s;
}

// Component form of the graded KKS bracket:
// {(A_k)_{ab}, (A_l)_{cd}} = delta_{cb} (A_{k+l})_{ad} - delta_{ad} (A_{k+l})_{cb},
// and zero when k + l exceeds the degree.
template <class T>
T kks_expected_component(const TakiffCoElement<T>& A, int k, int l, std::size_t a, std::size_t b,
                         std::size_t c, std::size_t d) {
    if (k < 0 || l < 0 || k > A.r || l > A.r) throw std::out_of_range("kks_expected index");
    T out(0);
    if (k + l > A.r) return out;
    if (c == b) out += A.A[k + l](a, d);
    if (a == d) out -= A.A[k + l](c, b);
    return out;
}

// Tensor form of the same statement: {A_k (x), A_l} = -[Pi, A_{k+l} (x) I].
template <class F>
Matrix<Poly<F>> kks_expected(const TakiffCoElement<Poly<F>>& A, int k, int l) {
    const std::size_t m = A.dim();
    if (k < 0 || l < 0 || k > A.r || l > A.r) throw std::out_of_range("kks_expected index");
    if (k + l > A.r) return Matrix<Poly<F>>(m * m, m * m);
    return -pi_commutator_left(A.A[k + l]);
}

struct CheckFailure {
    std::string what;
};

struct CheckReport {
    std::size_t checks = 0;
    std::vector<CheckFailure> failures;
    bool ok() const { return failures.empty(); }
};

// Exact componentwise comparison of the canonical bracket on lifted
// coordinates with the graded KKS structure, for all (k, l) pairs.
template <class F>
CheckReport verify_kks(int r, std::size_t m) {
    CheckReport rep;
    auto slots = symbolic_lifted_slots<F>(0, r, m);
    auto A = lifted_A(slots.Q, slots.P);
    for (int k = 0; k <= r; ++k)
        for (int l = 0; l <= r; ++l)
            for (std::size_t a = 0; a < m; ++a)
                for (std::size_t b = 0; b < m; ++b)
                    for (std::size_t c = 0; c < m; ++c)
                        for (std::size_t d = 0; d < m; ++d) {
                            ++rep.checks;
                            Poly<F> lhs = canonical_bracket(A.A[k](a, b), A.A[l](c, d));
                            Poly<F> rhs = kks_expected_component(A, k, l, a, b, c, d);
                            if (lhs != rhs)
                                rep.failures.push_back(
                                    {"KKS mismatch r=" + std::to_string(r) + " m=" + std::to_string(m) +
                                     " k=" + std::to_string(k) + " l=" + std::to_string(l) + " at (" +
                                     std::to_string(a) + std::to_string(b) + "," + std::to_string(c) +
                                     std::to_string(d) + ")"});
                        }
    return rep;
}

// I_k = res_{z=0} z^{r+k} Tr A(z)^2 = sum_j Tr(A_j A_{r+k-1-j}), 0 < k <= r.
template <class T>
T casimir(const TakiffCoElement<T>& A, int k) {
    if (k <= 0 || k > A.r) throw std::out_of_range("casimir index");
    T out(0);
    for (int j = 0; j <= A.r; ++j) {
        int other = A.r + k - 1 - j;
        if (other < 0 || other > A.r) continue;
        out += (A.A[j] * A.A[other]).trace();
    }
    return out;
}

// Promotes a matrix of field scalars to a matrix of T (identity when T = F).
template <class T, class F>
Matrix<T> promote(const Matrix<F>& a) {
    if constexpr (std::is_same_v<T, F>) return a;
    else return a.template map<T>([](const F& x) { return T(x); });
}

// Constant gauge action g^{-1} A g applied to every coefficient.
template <class T, class F>
TakiffCoElement<T> gauge_transform(const TakiffCoElement<T>& A, const Matrix<F>& g) {
    Matrix<T> gi = promote<T>(inverse(g));
    Matrix<T> gg = promote<T>(g);
    TakiffCoElement<T> B = A;
    for (auto& coeff : B.A) coeff = gi * coeff * gg;
    return B;
}

}  // namespace isolab

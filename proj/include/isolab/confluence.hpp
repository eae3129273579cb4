// Confluence of a simple pole into a neighbouring pole: truncated
// epsilon-Laurent arithmetic, the 1+1 limit, the general rank-raising step,
// a graded bracket model for the series coefficients, and the consistency
// check M * H = S for the Hamiltonians of the merged pole.
//
// Conventions. The merging pole sits at v = u + t_1 eps + ... + t_{r+1}
// eps^{r+1} and carries residue C(eps) = sum_j W^[j] eps^j with j >= -(r+1).
// The base pole has rank r with bare coefficient series A^[k](eps) whose
// negative orders are pinned by cancellation: [eps^{-j}] A^[k] = -W^[-k-j]
// for j >= 1. At eps = 0 the merged pole has rank r+1 and bare coefficients
// At_k = W^[-k] + [eps^0] A^[k] (k <= r), At_{r+1} = W^[-r-1].
#pragma once

#include "isolab/connection.hpp"
#include "isolab/matrix.hpp"
#include "isolab/monomial_matrix.hpp"
#include "isolab/poly.hpp"
#include "isolab/takiff.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace isolab {

// A required eps -> 0 limit does not exist (an uncancelled negative power).
struct divergence_error : std::domain_error {
    using std::domain_error::domain_error;
};

// Truncated Laurent series sum_j W[j] eps^j with matrix coefficients.
// Orders below min_order are exactly zero; orders above top_order are
// unknown (cut off), so binary operations intersect the known windows.
template <class T>
struct EpsLaurentMatrix {
    std::size_t nrows = 0, ncols = 0;
    int min_order = 0;
    int top_order = -1;
    std::vector<Matrix<T>> coeff;  // coeff[i] multiplies eps^(min_order + i)

    EpsLaurentMatrix() = default;
    EpsLaurentMatrix(std::size_t rows, std::size_t cols, int min_o, int top_o)
        : nrows(rows), ncols(cols), min_order(min_o), top_order(top_o) {
        if (top_o < min_o) throw std::invalid_argument("empty series window");
        coeff.assign(std::size_t(top_o - min_o + 1), Matrix<T>(rows, cols));
    }

    static EpsLaurentMatrix constant(const Matrix<T>& a, int top_o) {
        EpsLaurentMatrix s(a.rows(), a.cols(), 0, top_o);
        s.coeff[0] = a;
        return s;
    }

    Matrix<T>& set(int order) {
        if (order < min_order || order > top_order) throw std::out_of_range("series order");
        return coeff[std::size_t(order - min_order)];
    }

    // Zero below the window; reading above the cut is a logic error.
    Matrix<T> at(int order) const {
        if (order < min_order) return Matrix<T>(nrows, ncols);
        if (order > top_order) throw std::out_of_range("order beyond truncation");
        return coeff[std::size_t(order - min_order)];
    }

    // Lowest order with a nonzero coefficient, or top_order + 1 if none.
    int actual_min() const {
        for (int j = min_order; j <= top_order; ++j)
            if (!at(j).is_zero()) return j;
        return top_order + 1;
    }

    EpsLaurentMatrix shifted(int s) const {
        EpsLaurentMatrix r = *this;
        r.min_order += s;
        r.top_order += s;
        return r;
    }

    EpsLaurentMatrix scaled(const T& s) const {
        EpsLaurentMatrix r = *this;
        for (auto& c : r.coeff) c = c * s;
        return r;
    }

    EpsLaurentMatrix truncated(int new_top) const {
        if (new_top > top_order) throw std::out_of_range("cannot extend a truncated series");
        EpsLaurentMatrix r(nrows, ncols, min_order, new_top);
        for (int j = min_order; j <= new_top; ++j) r.set(j) = at(j);
        return r;
    }

    EpsLaurentMatrix trace() const {
        EpsLaurentMatrix r(1, 1, min_order, top_order);
        for (int j = min_order; j <= top_order; ++j) r.set(j)(0, 0) = at(j).trace();
        return r;
    }

    friend EpsLaurentMatrix operator+(const EpsLaurentMatrix& a, const EpsLaurentMatrix& b) {
        EpsLaurentMatrix r(a.nrows, a.ncols, std::min(a.min_order, b.min_order),
                           std::min(a.top_order, b.top_order));
        for (int j = r.min_order; j <= r.top_order; ++j) r.set(j) = a.at(j) + b.at(j);
        return r;
    }
    friend EpsLaurentMatrix operator-(const EpsLaurentMatrix& a) { return a.scaled(T(-1)); }
    friend EpsLaurentMatrix operator-(const EpsLaurentMatrix& a, const EpsLaurentMatrix& b) {
        return a + (-b);
    }

    // Truncated Cauchy product; order n is known only while every split
    // i + j = n stays inside both windows.
    friend EpsLaurentMatrix operator*(const EpsLaurentMatrix& a, const EpsLaurentMatrix& b) {
        int min_o = a.min_order + b.min_order;
        int top_o = std::min(a.top_order + b.min_order, b.top_order + a.min_order);
        EpsLaurentMatrix r(a.nrows, b.ncols, min_o, top_o);
        for (int i = a.min_order; i <= a.top_order; ++i)
            for (int j = b.min_order; j <= b.top_order; ++j) {
                if (i + j > top_o) continue;
                r.set(i + j) = r.at(i + j) + a.at(i) * b.at(j);
            }
        return r;
    }
};

// Series of the polynomial P(t, eps)^i = (t_1 eps + ... + t_n eps^n)^i as a
// 1 x 1 matrix series, exact up to the requested top order.
template <class F, class T>
EpsLaurentMatrix<T> monomial_power_series(const std::vector<F>& times, int i, int top) {
    std::vector<F> pw = monomial_power(times, i, top);
    EpsLaurentMatrix<T> s(1, 1, 0, top);
    for (int k = 0; k <= top; ++k) s.set(k)(0, 0) = T(pw[std::size_t(k)]);
    return s;
}

// Series of 1 / (a + b eps) = (1/a) sum_k (-b/a)^k eps^k, a != 0.
template <class F, class T>
EpsLaurentMatrix<T> geometric_series(const F& a, const F& b, int top) {
    if (a == F(0)) throw std::domain_error("geometric series at a pole");
    EpsLaurentMatrix<T> s(1, 1, 0, top);
    F term = F(1) / a;
    for (int k = 0; k <= top; ++k) {
        s.set(k)(0, 0) = T(term);
        term = term * (-b / a);
    }
    return s;
}

// Scalar series times matrix series (the 1 x 1 factor acts entrywise).
template <class T>
EpsLaurentMatrix<T> scale_by(const EpsLaurentMatrix<T>& mat, const EpsLaurentMatrix<T>& scalar) {
    if (scalar.nrows != 1 || scalar.ncols != 1) throw std::invalid_argument("scalar series expected");
    int min_o = mat.min_order + scalar.min_order;
    int top_o = std::min(mat.top_order + scalar.min_order, scalar.top_order + mat.min_order);
    EpsLaurentMatrix<T> r(mat.nrows, mat.ncols, min_o, top_o);
    for (int i = mat.min_order; i <= mat.top_order; ++i)
        for (int j = scalar.min_order; j <= scalar.top_order; ++j) {
            if (i + j > top_o) continue;
            r.set(i + j) = r.at(i + j) + mat.at(i) * scalar.at(j)(0, 0);
        }
    return r;
}

// Limits of the two-simple-pole coalescence: At_1 = lim eps C, At_0 = lim(B + C).
template <class F, class T>
struct OnePlusOneLimit {
    Matrix<T> A1, A0;
    F t1{};

    // Rank-1 pole at the given position with bare (At_0, At_1); the
    // effective leading coefficient is then t_1 At_1.
    PoleData<F, T> pole(const F& position) const { return {position, {A0, A1}, {t1}}; }
};

template <class F, class T>
OnePlusOneLimit<F, T> one_plus_one(const EpsLaurentMatrix<T>& B, const EpsLaurentMatrix<T>& C,
                                   const F& t1) {
    for (int j = std::min(B.min_order, C.min_order); j < -1; ++j)
        if (!B.at(j).is_zero() || !C.at(j).is_zero())
            throw divergence_error("pole of order " + std::to_string(-j) + " in eps");
    if (!(B.at(-1) + C.at(-1)).is_zero())
        throw divergence_error("eps^-1 coefficients of B and C do not cancel");
    return {C.at(-1), B.at(0) + C.at(0), t1};
}

// Coalescence data for one rank-raising step: a base pole of rank r whose
// bare coefficients depend on eps, and a merging simple pole with residue C
// approaching along v = u + sum_{i<=r+1} t_i eps^i.
template <class F, class T>
struct ConfluenceScenario {
    F position{};                                  // shared limit position u
    std::vector<EpsLaurentMatrix<T>> bare_series;  // A^[k](eps), k = 0..r
    EpsLaurentMatrix<T> merging_residue;           // C(eps), orders >= -(r+1)
    std::vector<F> times;                          // t_1..t_{r+1} of the merged pole

    int rank() const { return int(bare_series.size()) - 1; }
};

// Lists every violated cancellation condition instead of throwing.
template <class F, class T>
CheckReport scenario_cancellations(const ConfluenceScenario<F, T>& sc) {
    CheckReport rep;
    const int r = sc.rank();
    const auto& C = sc.merging_residue;
    if (int(sc.times.size()) != r + 1)
        rep.failures.push_back({"expected " + std::to_string(r + 1) + " times, got " +
                                std::to_string(sc.times.size())});
    for (int j = C.min_order; j < -(r + 1); ++j) {
        ++rep.checks;
        if (!C.at(j).is_zero())
            rep.failures.push_back({"merging residue has order " + std::to_string(j)});
    }
    for (int k = 0; k <= r; ++k)
        for (int j = 1; j <= r + 1 - k; ++j) {
            ++rep.checks;
            if (!(sc.bare_series[std::size_t(k)].at(-j) + C.at(-k - j)).is_zero())
                rep.failures.push_back({"uncancelled eps^" + std::to_string(-j) +
                                        " in coefficient A^[" + std::to_string(k) + "]"});
        }
    for (int k = 0; k <= r; ++k)
        for (int j = sc.bare_series[std::size_t(k)].min_order; j < -(r + 1 - k); ++j) {
            ++rep.checks;
            if (!sc.bare_series[std::size_t(k)].at(j).is_zero())
                rep.failures.push_back({"coefficient A^[" + std::to_string(k) + "] has order " +
                                        std::to_string(j)});
        }
    return rep;
}

// The eps -> 0 limit of the coalescence: a pole of rank r+1 with bare
// coefficients At_k = W^[-k] + [eps^0] A^[k] and At_{r+1} = W^[-r-1].
template <class F, class T>
PoleData<F, T> confluence_step(const ConfluenceScenario<F, T>& sc) {
    auto rep = scenario_cancellations(sc);
    if (!rep.ok()) throw divergence_error(rep.failures.front().what);
    const int r = sc.rank();
    std::vector<Matrix<T>> bare;
    bare.reserve(std::size_t(r + 2));
    for (int k = 0; k <= r; ++k)
        bare.push_back(sc.merging_residue.at(-k) + sc.bare_series[std::size_t(k)].at(0));
    bare.push_back(sc.merging_residue.at(-(r + 1)));
    return {sc.position, std::move(bare), sc.times};
}

// m x m matrix of formal series-coefficient generators, one family per
// matrix symbol and one level per eps power.
template <class F>
Matrix<Poly<F>> symbolic_coef_matrix(int family, int level, std::size_t m) {
    Matrix<Poly<F>> M(m, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            M(i, j) = Poly<F>::generator(coef_gen(family, level, int(i), int(j)));
    return M;
}

// Graded bracket on series coefficients: families commute, and inside a
// family {X^[i]_{ab}, X^[j]_{cd}} = delta_{cb} X^[i+j]_{ad} - delta_{ad} X^[i+j]_{cb},
// truncated to zero below level -1. One consistent realization of the
// coefficient relations; only the brackets of At_1 = C^[-1] and
// At_0 = C^[0] + B^[0] are pinned by the limit, and those close exactly on
// the rank-1 graded structure.
template <class F>
struct GradedCoefRule {
    Poly<F> operator()(const Gen& x, const Gen& y) const {
        if (x.kind != GenKind::Coef || y.kind != GenKind::Coef) return Poly<F>();
        if (x.slot != y.slot) return Poly<F>();
        int level = int(x.level) + int(y.level);
        if (level < -1) return Poly<F>();
        Poly<F> out;
        if (y.row == x.col)
            out += Poly<F>::generator(coef_gen(int(x.slot), level, x.row, y.col));
        if (x.row == y.col)
            out -= Poly<F>::generator(coef_gen(int(x.slot), level, y.row, x.col));
        return out;
    }
};

// Checks that the graded coefficient model reproduces the rank-1 lifted
// bracket on At_1 = C^[-1], At_0 = C^[0] + B^[0], and that both commute
// with the generators of an untouched third pole.
template <class F>
CheckReport graded_model_brackets(std::size_t m) {
    CheckReport rep;
    GradedCoefRule<F> rule;
    const int famC = 0, famB = 1, famD = 2;
    Matrix<Poly<F>> A1 = symbolic_coef_matrix<F>(famC, -1, m);
    Matrix<Poly<F>> A0 = symbolic_coef_matrix<F>(famC, 0, m) + symbolic_coef_matrix<F>(famB, 0, m);
    Matrix<Poly<F>> D = symbolic_coef_matrix<F>(famD, 0, m);

    TakiffCoElement<Poly<F>> lifted(std::vector<Matrix<Poly<F>>>{A0, A1});
    for (int k = 0; k <= 1; ++k)
        for (int l = 0; l <= 1; ++l)
            for (std::size_t a = 0; a < m; ++a)
                for (std::size_t b = 0; b < m; ++b)
                    for (std::size_t c = 0; c < m; ++c)
                        for (std::size_t d = 0; d < m; ++d) {
                            ++rep.checks;
                            Poly<F> lhs =
                                bracket_with_rule(lifted.A[k](a, b), lifted.A[l](c, d), rule);
                            Poly<F> rhs = kks_expected_component(lifted, k, l, a, b, c, d);
                            if (lhs != rhs)
                                rep.failures.push_back(
                                    {"graded bracket mismatch k=" + std::to_string(k) +
                                     " l=" + std::to_string(l)});
                        }
    for (int k = 0; k <= 1; ++k)
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = 0; b < m; ++b)
                for (std::size_t c = 0; c < m; ++c)
                    for (std::size_t d = 0; d < m; ++d) {
                        ++rep.checks;
                        if (!bracket_with_rule(lifted.A[k](a, b), D(c, d), rule).is_zero())
                            rep.failures.push_back({"third pole not independent"});
                    }
    return rep;
}

// M^(r) (H_1..H_r) = (S_1..S_r) re-checked by forward multiplication, so an
// error in the triangular solve cannot hide.
template <class F, class T>
CheckReport hamiltonian_limit_check(const Connection<F, T>& conn, std::size_t pole_index) {
    CheckReport rep;
    const auto& pole = conn.poles.at(pole_index);
    const int r = pole.rank();
    if (r < 1) {
        rep.failures.push_back({"pole has no deformation times"});
        return rep;
    }
    std::vector<T> H = irregular_hamiltonians(conn, pole_index);
    Matrix<F> M = monomial_matrix(pole.times);
    for (int i = 1; i <= r; ++i) {
        ++rep.checks;
        T lhs(0);
        for (int k = i; k <= r; ++k) lhs += T(M(i - 1, k - 1)) * H[std::size_t(k - 1)];
        T rhs = spectral_invariant(conn, pole_index, i);
        if (!(lhs == rhs))
            rep.failures.push_back({"M*H != S at row " + std::to_string(i)});
    }
    return rep;
}

// Exact membership of target in the F-linear span of basis, by Gaussian
// elimination on monomial coordinates. Pivots are applied in descending
// leading-monomial order, so a single pass fully reduces.
template <class F>
bool in_linear_span(const Poly<F>& target, const std::vector<Poly<F>>& basis) {
    std::map<Monomial, Poly<F>, std::greater<Monomial>> pivots;
    auto reduce = [&](Poly<F> p) {
        for (const auto& [lead, piv] : pivots) {
            auto it = p.terms().find(lead);
            if (it != p.terms().end()) p -= (it->second / piv.terms().rbegin()->second) * piv;
        }
        return p;
    };
    for (const auto& b : basis) {
        Poly<F> red = reduce(b);
        if (!red.is_zero()) pivots.emplace(red.terms().rbegin()->first, red);
    }
    return reduce(target).is_zero();
}

}  // namespace isolab

// Sparse multivariate polynomials over a commutative coefficient field, with
// a pluggable Poisson bracket extended from generator pairs by bilinearity
// and the Leibniz rule.
//
// Generator universe:
//   Q, P    canonical matrix-entry pairs, indexed by (slot, row, col);
//   Param   commuting formal scalars (deformation times, spectral constants);
//   Coef    formal matrix-family coefficients used by graded bracket models,
//           indexed by (family, level, row, col).
// Generators compare lexicographically by (kind, slot, level, row, col);
// monomials are sorted exponent lists, so equality is structural.
#pragma once

#include "isolab/matrix.hpp"
#include "isolab/rational.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace isolab {

enum class GenKind : std::uint8_t { Q = 0, P = 1, Param = 2, Coef = 3 };

struct Gen {
    GenKind kind{GenKind::Q};
    std::uint16_t slot = 0;  // Q/P slot, Param id, or Coef family
    std::int16_t level = 0;  // Coef series level; 0 for other kinds
    std::uint8_t row = 0, col = 0;

    // Packs to a key whose integer order equals lexicographic order on
    // (kind, slot, level, row, col); level is offset to keep it unsigned.
    std::uint64_t key() const {
        return (std::uint64_t(kind) << 56) | (std::uint64_t(slot) << 40) |
               (std::uint64_t(std::uint16_t(level + 0x4000)) << 24) |
               (std::uint64_t(row) << 8) | std::uint64_t(col);
    }
    static Gen from_key(std::uint64_t k) {
        Gen g;
        g.kind = GenKind((k >> 56) & 0xff);
        g.slot = std::uint16_t((k >> 40) & 0xffff);
        g.level = std::int16_t(std::uint16_t((k >> 24) & 0xffff)) - 0x4000;
        g.row = std::uint8_t((k >> 8) & 0xff);
        g.col = std::uint8_t(k & 0xff);
        return g;
    }
    friend bool operator==(const Gen& a, const Gen& b) { return a.key() == b.key(); }
    friend bool operator<(const Gen& a, const Gen& b) { return a.key() < b.key(); }
};

inline Gen q_gen(int slot, int row, int col) {
    return Gen{GenKind::Q, std::uint16_t(slot), 0, std::uint8_t(row), std::uint8_t(col)};
}
inline Gen p_gen(int slot, int row, int col) {
    return Gen{GenKind::P, std::uint16_t(slot), 0, std::uint8_t(row), std::uint8_t(col)};
}
inline Gen param_gen(int id) { return Gen{GenKind::Param, std::uint16_t(id), 0, 0, 0}; }
inline Gen coef_gen(int family, int level, int row, int col) {
    return Gen{GenKind::Coef, std::uint16_t(family), std::int16_t(level), std::uint8_t(row),
               std::uint8_t(col)};
}

inline std::string gen_name(const Gen& g) {
    auto entry = [&] { return "(" + std::to_string(g.row + 1) + "," + std::to_string(g.col + 1) + ")"; };
    switch (g.kind) {
        case GenKind::Q: return "Q" + std::to_string(g.slot) + entry();
        case GenKind::P: return "P" + std::to_string(g.slot) + entry();
        case GenKind::Param: return "s" + std::to_string(g.slot);
        case GenKind::Coef:
            return "c" + std::to_string(g.slot) + "[" + std::to_string(g.level) + "]" + entry();
    }
    return "?";
}

// Sorted (generator key, exponent) list; empty list is the unit monomial.
using Monomial = std::vector<std::pair<std::uint64_t, std::uint32_t>>;

inline Monomial mono_mul(const Monomial& a, const Monomial& b) {
    Monomial r;
    r.reserve(a.size() + b.size());
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i].first == b[j].first) {
            r.emplace_back(a[i].first, a[i].second + b[j].second);
            ++i, ++j;
        } else if (a[i].first < b[j].first) {
            r.push_back(a[i++]);
        } else {
            r.push_back(b[j++]);
        }
    }
    for (; i < a.size(); ++i) r.push_back(a[i]);
    for (; j < b.size(); ++j) r.push_back(b[j]);
    return r;
}

template <class F>
class Poly {
public:
    using Coeff = F;
    using Terms = std::map<Monomial, F>;

    Poly() = default;
    Poly(int c) { if (c != 0) terms_[{}] = F(c); }        // NOLINT(google-explicit-constructor)
    Poly(F c) {                                            // NOLINT(google-explicit-constructor)
        if (!(c == F(0))) terms_[{}] = std::move(c);
    }

    static Poly generator(const Gen& g) {
        Poly p;
        p.terms_[{{g.key(), 1}}] = F(1);
        return p;
    }
    static Poly term(F c, Monomial m) {
        Poly p;
        if (!(c == F(0))) p.terms_[std::move(m)] = std::move(c);
        return p;
    }

    bool is_zero() const { return terms_.empty(); }
    bool is_constant() const {
        return terms_.empty() || (terms_.size() == 1 && terms_.begin()->first.empty());
    }
    F constant_term() const {
        auto it = terms_.find({});
        return it == terms_.end() ? F(0) : it->second;
    }
    std::size_t term_count() const { return terms_.size(); }
    const Terms& terms() const { return terms_; }

    int total_degree() const {
        int d = 0;
        for (const auto& [m, c] : terms_) {
            int s = 0;
            for (const auto& [k, e] : m) s += int(e);
            d = std::max(d, s);
        }
        return d;
    }

    void add_term(const Monomial& m, const F& c) {
        if (c == F(0)) return;
        auto it = terms_.find(m);
        if (it == terms_.end()) {
            terms_.emplace(m, c);
        } else {
            it->second += c;
            if (it->second == F(0)) terms_.erase(it);
        }
    }

    friend Poly operator+(const Poly& a, const Poly& b) {
        Poly r = a;
        for (const auto& [m, c] : b.terms_) r.add_term(m, c);
        return r;
    }
    friend Poly operator-(const Poly& a, const Poly& b) {
        Poly r = a;
        for (const auto& [m, c] : b.terms_) r.add_term(m, -c);
        return r;
    }
    friend Poly operator-(const Poly& a) {
        Poly r;
        for (const auto& [m, c] : a.terms_) r.terms_.emplace(m, -c);
        return r;
    }
    friend Poly operator*(const Poly& a, const Poly& b) {
        Poly r;
        for (const auto& [ma, ca] : a.terms_)
            for (const auto& [mb, cb] : b.terms_) r.add_term(mono_mul(ma, mb), ca * cb);
        return r;
    }
    friend Poly operator*(const F& s, const Poly& a) {
        Poly r;
        if (s == F(0)) return r;
        for (const auto& [m, c] : a.terms_) r.terms_.emplace(m, s * c);
        return r;
    }
    friend Poly operator*(const Poly& a, const F& s) { return s * a; }

    Poly& operator+=(const Poly& b) {
        for (const auto& [m, c] : b.terms_) add_term(m, c);
        return *this;
    }
    Poly& operator-=(const Poly& b) {
        for (const auto& [m, c] : b.terms_) add_term(m, -c);
        return *this;
    }
    Poly& operator*=(const Poly& b) { return *this = *this * b; }

    friend bool operator==(const Poly& a, const Poly& b) { return a.terms_ == b.terms_; }
    friend bool operator!=(const Poly& a, const Poly& b) { return !(a == b); }

    Poly pow(unsigned n) const {
        Poly r(1);
        Poly base = *this;
        while (n) {
            if (n & 1) r *= base;
            base = (n >>= 1) ? base * base : base;
        }
        return r;
    }

    Poly derivative(const Gen& g) const {
        const std::uint64_t key = g.key();
        Poly r;
        for (const auto& [m, c] : terms_) {
            for (std::size_t i = 0; i < m.size(); ++i) {
                if (m[i].first != key) continue;
                Monomial n = m;
                F nc = c * F(int(m[i].second));
                if (n[i].second == 1) n.erase(n.begin() + i);
                else --n[i].second;
                r.add_term(n, nc);
                break;
            }
        }
        return r;
    }

    // Set of distinct generators appearing in the polynomial.
    std::vector<Gen> support() const {
        std::set<std::uint64_t> keys;
        for (const auto& [m, c] : terms_)
            for (const auto& [k, e] : m) keys.insert(k);
        std::vector<Gen> out;
        out.reserve(keys.size());
        for (auto k : keys) out.push_back(Gen::from_key(k));
        return out;
    }

    // Full evaluation; the assignment must cover every generator present.
    template <class V, class Assign>
    V evaluate(Assign&& value_of) const {
        V total(0);
        for (const auto& [m, c] : terms_) {
            V prod = coeff_cast<V>(c);
            for (const auto& [k, e] : m) {
                V v = value_of(Gen::from_key(k));
                for (std::uint32_t i = 0; i < e; ++i) prod = prod * v;
            }
            total = total + prod;
        }
        return total;
    }

    // Replaces one generator by a polynomial value.
    Poly substitute(const Gen& g, const Poly& value) const {
        const std::uint64_t key = g.key();
        Poly r;
        for (const auto& [m, c] : terms_) {
            std::uint32_t e = 0;
            Monomial rest;
            rest.reserve(m.size());
            for (const auto& [k, x] : m) {
                if (k == key) e = x;
                else rest.push_back({k, x});
            }
            Poly piece = Poly::term(c, rest);
            if (e) piece *= value.pow(e);
            r += piece;
        }
        return r;
    }

    std::string str() const {
        if (terms_.empty()) return "0";
        std::string out;
        for (const auto& [m, c] : terms_) {
            std::string term = to_string(c);
            for (const auto& [k, e] : m) {
                term += "*" + gen_name(Gen::from_key(k));
                if (e > 1) term += "^" + std::to_string(e);
            }
            if (!out.empty()) out += " + ";
            out += term;
        }
        return out;
    }

private:
    template <class V>
    static V coeff_cast(const F& c) {
        if constexpr (std::is_same_v<V, F>) return c;
        else if constexpr (std::is_same_v<F, GaussRat> && std::is_same_v<V, std::complex<double>>)
            return to_complex(c);
        else return V(c);
    }

    Terms terms_;
};

using PolyQ = Poly<GaussRat>;

// {f, g} extended from a generator-pair rule by bilinearity and Leibniz:
// {f, g} = sum over generator pairs (x, y) of df/dx * dg/dy * rule(x, y).
// The rule must be antisymmetric; it may return an arbitrary polynomial.
template <class F, class Rule>
Poly<F> bracket_with_rule(const Poly<F>& f, const Poly<F>& g, Rule&& rule) {
    Poly<F> result;
    auto fs = f.support();
    auto gs = g.support();
    std::vector<std::pair<Gen, Poly<F>>> dfs;
    for (const Gen& x : fs) {
        Poly<F> dfx;        // computed lazily below
        bool have = false;
        for (const Gen& y : gs) {
            Poly<F> r = rule(x, y);
            if (r.is_zero()) continue;
            if (!have) {
                dfx = f.derivative(x);
                have = true;
            }
            result += dfx * g.derivative(y) * r;
        }
    }
    return result;
}

// Canonical bracket: {P_{j,ab}, Q_{j,cd}} = delta_{ad} delta_{bc}, all
// P-P and Q-Q pairs commute, Param/Coef generators are central.
template <class F>
Poly<F> canonical_bracket(const Poly<F>& f, const Poly<F>& g) {
    auto rule = [](const Gen& x, const Gen& y) -> Poly<F> {
        if (x.kind == GenKind::P && y.kind == GenKind::Q) {
            if (x.slot == y.slot && x.row == y.col && x.col == y.row) return Poly<F>(1);
        } else if (x.kind == GenKind::Q && y.kind == GenKind::P) {
            if (x.slot == y.slot && x.row == y.col && x.col == y.row) return Poly<F>(-1);
        }
        return Poly<F>();
    };
    return bracket_with_rule(f, g, rule);
}

// Bracket table {A (x), B} in tensor-space convention: the entry at row
// (a, c), column (b, d) is {A_{ab}, B_{cd}}, matching (X (x) Y)_{(ac),(bd)}
// = X_{ab} Y_{cd}. Comparable directly with [Pi, I (x) X] expressions.
template <class F>
Matrix<Poly<F>> bracket_table(const Matrix<Poly<F>>& A, const Matrix<Poly<F>>& B) {
    const std::size_t m = A.rows();
    Matrix<Poly<F>> out(m * m, m * m);
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = 0; b < m; ++b)
            for (std::size_t c = 0; c < m; ++c)
                for (std::size_t d = 0; d < m; ++d)
                    out(a * m + c, b * m + d) = canonical_bracket(A(a, b), B(c, d));
    return out;
}

// m x m matrix whose entries are the generators of one Q or P slot.
template <class F>
Matrix<Poly<F>> symbolic_slot(GenKind kind, int slot, std::size_t m) {
    Matrix<Poly<F>> M(m, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            M(i, j) = Poly<F>::generator(kind == GenKind::Q ? q_gen(slot, int(i), int(j))
                                                            : p_gen(slot, int(i), int(j)));
    return M;
}

template <class F>
Matrix<Poly<F>> to_poly_matrix(const Matrix<F>& a) {
    return a.template map<Poly<F>>([](const F& x) { return Poly<F>(x); });
}

template <class F>
Matrix<F> evaluate_matrix(const Matrix<Poly<F>>& a,
                          const std::function<F(const Gen&)>& value_of) {
    return a.template map<F>([&](const Poly<F>& p) { return p.template evaluate<F>(value_of); });
}

}  // namespace isolab

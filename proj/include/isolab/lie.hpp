// Structure data for gl_m: elementary-matrix basis, structure constants,
// and the permutation operator on the twofold tensor space.
#pragma once

#include "isolab/matrix.hpp"
#include "isolab/poly.hpp"

#include <cstddef>
#include <vector>

namespace isolab {

// Basis index of E_{rs} inside gl_m, rows-major.
inline std::size_t gl_index(std::size_t m, std::size_t r, std::size_t s) { return r * m + s; }

template <class F>
struct LieStructure {
    std::size_t m;

    explicit LieStructure(std::size_t dim) : m(dim) {}

    Matrix<F> basis_element(std::size_t alpha) const {
        Matrix<F> e(m, m);
        e(alpha / m, alpha % m) = F(1);
        return e;
    }

    // [E_alpha, E_beta] = sum_gamma chi^gamma_{alpha beta} E_gamma, computed
    // from [E_{ab}, E_{cd}] = delta_{bc} E_{ad} - delta_{da} E_{cb}.
    std::vector<std::pair<std::size_t, F>> structure_constants(std::size_t alpha,
                                                               std::size_t beta) const {
        const std::size_t a = alpha / m, b = alpha % m, c = beta / m, d = beta % m;
        std::vector<std::pair<std::size_t, F>> out;
        if (b == c) out.emplace_back(gl_index(m, a, d), F(1));
        if (d == a) out.emplace_back(gl_index(m, c, b), F(-1));
        return out;
    }

    // Permutation operator Pi = sum_{ab} E_{ab} (x) E_{ba}; satisfies
    // Pi (A (x) B) Pi = B (x) A and Pi^2 = I.
    Matrix<F> permutation() const {
        Matrix<F> pi(m * m, m * m);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t k = 0; k < m; ++k) pi(i * m + k, k * m + i) = F(1);
        return pi;
    }
};

// [Pi, I (x) X] on the tensor space, for X a matrix of polynomials; used to
// express bracket tables of coadjoint coefficients in closed form.
template <class F>
Matrix<Poly<F>> pi_commutator_right(const Matrix<Poly<F>>& X) {
    const std::size_t m = X.rows();
    LieStructure<F> g(m);
    Matrix<Poly<F>> pi = to_poly_matrix(g.permutation());
    Matrix<Poly<F>> ix = kron(to_poly_matrix(Matrix<F>::identity(m)), X);
    return pi * ix - ix * pi;
}

template <class F>
Matrix<Poly<F>> pi_commutator_left(const Matrix<Poly<F>>& X) {
    const std::size_t m = X.rows();
    LieStructure<F> g(m);
    Matrix<Poly<F>> pi = to_poly_matrix(g.permutation());
    Matrix<Poly<F>> xi = kron(X, to_poly_matrix(Matrix<F>::identity(m)));
    return pi * xi - xi * pi;
}

}  // namespace isolab

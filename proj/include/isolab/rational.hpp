// Exact scalar arithmetic: arbitrary-precision rationals, Gaussian rationals,
// and a first-order dual number used for exact differentiation of rational
// expressions. All symbolic identity checks in the library run over these
// types; floating point appears only in the numerical flow layer.
#pragma once

#include <boost/multiprecision/gmp.hpp>

#include <complex>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>

namespace isolab {

using Rat = boost::multiprecision::mpq_rational;

inline double to_double(const Rat& x) { return x.convert_to<double>(); }

// Renders p/q with the denominator omitted when it is 1.
inline std::string rat_to_string(const Rat& x) {
    if (denominator(x) == 1) return numerator(x).str();
    return numerator(x).str() + "/" + denominator(x).str();
}

// Accepts "p", "p/q", or a plain decimal integer with sign.
inline Rat rat_from_string(const std::string& s) {
    auto slash = s.find('/');
    try {
        if (slash == std::string::npos) return Rat(s);
        Rat num(s.substr(0, slash));
        Rat den(s.substr(slash + 1));
        if (den == 0) throw std::invalid_argument("zero denominator");
        return num / den;
    } catch (const std::exception&) {
        throw std::invalid_argument("cannot parse rational: '" + s + "'");
    }
}

// Gaussian rational a + b*i. A field: division is exact via the conjugate.
struct GaussRat {
    Rat re{0};
    Rat im{0};

    GaussRat() = default;
    GaussRat(int v) : re(v) {}                     // NOLINT(google-explicit-constructor)
    GaussRat(long long v) : re(v) {}               // NOLINT(google-explicit-constructor)
    GaussRat(Rat r) : re(std::move(r)) {}          // NOLINT(google-explicit-constructor)
    GaussRat(Rat r, Rat i) : re(std::move(r)), im(std::move(i)) {}

    static GaussRat unit_i() { return GaussRat(Rat(0), Rat(1)); }

    bool is_zero() const { return re == 0 && im == 0; }
    bool is_real() const { return im == 0; }

    GaussRat conj() const { return GaussRat(re, -im); }
    // re^2 + im^2; zero iff the value is zero.
    Rat norm2() const { return re * re + im * im; }

    friend GaussRat operator+(const GaussRat& a, const GaussRat& b) {
        return GaussRat(a.re + b.re, a.im + b.im);
    }
    friend GaussRat operator-(const GaussRat& a, const GaussRat& b) {
        return GaussRat(a.re - b.re, a.im - b.im);
    }
    friend GaussRat operator-(const GaussRat& a) { return GaussRat(-a.re, -a.im); }
    friend GaussRat operator*(const GaussRat& a, const GaussRat& b) {
        return GaussRat(a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re);
    }
    friend GaussRat operator/(const GaussRat& a, const GaussRat& b) {
        Rat n = b.norm2();
        if (n == 0) throw std::domain_error("division by zero GaussRat");
        GaussRat p = a * b.conj();
        return GaussRat(p.re / n, p.im / n);
    }
    GaussRat& operator+=(const GaussRat& b) { return *this = *this + b; }
    GaussRat& operator-=(const GaussRat& b) { return *this = *this - b; }
    GaussRat& operator*=(const GaussRat& b) { return *this = *this * b; }
    GaussRat& operator/=(const GaussRat& b) { return *this = *this / b; }

    friend bool operator==(const GaussRat& a, const GaussRat& b) {
        return a.re == b.re && a.im == b.im;
    }
    friend bool operator!=(const GaussRat& a, const GaussRat& b) { return !(a == b); }
};

inline std::complex<double> to_complex(const GaussRat& x) {
    return {to_double(x.re), to_double(x.im)};
}

inline std::string to_string(const GaussRat& x) {
    if (x.im == 0) return rat_to_string(x.re);
    std::string s = x.re == 0 ? std::string() : rat_to_string(x.re);
    if (x.im == 1) s += s.empty() ? "i" : "+i";
    else if (x.im == -1) s += "-i";
    else {
        std::string t = rat_to_string(x.im) + "*i";
        if (!s.empty() && t[0] != '-') s += "+";
        s += t;
    }
    return s;
}

// First-order dual number over a field F: value + derivative. Arithmetic
// propagates d(fg) = f dg + g df exactly, which turns any rational pipeline
// into its own exact differentiator.
template <class F>
struct Dual {
    F val{};
    F der{};

    Dual() = default;
    Dual(int v) : val(v) {}                        // NOLINT(google-explicit-constructor)
    Dual(F v) : val(std::move(v)) {}               // NOLINT(google-explicit-constructor)
    Dual(F v, F d) : val(std::move(v)), der(std::move(d)) {}

    static Dual variable(F v) { return Dual(std::move(v), F(1)); }

    bool is_zero() const { return val == F(0) && der == F(0); }

    friend Dual operator+(const Dual& a, const Dual& b) { return Dual(a.val + b.val, a.der + b.der); }
    friend Dual operator-(const Dual& a, const Dual& b) { return Dual(a.val - b.val, a.der - b.der); }
    friend Dual operator-(const Dual& a) { return Dual(-a.val, -a.der); }
    friend Dual operator*(const Dual& a, const Dual& b) {
        return Dual(a.val * b.val, a.val * b.der + a.der * b.val);
    }
    friend Dual operator/(const Dual& a, const Dual& b) {
        F v = a.val / b.val;
        return Dual(v, (a.der - v * b.der) / b.val);
    }
    Dual& operator+=(const Dual& b) { return *this = *this + b; }
    Dual& operator-=(const Dual& b) { return *this = *this - b; }
    Dual& operator*=(const Dual& b) { return *this = *this * b; }
    Dual& operator/=(const Dual& b) { return *this = *this / b; }

    friend bool operator==(const Dual& a, const Dual& b) { return a.val == b.val && a.der == b.der; }
    friend bool operator!=(const Dual& a, const Dual& b) { return !(a == b); }
};

using DualRat = Dual<GaussRat>;

// Uniform random rationals with bounded numerator/denominator; the default
// window is wide enough that identity checks by evaluation have negligible
// collision probability while keeping intermediate swell moderate.
class RatSampler {
public:
    explicit RatSampler(std::uint64_t seed, int num_bound = 40, int den_bound = 7)
        : rng_(seed), num_(-num_bound, num_bound), den_(1, den_bound) {}

    Rat rational() { return Rat(num_(rng_)) / Rat(den_(rng_)); }

    Rat nonzero_rational() {
        for (;;) {
            Rat x = rational();
            if (x != 0) return x;
        }
    }

    GaussRat gauss() { return GaussRat(rational(), rational()); }

    GaussRat nonzero_gauss() {
        for (;;) {
            GaussRat x = gauss();
            if (!x.is_zero()) return x;
        }
    }

    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
    std::uniform_int_distribution<int> num_;
    std::uniform_int_distribution<int> den_;
};

}  // namespace isolab

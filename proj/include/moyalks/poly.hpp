#pragma once

#include <algorithm>
#include <map>
#include <utility>

#include "rational.hpp"

namespace moyalks {

inline GaussianRational ipow(unsigned n) {
    switch (n % 4) {
        case 0: return {rat(1), rat(0)};
        case 1: return {rat(0), rat(1)};
        case 2: return {rat(-1), rat(0)};
        default: return {rat(0), rat(-1)};
    }
}

inline Rational rpow(const Rational& x, unsigned n) {
    Rational acc = rat(1);
    for (unsigned k = 0; k < n; ++k) acc *= x;
    return acc;
}

inline mpz_class factorial(unsigned n) {
    mpz_class f;
    mpz_fac_ui(f.get_mpz_t(), n);
    return f;
}

inline mpz_class binomial(unsigned n, unsigned k) {
    mpz_class b;
    mpz_bin_uiui(b.get_mpz_t(), n, k);
    return b;
}

// Polynomial observable on flat phase space: a finite sum of monomials
// q^a p^b, each weighted by an HbarPoly so every result of the star calculus
// stays exact in Q(i)[hbar].
class Poly {
  public:
    using Key = std::pair<unsigned, unsigned>;
    using Terms = std::map<Key, HbarPoly>;

    Poly() = default;

    static Poly monomial(unsigned dq, unsigned dp, HbarPoly c = HbarPoly(1)) {
        Poly f;
        if (!c.is_zero()) f.terms_[{dq, dp}] = std::move(c);
        return f;
    }
    static Poly q() { return monomial(1, 0); }
    static Poly p() { return monomial(0, 1); }
    static Poly constant(HbarPoly c) { return monomial(0, 0, std::move(c)); }

    const Terms& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }

    unsigned total_degree() const {
        unsigned d = 0;
        for (const auto& [k, c] : terms_) d = std::max(d, k.first + k.second);
        return d;
    }

    friend Poly operator+(const Poly& a, const Poly& b) {
        Poly r = a;
        for (const auto& [k, c] : b.terms_) r.add_term(k, c);
        return r;
    }
    friend Poly operator-(const Poly& a, const Poly& b) {
        Poly r = a;
        for (const auto& [k, c] : b.terms_) r.add_term(k, -c);
        return r;
    }
    friend Poly operator-(const Poly& a) {
        Poly r;
        for (const auto& [k, c] : a.terms_) r.terms_[k] = -c;
        return r;
    }
    friend Poly operator*(const Poly& a, const Poly& b) {
        Poly r;
        for (const auto& [ka, ca] : a.terms_)
            for (const auto& [kb, cb] : b.terms_)
                r.add_term({ka.first + kb.first, ka.second + kb.second}, ca * cb);
        return r;
    }
    friend Poly operator*(const Poly& a, const HbarPoly& s) {
        Poly r;
        for (const auto& [k, c] : a.terms_) r.add_term(k, c * s);
        return r;
    }
    friend Poly operator*(const HbarPoly& s, const Poly& a) { return a * s; }

    friend bool operator==(const Poly& a, const Poly& b) { return a.terms_ == b.terms_; }

    Poly deriv_q() const {
        Poly r;
        for (const auto& [k, c] : terms_)
            if (k.first > 0) r.terms_[{k.first - 1, k.second}] = c * GaussianRational(rat(k.first));
        return r;
    }
    Poly deriv_p() const {
        Poly r;
        for (const auto& [k, c] : terms_)
            if (k.second > 0) r.terms_[{k.first, k.second - 1}] = c * GaussianRational(rat(k.second));
        return r;
    }
    Poly deriv(unsigned nq, unsigned np) const {
        Poly r = *this;
        for (unsigned k = 0; k < nq; ++k) r = r.deriv_q();
        for (unsigned k = 0; k < np; ++k) r = r.deriv_p();
        return r;
    }

    Poly divide_by_hbar() const {
        Poly r;
        for (const auto& [k, c] : terms_) r.terms_[k] = c.divide_by_hbar();
        return r;
    }

    // substitute (q, p) -> (X(q,p), Y(q,p))
    Poly compose(const Poly& X, const Poly& Y) const {
        Poly r;
        for (const auto& [k, c] : terms_) {
            Poly t = Poly::constant(c);
            for (unsigned a = 0; a < k.first; ++a) t = t * X;
            for (unsigned b = 0; b < k.second; ++b) t = t * Y;
            r = r + t;
        }
        return r;
    }

    GaussianRational eval(const Rational& q, const Rational& p, const Rational& hbar) const {
        GaussianRational acc;
        for (const auto& [k, c] : terms_)
            acc += c.eval(hbar) * GaussianRational(rpow(q, k.first) * rpow(p, k.second));
        return acc;
    }

    std::complex<double> eval(double q, double p, double hbar) const {
        std::complex<double> acc{0.0, 0.0};
        for (const auto& [k, c] : terms_)
            acc += c.eval(hbar) * std::pow(q, static_cast<int>(k.first)) *
                   std::pow(p, static_cast<int>(k.second));
        return acc;
    }

    // sqrt of integral of |f|^2 over the square window [-L,L]^2 at fixed hbar
    double l2_window(double hbar, double L) const {
        double acc = 0.0;
        for (const auto& [k1, c1] : terms_)
            for (const auto& [k2, c2] : terms_) {
                unsigned aq = k1.first + k2.first, ap = k1.second + k2.second;
                if (aq % 2 || ap % 2) continue;
                double iq = 2.0 * std::pow(L, aq + 1.0) / (aq + 1.0);
                double ip = 2.0 * std::pow(L, ap + 1.0) / (ap + 1.0);
                acc += (c1.eval(hbar) * std::conj(c2.eval(hbar))).real() * iq * ip;
            }
        return std::sqrt(std::max(acc, 0.0));
    }

    std::string str() const {
        if (terms_.empty()) return "0";
        std::ostringstream os;
        bool first = true;
        for (const auto& [k, c] : terms_) {
            if (!first) os << " + ";
            os << "[" << c.str() << "]";
            if (k.first) os << "*q^" << k.first;
            if (k.second) os << "*p^" << k.second;
            first = false;
        }
        return os.str();
    }

  private:
    void add_term(const Key& k, const HbarPoly& c) {
        auto it = terms_.find(k);
        if (it == terms_.end()) {
            if (!c.is_zero()) terms_[k] = c;
            return;
        }
        it->second += c;
        if (it->second.is_zero()) terms_.erase(it);
    }

    Terms terms_;
};

// n-th transvectant-style bidifferential term:
//   P^n(f,g) = sum_m (-1)^m C(n,m) (d_q^{n-m} d_p^m f)(d_p^{n-m} d_q^m g)
// P^1 is the Poisson bracket; the star product exponentiates the family.
inline Poly bidiff_term(const Poly& f, const Poly& g, unsigned n) {
    Poly acc;
    for (unsigned m = 0; m <= n; ++m) {
        Poly t = f.deriv(n - m, m) * g.deriv(m, n - m);
        GaussianRational c{rat(m % 2 ? -1 : 1) * Rational(binomial(n, m))};
        acc = acc + t * HbarPoly(c);
    }
    return acc;
}

inline Poly poisson_poly(const Poly& f, const Poly& g) { return bidiff_term(f, g, 1); }

// Moyal product: sum_n (i hbar / 2)^n / n! P^n(f,g); terminates on polynomials.
inline Poly star_poly(const Poly& f, const Poly& g) {
    unsigned nmax = std::min(f.total_degree(), g.total_degree());
    Poly acc;
    for (unsigned n = 0; n <= nmax; ++n) {
        Rational scale(1, 1);
        scale /= Rational(factorial(n)) * rpow(rat(2), n);
        scale.canonicalize();
        HbarPoly c = HbarPoly::hbar_power(n, ipow(n) * scale);
        acc = acc + bidiff_term(f, g, n) * c;
    }
    return acc;
}

// (f*g - g*f)/(i hbar), exact; reduces to the Poisson bracket at hbar = 0.
inline Poly moyal_bracket_poly(const Poly& f, const Poly& g) {
    Poly comm = star_poly(f, g) - star_poly(g, f);
    // 1/(i hbar) = -i / hbar
    return (comm * HbarPoly(GaussianRational(rat(0), rat(-1)))).divide_by_hbar();
}

}  // namespace moyalks

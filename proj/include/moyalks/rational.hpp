#pragma once

#include <gmpxx.h>

#include <complex>
#include <cstdlib>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace moyalks {

using Rational = mpq_class;

inline Rational rat(long num, long den = 1) {
    Rational r(num, den);
    r.canonicalize();
    return r;
}

inline double to_double(const Rational& r) { return r.get_d(); }

// Element of Q(i): re + i*im with rational parts. Used as the coefficient
// field for all exact symbolic computation; std::complex<mpq_class> is not
// usable because libstdc++ complex assumes a floating-point value type.
struct GaussianRational {
    Rational re{0};
    Rational im{0};

    GaussianRational() = default;
    GaussianRational(Rational r) : re(std::move(r)) {}
    GaussianRational(Rational r, Rational i) : re(std::move(r)), im(std::move(i)) {}
    GaussianRational(long r) : re(rat(r)) {}

    static GaussianRational i() { return {rat(0), rat(1)}; }

    bool is_zero() const { return re == 0 && im == 0; }

    GaussianRational conj() const { return {re, -im}; }

    std::complex<double> to_complex() const { return {re.get_d(), im.get_d()}; }

    friend GaussianRational operator+(const GaussianRational& a, const GaussianRational& b) {
        return {a.re + b.re, a.im + b.im};
    }
    friend GaussianRational operator-(const GaussianRational& a, const GaussianRational& b) {
        return {a.re - b.re, a.im - b.im};
    }
    friend GaussianRational operator-(const GaussianRational& a) { return {-a.re, -a.im}; }
    friend GaussianRational operator*(const GaussianRational& a, const GaussianRational& b) {
        return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
    }
    friend GaussianRational operator*(const GaussianRational& a, const Rational& s) {
        return {a.re * s, a.im * s};
    }
    friend GaussianRational operator*(const Rational& s, const GaussianRational& a) { return a * s; }

    friend GaussianRational operator/(const GaussianRational& a, const GaussianRational& b) {
        Rational n = b.re * b.re + b.im * b.im;
        if (n == 0) throw std::domain_error("division by zero Gaussian rational");
        GaussianRational p = a * b.conj();
        return {p.re / n, p.im / n};
    }

    GaussianRational& operator+=(const GaussianRational& b) {
        re += b.re;
        im += b.im;
        return *this;
    }
    GaussianRational& operator-=(const GaussianRational& b) {
        re -= b.re;
        im -= b.im;
        return *this;
    }

    friend bool operator==(const GaussianRational& a, const GaussianRational& b) {
        return a.re == b.re && a.im == b.im;
    }

    std::string str() const {
        std::ostringstream os;
        os << re.get_str();
        if (im != 0) os << (sgn(im) >= 0 ? "+" : "") << im.get_str() << "i";
        return os.str();
    }
};

// Polynomial in the deformation parameter hbar over Q(i). coeff[k] multiplies
// hbar^k. Division by hbar is exact and only legal when the constant term
// vanishes, which is how the bracket (f*g - g*f)/(i hbar) stays symbolic.
class HbarPoly {
  public:
    HbarPoly() = default;
    HbarPoly(GaussianRational c0) {
        if (!c0.is_zero()) coeff_.push_back(std::move(c0));
    }
    HbarPoly(long n) : HbarPoly(GaussianRational(n)) {}

    static HbarPoly hbar_power(unsigned k, GaussianRational c) {
        HbarPoly p;
        if (c.is_zero()) return p;
        p.coeff_.assign(k + 1, GaussianRational{});
        p.coeff_[k] = std::move(c);
        return p;
    }

    bool is_zero() const { return coeff_.empty(); }
    // degree in hbar; -1 for the zero polynomial
    int degree() const { return static_cast<int>(coeff_.size()) - 1; }

    const GaussianRational& operator[](unsigned k) const {
        static const GaussianRational zero{};
        return k < coeff_.size() ? coeff_[k] : zero;
    }

    friend HbarPoly operator+(const HbarPoly& a, const HbarPoly& b) {
        HbarPoly r;
        r.coeff_.resize(std::max(a.coeff_.size(), b.coeff_.size()));
        for (size_t k = 0; k < r.coeff_.size(); ++k) r.coeff_[k] = a[k] + b[k];
        r.trim();
        return r;
    }
    friend HbarPoly operator-(const HbarPoly& a, const HbarPoly& b) {
        HbarPoly r;
        r.coeff_.resize(std::max(a.coeff_.size(), b.coeff_.size()));
        for (size_t k = 0; k < r.coeff_.size(); ++k) r.coeff_[k] = a[k] - b[k];
        r.trim();
        return r;
    }
    friend HbarPoly operator-(const HbarPoly& a) {
        HbarPoly r = a;
        for (auto& c : r.coeff_) c = -c;
        return r;
    }
    friend HbarPoly operator*(const HbarPoly& a, const HbarPoly& b) {
        HbarPoly r;
        if (a.is_zero() || b.is_zero()) return r;
        r.coeff_.assign(a.coeff_.size() + b.coeff_.size() - 1, GaussianRational{});
        for (size_t j = 0; j < a.coeff_.size(); ++j)
            for (size_t k = 0; k < b.coeff_.size(); ++k) r.coeff_[j + k] += a.coeff_[j] * b.coeff_[k];
        r.trim();
        return r;
    }
    friend HbarPoly operator*(const HbarPoly& a, const GaussianRational& s) {
        HbarPoly r;
        if (s.is_zero()) return r;
        r.coeff_ = a.coeff_;
        for (auto& c : r.coeff_) c = c * s;
        r.trim();
        return r;
    }
    friend HbarPoly operator*(const GaussianRational& s, const HbarPoly& a) { return a * s; }

    HbarPoly& operator+=(const HbarPoly& b) { return *this = *this + b; }
    HbarPoly& operator-=(const HbarPoly& b) { return *this = *this - b; }

    friend bool operator==(const HbarPoly& a, const HbarPoly& b) { return a.coeff_ == b.coeff_; }

    // multiply by hbar^k
    HbarPoly shift(unsigned k) const {
        HbarPoly r;
        if (is_zero() || k == 0) {
            r.coeff_ = coeff_;
            return r;
        }
        r.coeff_.assign(coeff_.size() + k, GaussianRational{});
        for (size_t j = 0; j < coeff_.size(); ++j) r.coeff_[j + k] = coeff_[j];
        return r;
    }

    HbarPoly divide_by_hbar() const {
        if (is_zero()) return {};
        if (!coeff_[0].is_zero())
            throw std::domain_error("divide_by_hbar: nonzero constant term, quotient not polynomial");
        HbarPoly r;
        r.coeff_.assign(coeff_.begin() + 1, coeff_.end());
        r.trim();
        return r;
    }

    GaussianRational eval(const Rational& hbar) const {
        GaussianRational acc;
        for (size_t k = coeff_.size(); k-- > 0;) acc = acc * GaussianRational(hbar) + coeff_[k];
        return acc;
    }

    std::complex<double> eval(double hbar) const {
        std::complex<double> acc{0.0, 0.0};
        for (size_t k = coeff_.size(); k-- > 0;) acc = acc * hbar + coeff_[k].to_complex();
        return acc;
    }

    GaussianRational at_zero() const { return (*this)[0]; }

    std::string str() const {
        if (is_zero()) return "0";
        std::ostringstream os;
        bool first = true;
        for (size_t k = 0; k < coeff_.size(); ++k) {
            if (coeff_[k].is_zero()) continue;
            if (!first) os << " + ";
            os << "(" << coeff_[k].str() << ")";
            if (k == 1) os << "*hb";
            if (k > 1) os << "*hb^" << k;
            first = false;
        }
        return os.str();
    }

  private:
    void trim() {
        while (!coeff_.empty() && coeff_.back().is_zero()) coeff_.pop_back();
    }

    std::vector<GaussianRational> coeff_;
};

}  // namespace moyalks

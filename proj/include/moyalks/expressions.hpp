#pragma once

// Tiny expression language for CLI inputs: polynomials in q and p with
// exact rational coefficients (decimals are read as fractions), plus the
// cos/sin words mapped to single Fourier modes. Printing evaluates the
// deformation coefficients at a concrete hbar.

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "fourier.hpp"
#include "poly.hpp"

namespace moyalks {

namespace detail {

struct ExprParser {
    std::string_view s;
    std::size_t i = 0;

    void skip() {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    }
    char peek() {
        skip();
        return i < s.size() ? s[i] : '\0';
    }
    bool eat(char c) {
        if (peek() == c) {
            ++i;
            return true;
        }
        return false;
    }
    [[noreturn]] void fail(const std::string& why) const {
        throw ConfigError("expression: " + why + " near position " + std::to_string(i));
    }

    long long digits(int max_len) {
        skip();
        std::size_t start = i;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
        if (i == start) fail("expected digits");
        if (int(i - start) > max_len) fail("number too long");
        return std::stoll(std::string(s.substr(start, i - start)));
    }

    Rational number() {
        long long whole = digits(15);
        if (i < s.size() && s[i] == '.') {
            ++i;
            std::size_t start = i;
            long long frac = digits(12);
            long long scale = 1;
            for (std::size_t d = start; d < i; ++d) scale *= 10;
            return rat(whole * scale + frac, scale);
        }
        return rat(whole, 1);
    }

    Poly factor() {
        if (eat('(')) {
            Poly e = expr();
            if (!eat(')')) fail("missing closing parenthesis");
            return e;
        }
        char c = peek();
        if (c == 'q' || c == 'p') {
            ++i;
            unsigned k = 1;
            if (eat('^')) k = unsigned(digits(2));
            return Poly::monomial(c == 'q' ? k : 0, c == 'p' ? k : 0, HbarPoly(rat(1, 1)));
        }
        if (std::isdigit(static_cast<unsigned char>(c)))
            return Poly::monomial(0, 0, HbarPoly(number()));
        fail("expected a number, q, p, or a parenthesized expression");
    }

    Poly term() {
        Poly acc = factor();
        while (true) {
            if (eat('*')) {
                acc = acc * factor();
                continue;
            }
            if (eat('/')) {
                Rational d = number();
                if (d == rat(0, 1)) fail("division by zero");
                acc = acc * HbarPoly(Rational(rat(1, 1) / d));
                continue;
            }
            char c = peek();
            if (c == 'q' || c == 'p' || c == '(' ||
                std::isdigit(static_cast<unsigned char>(c))) {
                acc = acc * factor();
                continue;
            }
            return acc;
        }
    }

    Poly expr() {
        bool neg = eat('-');
        if (!neg) eat('+');
        Poly acc = term();
        if (neg) acc = -acc;
        while (true) {
            if (eat('+'))
                acc = acc + term();
            else if (eat('-'))
                acc = acc - term();
            else
                return acc;
        }
    }
};

inline std::string coeff_str(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace detail

inline Poly parse_poly(const std::string& text) {
    detail::ExprParser p{text};
    Poly out = p.expr();
    p.skip();
    if (p.i != p.s.size()) p.fail("unexpected trailing input");
    return out;
}

// cos q, sin p and friends, optionally parenthesized
inline std::optional<TrigPoly> parse_trig_word(const std::string& text, const PhaseSpace& s) {
    std::string t;
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) t += c;
    bool is_cos = t.rfind("cos", 0) == 0;
    bool is_sin = t.rfind("sin", 0) == 0;
    if (!is_cos && !is_sin) return std::nullopt;
    std::string arg = t.substr(3);
    if (arg.size() >= 2 && arg.front() == '(' && arg.back() == ')')
        arg = arg.substr(1, arg.size() - 2);
    int a = 0, b = 0;
    if (arg == "q")
        a = 1;
    else if (arg == "p")
        b = 1;
    else
        throw ConfigError("expression: trig words take a bare q or p argument");
    if (is_cos)
        return TrigPoly::mode(s, a, b, Complex{0.5, 0.0}) +
               TrigPoly::mode(s, -a, -b, Complex{0.5, 0.0});
    return TrigPoly::mode(s, a, b, Complex{0.0, -0.5}) +
           TrigPoly::mode(s, -a, -b, Complex{0.0, 0.5});
}

// descending total degree, coefficients evaluated at the given hbar
inline std::string poly_to_string(const Poly& f, double hbar) {
    struct Entry {
        unsigned qd, pd;
        Complex z;
    };
    std::vector<Entry> entries;
    for (const auto& [k, c] : f.terms()) {
        Complex z = c.eval(hbar);
        if (std::abs(z) > 0.0) entries.push_back({k.first, k.second, z});
    }
    if (entries.empty()) return "0";
    std::sort(entries.begin(), entries.end(), [](const Entry& x, const Entry& y) {
        if (x.qd + x.pd != y.qd + y.pd) return x.qd + x.pd > y.qd + y.pd;
        return x.qd > y.qd;
    });
    std::string out;
    for (const Entry& e : entries) {
        std::string mono;
        if (e.qd) mono = "q" + (e.qd > 1 ? "^" + std::to_string(e.qd) : "");
        if (e.pd) mono += (mono.empty() ? "" : "*") + std::string("p") +
                          (e.pd > 1 ? "^" + std::to_string(e.pd) : "");
        bool real = std::abs(e.z.imag()) < 1e-14 * (1.0 + std::abs(e.z.real()));
        double v = e.z.real();
        std::string coeff;
        bool negative = false;
        if (real) {
            negative = v < 0.0;
            double mag = std::abs(v);
            bool unit = std::abs(mag - 1.0) < 1e-15;
            coeff = unit && !mono.empty() ? "" : detail::coeff_str(mag);
        } else {
            coeff = "(" + detail::coeff_str(e.z.real()) + (e.z.imag() < 0 ? "" : "+") +
                    detail::coeff_str(e.z.imag()) + "i)";
        }
        std::string body = coeff.empty() ? mono
                           : mono.empty() ? coeff
                                          : coeff + "*" + mono;
        if (out.empty())
            out = (negative ? "-" : "") + body;
        else
            out += (negative ? " - " : " + ") + body;
    }
    return out;
}

inline std::string trig_to_string(const TrigPoly& f) {
    std::string out;
    for (const auto& [k, c] : f.modes()) {
        if (std::abs(c) < 1e-15) continue;
        if (!out.empty()) out += " + ";
        double re = c.real() + 0.0, im = c.imag() + 0.0;
        out += "(" + detail::coeff_str(re) + (im < 0 ? "" : "+") + detail::coeff_str(im) +
               "i)*e^{i(" + std::to_string(k.first) + "q" + (k.second < 0 ? "" : "+") +
               std::to_string(k.second) + "p)}";
    }
    return out.empty() ? "0" : out;
}

}  // namespace moyalks

#include <catch2/catch_amalgamated.hpp>

#include <complex>
#include <random>
#include <vector>

#include "moyalks/poly.hpp"

using namespace moyalks;

namespace {

// Independent reference implementation: dense complex coefficient grid at a
// fixed numeric hbar, with textbook derivative and product loops. Kept free of
// any header code so it can arbitrate the exact engine.
struct Dense {
    static constexpr int N = 16;
    std::complex<double> c[N][N]{};

    static Dense from(const Poly& f, double hbar) {
        Dense d;
        for (const auto& [k, hp] : f.terms()) d.c[k.first][k.second] += hp.eval(hbar);
        return d;
    }
    Dense dq() const {
        Dense r;
        for (int a = 1; a < N; ++a)
            for (int b = 0; b < N; ++b) r.c[a - 1][b] = c[a][b] * double(a);
        return r;
    }
    Dense dp() const {
        Dense r;
        for (int a = 0; a < N; ++a)
            for (int b = 1; b < N; ++b) r.c[a][b - 1] = c[a][b] * double(b);
        return r;
    }
    Dense mul(const Dense& o) const {
        Dense r;
        for (int a = 0; a < N; ++a)
            for (int b = 0; b < N; ++b)
                if (c[a][b] != 0.0)
                    for (int x = 0; a + x < N; ++x)
                        for (int y = 0; b + y < N; ++y) r.c[a + x][b + y] += c[a][b] * o.c[x][y];
        return r;
    }
    Dense scale(std::complex<double> s) const {
        Dense r;
        for (int a = 0; a < N; ++a)
            for (int b = 0; b < N; ++b) r.c[a][b] = c[a][b] * s;
        return r;
    }
    Dense add(const Dense& o) const {
        Dense r;
        for (int a = 0; a < N; ++a)
            for (int b = 0; b < N; ++b) r.c[a][b] = c[a][b] + o.c[a][b];
        return r;
    }
    std::complex<double> eval(double q, double p) const {
        std::complex<double> acc = 0.0;
        for (int a = N - 1; a >= 0; --a) {
            std::complex<double> row = 0.0;
            for (int b = N - 1; b >= 0; --b) row = row * p + c[a][b];
            acc = acc * q + row;
        }
        return acc;
    }
};

Dense dense_bidiff(const Dense& f, const Dense& g, int n) {
    Dense acc;
    double binom = 1.0;
    for (int m = 0; m <= n; ++m) {
        Dense fa = f, gb = g;
        for (int k = 0; k < n - m; ++k) fa = fa.dq();
        for (int k = 0; k < m; ++k) fa = fa.dp();
        for (int k = 0; k < m; ++k) gb = gb.dq();
        for (int k = 0; k < n - m; ++k) gb = gb.dp();
        double sign = (m % 2) ? -1.0 : 1.0;
        acc = acc.add(fa.mul(gb).scale(sign * binom));
        binom = binom * double(n - m) / double(m + 1);
    }
    return acc;
}

Dense dense_star(const Dense& f, const Dense& g, double hbar) {
    Dense acc;
    std::complex<double> pref = 1.0;
    for (int n = 0; n <= 10; ++n) {
        acc = acc.add(dense_bidiff(f, g, n).scale(pref));
        pref *= std::complex<double>(0.0, hbar / 2.0) / double(n + 1);
    }
    return acc;
}

Poly random_poly(std::mt19937_64& rng, unsigned maxdeg) {
    std::uniform_int_distribution<int> coeff(-4, 4);
    Poly f;
    for (unsigned a = 0; a <= maxdeg; ++a)
        for (unsigned b = 0; a + b <= maxdeg; ++b) {
            int re = coeff(rng), im = coeff(rng);
            if (re || im)
                f = f + Poly::monomial(a, b, HbarPoly(GaussianRational{rat(re), rat(im)}));
        }
    return f;
}

const Poly Q = Poly::q();
const Poly P = Poly::p();

Poly qpow(unsigned n) { return Poly::monomial(n, 0); }
Poly ppow(unsigned n) { return Poly::monomial(0, n); }
HbarPoly hb(unsigned k, long num, long den = 1, bool imag = false) {
    GaussianRational c = imag ? GaussianRational{rat(0), rat(num, den)}
                              : GaussianRational{rat(num, den), rat(0)};
    return HbarPoly::hbar_power(k, c);
}

}  // namespace

TEST_CASE("gaussian rational field operations", "[rational]") {
    GaussianRational i = GaussianRational::i();
    REQUIRE(i * i == GaussianRational(rat(-1)));
    GaussianRational z{rat(3), rat(-2)};
    REQUIRE(z * z.conj() == GaussianRational(rat(13)));
    REQUIRE(z / z == GaussianRational(rat(1)));
    REQUIRE(rat(2, 4) == rat(1, 2));
    REQUIRE((z + z.conj()) == GaussianRational(rat(6)));
}

TEST_CASE("hbar polynomial arithmetic and exact division", "[rational]") {
    HbarPoly a = hb(0, 1) + hb(2, -1, 2);           // 1 - hb^2/2
    HbarPoly b = hb(1, 0, 1, false) + hb(1, 1, 1);  // hb
    REQUIRE((a * b).divide_by_hbar() == a);
    REQUIRE(a.eval(rat(2)) == GaussianRational(rat(-1)));
    REQUIRE((a - a).is_zero());
    REQUIRE_THROWS(a.divide_by_hbar());
    HbarPoly c = hb(1, 3) + hb(3, 5);
    REQUIRE(c.divide_by_hbar() == hb(0, 3) + hb(2, 5));
    REQUIRE(c.eval(0.0) == std::complex<double>(0.0, 0.0));
}

TEST_CASE("polynomial derivatives and composition", "[poly]") {
    Poly f = qpow(3) * ppow(2);
    REQUIRE(f.deriv(1, 0) == Poly::monomial(2, 2, HbarPoly(3)));
    REQUIRE(f.deriv(0, 1) == Poly::monomial(3, 1, HbarPoly(2)));
    REQUIRE(f.deriv(4, 0).is_zero());
    // substitute the shear (q, p) -> (q, p + q^2)
    Poly sheared = P.compose(Q, P + qpow(2));
    REQUIRE(sheared == P + qpow(2));
    Poly g = (Q * P).compose(Q + P, Q - P);
    REQUIRE(g == qpow(2) - ppow(2));
}

TEST_CASE("canonical star products in closed form", "[star]") {
    // q * p = qp + i hb / 2 and p * q = qp - i hb / 2
    REQUIRE(star_poly(Q, P) == Q * P + Poly::constant(hb(1, 1, 2, true)));
    REQUIRE(star_poly(P, Q) == Q * P + Poly::constant(hb(1, -1, 2, true)));
    // q^2 * p^2 = q^2 p^2 + 2 i hb q p - hb^2 / 2
    Poly expect = qpow(2) * ppow(2) + Q * P * hb(1, 2, 1, true) + Poly::constant(hb(2, -1, 2));
    REQUIRE(star_poly(qpow(2), ppow(2)) == expect);
}

TEST_CASE("moyal bracket closed forms and hbar corrections", "[star]") {
    REQUIRE(moyal_bracket_poly(Q, P) == Poly::constant(HbarPoly(1)));
    REQUIRE(moyal_bracket_poly(qpow(2), ppow(2)) == Q * P * HbarPoly(4));
    // {q^3, p^3} picks up the first quantum correction -(3/2) hb^2
    Poly expect = qpow(2) * ppow(2) * HbarPoly(9) + Poly::constant(hb(2, -3, 2));
    REQUIRE(moyal_bracket_poly(qpow(3), ppow(3)) == expect);
    // classical part always matches the Poisson bracket
    std::mt19937_64 rng(7);
    for (int k = 0; k < 20; ++k) {
        Poly f = random_poly(rng, 3), g = random_poly(rng, 3);
        Poly mb = moyal_bracket_poly(f, g);
        Poly classical;
        for (const auto& [key, c] : mb.terms())
            classical = classical + Poly::monomial(key.first, key.second, HbarPoly(c.at_zero()));
        REQUIRE(classical == poisson_poly(f, g));
    }
}

TEST_CASE("quadratic hamiltonians generate exactly classical brackets", "[star]") {
    std::mt19937_64 rng(11);
    Poly H = qpow(2) + ppow(2) + Q * P * HbarPoly(3) + Q * HbarPoly(2) - P;
    for (int k = 0; k < 10; ++k) {
        Poly f = random_poly(rng, 4);
        REQUIRE(moyal_bracket_poly(H, f) == poisson_poly(H, f));
    }
}

TEST_CASE("star product agrees with independent dense-coefficient reference", "[star]") {
    std::mt19937_64 rng(23);
    const double hbar = 0.37;
    for (int k = 0; k < 12; ++k) {
        Poly f = random_poly(rng, 3), g = random_poly(rng, 3);
        Dense df = Dense::from(f, hbar), dg = Dense::from(g, hbar);
        Dense ref = dense_star(df, dg, hbar);
        Poly st = star_poly(f, g);
        for (double q : {-1.3, 0.2, 0.9})
            for (double p : {-0.7, 0.4, 1.1}) {
                auto a = st.eval(q, p, hbar);
                auto b = ref.eval(q, p);
                REQUIRE(std::abs(a - b) < 1e-9 * (1.0 + std::abs(b)));
            }
    }
}

TEST_CASE("star algebra satisfies associativity antisymmetry jacobi", "[star]") {
    std::mt19937_64 rng(42);
    for (int k = 0; k < 25; ++k) {
        Poly f = random_poly(rng, 3), g = random_poly(rng, 3), h = random_poly(rng, 3);
        REQUIRE(star_poly(star_poly(f, g), h) == star_poly(f, star_poly(g, h)));
        REQUIRE((moyal_bracket_poly(f, g) + moyal_bracket_poly(g, f)).is_zero());
        Poly jac = moyal_bracket_poly(f, moyal_bracket_poly(g, h)) +
                   moyal_bracket_poly(g, moyal_bracket_poly(h, f)) +
                   moyal_bracket_poly(h, moyal_bracket_poly(f, g));
        REQUIRE(jac.is_zero());
    }
}

TEST_CASE("window norm of polynomials matches hand integrals", "[poly]") {
    // integral of q^2 over [-1,1]^2 is 4/3
    REQUIRE(Q.l2_window(0.0, 1.0) == Catch::Approx(std::sqrt(4.0 / 3.0)));
    Poly f = Q * P;
    REQUIRE(f.l2_window(0.0, 1.0) == Catch::Approx(2.0 / 3.0));
    // hbar-dependent constant: |i hb/2|^2 * 4 at hb = 0.5
    Poly c = Poly::constant(hb(1, 1, 2, true));
    REQUIRE(c.l2_window(0.5, 1.0) == Catch::Approx(0.5));
}

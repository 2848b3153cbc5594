#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "geometry.hpp"
#include "starproduct.hpp"

namespace moyalks {

enum class Scheme { LeapfrogPoints, SemiLagrangianDensity, SplitStepMoyal, Rk4Moyal };

inline std::string scheme_name(Scheme s) {
    switch (s) {
        case Scheme::LeapfrogPoints: return "leapfrog-points";
        case Scheme::SemiLagrangianDensity: return "semi-lagrangian-density";
        case Scheme::SplitStepMoyal: return "split-step-moyal";
        default: return "rk4-moyal";
    }
}

inline Scheme scheme_from_name(const std::string& s) {
    if (s == "leapfrog-points") return Scheme::LeapfrogPoints;
    if (s == "semi-lagrangian-density") return Scheme::SemiLagrangianDensity;
    if (s == "split-step-moyal") return Scheme::SplitStepMoyal;
    if (s == "rk4-moyal") return Scheme::Rk4Moyal;
    throw ConfigError("unknown scheme: " + s);
}

// Periodically kicked Hamiltonian T(p) + V(q) sum_n delta(t - n). The kick
// strength lives in the potential coefficients.
struct KickedSystem {
    Poly kinetic;
    TrigPoly potential;
};

inline KickedSystem kicked_rotor(const PhaseSpace& s, double strength) {
    KickedSystem k{Poly::monomial(0, 2, HbarPoly(rat(1, 2))), TrigPoly::cos_q(s)};
    k.potential = strength * k.potential;
    return k;
}

struct FlowSpec {
    PhaseSpace space;
    std::optional<Observable> hamiltonian;
    std::optional<KickedSystem> kicked;
    Hbar hbar{0.0};
    Scheme scheme{Scheme::SemiLagrangianDensity};
    double dt{1.0 / 64};
    unsigned steps_per_unit_time{64};

    bool is_kicked() const { return kicked.has_value(); }
    bool classical_scheme() const {
        return scheme == Scheme::LeapfrogPoints || scheme == Scheme::SemiLagrangianDensity;
    }

    void validate() const;

    static FlowSpec autonomous(const PhaseSpace& s, Observable h, Hbar hb = Hbar(0.0),
                               Scheme sc = Scheme::SemiLagrangianDensity) {
        FlowSpec f;
        f.space = s;
        f.hamiltonian = std::move(h);
        f.hbar = hb;
        f.scheme = sc;
        return f;
    }
    static FlowSpec kicked_flow(const PhaseSpace& s, KickedSystem k, Hbar hb = Hbar(0.0),
                                Scheme sc = Scheme::SplitStepMoyal) {
        FlowSpec f;
        f.space = s;
        f.kicked = std::move(k);
        f.hbar = hb;
        f.scheme = sc;
        return f;
    }
    FlowSpec& with_steps(unsigned n) {
        if (n == 0) throw ConfigError("steps_per_unit_time must be positive");
        steps_per_unit_time = n;
        dt = 1.0 / n;
        return *this;
    }
};

struct EvolvedField {
    Observable field;
    double t = 0.0;
    double negativity_mass = 0.0;
};

namespace detail {

inline double grid_negativity_fraction(const GridField& g) {
    double neg = 0.0, tot = 0.0;
    for (const Complex& z : g.data()) {
        tot += std::abs(z.real());
        if (z.real() < 0.0) neg -= z.real();
    }
    return tot > 0.0 ? neg / tot : 0.0;
}

inline double real_part(const HbarPoly& c, const char* what) {
    Complex z = c.eval(0.0);
    if (std::abs(z.imag()) > 1e-12 * (1.0 + std::abs(z.real())))
        throw ConfigError(std::string(what) + " must have real coefficients");
    return z.real();
}

// H = qq q^2/2 + qp q p + pp p^2/2 + lq q + lp p
struct QuadForm {
    double qq = 0, qp = 0, pp = 0, lq = 0, lp = 0;
};

inline std::optional<QuadForm> quadratic_form(const Observable& h) {
    if (!h.poly) return std::nullopt;
    if (h.poly->total_degree() > 2) return std::nullopt;
    QuadForm f;
    for (const auto& [k, c] : h.poly->terms()) {
        double v = real_part(c, "hamiltonian");
        if (k.first == 2 && k.second == 0) f.qq = 2 * v;
        else if (k.first == 1 && k.second == 1) f.qp = v;
        else if (k.first == 0 && k.second == 2) f.pp = 2 * v;
        else if (k.first == 1 && k.second == 0) f.lq = v;
        else if (k.first == 0 && k.second == 1) f.lp = v;
    }
    return f;
}

struct Affine2 {
    double m00 = 1, m01 = 0, m10 = 0, m11 = 1, c0 = 0, c1 = 0;

    std::array<double, 2> operator()(double q, double p) const {
        return {m00 * q + m01 * p + c0, m10 * q + m11 * p + c1};
    }
    // a after b
    static Affine2 compose(const Affine2& a, const Affine2& b) {
        Affine2 r;
        r.m00 = a.m00 * b.m00 + a.m01 * b.m10;
        r.m01 = a.m00 * b.m01 + a.m01 * b.m11;
        r.m10 = a.m10 * b.m00 + a.m11 * b.m10;
        r.m11 = a.m10 * b.m01 + a.m11 * b.m11;
        r.c0 = a.m00 * b.c0 + a.m01 * b.c1 + a.c0;
        r.c1 = a.m10 * b.c0 + a.m11 * b.c1 + a.c1;
        return r;
    }
};

// Closed-form time-t flow of xdot = A x + c with A = [[qp, pp], [-qq, -qp]],
// c = (lp, -lq). A is traceless so A^2 = -det(A) I and the exponential and its
// integral reduce to scalar trig, hyperbolic, or polynomial factors.
inline Affine2 quadratic_flow_map(const QuadForm& f, double t) {
    double a00 = f.qp, a01 = f.pp, a10 = -f.qq, a11 = -f.qp;
    double det = a00 * a11 - a01 * a10;
    double e0, e1, s0, s1;
    if (det > 1e-14) {
        double w = std::sqrt(det);
        e0 = std::cos(w * t);
        e1 = std::sin(w * t) / w;
        s0 = e1;
        s1 = (1.0 - e0) / det;
    } else if (det < -1e-14) {
        double l = std::sqrt(-det);
        e0 = std::cosh(l * t);
        e1 = std::sinh(l * t) / l;
        s0 = e1;
        s1 = (e0 - 1.0) / (-det);
    } else {
        e0 = 1.0;
        e1 = t;
        s0 = t;
        s1 = 0.5 * t * t;
    }
    double v0 = f.lp, v1 = -f.lq;
    Affine2 r;
    r.m00 = e0 + e1 * a00;
    r.m01 = e1 * a01;
    r.m10 = e1 * a10;
    r.m11 = e0 + e1 * a11;
    r.c0 = s0 * v0 + s1 * (a00 * v0 + a01 * v1);
    r.c1 = s0 * v1 + s1 * (a10 * v0 + a11 * v1);
    return r;
}

struct Separable {
    std::function<double(double)> dT;
    std::function<double(double)> dV;
};

inline std::optional<Separable> separable_split(const Observable& h) {
    if (h.poly) {
        std::vector<double> tp, vq;
        for (const auto& [k, c] : h.poly->terms()) {
            double v = real_part(c, "hamiltonian");
            if (k.first > 0 && k.second > 0) return std::nullopt;
            if (k.first == 0) {
                if (tp.size() <= k.second) tp.resize(k.second + 1, 0.0);
                tp[k.second] = v;
            } else {
                if (vq.size() <= k.first) vq.resize(k.first + 1, 0.0);
                vq[k.first] = v;
            }
        }
        auto ddx = [](std::vector<double> c) {
            return [c](double x) {
                double acc = 0.0;
                for (std::size_t m = c.size(); m-- > 1;) acc = acc * x + m * c[m];
                return acc;
            };
        };
        return Separable{ddx(std::move(tp)), ddx(std::move(vq))};
    }
    if (h.trig) {
        std::vector<std::pair<double, Complex>> tm, vm;
        for (const auto& [k, c] : h.trig->modes()) {
            if (k.first != 0 && k.second != 0) return std::nullopt;
            if (k.first == 0 && k.second != 0) tm.emplace_back(h.space.beta(k.second), c);
            else if (k.first != 0) vm.emplace_back(h.space.alpha(k.first), c);
        }
        auto dmodes = [](std::vector<std::pair<double, Complex>> m) {
            return [m](double x) {
                Complex acc{0.0, 0.0};
                for (const auto& [w, c] : m) acc += Complex{0.0, w} * c * std::polar(1.0, w * x);
                return acc.real();
            };
        };
        return Separable{dmodes(std::move(tm)), dmodes(std::move(vm))};
    }
    return std::nullopt;
}

inline void leapfrog_advance(double& q, double& p, double h, unsigned n, const Separable& s) {
    for (unsigned i = 0; i < n; ++i) {
        p -= 0.5 * h * s.dV(q);
        q += h * s.dT(p);
        p -= 0.5 * h * s.dV(q);
    }
}

inline void rk4_advance(double& q, double& p, double h, unsigned n, const Observable& ham) {
    auto field = [&ham](double x, double y) {
        auto g = detail::gradient(ham, x, y);
        return std::array<double, 2>{g[1], -g[0]};
    };
    for (unsigned i = 0; i < n; ++i) {
        auto k1 = field(q, p);
        auto k2 = field(q + 0.5 * h * k1[0], p + 0.5 * h * k1[1]);
        auto k3 = field(q + 0.5 * h * k2[0], p + 0.5 * h * k2[1]);
        auto k4 = field(q + h * k3[0], p + h * k3[1]);
        q += h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]);
        p += h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]);
    }
}

inline int signed_bin(int bin, int n) { return bin <= n / 2 ? bin : bin - n; }

inline void fft_rows(Complex* d, int nrows, int n, int sign) {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    fftw_plan plan = fftw_plan_many_dft(
        1, &n, nrows, reinterpret_cast<fftw_complex*>(d), nullptr, 1, n,
        reinterpret_cast<fftw_complex*>(d), nullptr, 1, n, sign, FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
}

inline void fft_cols(Complex* d, int nrows, int ncols, int sign) {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    fftw_plan plan = fftw_plan_many_dft(
        1, &nrows, ncols, reinterpret_cast<fftw_complex*>(d), nullptr, ncols, 1,
        reinterpret_cast<fftw_complex*>(d), nullptr, ncols, 1, sign, FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
}

inline Complex int_pow(Complex z, unsigned n) {
    Complex r{1.0, 0.0};
    while (n) {
        if (n & 1u) r *= z;
        z *= z;
        n >>= 1;
    }
    return r;
}

// One kick period of the deformed transport equation in split form. Both
// halves are diagonal after a one-dimensional Fourier transform:
//   kick:  multiply by exp(W_b(q)), W_b(q) = sum_c V_c e^{i a_c q} K(c, b)
//          with K(c, b) = -(2/hbar) sin(hbar S(c, b)/2), S the mode symplectic
//          area, and K -> -S as hbar -> 0 (classical shear p -> p + V'(q));
//   drift: multiply by exp(-i a T'(p)) per q-mode a.
// W vanishes on the b = 0 row and the drift phase on the a = 0 row, so the
// total mean is conserved exactly; every multiplier is unimodular.
class KickedPropagator {
  public:
    KickedPropagator(const PhaseSpace& s, const KickedSystem& k, double hbar, double dt,
                     bool exact_kick)
        : space_(s), nq_(s.Nq), np_(s.Np) {
        double cs = (two_pi / s.Lq) * (two_pi / s.Lp);

        std::vector<double> dT(np_);
        auto sep = Separable{};
        {
            Observable kin = Observable::from_poly(s, k.kinetic);
            auto split = separable_split(kin);
            if (!split) throw ConfigError("kicked kinetic term must depend on p only");
            sep.dT = split->dT;
        }
        for (int l = 0; l < np_; ++l) dT[l] = sep.dT(s.p0() + l * (s.Lp / np_));

        drift_.resize(std::size_t(nq_) * np_);
        for (int j = 0; j < nq_; ++j) {
            double alpha = s.alpha(signed_bin(j, nq_));
            for (int l = 0; l < np_; ++l)
                drift_[std::size_t(j) * np_ + l] = std::polar(1.0, -alpha * dT[l]);
        }

        kick_.resize(std::size_t(nq_) * np_);
        double wmax = 0.0;
        std::vector<Complex> w(kick_.size());
        for (int j = 0; j < nq_; ++j) {
            double q = s.q0() + j * (s.Lq / nq_);
            for (int l = 0; l < np_; ++l) {
                int b = signed_bin(l, np_);
                Complex acc{0.0, 0.0};
                for (const auto& [m, c] : k.potential.modes()) {
                    if (m.second != 0) throw ConfigError("kick potential must depend on q only");
                    double area = cs * m.first * b;
                    double coupling =
                        hbar > 0.0 ? -(2.0 / hbar) * std::sin(0.5 * hbar * area) : -area;
                    acc += c * std::polar(1.0, s.alpha(m.first) * q) * coupling;
                }
                w[std::size_t(j) * np_ + l] = acc;
                wmax = std::max(wmax, std::abs(acc));
            }
        }
        if (exact_kick) {
            for (std::size_t i = 0; i < w.size(); ++i) kick_[i] = std::exp(w[i]);
        } else {
            unsigned nsub = std::max(1u, unsigned(std::lround(1.0 / dt)));
            int halvings = 0;
            while (wmax / nsub > 2.5) {
                nsub *= 2;
                if (++halvings > 24)
                    throw StabilityError("kick mode coupling too strong for rk4 substeps");
            }
            for (std::size_t i = 0; i < w.size(); ++i) {
                Complex z = w[i] / double(nsub);
                Complex r = 1.0 + z * (1.0 + z * (0.5 + z * (1.0 / 6 + z * (1.0 / 24))));
                kick_[i] = int_pow(r, nsub);
            }
        }
    }

    void forward(std::vector<Complex>& d) const {
        apply_kick(d, false);
        apply_drift(d, false);
    }
    void backward(std::vector<Complex>& d) const {
        apply_drift(d, true);
        apply_kick(d, true);
    }

  private:
    void apply_kick(std::vector<Complex>& d, bool inverse) const {
        fft_rows(d.data(), nq_, np_, FFTW_FORWARD);
        for (std::size_t i = 0; i < d.size(); ++i)
            d[i] *= inverse ? std::conj(kick_[i]) : kick_[i];
        fft_rows(d.data(), nq_, np_, FFTW_BACKWARD);
        for (Complex& z : d) z /= double(np_);
    }
    void apply_drift(std::vector<Complex>& d, bool inverse) const {
        fft_cols(d.data(), nq_, np_, FFTW_FORWARD);
        for (std::size_t i = 0; i < d.size(); ++i)
            d[i] *= inverse ? std::conj(drift_[i]) : drift_[i];
        fft_cols(d.data(), nq_, np_, FFTW_BACKWARD);
        for (Complex& z : d) z /= double(nq_);
    }

    PhaseSpace space_;
    int nq_, np_;
    std::vector<Complex> kick_, drift_;
};

// Generator L f = {H, f}_hbar for polynomial H of degree <= 4. The bracket
// series terminates at the third bidifferential term, so the generator is
// exact: L = P1 - (hbar^2/24) P3 with H derivatives as value grids and f
// derivatives spectral.
class PolyGridGenerator {
  public:
    PolyGridGenerator(const PhaseSpace& s, const Poly& h, double hbar)
        : space_(s), hbar_(hbar) {
        auto grid_of = [&](const Poly& g) {
            return GridField::sample(s, [&](double q, double p) { return g.eval(q, p, 0.0); });
        };
        h10_ = grid_of(h.deriv_q());
        h01_ = grid_of(h.deriv_p());
        cubic_ = hbar > 0.0 && h.total_degree() >= 3;
        if (cubic_) {
            h30_ = grid_of(h.deriv(3, 0));
            h21_ = grid_of(h.deriv(2, 1));
            h12_ = grid_of(h.deriv(1, 2));
            h03_ = grid_of(h.deriv(0, 3));
        }
    }

    GridField apply(const GridField& f) const {
        GridField out = h10_ * f.spectral_deriv(0, 1) - h01_ * f.spectral_deriv(1, 0);
        if (cubic_) {
            GridField p3 = h30_ * f.spectral_deriv(0, 3) - 3.0 * (h21_ * f.spectral_deriv(1, 2)) +
                           3.0 * (h12_ * f.spectral_deriv(2, 1)) - h03_ * f.spectral_deriv(3, 0);
            out = out - (hbar_ * hbar_ / 24.0) * p3;
        }
        return out;
    }

    double norm_bound() const {
        double am = M_PI * space_.Nq / space_.Lq, bm = M_PI * space_.Np / space_.Lp;
        double b = h10_.max_abs() * bm + h01_.max_abs() * am;
        if (cubic_)
            b += hbar_ * hbar_ / 24.0 *
                 (h30_.max_abs() * bm * bm * bm + 3 * h21_.max_abs() * am * bm * bm +
                  3 * h12_.max_abs() * am * am * bm + h03_.max_abs() * am * am * am);
        return b;
    }

  private:
    PhaseSpace space_;
    double hbar_;
    bool cubic_ = false;
    GridField h10_, h01_, h30_, h21_, h12_, h03_;
};

// Generator in dense mode bins for a trigonometric H: each H mode v couples
// bin w to bin v + w with the exact per-pair bracket coefficient.
class TrigModeGenerator {
  public:
    TrigModeGenerator(const PhaseSpace& s, const TrigPoly& h, double hbar)
        : nq_(s.Nq), np_(s.Np) {
        double cs = (two_pi / s.Lq) * (two_pi / s.Lp);
        bound_ = 0.0;
        for (const auto& [v, c] : h.modes()) {
            if (v.first == 0 && v.second == 0) continue;
            terms_.push_back({v.first, v.second, c});
            double area_max = cs * (std::abs(v.first) * np_ / 2.0 + std::abs(v.second) * nq_ / 2.0);
            double cap = hbar > 0.0 ? std::min(2.0 / hbar, area_max) : area_max;
            bound_ += std::abs(c) * cap;
        }
        cs_ = cs;
        hbar_ = hbar;
    }

    void apply(const std::vector<Complex>& in, std::vector<Complex>& out) const {
        std::fill(out.begin(), out.end(), Complex{0.0, 0.0});
        int qa = nq_ / 2 - 1, qb = np_ / 2 - 1;
        for (const auto& t : terms_) {
            for (int j = 0; j < nq_; ++j) {
                int a = signed_bin(j, nq_);
                int ta = a + t.c;
                if (ta < -qa || ta > qa) continue;
                int tj = (ta + nq_) % nq_;
                for (int l = 0; l < np_; ++l) {
                    int b = signed_bin(l, np_);
                    int tb = b + t.d;
                    if (tb < -qb || tb > qb) continue;
                    double area = cs_ * (t.c * b - t.d * a);
                    double coef =
                        hbar_ > 0.0 ? -(2.0 / hbar_) * std::sin(0.5 * hbar_ * area) : -area;
                    out[std::size_t(tj) * np_ + (tb + np_) % np_] +=
                        t.v * coef * in[std::size_t(j) * np_ + l];
                }
            }
        }
    }

    double norm_bound() const { return bound_; }

  private:
    struct Term {
        int c, d;
        Complex v;
    };
    int nq_, np_;
    double cs_ = 1.0, hbar_ = 0.0;
    double bound_ = 0.0;
    std::vector<Term> terms_;
};

template <typename ApplyFn>
void rk4_field_integrate(std::vector<Complex>& y, double t, double dt_hint, double bound,
                         const ApplyFn& apply) {
    if (t == 0.0) return;
    double base = std::abs(dt_hint);
    while (bound * base > 2.0) base *= 0.5;
    if (base < 1e-7) throw StabilityError("generator norm bound forces dt below 1e-7");
    double n0 = 0.0;
    for (const Complex& z : y) n0 += std::norm(z);
    n0 = std::sqrt(n0);
    for (int attempt = 0;; ++attempt) {
        if (attempt > 8) throw StabilityError("rk4 norm growth persists after 8 dt halvings");
        double h = base / double(1 << attempt);
        unsigned steps = unsigned(std::ceil(std::abs(t) / h - 1e-12));
        double hs = t / double(steps);
        std::vector<Complex> w = y, k1(y.size()), k2(y.size()), k3(y.size()), k4(y.size()),
                             tmp(y.size());
        bool ok = true;
        for (unsigned s = 0; s < steps && ok; ++s) {
            apply(w, k1);
            for (std::size_t i = 0; i < w.size(); ++i) tmp[i] = w[i] + 0.5 * hs * k1[i];
            apply(tmp, k2);
            for (std::size_t i = 0; i < w.size(); ++i) tmp[i] = w[i] + 0.5 * hs * k2[i];
            apply(tmp, k3);
            for (std::size_t i = 0; i < w.size(); ++i) tmp[i] = w[i] + hs * k3[i];
            apply(tmp, k4);
            for (std::size_t i = 0; i < w.size(); ++i)
                w[i] += hs / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            double n = 0.0;
            for (const Complex& z : w) n += std::norm(z);
            if (!(std::sqrt(n) <= n0 * 1.10 + 1e-30)) ok = false;
        }
        if (ok) {
            y = std::move(w);
            return;
        }
    }
}

inline PointEval exact_evaluator(const Observable& f) {
    if (f.poly) {
        auto g = std::make_shared<Poly>(*f.poly);
        return [g](double q, double p) { return g->eval(q, p, 0.0); };
    }
    if (f.trig) {
        auto g = std::make_shared<TrigPoly>(*f.trig);
        return [g](double q, double p) { return g->eval(q, p); };
    }
    if (f.fn) return f.fn;
    auto g = std::make_shared<TrigPoly>(f.as_trig());
    return [g](double q, double p) { return g->eval(q, p); };
}

}  // namespace detail

inline void FlowSpec::validate() const {
    space.validate();
    if (hamiltonian && kicked)
        throw ConfigError("flow spec takes a hamiltonian or a kicked system, not both");
    if (dt <= 0.0 || steps_per_unit_time == 0)
        throw ConfigError("flow spec needs positive dt and steps_per_unit_time");
    if (std::abs(dt * steps_per_unit_time - 1.0) > 1e-9)
        throw ConfigError("dt times steps_per_unit_time must equal one");
    if (kicked) {
        if (space.kind != SpaceKind::Torus)
            throw ConfigError("kicked systems require a torus phase space");
        for (const auto& [k, c] : kicked->potential.modes())
            if (k.second != 0) throw ConfigError("kick potential must depend on q only");
        for (const auto& [k, c] : kicked->kinetic.terms())
            if (k.first != 0) throw ConfigError("kicked kinetic term must depend on p only");
    }
    if (hamiltonian && scheme == Scheme::LeapfrogPoints) {
        if (!detail::separable_split(*hamiltonian))
            throw ConfigError("leapfrog requires a separable hamiltonian T(p) + V(q)");
    }
}

namespace detail {

// Classical characteristic map for time t, exact when the generator is
// quadratic; otherwise integrated with spec.dt substeps per time unit.
inline PointMapFn classical_flow_map(const FlowSpec& spec, double t) {
    if (spec.is_kicked()) {
        double n = std::round(t);
        if (std::abs(t - n) > 1e-9)
            throw ConfigError("kicked flows evolve over whole kick periods");
        auto sep = separable_split(Observable::from_poly(spec.space, spec.kicked->kinetic));
        Observable pot = Observable::from_trig(spec.kicked->potential);
        auto vsplit = separable_split(pot);
        auto dT = sep->dT;
        auto dV = vsplit->dV;
        long k = std::lround(n);
        return [dT, dV, k](double q, double p) {
            double x = q, y = p;
            if (k >= 0) {
                for (long i = 0; i < k; ++i) {
                    y -= dV(x);
                    x += dT(y);
                }
            } else {
                for (long i = 0; i < -k; ++i) {
                    x -= dT(y);
                    y += dV(x);
                }
            }
            return std::array<double, 2>{x, y};
        };
    }
    if (!spec.hamiltonian) {
        return [](double q, double p) { return std::array<double, 2>{q, p}; };
    }
    if (spec.scheme != Scheme::LeapfrogPoints) {
        if (auto qf = quadratic_form(*spec.hamiltonian)) {
            Affine2 m = quadratic_flow_map(*qf, t);
            return [m](double q, double p) { return m(q, p); };
        }
    }
    if (auto sep = separable_split(*spec.hamiltonian)) {
        unsigned n = std::max(1u, unsigned(std::ceil(std::abs(t) * spec.steps_per_unit_time - 1e-12)));
        double h = t / double(n);
        Separable s = *sep;
        return [s, h, n](double q, double p) {
            double x = q, y = p;
            leapfrog_advance(x, y, h, n, s);
            return std::array<double, 2>{x, y};
        };
    }
    unsigned n = std::max(1u, unsigned(std::ceil(std::abs(t) * spec.steps_per_unit_time - 1e-12)));
    double h = t / double(n);
    Observable ham = *spec.hamiltonian;
    return [ham, h, n](double q, double p) {
        double x = q, y = p;
        rk4_advance(x, y, h, n, ham);
        return std::array<double, 2>{x, y};
    };
}

inline Observable transported(const Observable& f, const FlowSpec& spec, const PointMapFn& back) {
    PointEval source = exact_evaluator(f);
    PhaseSpace s = spec.space;
    bool wrap = s.kind == SpaceKind::Torus;
    PointEval moved = [source, back, s, wrap](double q, double p) {
        auto x = back(q, p);
        if (wrap) return source(s.wrap_q(x[0]), s.wrap_p(x[1]));
        return source(x[0], x[1]);
    };
    return Observable::from_function(s, std::move(moved));
}

}  // namespace detail

// Transport along the classical equation df/dt = {H, f}: f(t) = f0 composed
// with the backward characteristic, sampled on the grid of the phase space.
inline EvolvedField liouville_step(const Observable& f, const FlowSpec& spec, double t) {
    spec.validate();
    if (!(f.space == spec.space)) throw ConfigError("observable lives on a different phase space");
    if (spec.hbar.value != 0.0 && !spec.classical_scheme())
        throw ConfigError("liouville_step needs hbar = 0 or a classical scheme");
    PointMapFn back = detail::classical_flow_map(spec, -t);
    Observable out = detail::transported(f, spec, back);
    double neg = detail::grid_negativity_fraction(*out.grid);
    return EvolvedField{std::move(out), t, neg};
}

// Integrates the deformed transport equation df/dt = {H, f}_hbar. Quadratic
// generators reuse the exact classical characteristics (the two equations
// coincide for them at every hbar); kicked systems use the split propagator;
// other hamiltonians use rk4 with the terminating polynomial generator or the
// exact per-mode coefficients.
inline EvolvedField moyal_step(const Observable& f, const FlowSpec& spec, double t) {
    spec.validate();
    if (spec.is_kicked()) {
        double n = std::round(t);
        if (std::abs(t - n) > 1e-9 || n < 0)
            throw ConfigError("kicked flows evolve over whole kick periods");
        detail::KickedPropagator prop(spec.space, *spec.kicked, spec.hbar.value, spec.dt,
                                      spec.scheme != Scheme::Rk4Moyal);
        GridField g = f.as_grid();
        std::vector<Complex> d = g.data();
        for (long i = 0; i < std::lround(n); ++i) prop.forward(d);
        Observable out = Observable::from_grid(GridField(spec.space, std::move(d)));
        double neg = detail::grid_negativity_fraction(*out.grid);
        return EvolvedField{std::move(out), t, neg};
    }
    if (!spec.hamiltonian || spec.hbar.value == 0.0 ||
        detail::quadratic_form(*spec.hamiltonian)) {
        FlowSpec cl = spec;
        cl.hbar = Hbar(0.0);
        cl.scheme = Scheme::SemiLagrangianDensity;
        EvolvedField ev = liouville_step(f, cl, t);
        ev.t = t;
        return ev;
    }
    const Observable& h = *spec.hamiltonian;
    if (h.poly) {
        if (h.poly->total_degree() > 4)
            throw ConfigError("moyal_step accepts polynomial hamiltonians up to degree four");
        detail::PolyGridGenerator gen(spec.space, *h.poly, spec.hbar.value);
        GridField g = f.as_grid();
        std::vector<Complex> y = g.data();
        auto apply = [&](const std::vector<Complex>& in, std::vector<Complex>& out) {
            GridField r = gen.apply(GridField(spec.space, in));
            out = r.data();
        };
        detail::rk4_field_integrate(y, t, spec.dt, gen.norm_bound(), apply);
        Observable out = Observable::from_grid(GridField(spec.space, std::move(y)));
        double neg = detail::grid_negativity_fraction(*out.grid);
        return EvolvedField{std::move(out), t, neg};
    }
    TrigPoly ht = h.as_trig();
    detail::TrigModeGenerator gen(spec.space, ht, spec.hbar.value);
    GridField g = f.as_grid();
    std::vector<Complex> y = g.data();
    int nq = spec.space.Nq, np = spec.space.Np;
    detail::fft2(y, nq, np, FFTW_FORWARD);
    for (Complex& z : y) z /= double(nq) * np;
    auto apply = [&gen](const std::vector<Complex>& in, std::vector<Complex>& out) {
        gen.apply(in, out);
    };
    detail::rk4_field_integrate(y, t, spec.dt, gen.norm_bound(), apply);
    detail::fft2(y, nq, np, FFTW_BACKWARD);
    Observable out = Observable::from_grid(GridField(spec.space, std::move(y)));
    double neg = detail::grid_negativity_fraction(*out.grid);
    return EvolvedField{std::move(out), t, neg};
}

// Reusable handle for the unit-time evolution operator. forward transports
// densities; pull_back composes observables with the forward point flow
// (the direction itinerary estimators need).
class TimeOneMap {
  public:
    explicit TimeOneMap(FlowSpec spec) : spec_(std::move(spec)) {
        spec_.validate();
        quantum_ = !spec_.classical_scheme() && spec_.hbar.value > 0.0;
        if (spec_.is_kicked() && quantum_) {
            prop_ = std::make_shared<detail::KickedPropagator>(
                spec_.space, *spec_.kicked, spec_.hbar.value, spec_.dt,
                spec_.scheme != Scheme::Rk4Moyal);
        }
        if (!spec_.is_kicked() || !quantum_) {
            fwd_ = detail::classical_flow_map(spec_, 1.0);
            back_ = detail::classical_flow_map(spec_, -1.0);
        }
    }

    const FlowSpec& spec() const { return spec_; }

    EvolvedField forward(const Observable& f, unsigned n = 1) const { return run(f, n, false); }
    EvolvedField pull_back(const Observable& f, unsigned n = 1) const { return run(f, n, true); }

    // underlying point map of the unit-time classical flow
    PointMapFn point_map() const {
        if (quantum_ && spec_.is_kicked())
            throw ConfigError("non-quadratic quantum evolution has no underlying point map");
        if (quantum_ && spec_.hamiltonian && !detail::quadratic_form(*spec_.hamiltonian))
            throw ConfigError("non-quadratic quantum evolution has no underlying point map");
        return fwd_;
    }

  private:
    EvolvedField run(const Observable& f, unsigned n, bool pull) const {
        if (prop_) {
            GridField g = f.as_grid();
            std::vector<Complex> d = g.data();
            for (unsigned i = 0; i < n; ++i) pull ? prop_->backward(d) : prop_->forward(d);
            Observable out = Observable::from_grid(GridField(spec_.space, std::move(d)));
            double neg = detail::grid_negativity_fraction(*out.grid);
            return EvolvedField{std::move(out), double(n), neg};
        }
        if (quantum_) {
            EvolvedField ev = moyal_step(f, spec_, pull ? -double(n) : double(n));
            ev.t = double(n);
            return ev;
        }
        Observable cur = f;
        const PointMapFn& step = pull ? fwd_ : back_;
        for (unsigned i = 0; i < n; ++i) cur = detail::transported(cur, spec_, step);
        double neg = detail::grid_negativity_fraction(*cur.grid);
        return EvolvedField{std::move(cur), double(n), neg};
    }

    FlowSpec spec_;
    bool quantum_ = false;
    std::shared_ptr<detail::KickedPropagator> prop_;
    PointMapFn fwd_, back_;
};

inline TimeOneMap time_one_map(FlowSpec spec) { return TimeOneMap(std::move(spec)); }

// |omega(U_t f) - omega(f)| for the normalized flat state omega = mean.
inline double state_invariance_check(const FlowSpec& spec, const Observable& f, double t) {
    bool quantum = !spec.classical_scheme() || spec.is_kicked();
    EvolvedField ev = quantum ? moyal_step(f, spec, t) : liouville_step(f, spec, t);
    Complex before = f.mean_value(spec.hbar.value);
    Complex after = ev.field.mean_value(spec.hbar.value);
    return std::abs(after - before);
}

}  // namespace moyalks

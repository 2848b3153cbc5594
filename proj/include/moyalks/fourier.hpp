#pragma once

#include <fftw3.h>

#include <complex>
#include <map>
#include <mutex>
#include <vector>

#include "phase_space.hpp"

namespace moyalks {

using Complex = std::complex<double>;

namespace detail {

inline std::mutex& fftw_mutex() {
    static std::mutex m;
    return m;
}

inline void fft2(std::vector<Complex>& data, int Nq, int Np, int sign) {
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(fftw_mutex());
        plan = fftw_plan_dft_2d(Nq, Np, reinterpret_cast<fftw_complex*>(data.data()),
                                reinterpret_cast<fftw_complex*>(data.data()), sign, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(fftw_mutex());
        fftw_destroy_plan(plan);
    }
}

}  // namespace detail

// Sparse trigonometric polynomial on the (periodically continued) space:
// f = sum over modes (a,b) of c(a,b) * exp(i(alpha_a q + beta_b p)).
// Mode arithmetic is exact in the integer labels; coefficients are doubles.
class TrigPoly {
  public:
    using ModeKey = std::pair<int, int>;
    using Modes = std::map<ModeKey, Complex>;

    TrigPoly() = default;
    explicit TrigPoly(PhaseSpace s) : space_(std::move(s)) {}

    static TrigPoly mode(const PhaseSpace& s, int a, int b, Complex c) {
        TrigPoly f(s);
        f.set(a, b, c);
        return f;
    }
    static TrigPoly cos_q(const PhaseSpace& s, int a = 1) {
        TrigPoly f(s);
        f.set(a, 0, 0.5);
        f.set(-a, 0, 0.5);
        return f;
    }
    static TrigPoly cos_p(const PhaseSpace& s, int b = 1) {
        TrigPoly f(s);
        f.set(0, b, 0.5);
        f.set(0, -b, 0.5);
        return f;
    }
    static TrigPoly sin_q(const PhaseSpace& s, int a = 1) {
        TrigPoly f(s);
        f.set(a, 0, Complex(0, -0.5));
        f.set(-a, 0, Complex(0, 0.5));
        return f;
    }
    static TrigPoly sin_p(const PhaseSpace& s, int b = 1) {
        TrigPoly f(s);
        f.set(0, b, Complex(0, -0.5));
        f.set(0, -b, Complex(0, 0.5));
        return f;
    }
    static TrigPoly constant(const PhaseSpace& s, Complex c) { return mode(s, 0, 0, c); }

    const PhaseSpace& space() const { return space_; }
    const Modes& modes() const { return modes_; }
    bool empty() const { return modes_.empty(); }
    size_t size() const { return modes_.size(); }

    void set(int a, int b, Complex c) {
        if (c == Complex{}) {
            modes_.erase({a, b});
            return;
        }
        modes_[{a, b}] = c;
    }
    void add(int a, int b, Complex c) {
        auto it = modes_.find({a, b});
        if (it == modes_.end()) {
            if (c != Complex{}) modes_[{a, b}] = c;
            return;
        }
        it->second += c;
        if (it->second == Complex{}) modes_.erase(it);
    }
    Complex coeff(int a, int b) const {
        auto it = modes_.find({a, b});
        return it == modes_.end() ? Complex{} : it->second;
    }

    Complex mean() const { return coeff(0, 0); }

    // symplectic area of a mode pair: alpha1*beta2 - beta1*alpha2
    double cross(const ModeKey& v, const ModeKey& w) const {
        double unit = two_pi / space_.Lq * (two_pi / space_.Lp);
        return unit * (static_cast<double>(v.first) * w.second -
                       static_cast<double>(v.second) * w.first);
    }

    friend TrigPoly operator+(const TrigPoly& f, const TrigPoly& g) {
        TrigPoly r = f;
        for (const auto& [k, c] : g.modes_) r.add(k.first, k.second, c);
        return r;
    }
    friend TrigPoly operator-(const TrigPoly& f, const TrigPoly& g) {
        TrigPoly r = f;
        for (const auto& [k, c] : g.modes_) r.add(k.first, k.second, -c);
        return r;
    }
    friend TrigPoly operator*(const TrigPoly& f, Complex s) {
        TrigPoly r = f;
        for (auto& [k, c] : r.modes_) c *= s;
        return r;
    }
    friend TrigPoly operator*(Complex s, const TrigPoly& f) { return f * s; }

    // pointwise product = mode convolution
    friend TrigPoly operator*(const TrigPoly& f, const TrigPoly& g) {
        TrigPoly r(f.space_);
        for (const auto& [kf, cf] : f.modes_)
            for (const auto& [kg, cg] : g.modes_)
                r.add(kf.first + kg.first, kf.second + kg.second, cf * cg);
        return r;
    }

    TrigPoly deriv_q() const {
        TrigPoly r(space_);
        for (const auto& [k, c] : modes_)
            if (k.first) r.set(k.first, k.second, Complex(0, space_.alpha(k.first)) * c);
        return r;
    }
    TrigPoly deriv_p() const {
        TrigPoly r(space_);
        for (const auto& [k, c] : modes_)
            if (k.second) r.set(k.first, k.second, Complex(0, space_.beta(k.second)) * c);
        return r;
    }

    Complex eval(double q, double p) const {
        Complex acc{};
        for (const auto& [k, c] : modes_)
            acc += c * std::polar(1.0, space_.alpha(k.first) * q + space_.beta(k.second) * p);
        return acc;
    }

    // sqrt of the integral of |f|^2 over one period cell (Parseval)
    double l2() const {
        double s = 0.0;
        for (const auto& [k, c] : modes_) s += std::norm(c);
        return std::sqrt(s * space_.area());
    }
    double max_abs_coeff() const {
        double m = 0.0;
        for (const auto& [k, c] : modes_) m = std::max(m, std::abs(c));
        return m;
    }

    bool conjugate_symmetric(double tol = 1e-12) const {
        for (const auto& [k, c] : modes_)
            if (std::abs(std::conj(coeff(-k.first, -k.second)) - c) > tol) return false;
        return true;
    }

    TrigPoly pruned(double eps) const {
        TrigPoly r(space_);
        for (const auto& [k, c] : modes_)
            if (std::abs(c) > eps) r.modes_[k] = c;
        return r;
    }

  private:
    PhaseSpace space_;
    Modes modes_;
};

// Dense complex field sampled on the phase-space grid, row-major in q.
class GridField {
  public:
    GridField() = default;
    explicit GridField(PhaseSpace s) : space_(std::move(s)), data_(size_t(space_.Nq) * space_.Np) {}
    GridField(PhaseSpace s, std::vector<Complex> values)
        : space_(std::move(s)), data_(std::move(values)) {
        if (data_.size() != size_t(space_.Nq) * space_.Np)
            throw ConfigError("grid data size does not match the phase-space grid");
    }

    template <class F>
    static GridField sample(const PhaseSpace& s, F&& f) {
        GridField g(s);
        for (int j = 0; j < s.Nq; ++j)
            for (int l = 0; l < s.Np; ++l) g.at(j, l) = f(s.grid_q(j), s.grid_p(l));
        return g;
    }

    static GridField from_modes(const TrigPoly& f) {
        const PhaseSpace& s = f.space();
        GridField g(s);
        std::vector<Complex> bins(size_t(s.Nq) * s.Np);
        for (const auto& [k, c] : f.modes()) {
            int a = k.first, b = k.second;
            if (a < -s.Nq / 2 || a >= s.Nq / 2 || b < -s.Np / 2 || b >= s.Np / 2)
                throw ResolutionError("mode outside the representable band");
            int ja = (a % s.Nq + s.Nq) % s.Nq;
            int jb = (b % s.Np + s.Np) % s.Np;
            double ph = s.alpha(a) * s.q0() + s.beta(b) * s.p0();
            bins[size_t(ja) * s.Np + jb] += c * std::polar(1.0, ph);
        }
        detail::fft2(bins, s.Nq, s.Np, FFTW_BACKWARD);
        g.data_ = std::move(bins);
        return g;
    }

    TrigPoly to_modes(double eps = 0.0) const {
        std::vector<Complex> bins = data_;
        detail::fft2(bins, space_.Nq, space_.Np, FFTW_FORWARD);
        double scale = 1.0 / (double(space_.Nq) * space_.Np);
        TrigPoly f(space_);
        for (int ja = 0; ja < space_.Nq; ++ja)
            for (int jb = 0; jb < space_.Np; ++jb) {
                Complex c = bins[size_t(ja) * space_.Np + jb] * scale;
                if (std::abs(c) <= eps) continue;
                int a = ja < space_.Nq / 2 ? ja : ja - space_.Nq;
                int b = jb < space_.Np / 2 ? jb : jb - space_.Np;
                double ph = space_.alpha(a) * space_.q0() + space_.beta(b) * space_.p0();
                f.set(a, b, c * std::polar(1.0, -ph));
            }
        return f;
    }

    const PhaseSpace& space() const { return space_; }
    Complex& at(int j, int l) { return data_[size_t(j) * space_.Np + l]; }
    const Complex& at(int j, int l) const { return data_[size_t(j) * space_.Np + l]; }
    std::vector<Complex>& data() { return data_; }
    const std::vector<Complex>& data() const { return data_; }

    Complex mean() const {
        Complex s{};
        for (const Complex& v : data_) s += v;
        return s / double(data_.size());
    }

    double l2() const {
        double s = 0.0;
        for (const Complex& v : data_) s += std::norm(v);
        return std::sqrt(s / double(data_.size()) * space_.area());
    }

    double max_abs() const {
        double m = 0.0;
        for (const Complex& v : data_) m = std::max(m, std::abs(v));
        return m;
    }

    // fraction of spectral energy in the top third of the band; large values
    // mean derivatives of this field are unreliable
    double top_band_energy_fraction() const {
        std::vector<Complex> bins = data_;
        detail::fft2(bins, space_.Nq, space_.Np, FFTW_FORWARD);
        double top = 0.0, total = 0.0;
        for (int ja = 0; ja < space_.Nq; ++ja)
            for (int jb = 0; jb < space_.Np; ++jb) {
                int a = ja < space_.Nq / 2 ? ja : ja - space_.Nq;
                int b = jb < space_.Np / 2 ? jb : jb - space_.Np;
                double e = std::norm(bins[size_t(ja) * space_.Np + jb]);
                total += e;
                if (std::abs(a) > space_.Nq / 3 || std::abs(b) > space_.Np / 3) top += e;
            }
        return total > 0.0 ? top / total : 0.0;
    }

    GridField spectral_deriv(int order_q, int order_p) const {
        std::vector<Complex> bins = data_;
        detail::fft2(bins, space_.Nq, space_.Np, FFTW_FORWARD);
        double scale = 1.0 / (double(space_.Nq) * space_.Np);
        for (int ja = 0; ja < space_.Nq; ++ja)
            for (int jb = 0; jb < space_.Np; ++jb) {
                int a = ja < space_.Nq / 2 ? ja : ja - space_.Nq;
                int b = jb < space_.Np / 2 ? jb : jb - space_.Np;
                Complex m{scale, 0.0};
                // Nyquist rows have no well-defined odd derivative; zero them
                if ((order_q && a == -space_.Nq / 2) || (order_p && b == -space_.Np / 2))
                    m = 0.0;
                else {
                    for (int k = 0; k < order_q; ++k) m *= Complex(0, space_.alpha(a));
                    for (int k = 0; k < order_p; ++k) m *= Complex(0, space_.beta(b));
                }
                bins[size_t(ja) * space_.Np + jb] *= m;
            }
        detail::fft2(bins, space_.Nq, space_.Np, FFTW_BACKWARD);
        GridField g(space_);
        g.data_ = std::move(bins);
        return g;
    }

    friend GridField operator+(const GridField& f, const GridField& g) {
        GridField r = f;
        for (size_t i = 0; i < r.data_.size(); ++i) r.data_[i] += g.data_[i];
        return r;
    }
    friend GridField operator-(const GridField& f, const GridField& g) {
        GridField r = f;
        for (size_t i = 0; i < r.data_.size(); ++i) r.data_[i] -= g.data_[i];
        return r;
    }
    friend GridField operator*(const GridField& f, const GridField& g) {
        GridField r = f;
        for (size_t i = 0; i < r.data_.size(); ++i) r.data_[i] *= g.data_[i];
        return r;
    }
    friend GridField operator*(const GridField& f, Complex s) {
        GridField r = f;
        for (auto& v : r.data_) v *= s;
        return r;
    }
    friend GridField operator*(Complex s, const GridField& f) { return f * s; }

  private:
    PhaseSpace space_;
    std::vector<Complex> data_;
};

}  // namespace moyalks

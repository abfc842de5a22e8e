#pragma once
// Mollified trapezoid vorticity profile and the functions derived from it.
//
// With G, H, K the first three antiderivatives of the bump (all starting
// at t=-1), the ramp functions have closed forms in t1 = (z+1-k)/k and
// t2 = (z-1+k)/k:
//   psi'(z)        = G(t1) - G(t2)
//   int_{-1}^z psi' = k   [H(t1) - H(t2)]
//   twice-integrated = k^2 [K(t1) - K(t2)]
// so only three universal tables are needed.

#include "quadrature.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace couette {

enum class MollifierShape { standard_bump };

struct MollifierSpec {
    MollifierShape shape = MollifierShape::standard_bump;
};

namespace detail {

inline double raw_bump(double t) {
    if (std::abs(t) >= 1.0) return 0.0;
    return std::exp(-1.0 / (1.0 - t * t));
}

class BumpTables {
public:
    static const BumpTables& get() {
        static const BumpTables tables;
        return tables;
    }

    double scale() const { return scale_; }
    double theta(double t) const { return scale_ * raw_bump(t); }
    double theta_prime(double t) const {
        if (std::abs(t) >= 1.0) return 0.0;
        double d = 1.0 - t * t;
        return theta(t) * (-2.0 * t / (d * d));
    }
    // Second moment int t^2 theta; K(1) = 1/2 + moment/2.
    double second_moment() const { return moment2_; }

    double G(double t) const {
        if (t <= -1.0) return 0.0;
        if (t >= 1.0) return 1.0;
        return hermite(t, g_, 0);
    }
    double H(double t) const {
        if (t <= -1.0) return 0.0;
        if (t >= 1.0) return t;
        return hermite(t, h_, 1);
    }
    double K(double t) const {
        if (t <= -1.0) return 0.0;
        if (t >= 1.0) return k_.back() + 0.5 * (t * t - 1.0);
        return hermite(t, k_, 2);
    }

    static constexpr int intervals = 4096;

private:
    BumpTables() {
        const int n = intervals;
        step_ = 2.0 / n;
        auto gl = gauss_legendre(24);
        // raw normalisation
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            double a = -1.0 + i * step_, b = a + step_;
            for (std::size_t s = 0; s < gl.nodes.size(); ++s) {
                double t = 0.5 * (a + b) + 0.5 * step_ * gl.nodes[s];
                total += 0.5 * step_ * gl.weights[s] * raw_bump(t);
            }
        }
        scale_ = 1.0 / total;
        g_.assign(n + 1, 0.0);
        h_.assign(n + 1, 0.0);
        k_.assign(n + 1, 0.0);
        moment2_ = 0.0;
        for (int i = 0; i < n; ++i) {
            double a = -1.0 + i * step_, b = a + step_;
            double m0 = 0.0, m1 = 0.0, m2 = 0.0;
            for (std::size_t s = 0; s < gl.nodes.size(); ++s) {
                double t = 0.5 * (a + b) + 0.5 * step_ * gl.nodes[s];
                double w = 0.5 * step_ * gl.weights[s] * theta(t);
                m0 += w;
                m1 += w * (b - t);
                m2 += w * 0.5 * (b - t) * (b - t);
                moment2_ += w * t * t;
            }
            g_[i + 1] = g_[i] + m0;
            h_[i + 1] = h_[i] + step_ * g_[i] + m1;
            k_[i + 1] = k_[i] + step_ * h_[i] + 0.5 * step_ * step_ * g_[i] + m2;
        }
    }

    // Quintic Hermite on one interval using (f, f', f'') at both ends.
    // level 0: f=G, f'=theta, f''=theta'
    // level 1: f=H, f'=G, f''=theta
    // level 2: f=K, f'=H, f''=G
    double hermite(double t, const std::vector<double>& f, int level) const {
        int i = static_cast<int>((t + 1.0) / step_);
        if (i >= intervals) i = intervals - 1;
        if (i < 0) i = 0;
        double a = -1.0 + i * step_;
        double s = (t - a) / step_;
        auto d1 = [&](int j) {
            double x = -1.0 + j * step_;
            if (level == 0) return theta(x);
            if (level == 1) return g_[j];
            return h_[j];
        };
        auto d2 = [&](int j) {
            double x = -1.0 + j * step_;
            if (level == 0) return theta_prime(x);
            if (level == 1) return theta(x);
            return g_[j];
        };
        double s2 = s * s, s3 = s2 * s, s4 = s3 * s, s5 = s4 * s;
        double h00 = 1 - 10 * s3 + 15 * s4 - 6 * s5;
        double h10 = s - 6 * s3 + 8 * s4 - 3 * s5;
        double h20 = 0.5 * (s2 - 3 * s3 + 3 * s4 - s5);
        double h01 = 10 * s3 - 15 * s4 + 6 * s5;
        double h11 = -4 * s3 + 7 * s4 - 3 * s5;
        double h21 = 0.5 * (s3 - 2 * s4 + s5);
        double hs = step_;
        return h00 * f[i] + h10 * hs * d1(i) + h20 * hs * hs * d2(i) + h01 * f[i + 1] +
               h11 * hs * d1(i + 1) + h21 * hs * hs * d2(i + 1);
    }

    double step_ = 0.0;
    double scale_ = 1.0;
    double moment2_ = 0.0;
    std::vector<double> g_, h_, k_;
};

}  // namespace detail

// Normalised mollifier and its derivative.
inline double mollifier(double t, const MollifierSpec& = {}) { return detail::BumpTables::get().theta(t); }
inline double mollifier_prime(double t, const MollifierSpec& = {}) {
    return detail::BumpTables::get().theta_prime(t);
}
inline double mollifier_normalization(const MollifierSpec& = {}) { return detail::BumpTables::get().scale(); }

struct ProfileParams {
    double epsilon = 0.01;
    double kappa = 0.0;
    MollifierSpec mollifier{};

    void validate() const {
        if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("epsilon out of (0,1)");
        if (!(kappa >= 0.0 && kappa < 1.0)) throw std::invalid_argument("kappa out of [0,1)");
    }
};

// psi'_kappa: the mollified indicator of [-1+k, 1-k]; kappa = 0 gives the
// indicator of [-1,1].
inline double psi_prime(double z, double kappa, const MollifierSpec& = {}) {
    if (kappa == 0.0) return std::abs(z) <= 1.0 ? 1.0 : 0.0;
    const auto& T = detail::BumpTables::get();
    return T.G((z + 1.0 - kappa) / kappa) - T.G((z - 1.0 + kappa) / kappa);
}

inline double psi_second(double z, double kappa, const MollifierSpec& = {}) {
    if (kappa == 0.0) return 0.0;
    const auto& T = detail::BumpTables::get();
    return (T.theta((z + 1.0 - kappa) / kappa) - T.theta((z - 1.0 + kappa) / kappa)) / kappa;
}

inline double phi(double z, double kappa) {
    if (kappa == 0.0) return 0.5 * (1.0 - z);
    const auto& T = detail::BumpTables::get();
    double s = 2.0 - 2.0 * kappa;
    auto mass_below = [&](double t) {
        return kappa * (T.H((t + 1.0 - kappa) / kappa) - T.H((t - 1.0 + kappa) / kappa)) / s;
    };
    // phi(z) = 1 - phi(-z); for z > 0 the right tail is evaluated directly
    return z > 0.0 ? mass_below(-z) : 1.0 - mass_below(z);
}

inline double phi_prime(double z, double kappa) { return -psi_prime(z, kappa) / (2.0 - 2.0 * kappa); }
inline double phi_second(double z, double kappa) { return -psi_second(z, kappa) / (2.0 - 2.0 * kappa); }

inline double big_phi(double z, double kappa) {
    if (kappa == 0.0) return -0.25 * (1.0 - z) * (1.0 - z);
    const auto& T = detail::BumpTables::get();
    double s = 2.0 - 2.0 * kappa;
    double q = kappa * kappa * (T.K((z + 1.0 - kappa) / kappa) - T.K((z - 1.0 + kappa) / kappa));
    return z - q / s;
}

// Slow reference path: adaptive quadrature of the defining integrals.
namespace exact {

inline double psi_prime(double z, double kappa, double tol = 1e-10) {
    if (kappa == 0.0) return std::abs(z) <= 1.0 ? 1.0 : 0.0;
    double lo = std::max(-1.0 + kappa, z - kappa), hi = std::min(1.0 - kappa, z + kappa);
    if (hi <= lo) return 0.0;
    auto f = [&](double zb) { return mollifier((z - zb) / kappa) / kappa; };
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, hi, 10, tol);
}

// int_{-1}^{z} (z - r)^p / p! psi'(r) dr for p = 0, 1
inline double psi_moment(double z, double kappa, int p, double tol = 1e-10) {
    auto f = [&](double r) { return (p == 0 ? 1.0 : (z - r)) * exact::psi_prime(r, kappa); };
    std::vector<double> cuts{-1.0};
    for (double c : {-1.0 + 2.0 * kappa, 1.0 - 2.0 * kappa, 1.0})
        if (c > cuts.back() && c < z) cuts.push_back(c);
    cuts.push_back(z);
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
        s += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, cuts[i], cuts[i + 1], 10, tol);
    return s;
}

inline double phi(double z, double kappa) {
    double s = psi_moment(1.0, kappa, 0);
    return 1.0 - psi_moment(z, kappa, 0) / s;
}

inline double big_phi(double z, double kappa) {
    double s = psi_moment(1.0, kappa, 0);
    return z - psi_moment(z, kappa, 1) / s;
}

}  // namespace exact

// Profile varpi_{eps,kappa} on the real line and its primitive Omega.
class Profile {
public:
    explicit Profile(ProfileParams p) : params_(p) { params_.validate(); }

    const ProfileParams& params() const { return params_; }
    double epsilon() const { return params_.epsilon; }
    double kappa() const { return params_.kappa; }

    double phi(double z) const { return couette::phi(z, params_.kappa); }
    double phi_prime(double z) const { return couette::phi_prime(z, params_.kappa); }
    double phi_second(double z) const { return couette::phi_second(z, params_.kappa); }
    double big_phi(double z) const { return couette::big_phi(z, params_.kappa); }
    double psi_prime(double z) const { return couette::psi_prime(z, params_.kappa); }

    double varpi(double y) const {
        const double e = params_.epsilon, a = std::abs(y);
        if (a >= 1.0 + e) return 0.0;
        if (a <= 1.0 - e) return e;
        return e * phi((a - 1.0) / e);
    }
    double varpi_prime(double y) const {
        const double e = params_.epsilon, a = std::abs(y);
        if (a >= 1.0 + e || a <= 1.0 - e) return 0.0;
        double d = phi_prime((a - 1.0) / e);
        return y >= 0.0 ? d : -d;
    }
    double varpi_second(double y) const {
        const double e = params_.epsilon, a = std::abs(y);
        if (a >= 1.0 + e || a <= 1.0 - e) return 0.0;
        return phi_second((a - 1.0) / e) / e;
    }
    double omega_primitive(double y) const {
        const double e = params_.epsilon, a = std::abs(y);
        double v;
        if (a <= 1.0 - e) v = e * a;
        else if (a >= 1.0 + e) v = e + e * e * big_phi(1.0);
        else v = e + e * e * big_phi((a - 1.0) / e);
        return y >= 0.0 ? v : -v;
    }

private:
    ProfileParams params_;
};

}  // namespace couette

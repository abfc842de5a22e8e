#pragma once
// Green's function of the Laplacian on the periodic strip T x R and its
// x-Fourier reductions.

#include "profile.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace couette {

struct KernelPoint {
    double dx = 0.0;   // periodic offset, any real value
    double dy = 0.0;
};

struct SingularEvaluation : std::domain_error {
    using std::domain_error::domain_error;
};

// log(cosh(dy) - cos(dx)) without cancellation near the origin and
// without overflow for large |dy|.
inline double log_cosh_minus_cos(double dx, double dy) {
    const double a = std::abs(dy);
    if (a > 1.0) {
        double e = std::exp(-a);
        return a + std::log(0.5 * (1.0 + e * e) - std::cos(dx) * e);
    }
    const double sh = std::sinh(0.5 * dy), sn = std::sin(0.5 * dx);
    return std::log(2.0 * (sh * sh + sn * sn));
}

inline double kernel(KernelPoint p) {
    const double r = std::remainder(p.dx, 2.0 * std::numbers::pi);
    if (r == 0.0 && p.dy == 0.0) throw SingularEvaluation("kernel evaluated at the origin");
    return log_cosh_minus_cos(r, p.dy) / (4.0 * std::numbers::pi);
}

// (1/4pi) int_T log(cosh dy - cos x) dx
inline double mean_over_x(double dy) { return 0.5 * (std::abs(dy) - std::numbers::ln2); }

// (1/4pi) int_T log(cosh dy - cos x) cos(n x) dx, n >= 1
inline double fourier_coefficient(int n, double dy) {
    if (n < 1) throw std::invalid_argument("fourier_coefficient: n must be >= 1");
    return -std::exp(-n * std::abs(dy)) / (2.0 * n);
}

// Quadrature of (1/4pi) int_{-pi}^{pi} log(cosh d - cos x) cos(n x) dx
// (n = 0 gives the mean). The log is split as
//   log[(cosh d - cos x) / ((d^2+x^2)/2)] + log((d^2+x^2)/2);
// the first factor is smooth, the second is integrated against
// (cos(nx) - 1) numerically and against 1 in closed form.
inline double kernel_mode_quadrature(int n, double d, double tol = 1e-13) {
    using boost::math::quadrature::gauss_kronrod;
    const double pi = std::numbers::pi;
    auto smooth = [&](double x) {
        double r2 = 0.5 * (d * d + x * x);
        if (r2 == 0.0) return 0.0;   // ratio -> 1 at the origin
        return (log_cosh_minus_cos(x, d) - std::log(r2)) * std::cos(n * x);
    };
    auto singular = [&](double x) {
        double r2 = 0.5 * (d * d + x * x);
        if (r2 == 0.0) return 0.0;
        return std::log(r2) * (std::cos(n * x) - 1.0);
    };
    double s = 0.0;
    double err = 0.0;
    const double ad = std::abs(d);
    // refine near the origin where the split terms vary on scale |d|
    std::vector<double> cuts{0.0};
    for (double c = std::max(ad, 1e-6); c < pi; c *= 4.0) cuts.push_back(c);
    cuts.push_back(pi);
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        s += gauss_kronrod<double, 31>::integrate(smooth, cuts[i], cuts[i + 1], 12, tol, &err);
        if (n > 0) s += gauss_kronrod<double, 31>::integrate(singular, cuts[i], cuts[i + 1], 12, tol, &err);
    }
    // int_0^pi log((d^2+x^2)/2) dx
    double closed;
    if (ad == 0.0) closed = pi * (2.0 * std::log(pi) - 2.0) - pi * std::numbers::ln2;
    else closed = pi * std::log(ad * ad + pi * pi) - 2.0 * pi + 2.0 * ad * std::atan(pi / ad) - pi * std::numbers::ln2;
    s += closed;
    return 2.0 * s / (4.0 * pi);
}

// |(1/4pi) int int varpi'(yb) log(cosh(y-yb) - cos(x-xb)) - Omega(y)|,
// with the x integral reduced by mean_over_x and the yb integral done
// adaptively on both bands.
inline double primitive_identity_check(const Profile& profile, double y, double tol = 1e-13) {
    using boost::math::quadrature::gauss_kronrod;
    const double e = profile.epsilon();
    auto f = [&](double yb) { return profile.varpi_prime(yb) * mean_over_x(y - yb); };
    double s = 0.0;
    for (double c : {1.0, -1.0}) {
        std::vector<double> cuts{c - e, c + e};
        if (y > c - e && y < c + e) cuts.insert(cuts.begin() + 1, y);
        if (profile.kappa() > 0.0) {
            for (double t : {c - e + 2.0 * e * profile.kappa(), c + e - 2.0 * e * profile.kappa()})
                if (t > cuts.front() && t < cuts.back()) cuts.push_back(t);
            std::sort(cuts.begin(), cuts.end());
        }
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
            s += gauss_kronrod<double, 31>::integrate(f, cuts[i], cuts[i + 1], 12, tol);
    }
    return std::abs(s - profile.omega_primitive(y));
}

}  // namespace couette

#pragma once
// Distance of the wave's vorticity to the shear profile: L2, H1 and H2
// seminorms through the change of variables (x, y) -> (x, y + f), and
// the interpolation bound for the fractional norm in between.
// All integrals are taken in band coordinates z, dy = eps dz.

#include "wave.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <limits>

namespace couette {

struct ProfileNormSquares {
    double prime_sq = 0.0;    // int |varpi'|^2 over both bands
    double second_sq = 0.0;   // int |varpi''|^2, +inf when kappa = 0
    bool second_distributional = false;
};

inline ProfileNormSquares profile_norm_squares(const ProfileParams& params, double tol = 1e-12) {
    params.validate();
    using boost::math::quadrature::gauss_kronrod;
    const double eps = params.epsilon, k = params.kappa;
    std::vector<double> cuts{-1.0};
    if (k > 0.0) {
        cuts.push_back(-1.0 + 2.0 * k);
        cuts.push_back(1.0 - 2.0 * k);
    }
    cuts.push_back(1.0);
    auto integrate = [&](auto f) {
        double s = 0.0;
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
            s += gauss_kronrod<double, 31>::integrate(f, cuts[i], cuts[i + 1], 12, tol);
        return s;
    };
    ProfileNormSquares r;
    r.prime_sq = 2.0 * eps * integrate([k](double z) { return std::pow(phi_prime(z, k), 2); });
    if (k == 0.0) {
        r.second_sq = std::numeric_limits<double>::infinity();
        r.second_distributional = true;
    } else {
        r.second_sq = 2.0 / eps * integrate([k](double z) { return std::pow(phi_second(z, k), 2); });
    }
    return r;
}

namespace detail {

// Derivatives of f on the band grid; y-derivatives via the panel
// differentiation matrix (d_y = d_z/eps upper, -d_z/eps lower).
struct BandDerivatives {
    Eigen::MatrixXd f, fx, fy, fxx, fxy, fyy;   // stacked 2N x nx
};

inline BandDerivatives band_derivatives(const BandField& f) {
    const Eigen::MatrixXd D = f.rule->differentiation() / f.epsilon;
    auto dy = [&](const BandField& g) {
        BandField out(g.nx, g.rule, g.epsilon);
        out.upper = D * g.upper;
        out.lower = -(D * g.lower);
        return out;
    };
    const BandField fx = f.dx(), fy = dy(f);
    return {stack(f), stack(fx), stack(fy), stack(fx.dx()), stack(dy(fx)), stack(dy(fy))};
}

}  // namespace detail

// order 0: ||omega||_L2; 1: ||grad omega||_L2; 2: ||grad^2 omega||_L2.
inline double omega_sobolev(const WaveField& w, int order) {
    if (order < 0 || order > 2) throw std::invalid_argument("omega_sobolev: order must be 0, 1 or 2");
    const Discretization& d = *w.eig().disc;
    const double eps = d.epsilon(), kappa = d.profile().kappa();
    if (order == 2 && kappa == 0.0) return std::numeric_limits<double>::infinity();
    const auto g = detail::band_derivatives(w.f());
    const int N = d.size(), nx = w.nx();
    const double dx = 2.0 * std::numbers::pi / nx;
    double sum = 0.0;
    for (int r = 0; r < 2 * N; ++r) {
        const int i = r < N ? r : r - N;
        const double sgn = r < N ? 1.0 : -1.0;
        const double z = d.z()[i];
        const double wq = dx * eps * d.w()[i];
        const double p0 = eps * d.profile().phi(z);
        const double p1 = sgn * d.dphi()[i];
        const double p2 = d.profile().phi_second(z) / eps;
        for (int k = 0; k < nx; ++k) {
            const double J = 1.0 + g.fy(r, k);
            if (!(J > 0.0)) throw NonMonotoneCurves("omega_sobolev: 1 + f_y <= 0");
            const double fx = g.fx(r, k);
            if (order == 0) {
                sum += wq * p0 * p0 * J;
            } else if (order == 1) {
                sum += wq * p1 * p1 * (1.0 + fx * fx) / J;
            } else {
                const double fxx = g.fxx(r, k), fxy = g.fxy(r, k), fyy = g.fyy(r, k);
                const double Y2 = 1.0 / J, Y1 = -fx / J;
                const double Y22 = -fyy / (J * J * J);
                const double Y12 = -(fxy - fyy * fx / J) / (J * J);
                const double Y11 = -((fxx + fxy * Y1) * J - fx * (fxy + fyy * Y1)) / (J * J);
                const double w11 = p2 * Y1 * Y1 + p1 * Y11;
                const double w12 = p2 * Y1 * Y2 + p1 * Y12;
                const double w22 = p2 * Y2 * Y2 + p1 * Y22;
                sum += wq * (w11 * w11 + 2.0 * w12 * w12 + w22 * w22) * J;
            }
        }
    }
    // flat part between the deformed curves: height eps, area 2 pi (2 - 2 eps)
    if (order == 0) sum += eps * eps * 4.0 * std::numbers::pi * (1.0 - eps);
    return std::sqrt(sum);
}

inline double interpolated_distance(double h1dot, double h2dot, double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma out of (0,1)");
    return std::pow(h1dot, 0.5 * (1.0 + gamma)) * std::pow(h2dot, 0.5 * (1.0 - gamma));
}

inline double interpolated_distance(const WaveField& w, double gamma) {
    return interpolated_distance(omega_sobolev(w, 1), omega_sobolev(w, 2), gamma);
}

struct NormReport {
    ProfileParams params;
    int m = 1;
    double sigma = 0.0;
    double gamma = 0.5;
    double lambda = 1.0;
    double l2 = 0.0, h1dot = 0.0, h2dot = 0.0;
    double interpolated_bound = 0.0;
    double profile_prime_sq = 0.0, profile_second_sq = 0.0;
    bool second_distributional = false;
    // ||omega||_H2dot against sqrt(2 pi) (||varpi'|| + ||varpi''||), the f = 0 scale
    double h2_profile_ratio = 0.0;
    // eps^{gamma/2} kappa^{(gamma-1)/4}
    double predicted_scale = 0.0;
};

inline NormReport norm_report(const WaveField& w, double gamma) {
    NormReport r;
    r.params = w.eig().params;
    r.m = w.m();
    r.sigma = w.sigma();
    r.gamma = gamma;
    r.lambda = w.lambda();
    auto p = profile_norm_squares(r.params);
    r.profile_prime_sq = p.prime_sq;
    r.profile_second_sq = p.second_sq;
    r.second_distributional = p.second_distributional;
    r.l2 = omega_sobolev(w, 0);
    r.h1dot = omega_sobolev(w, 1);
    r.h2dot = omega_sobolev(w, 2);
    if (!p.second_distributional) {
        r.interpolated_bound = interpolated_distance(r.h1dot, r.h2dot, gamma);
        r.h2_profile_ratio =
            r.h2dot / (std::sqrt(2.0 * std::numbers::pi) * (std::sqrt(p.prime_sq) + std::sqrt(p.second_sq)));
        r.predicted_scale = std::pow(r.params.epsilon, 0.5 * gamma) * std::pow(r.params.kappa, 0.25 * (gamma - 1.0));
    } else {
        r.interpolated_bound = std::numeric_limits<double>::infinity();
    }
    return r;
}

}  // namespace couette

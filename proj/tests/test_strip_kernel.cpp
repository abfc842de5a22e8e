#include "couette/strip_kernel.hpp"

#include <catch_amalgamated.hpp>

#include <numbers>

using namespace couette;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Periodic trapezoid rule: the integrand is analytic in x for d != 0, so
// this converges geometrically and shares nothing with the library split.
double trapezoid_mode(int n, double d, int points = 8192) {
    double s = 0.0;
    for (int k = 0; k < points; ++k) {
        const double x = -std::numbers::pi + 2.0 * std::numbers::pi * (k + 0.5) / points;
        s += std::log(std::cosh(d) - std::cos(x)) * std::cos(n * x);
    }
    return s * (2.0 * std::numbers::pi / points) / (4.0 * std::numbers::pi);
}

}  // namespace

TEST_CASE("log(cosh - cos) is stable for small arguments") {
    for (double dx : {1e-8, 1e-4, 0.3})
        for (double dy : {1e-9, 1e-5, 0.2}) {
            long double ref;
            if (std::max(dx, dy) <= 1e-4) {
                const long double a = dy, b = dx;
                ref = (a * a + b * b) / 2 + (a * a * a * a - b * b * b * b) / 24;
            } else {
                ref = std::cosh(static_cast<long double>(dy)) - std::cos(static_cast<long double>(dx));
            }
            CHECK_THAT(log_cosh_minus_cos(dx, dy), WithinRel(static_cast<double>(std::log(ref)), 1e-12));
        }
    CHECK_THAT(log_cosh_minus_cos(1.0, 2.0), WithinRel(std::log(std::cosh(2.0) - std::cos(1.0)), 1e-14));
}

TEST_CASE("kernel is even, periodic and singular at the origin") {
    const KernelPoint p{0.7, -0.3};
    CHECK_THAT(kernel({-0.7, 0.3}), WithinRel(kernel(p), 1e-15));
    CHECK_THAT(kernel({0.7 + 2 * std::numbers::pi, -0.3}), WithinRel(kernel(p), 1e-12));
    CHECK_THAT(kernel(p), WithinRel(std::log(std::cosh(0.3) - std::cos(0.7)) / (4 * std::numbers::pi), 1e-14));
    CHECK_THROWS_AS(kernel({0.0, 0.0}), SingularEvaluation);
    CHECK_THROWS_AS(kernel({2 * std::numbers::pi, 0.0}), SingularEvaluation);
}

TEST_CASE("Fourier coefficients against periodic trapezoid") {
    for (double d : {0.25, 0.5, 1.0, 2.0, -1.5})
        for (int n = 1; n <= 8; ++n) {
            INFO("n " << n << " d " << d);
            CHECK_THAT(fourier_coefficient(n, d), WithinAbs(trapezoid_mode(n, d), 1e-13));
        }
    for (double d : {0.25, 1.0, 3.0}) CHECK_THAT(mean_over_x(d), WithinAbs(trapezoid_mode(0, d), 1e-13));
}

TEST_CASE("adaptive mode quadrature reproduces the closed forms") {
    for (double d : {1e-3, 0.05, 0.25, 0.5, 1.0, 2.0})
        for (int n = 1; n <= 8; ++n) {
            INFO("n " << n << " d " << d);
            CHECK_THAT(kernel_mode_quadrature(n, d), WithinAbs(fourier_coefficient(n, d), 1e-10));
        }
    for (double d : {0.0, 1e-6, 0.25, 2.0}) CHECK_THAT(kernel_mode_quadrature(0, d), WithinAbs(mean_over_x(d), 1e-11));
    CHECK_THROWS_AS(fourier_coefficient(0, 1.0), std::invalid_argument);
}

TEST_CASE("profile convolved with the mean kernel gives its primitive") {
    for (double k : {0.0, 0.1}) {
        const Profile p({0.05, k});
        for (double y : {-1.2, -1.01, -0.3, 0.0, 0.97, 1.0, 1.04, 2.0}) {
            INFO("kappa " << k << " y " << y);
            CHECK(primitive_identity_check(p, y) < 1e-10);
        }
    }
}

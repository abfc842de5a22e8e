#include "couette/bifurcate.hpp"
#include "couette/fit.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>
#include <catch_amalgamated.hpp>

using namespace couette;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Root of (1/2m) int -phi'/(1+lambda-z) = 1 with adaptive quadrature and
// Brent-style bracketing, independent of the graded rules.
double lambda1_oracle(int m, double kappa) {
    using boost::math::quadrature::gauss_kronrod;
    auto I = [&](double lam) {
        std::vector<double> cuts{-1.0, 0.0, 1.0 - 2.0 * kappa, 1.0 - 100 * lam, 1.0 - 10 * lam, 1.0 - lam, 1.0};
        std::sort(cuts.begin(), cuts.end());
        double s = 0.0;
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
            if (cuts[i] >= -1.0 && cuts[i + 1] > cuts[i])
                s += gauss_kronrod<double, 61>::integrate(
                    [&](double z) { return -phi_prime(z, kappa) / (1.0 + lam - z); }, cuts[i], cuts[i + 1], 12, 1e-12);
        return s / (2.0 * m) - 1.0;
    };
    std::uintmax_t it = 200;
    auto r = boost::math::tools::toms748_solve(I, 1e-4, 1.0, boost::math::tools::eps_tolerance<double>(50), it);
    return 0.5 * (r.first + r.second);
}

}  // namespace

TEST_CASE("lambda1 at kappa = 0 is the closed form") {
    for (int m = 1; m <= 5; ++m) {
        const double ref = 2.0 / (std::exp(4.0 * m) - 1.0);
        CHECK_THAT(solve_lambda1(m, 0.0), WithinAbs(ref, 1e-10));
        CHECK_THAT(solve_lambda1(m, 0.0), WithinRel(ref, 1e-8));
        CHECK_THAT(lambda1_closed_form(m), WithinRel(ref, 1e-14));
    }
    CHECK_THAT(solve_lambda1(1, 0.0), WithinAbs(0.0373147207, 1e-10));
}

TEST_CASE("lambda1 for kappa > 0 against an adaptive root") {
    for (double k : {0.00125, 0.005, 0.01}) CHECK_THAT(solve_lambda1(1, k), WithinRel(lambda1_oracle(1, k), 1e-9));
}

TEST_CASE("lambda1 departs linearly from its kappa = 0 value") {
    const std::vector<double> ks{0.00125, 0.0025, 0.005, 0.01};
    std::vector<double> dl;
    for (double k : ks) dl.push_back(std::abs(solve_lambda1(1, k) - solve_lambda1(1, 0.0)));
    CHECK_THAT(loglog_slope(ks, dl), WithinAbs(1.0, 0.1));
}

TEST_CASE("no lambda1 when the ramps are too wide") {
    CHECK_THROWS_AS(solve_lambda1(1, 0.1), BracketFailure);
    CHECK_THROWS_AS(solve_lambda1(3, 0.05), BracketFailure);
    CHECK_THROWS_AS(solve_lambda1(0, 0.0), std::invalid_argument);
}

TEST_CASE("leading order pair") {
    for (int m : {1, 2, 3}) {
        const double l1 = solve_lambda1(m, 0.0);
        const auto rule = make_graded_rule(16, 0.0, std::min(1e-3, 0.02 * l1));
        auto [b0, a1] = b0_and_a1(m, l1, rule);
        CHECK_THAT(a1, WithinRel(0.5 * std::exp(-2.0 * m), 1e-15));
        // 1 + l1 - z formed without cancelling l1 near z = 1
        for (int i = 0; i < rule->size(); ++i)
            CHECK_THAT(b0.values[i] * (l1 + (1.0 - rule->nodes()[i])), WithinAbs(1.0, 1e-14));
        // b0 equation: (1/2m) int (-phi') b0 = 1, with phi' = -1/2 at kappa = 0
        CHECK_THAT(rule->integrate({b0.values.data(), static_cast<std::size_t>(b0.values.size())}) / (4.0 * m), WithinAbs(1.0, 1e-10));
        const double ref = std::sqrt(2.0 / ((2.0 + l1) * l1));
        CHECK_THAT(b0.l2(), WithinRel(ref, 1e-10));
    }
    CHECK_THROWS_AS(b0_and_a1(1, 0.0, make_graded_rule(16, 0.0, 1e-3)), std::invalid_argument);
}

TEST_CASE("contraction solve produces a kernel element") {
    // lambda1 exists at m = 2 only for kappa below about 7e-4
    for (auto [m, kappa] : {std::pair{1, 0.0}, std::pair{1, 0.005}, std::pair{2, 0.0}, std::pair{2, 2e-4}}) {
        const auto e = contraction_solve(m, {1e-2, kappa});
        INFO("m " << m << " kappa " << kappa);
        CHECK(e.iterations() <= 200);
        CHECK(e.residual.relative() < 1e-10);
        const double eps = 1e-2;
        CHECK_THAT(e.lambda(), WithinRel(1.0 + e.lambda1 * eps + e.lambda2_eps * eps * eps, 1e-15));
        // b = b0 + eps b1, a = a1 eps + a2 eps^2 nodewise
        const Eigen::VectorXd b = e.b0.values + eps * e.b1_eps.values;
        const Eigen::VectorXd a = (e.a1 * eps + eps * eps * e.a2_eps.values.array()).matrix();
        CHECK((b - e.b.values).cwiseAbs().maxCoeff() <= 1e-12 * e.b.values.cwiseAbs().maxCoeff());
        CHECK((a - e.a.values).cwiseAbs().maxCoeff() <= 1e-12 * e.a.values.cwiseAbs().maxCoeff());
        // independent residual from the assembled operator
        const auto r = eigen_residual(*e.disc, m, e.lambda_offset, e.a, e.b);
        CHECK(std::hypot(r.t_plus, r.t_minus) < 1e-10 * r.scale);
    }
}

TEST_CASE("contraction factor scales with eps") {
    for (int m : {1, 2, 3}) {
        const auto hi = contraction_solve(m, {1e-2, 0.0});
        const auto lo = contraction_solve(m, {1e-3, 0.0});
        INFO("m " << m);
        CHECK(hi.contraction.factor < 1.0);
        CHECK_THAT(hi.contraction.factor / lo.contraction.factor, WithinRel(10.0, 0.25));
    }
}

TEST_CASE("certificate: one-dimensional kernel in block m and transversality") {
    for (int m : {1, 2}) {
        const auto e = contraction_solve(m, {1e-2, 0.0});
        const auto c = certify(e, 16);
        CHECK(c.ok());
        CHECK(c.near_zero_count == 1);
        CHECK(c.near_zero_block == m);
        CHECK(c.transversality > 0.0);
        // 10% error in lambda1 removes the kernel (m = 1, 2)
        const auto spectra = block_spectra(*e.disc, e.lambda_offset + 0.1 * e.lambda1 * 1e-2, 16);
        CHECK(count_near_zero(spectra, 1e-6) == 0);
    }
}

TEST_CASE("||a|| / ||b|| grows linearly in eps") {
    const std::vector<double> eps{1e-3, 3e-3, 1e-2, 3e-2};
    std::vector<double> ratio;
    for (double e : eps) {
        const auto s = contraction_solve(1, {e, 0.0});
        ratio.push_back(std::sqrt(weighted_norm_sq(*s.disc, s.a.values) / weighted_norm_sq(*s.disc, s.b.values)));
    }
    CHECK_THAT(loglog_slope(eps, ratio), WithinAbs(1.0, 0.05));
}

TEST_CASE("correction right-hand sides stay bounded as eps shrinks") {
    const double l1 = solve_lambda1(1, 0.0);
    const auto rule = make_graded_rule(16, 0.0, 0.02 * l1);
    std::vector<double> a0, b0;
    for (double eps : {1e-2, 1e-3, 1e-4}) {
        auto d = std::make_shared<const Discretization>(Profile({eps, 0.0}), rule);
        const RhsOperators rhs(d, 1, l1);
        CHECK_THAT(rhs.a1(), WithinRel(0.5 * std::exp(-2.0), 1e-15));
        CHECK((rhs.b0() - b0_and_a1(1, l1, rule).first.values).cwiseAbs().maxCoeff() == 0.0);
        a0.push_back(GridFn(rule, rhs.A0()).l2());
        b0.push_back(GridFn(rule, rhs.B0()).l2());
    }
    for (std::size_t k = 1; k < a0.size(); ++k) {
        CHECK_THAT(a0[k], WithinRel(a0[0], 0.5));
        CHECK_THAT(b0[k], WithinRel(b0[0], 0.5));
    }
}

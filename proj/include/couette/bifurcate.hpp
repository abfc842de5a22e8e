#pragma once
// Bifurcation point of the mode-m problem: lambda1 from the scalar
// eigenvalue equation, the leading-order eigenfunctions, and the
// eps-corrections (a2, b1, lambda2) by Picard iteration.

#include "linop.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace couette {

struct BracketFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NonContraction : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct CertificationFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr double lambda1_bracket_lo = 1e-11;
inline constexpr double lambda1_bracket_hi = 10.0;

// I(lambda) = (1/2m) int -phi'(z) / (1 + lambda - z) dz on the given rule.
inline double lambda1_integral(double lambda, int m, const QuadratureRule& rule, const Eigen::VectorXd& dphi) {
    double s = 0.0;
    for (int i = 0; i < rule.size(); ++i) s += rule.weights()[i] * (-dphi[i]) / (lambda + (1.0 - rule.nodes()[i]));
    return s / (2.0 * m);
}

namespace detail {

inline std::string to_short(double v) {
    std::ostringstream s;
    s << v;
    return s.str();
}

inline double bisect_lambda1(int m, const QuadratureRule& rule, const Eigen::VectorXd& dphi, double lo, double hi) {
    auto g = [&](double loglam) { return lambda1_integral(std::exp(loglam), m, rule, dphi) - 1.0; };
    if (g(std::log(lo)) < 0.0)
        throw BracketFailure("lambda1 bracket failure: I < 1 down to lambda = " + to_short(lo) +
                             ", kappa too large for this m");
    if (g(std::log(hi)) > 0.0) throw BracketFailure("lambda1 bracket failure: I(hi) > 1");
    auto tol = [](double a, double b) { return std::abs(b - a) < 1e-15; };
    auto r = boost::math::tools::bisect(g, std::log(lo), std::log(hi), tol);
    return std::exp(0.5 * (r.first + r.second));
}

inline Eigen::VectorXd sample_dphi(const Profile& p, const QuadratureRule& rule) {
    Eigen::VectorXd d(rule.size());
    for (int i = 0; i < rule.size(); ++i) d[i] = p.phi_prime(rule.nodes()[i]);
    return d;
}

}  // namespace detail

// lambda1 by bisection (in log lambda) on [1e-11, 10]; the integrand is
// resolved by a rule graded toward z = 1 well below the bracket floor.
// `tol` bounds |I(lambda1) - 1|.
inline double solve_lambda1(int m, double kappa, double tol = 1e-12, int order = 16) {
    if (m < 1) throw std::invalid_argument("m must be >= 1");
    if (!(tol > 0.0)) throw std::invalid_argument("tol must be > 0");
    Profile p({0.5, kappa});
    auto rule = make_graded_rule(order, kappa, 1e-13);
    Eigen::VectorXd dphi = detail::sample_dphi(p, *rule);
    double l1 = detail::bisect_lambda1(m, *rule, dphi, lambda1_bracket_lo, lambda1_bracket_hi);
    if (std::abs(lambda1_integral(l1, m, *rule, dphi) - 1.0) > tol)
        throw BracketFailure("lambda1: |I - 1| above tolerance");
    return l1;
}

inline double lambda1_closed_form(int m) { return 2.0 / std::expm1(4.0 * m); }

// b0 = 1/(1 + lambda1 - z), a1 = e^{-2m}/2.
inline std::pair<GridFn, double> b0_and_a1(int m, double lambda1, const RulePtr& rule) {
    if (!(lambda1 > 0.0)) throw std::invalid_argument("lambda1 must be > 0");
    Eigen::VectorXd b(rule->size());
    for (int i = 0; i < rule->size(); ++i) b[i] = 1.0 / (lambda1 + (1.0 - rule->nodes()[i]));
    return {GridFn(rule, b), 0.5 * std::exp(-2.0 * m)};
}

// Right-hand sides of the correction system (eps-expansion of T_m[a,b] = 0).
class RhsOperators {
public:
    RhsOperators(std::shared_ptr<const Discretization> d, int m, double lambda1)
        : d_(std::move(d)), m_(m), lambda1_(lambda1) {
        const double eps = d_->epsilon();
        const double rate = m * eps;
        self_ = d_->self_kernel(rate);
        self_div_ = d_->self_divided(rate);
        cross_ = d_->cross_kernel(rate);
        cross_div_ = d_->cross_divided(rate);
        e2m_ = std::exp(-2.0 * m);
        a1_ = 0.5 * e2m_;
        b0_ = b0_and_a1(m, lambda1, d_->rule()).first.values;
        shift_ = (lambda1 - 1.0 + d_->z().array()).matrix();
    }

    const Eigen::VectorXd& b0() const { return b0_; }
    double a1() const { return a1_; }
    double e2m() const { return e2m_; }
    const Eigen::MatrixXd& cross() const { return cross_; }

    Eigen::VectorXd A0() const {
        const double eps = d_->epsilon();
        Eigen::VectorXd ones = Eigen::VectorXd::Constant(d_->size(), a1_);
        return -shift_ * a1_ + (self_ * ones) / (2.0 * m_) - e2m_ / (2.0 * m_) * (cross_div_ * b0_) +
               eps * a1_ * d_->big_phi();
    }
    Eigen::VectorXd B0() const {
        Eigen::VectorXd ones = Eigen::VectorXd::Constant(d_->size(), a1_);
        return -d_->big_phi().cwiseProduct(b0_) + e2m_ / (2.0 * m_) * (cross_ * ones) -
               (self_div_ * b0_) / (2.0 * m_);
    }
    Eigen::VectorXd A1(const Eigen::VectorXd& a2, double lambda2) const {
        const double eps = d_->epsilon();
        Eigen::VectorXd lam2_minus_phi = (lambda2 - d_->big_phi().array()).matrix();
        return -shift_.cwiseProduct(a2) - Eigen::VectorXd::Constant(d_->size(), a1_ * lambda2) -
               eps * lam2_minus_phi.cwiseProduct(a2) + (self_ * a2) / (2.0 * m_);
    }
    Eigen::VectorXd B1(const Eigen::VectorXd& a2, const Eigen::VectorXd& b1, double lambda2) const {
        Eigen::VectorXd phi_plus_lam2 = (d_->big_phi().array() + lambda2).matrix();
        return -phi_plus_lam2.cwiseProduct(b1) + e2m_ / (2.0 * m_) * (cross_ * a2) - (self_div_ * b1) / (2.0 * m_);
    }

private:
    std::shared_ptr<const Discretization> d_;
    int m_;
    double lambda1_;
    Eigen::MatrixXd self_, self_div_, cross_, cross_div_;
    double e2m_ = 0.0, a1_ = 0.0;
    Eigen::VectorXd b0_, shift_;
};

struct ResidualReport {
    double t_plus = 0.0;    // ||T_m^+[a,b]||_L2
    double t_minus = 0.0;   // ||T_m^-[a,b]||_L2
    double scale = 0.0;     // ||(a,b)||_L2
    double relative() const { return std::hypot(t_plus, t_minus) / scale; }
};

struct ContractionStats {
    int iterations = 0;
    double factor = 0.0;      // largest ratio of successive sup-changes above round-off
    double c_a = 0.0, c_b = 0.0, c_lambda = 0.0;   // sup|2 a2|, sup|b1|, |lambda2|
    std::vector<double> changes;
};

struct EigenSolution {
    int m = 1;
    ProfileParams params;
    std::shared_ptr<const Discretization> disc;
    double lambda1 = 0.0;
    double lambda2_eps = 0.0;
    double lambda_offset = 0.0;   // lambda - 1 = lambda1 eps + lambda2 eps^2
    double a1 = 0.0;
    GridFn b0, a2_eps, b1_eps, a, b;
    ResidualReport residual;
    ContractionStats contraction;
    double tol = 1e-12;

    double lambda() const { return 1.0 + lambda_offset; }
    int iterations() const { return contraction.iterations; }
};

inline ResidualReport eigen_residual(const Discretization& d, int m, double lambda_offset, const GridFn& a,
                                     const GridFn& b) {
    auto [tp, tm] = assemble_mode(m, lambda_offset, d).apply_T(a, b);
    return {tp.l2(), tm.l2(), std::hypot(a.l2(), b.l2())};
}

struct SolveOptions {
    int order = 16;             // Gauss-Legendre order per panel
    double tol = 1e-12;         // relative sup-change stopping rule
    int max_iter = 200;
    double lambda1_override = 0.0;   // > 0: use this lambda1 instead of solving
};

// Picard iteration on (2 a2, b1, lambda2); the first iterate from zero is
// the eps^0 truncation.
inline EigenSolution contraction_solve(int m, const ProfileParams& params, const SolveOptions& opt = {}) {
    params.validate();
    if (m < 1) throw std::invalid_argument("m must be >= 1");
    Profile profile(params);
    const double eps = params.epsilon;

    double l1 = opt.lambda1_override;
    if (!(l1 > 0.0)) l1 = solve_lambda1(m, params.kappa, 1e-11, opt.order);
    auto rule = make_graded_rule(opt.order, params.kappa, std::min(1e-3, 0.02 * l1));
    auto d = std::make_shared<const Discretization>(profile, rule);
    if (!(opt.lambda1_override > 0.0)) {
        // re-solve on the working rule so that the discrete b0 is an exact null vector
        l1 = detail::bisect_lambda1(m, *rule, d->dphi(), 0.5 * l1, 2.0 * l1);
    }

    RhsOperators rhs(d, m, l1);
    const int N = d->size();
    const Eigen::VectorXd& b0 = rhs.b0();
    const Eigen::VectorXd W = d->w().cwiseProduct(d->dphi());
    const double den = W.dot(b0.cwiseProduct(b0));
    const Eigen::VectorXd A0 = rhs.A0(), B0 = rhs.B0();

    Eigen::VectorXd a2 = Eigen::VectorXd::Zero(N), b1 = Eigen::VectorXd::Zero(N);
    double l2 = 0.0;
    ContractionStats st;
    bool converged = false;
    auto pack = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& y, double l) {
        Eigen::VectorXd s(2 * N + 1);
        s << 2.0 * x, y, l;
        return s;
    };
    Eigen::VectorXd state = pack(a2, b1, l2);
    for (int it = 1; it <= opt.max_iter; ++it) {
        Eigen::VectorXd G = B0 + eps * rhs.B1(a2, b1, l2);
        double l2n = W.dot(G.cwiseProduct(b0)) / den;
        Eigen::VectorXd b1n = (G - l2n * b0).cwiseProduct(b0);
        Eigen::VectorXd a2n = 0.5 * (A0 + eps * rhs.A1(a2, l2) - rhs.e2m() / (2.0 * m) * (rhs.cross() * b1n));
        Eigen::VectorXd next = pack(a2n, b1n, l2n);
        double change = (next - state).cwiseAbs().maxCoeff();
        double size = next.cwiseAbs().maxCoeff();
        st.changes.push_back(change);
        a2 = a2n;
        b1 = b1n;
        l2 = l2n;
        state = next;
        st.iterations = it;
        if (!std::isfinite(change)) throw NonContraction("contraction: iterate is not finite (eps too large)");
        if (it > 3 && change > 10.0 * st.changes[it - 3] && change > size)
            throw NonContraction("contraction: iterates diverge (eps too large)");
        if (change <= opt.tol * size) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw NonContraction("contraction: no convergence in " + std::to_string(opt.max_iter) + " iterations");

    std::vector<double> ratios;
    const double floor = 1e3 * opt.tol * state.cwiseAbs().maxCoeff();
    for (std::size_t k = 1; k < st.changes.size(); ++k)
        if (st.changes[k] > floor && st.changes[k - 1] > 0.0) ratios.push_back(st.changes[k] / st.changes[k - 1]);
    if (ratios.empty() && st.changes.size() >= 2 && st.changes[0] > 0.0)
        ratios.push_back(st.changes[1] / st.changes[0]);
    if (!ratios.empty()) st.factor = *std::max_element(ratios.begin(), ratios.end());
    st.c_a = 2.0 * a2.cwiseAbs().maxCoeff();
    st.c_b = b1.cwiseAbs().maxCoeff();
    st.c_lambda = std::abs(l2);

    EigenSolution e;
    e.m = m;
    e.params = params;
    e.disc = d;
    e.lambda1 = l1;
    e.lambda2_eps = l2;
    e.lambda_offset = l1 * eps + l2 * eps * eps;
    e.a1 = rhs.a1();
    e.b0 = GridFn(rule, b0);
    e.a2_eps = GridFn(rule, a2);
    e.b1_eps = GridFn(rule, b1);
    e.a = GridFn(rule, (eps * rhs.a1() * Eigen::VectorXd::Ones(N) + eps * eps * a2).eval());
    e.b = GridFn(rule, (b0 + eps * b1).eval());
    e.contraction = st;
    e.tol = opt.tol;
    e.residual = eigen_residual(*d, m, e.lambda_offset, e.a, e.b);
    return e;
}

// Weighted L2 with weight -phi'.
inline double weighted_norm_sq(const Discretization& d, const Eigen::VectorXd& x) {
    return -d.w().dot(d.dphi().cwiseProduct(x.cwiseAbs2()));
}

struct CertificateReport {
    std::vector<BlockSpectrum> spectra;
    double threshold = 1e-6;
    int near_zero_count = 0;
    int near_zero_block = 0;       // block holding the first near-zero value (0 if none)
    double kernel_svd_min = 0.0;   // relative smallest singular value of block m
    double min_off_block = 0.0;    // smallest relative singular value over n != m
    double transversality = 0.0;   // -||a||_w^2 + ||b||_w^2
    double a_norm_w = 0.0, b_norm_w = 0.0;
    double residual = 0.0;
    bool kernel_ok = false;
    bool transversality_ok = false;
    bool residual_ok = false;
    bool ok() const { return kernel_ok && transversality_ok && residual_ok; }
};

inline int count_near_zero(const std::vector<BlockSpectrum>& spectra, double threshold, int* block = nullptr) {
    int count = 0;
    if (block) *block = 0;
    for (const auto& s : spectra) {
        const double top = s.singular_values[0];
        for (int k = 0; k < s.singular_values.size(); ++k) {
            if (s.singular_values[k] < threshold * top) {
                if (count == 0 && block) *block = s.n;
                ++count;
            }
        }
    }
    return count;
}

inline CertificateReport certify(const EigenSolution& e, int n_modes = 16, bool throw_on_failure = true,
                                 double threshold = 1e-6) {
    CertificateReport r;
    r.threshold = threshold;
    r.spectra = block_spectra(*e.disc, e.lambda_offset, n_modes);
    r.near_zero_count = count_near_zero(r.spectra, threshold, &r.near_zero_block);
    r.min_off_block = 1.0;
    for (const auto& s : r.spectra) {
        if (s.n == e.m) r.kernel_svd_min = s.relative_min();
        else r.min_off_block = std::min(r.min_off_block, s.relative_min());
    }
    r.kernel_ok = r.near_zero_count == 1 && r.near_zero_block == e.m;
    r.a_norm_w = std::sqrt(weighted_norm_sq(*e.disc, e.a.values));
    r.b_norm_w = std::sqrt(weighted_norm_sq(*e.disc, e.b.values));
    r.transversality = -r.a_norm_w * r.a_norm_w + r.b_norm_w * r.b_norm_w;
    r.transversality_ok = r.transversality > 0.0;
    r.residual = e.residual.relative();
    r.residual_ok = r.residual <= 1e-6;
    if (throw_on_failure) {
        if (!r.residual_ok) throw CertificationFailure("certification failed: eigen residual");
        if (!r.kernel_ok) throw CertificationFailure("certification failed: kernel dimension");
        if (!r.transversality_ok) throw CertificationFailure("certification failed: transversality");
    }
    return r;
}

}  // namespace couette

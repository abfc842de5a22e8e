#pragma once
// Per-mode linearised operators on the two rescaled bands z in [-1,1].
// The upper band is y = 1 + eps z, the lower band y = -1 - eps z; a band
// function h = sum_n h_n(y) cos(n x) is carried as (u_n, v_n) = (h_n on
// the upper band, h_n on the lower band).

#include "profile.hpp"
#include "quadrature.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

namespace couette {

// Profile data sampled on a rule.
class Discretization {
public:
    Discretization(Profile profile, RulePtr rule) : profile_(std::move(profile)), rule_(std::move(rule)) {
        const int n = rule_->size();
        dphi_.resize(n);
        big_phi_.resize(n);
        for (int i = 0; i < n; ++i) {
            double z = rule_->nodes()[i];
            dphi_[i] = profile_.phi_prime(z);
            big_phi_[i] = profile_.big_phi(z);
        }
    }

    const Profile& profile() const { return profile_; }
    const RulePtr& rule() const { return rule_; }
    double epsilon() const { return profile_.epsilon(); }
    int size() const { return rule_->size(); }
    Eigen::Map<const Eigen::VectorXd> z() const { return rule_->node_vector(); }
    Eigen::Map<const Eigen::VectorXd> w() const { return rule_->weight_vector(); }
    const Eigen::VectorXd& dphi() const { return dphi_; }
    const Eigen::VectorXd& big_phi() const { return big_phi_; }

    // matrices acting on nodal values x: (M x)_i = int k(z_i, zb) phi'(zb) x(zb) dzb
    Eigen::MatrixXd self_kernel(double rate) const {
        Eigen::MatrixXd k = kink_matrix(*rule_, [rate](double d) { return std::exp(-rate * d); });
        return k * dphi_.asDiagonal();
    }
    // (e^{-rate|z-zb|} - 1) / eps
    Eigen::MatrixXd self_divided(double rate) const {
        const double e = epsilon();
        Eigen::MatrixXd k = kink_matrix(*rule_, [rate, e](double d) { return std::expm1(-rate * d) / e; });
        return k * dphi_.asDiagonal();
    }
    // e^{-rate (z+zb)} times `factor`
    Eigen::MatrixXd cross_kernel(double rate, double factor = 1.0) const {
        const int n = size();
        Eigen::MatrixXd k(n, n);
        auto zz = z();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) k(i, j) = factor * w()[j] * std::exp(-rate * (zz[i] + zz[j])) * dphi_[j];
        return k;
    }
    // (e^{-rate (z+zb)} - 1) / eps
    Eigen::MatrixXd cross_divided(double rate) const {
        const int n = size();
        const double e = epsilon();
        Eigen::MatrixXd k(n, n);
        auto zz = z();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) k(i, j) = w()[j] * std::expm1(-rate * (zz[i] + zz[j])) / e * dphi_[j];
        return k;
    }
    // int phi' x
    double phi_moment(const Eigen::VectorXd& x) const { return w().dot(dphi_.cwiseProduct(x)); }

private:
    Profile profile_;
    RulePtr rule_;
    Eigen::VectorXd dphi_, big_phi_;
};

// Lambda^+ = lambda + 1 + eps(z-1) - eps^2 Phi,  Lambda^- = lambda - 1 + eps(1-z) + eps^2 Phi.
// The speed is passed as its offset lambda - 1 so that Lambda^- keeps full
// relative precision when eps is tiny.
inline std::pair<GridFn, GridFn> lambda_multipliers(double lambda_offset, const Discretization& d) {
    const double e = d.epsilon();
    Eigen::VectorXd one_minus_z = (1.0 - d.z().array()).matrix();
    Eigen::VectorXd p = (2.0 + lambda_offset - e * one_minus_z.array() - e * e * d.big_phi().array()).matrix();
    Eigen::VectorXd m = (lambda_offset + e * one_minus_z.array() + e * e * d.big_phi().array()).matrix();
    return {GridFn(d.rule(), p), GridFn(d.rule(), m)};
}

struct ModeOperator {
    int n = 1;
    double lambda_offset = 0.0;
    double epsilon = 0.0;
    RulePtr rule;
    GridFn lambda_plus, lambda_minus;
    Eigen::MatrixXd self;    // int phi' x e^{-n eps |z - zb|}
    Eigen::MatrixXd cross;   // int phi' x e^{-n (2 + eps (z + zb))}

    std::pair<Eigen::VectorXd, Eigen::VectorXd> apply(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
        const double c = epsilon / (2.0 * n);
        Eigen::VectorXd tp = lambda_plus.values.cwiseProduct(u) - c * (self * u) + c * (cross * v);
        Eigen::VectorXd tm = lambda_minus.values.cwiseProduct(v) + c * (self * v) - c * (cross * u);
        return {std::move(tp), std::move(tm)};
    }

    std::pair<GridFn, GridFn> apply_T(const GridFn& u, const GridFn& v) const {
        if (u.rule != rule || v.rule != rule) throw std::invalid_argument("rule mismatch");
        auto [p, m] = apply(u.values, v.values);
        return {GridFn(rule, std::move(p)), GridFn(rule, std::move(m))};
    }

    // Dense 2N x 2N matrix of (u, v) -> (T^+, T^-).
    Eigen::MatrixXd matrix() const {
        const int N = rule->size();
        const double c = epsilon / (2.0 * n);
        Eigen::MatrixXd t(2 * N, 2 * N);
        t.topLeftCorner(N, N) = -c * self;
        t.topLeftCorner(N, N).diagonal() += lambda_plus.values;
        t.topRightCorner(N, N) = c * cross;
        t.bottomRightCorner(N, N) = c * self;
        t.bottomRightCorner(N, N).diagonal() += lambda_minus.values;
        t.bottomLeftCorner(N, N) = -c * cross;
        return t;
    }
};

inline ModeOperator assemble_mode(int n, double lambda_offset, const Discretization& d) {
    if (n < 1) throw std::invalid_argument("assemble_mode: n must be >= 1");
    ModeOperator op;
    op.n = n;
    op.lambda_offset = lambda_offset;
    op.epsilon = d.epsilon();
    op.rule = d.rule();
    std::tie(op.lambda_plus, op.lambda_minus) = lambda_multipliers(lambda_offset, d);
    op.self = d.self_kernel(n * d.epsilon());
    op.cross = d.cross_kernel(n * d.epsilon(), std::exp(-2.0 * n));
    return op;
}

// Singular values (descending) of W^{1/2} T W^{-1/2} with the T^- rows
// divided by eps, W the quadrature weights on each band.
inline Eigen::VectorXd scaled_singular_values(const ModeOperator& op) {
    const int N = op.rule->size();
    Eigen::MatrixXd t = op.matrix();
    t.bottomRows(N) /= op.epsilon;
    Eigen::VectorXd s(2 * N);
    s << op.rule->weight_vector().cwiseSqrt(), op.rule->weight_vector().cwiseSqrt();
    Eigen::MatrixXd m = s.asDiagonal() * t * s.cwiseInverse().asDiagonal();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
    return svd.singularValues();
}

struct BlockSpectrum {
    int n = 0;
    Eigen::VectorXd singular_values;   // descending
    double relative_min() const { return singular_values[singular_values.size() - 1] / singular_values[0]; }
};

inline std::vector<BlockSpectrum> block_spectra(const Discretization& d, double lambda_offset, int n_modes) {
    std::vector<BlockSpectrum> out;
    for (int n = 1; n <= n_modes; ++n) out.push_back({n, scaled_singular_values(assemble_mode(n, lambda_offset, d))});
    return out;
}

// ---------------------------------------------------------------------------
// Band functions on T x I_eps sampled on an equispaced x grid times the
// rule's nodes on each band.

struct BandField {
    int nx = 64;
    RulePtr rule;
    double epsilon = 0.0;
    Eigen::MatrixXd upper;   // (rule node, x index)
    Eigen::MatrixXd lower;

    BandField() = default;
    BandField(int nx_, RulePtr r, double eps)
        : nx(nx_), rule(std::move(r)), epsilon(eps),
          upper(Eigen::MatrixXd::Zero(rule->size(), nx_)), lower(Eigen::MatrixXd::Zero(rule->size(), nx_)) {}

    double x(int k) const { return 2.0 * std::numbers::pi * k / nx; }
    double y_upper(int i) const { return 1.0 + epsilon * rule->nodes()[i]; }
    double y_lower(int i) const { return -1.0 - epsilon * rule->nodes()[i]; }

    // L2(T x I_eps) norm with trapezoid in x and eps * w in y.
    double l2() const {
        double s = 0.0;
        auto w = rule->weight_vector();
        for (int k = 0; k < nx; ++k) s += w.dot(upper.col(k).cwiseAbs2()) + w.dot(lower.col(k).cwiseAbs2());
        return std::sqrt(s * epsilon * 2.0 * std::numbers::pi / nx);
    }
    double sup() const { return std::max(upper.cwiseAbs().maxCoeff(), lower.cwiseAbs().maxCoeff()); }

    BandField& operator+=(const BandField& o) { upper += o.upper; lower += o.lower; return *this; }
    BandField& operator-=(const BandField& o) { upper -= o.upper; lower -= o.lower; return *this; }
    BandField& operator*=(double s) { upper *= s; lower *= s; return *this; }
    friend BandField operator+(BandField a, const BandField& b) { return a += b; }
    friend BandField operator-(BandField a, const BandField& b) { return a -= b; }
    friend BandField operator*(double s, BandField a) { return a *= s; }

    // Fourier coefficients in x of every row: cos (even) and sin (odd) parts.
    std::pair<Eigen::VectorXd, Eigen::VectorXd> cosine_mode(int n) const { return mode(n, true); }
    std::pair<Eigen::VectorXd, Eigen::VectorXd> sine_mode(int n) const { return mode(n, false); }

    // Spectral x-derivative (grid must resolve the content: n < nx/2).
    BandField dx() const {
        BandField out(nx, rule, epsilon);
        for (int n = 1; 2 * n < nx; ++n) {
            auto [cu, cl] = cosine_mode(n);
            auto [su, sl] = sine_mode(n);
            for (int k = 0; k < nx; ++k) {
                double c = std::cos(n * x(k)), s = std::sin(n * x(k));
                out.upper.col(k) += n * (su * c - cu * s);
                out.lower.col(k) += n * (sl * c - cl * s);
            }
        }
        return out;
    }

private:
    std::pair<Eigen::VectorXd, Eigen::VectorXd> mode(int n, bool cosine) const {
        Eigen::VectorXd u = Eigen::VectorXd::Zero(rule->size()), l = u;
        const double f = (n == 0 || 2 * n == nx) ? 1.0 / nx : 2.0 / nx;
        for (int k = 0; k < nx; ++k) {
            double b = cosine ? std::cos(n * x(k)) : std::sin(n * x(k));
            u += f * b * upper.col(k);
            l += f * b * lower.col(k);
        }
        return {u, l};
    }
};

// Places g_u(z) cos(n x) on the upper band and g_l(z) cos(n x) on the lower band.
inline BandField cosine_field(int nx, const RulePtr& rule, double eps, int n, const Eigen::VectorXd& gu,
                              const Eigen::VectorXd& gl) {
    BandField f(nx, rule, eps);
    for (int k = 0; k < nx; ++k) {
        double c = std::cos(n * f.x(k));
        f.upper.col(k) = c * gu;
        f.lower.col(k) = c * gl;
    }
    return f;
}

struct PhysicalApplyResult {
    BandField value;
    double tail_energy = 0.0;
    bool truncation_warning = false;
};

// Mode-weighted energy sum_n n^{2k} ||h_n||^2 over n > n_modes (k = 0..4).
inline double mode_tail_energy(const BandField& h, int n_modes) {
    double tail = 0.0;
    auto w = h.rule->weight_vector();
    for (int n = n_modes + 1; 2 * n <= h.nx; ++n) {
        auto [cu, cl] = h.cosine_mode(n);
        double e = h.epsilon * (w.dot(cu.cwiseAbs2()) + w.dot(cl.cwiseAbs2()));
        double weight = 0.0;
        for (int k = 0; k <= 4; ++k) weight += std::pow(static_cast<double>(n), 2 * k);
        tail += weight * e;
    }
    return tail;
}

// Linearised operator on a band field that is even in x with zero mean:
//   L h = sum_n (-n) sin(n x) T_n[h_n]
inline PhysicalApplyResult physical_apply(double lambda_offset, const Discretization& d, const BandField& h,
                                          int n_modes) {
    PhysicalApplyResult r{BandField(h.nx, h.rule, h.epsilon), 0.0, false};
    for (int n = 1; n <= n_modes && 2 * n < h.nx; ++n) {
        auto [cu, cl] = h.cosine_mode(n);
        if (cu.cwiseAbs().maxCoeff() == 0.0 && cl.cwiseAbs().maxCoeff() == 0.0) continue;
        ModeOperator op = assemble_mode(n, lambda_offset, d);
        auto [tp, tm] = op.apply(cu, cl);
        for (int k = 0; k < h.nx; ++k) {
            double s = -n * std::sin(n * h.x(k));
            r.value.upper.col(k) += s * tp;
            r.value.lower.col(k) += s * tm;
        }
    }
    r.tail_energy = mode_tail_energy(h, n_modes);
    r.truncation_warning = r.tail_energy > 1e-10;
    return r;
}

}  // namespace couette

#pragma once
// Composite Gauss-Legendre rules on [-1,1], panel interpolation and
// product integration for kernels with a kink at the target node.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace couette {

struct GaussLegendre {
    std::vector<double> nodes;    // ascending, on [-1,1]
    std::vector<double> weights;
};

// Newton iteration on P_n with the Tricomi initial guess; accurate to
// a few ulps for the orders used here (n <= 256).
inline GaussLegendre gauss_legendre(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: order must be >= 1");
    GaussLegendre g;
    g.nodes.resize(n);
    g.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
        }
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        g.nodes[n - 1 - i] = x;
        g.nodes[i] = -x;
        g.weights[i] = w;
        g.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) g.nodes[n / 2] = 0.0;
    return g;
}

struct Panel {
    double lo, hi;
    int first;   // index of first node
};

// Composite rule: `order` Gauss-Legendre nodes on every panel.
class QuadratureRule {
public:
    QuadratureRule(int order, std::vector<double> breakpoints) : order_(order) {
        if (order < 2) throw std::invalid_argument("QuadratureRule: order must be >= 2");
        std::sort(breakpoints.begin(), breakpoints.end());
        std::vector<double> bp;
        for (double b : breakpoints) {
            if (bp.empty() || b - bp.back() > 1e-15) bp.push_back(b);
        }
        if (bp.size() < 2) throw std::invalid_argument("QuadratureRule: need two breakpoints");
        ref_ = gauss_legendre(order);
        bary_.resize(order);
        for (int k = 0; k < order; ++k) {
            double s = 1.0;
            for (int j = 0; j < order; ++j)
                if (j != k) s *= (ref_.nodes[k] - ref_.nodes[j]);
            bary_[k] = 1.0 / s;
        }
        for (std::size_t p = 0; p + 1 < bp.size(); ++p) {
            double a = bp[p], b = bp[p + 1];
            panels_.push_back({a, b, static_cast<int>(nodes_.size())});
            for (int k = 0; k < order; ++k) {
                nodes_.push_back(0.5 * (a + b) + 0.5 * (b - a) * ref_.nodes[k]);
                weights_.push_back(0.5 * (b - a) * ref_.weights[k]);
            }
        }
    }

    int size() const { return static_cast<int>(nodes_.size()); }
    int order() const { return order_; }
    double lo() const { return panels_.front().lo; }
    double hi() const { return panels_.back().hi; }
    std::span<const double> nodes() const { return nodes_; }
    std::span<const double> weights() const { return weights_; }
    const std::vector<Panel>& panels() const { return panels_; }
    const GaussLegendre& reference() const { return ref_; }

    Eigen::Map<const Eigen::VectorXd> node_vector() const { return {nodes_.data(), size()}; }
    Eigen::Map<const Eigen::VectorXd> weight_vector() const { return {weights_.data(), size()}; }

    int panel_of(double z) const {
        auto it = std::upper_bound(panels_.begin(), panels_.end(), z,
                                   [](double v, const Panel& p) { return v < p.hi; });
        if (it == panels_.end()) return static_cast<int>(panels_.size()) - 1;
        return static_cast<int>(it - panels_.begin());
    }
    int panel_of_node(int i) const { return i / order_; }

    // Lagrange basis of panel p evaluated at z (barycentric form).
    void basis(int p, double z, std::span<double> out) const {
        const Panel& pn = panels_[p];
        double t = (2.0 * z - pn.lo - pn.hi) / (pn.hi - pn.lo);
        for (int k = 0; k < order_; ++k) {
            if (t == ref_.nodes[k]) {
                std::fill(out.begin(), out.end(), 0.0);
                out[k] = 1.0;
                return;
            }
        }
        double den = 0.0;
        for (int k = 0; k < order_; ++k) {
            out[k] = bary_[k] / (t - ref_.nodes[k]);
            den += out[k];
        }
        for (int k = 0; k < order_; ++k) out[k] /= den;
    }

    double interpolate(std::span<const double> values, double z) const {
        int p = panel_of(z);
        std::vector<double> l(order_);
        basis(p, z, l);
        double s = 0.0;
        for (int k = 0; k < order_; ++k) s += l[k] * values[panels_[p].first + k];
        return s;
    }

    double integrate(std::span<const double> values) const {
        double s = 0.0;
        for (int i = 0; i < size(); ++i) s += weights_[i] * values[i];
        return s;
    }

    // Block-diagonal differentiation matrix (one block per panel).
    Eigen::MatrixXd differentiation() const {
        const int q = order_;
        Eigen::MatrixXd dref = Eigen::MatrixXd::Zero(q, q);
        for (int i = 0; i < q; ++i) {
            double diag = 0.0;
            for (int j = 0; j < q; ++j) {
                if (i == j) continue;
                dref(i, j) = (bary_[j] / bary_[i]) / (ref_.nodes[i] - ref_.nodes[j]);
                diag -= dref(i, j);
            }
            dref(i, i) = diag;
        }
        Eigen::MatrixXd d = Eigen::MatrixXd::Zero(size(), size());
        for (const Panel& pn : panels_)
            d.block(pn.first, pn.first, q, q) = dref * (2.0 / (pn.hi - pn.lo));
        return d;
    }

private:
    int order_;
    GaussLegendre ref_;
    std::vector<double> bary_;
    std::vector<Panel> panels_;
    std::vector<double> nodes_, weights_;
};

using RulePtr = std::shared_ptr<const QuadratureRule>;

// Breakpoints for functions of z on [-1,1]: geometric grading toward z=1
// down to `floor`, mild grading toward z=-1, and panels across the two
// mollified ramps when kappa > 0.
inline std::vector<double> graded_breakpoints(double kappa, double floor) {
    std::vector<double> bp{-1.0, 0.0, 1.0};
    for (double s = 0.5; s > floor; s *= 0.25) bp.push_back(1.0 - s);
    bp.push_back(1.0 - floor);
    for (double s = 0.5; s > 1e-3; s *= 0.25) bp.push_back(-1.0 + s);
    if (kappa > 0.0) {
        for (int j = 0; j <= 8; ++j) {
            double t = 1.0 - 2.0 * kappa + 0.25 * kappa * j;
            bp.push_back(t);
            bp.push_back(-t);
        }
    }
    std::vector<double> out;
    for (double b : bp)
        if (b >= -1.0 && b <= 1.0) out.push_back(b);
    std::sort(out.begin(), out.end());
    // drop breakpoints closer than a fraction of their distance to the nearer end
    std::vector<double> keep;
    for (double b : out) {
        if (!keep.empty()) {
            double gap = b - keep.back();
            double scale = std::max(std::min(1.0 - b, 1.0 + keep.back()), 1e-300);
            if (gap < 1e-3 * scale || gap < 1e-15) continue;
        }
        keep.push_back(b);
    }
    if (keep.back() != 1.0) keep.back() = 1.0;
    return keep;
}

inline RulePtr make_graded_rule(int order, double kappa, double floor) {
    return std::make_shared<const QuadratureRule>(order, graded_breakpoints(kappa, floor));
}

// Product-integration matrix: sum_j K(i,j) g_j ~ int g(zb) k(|z_i - zb|) dzb.
// Off-panel entries are w_j k(|z_i-z_j|); on the target's own panel the
// integral is split at z_i and g is replaced by its panel interpolant.
inline Eigen::MatrixXd kink_matrix(const QuadratureRule& rule, const std::function<double(double)>& k) {
    const int n = rule.size();
    const int q = rule.order();
    auto z = rule.nodes();
    auto w = rule.weights();
    Eigen::MatrixXd K(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) K(i, j) = w[j] * k(std::abs(z[i] - z[j]));
    const auto& ref = rule.reference();
    std::vector<double> l(q);
    for (std::size_t p = 0; p < rule.panels().size(); ++p) {
        const Panel& pn = rule.panels()[p];
        for (int ii = 0; ii < q; ++ii) {
            const int i = pn.first + ii;
            const double zi = z[i];
            for (int j = 0; j < q; ++j) K(i, pn.first + j) = 0.0;
            const double ends[2][2] = {{pn.lo, zi}, {zi, pn.hi}};
            for (const auto& e : ends) {
                const double a = e[0], b = e[1];
                for (int s = 0; s < q; ++s) {
                    const double t = 0.5 * (a + b) + 0.5 * (b - a) * ref.nodes[s];
                    const double ws = 0.5 * (b - a) * ref.weights[s] * k(std::abs(zi - t));
                    rule.basis(static_cast<int>(p), t, l);
                    for (int j = 0; j < q; ++j) K(i, pn.first + j) += ws * l[j];
                }
            }
        }
    }
    return K;
}

// Values of a scalar function at the nodes of a rule.
struct GridFn {
    RulePtr rule;
    Eigen::VectorXd values;

    GridFn() = default;
    GridFn(RulePtr r, Eigen::VectorXd v) : rule(std::move(r)), values(std::move(v)) {
        if (values.size() != rule->size()) throw std::invalid_argument("GridFn: size does not match rule");
    }
    static GridFn sample(RulePtr r, const std::function<double(double)>& f) {
        Eigen::VectorXd v(r->size());
        for (int i = 0; i < r->size(); ++i) v[i] = f(r->nodes()[i]);
        return {std::move(r), std::move(v)};
    }
    double operator()(double z) const {
        return rule->interpolate({values.data(), static_cast<std::size_t>(values.size())}, z);
    }
    double integral() const { return rule->weight_vector().dot(values); }
    double l2() const { return std::sqrt(rule->weight_vector().dot(values.cwiseAbs2())); }
};

inline void require_same_rule(const GridFn& a, const GridFn& b) {
    if (a.rule != b.rule) throw std::invalid_argument("rule mismatch");
}

}  // namespace couette

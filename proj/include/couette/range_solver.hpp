#pragma once
// Range of the linearised operator: adjointness, the solvability
// condition at mode m, explicit inversion off mode m, the Galerkin solve
// on mode m and coercivity probes of the associated bilinear forms.

#include "bifurcate.hpp"

#include <Eigen/LU>

#include <random>

namespace couette {

struct ModeCollision : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct Obstruction : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// (f,g) = int (-phi') f g on the nodes of a rule.
class WeightedInnerProduct {
public:
    WeightedInnerProduct(RulePtr rule, Eigen::VectorXd minus_dphi) : rule_(std::move(rule)) {
        if (minus_dphi.size() != rule_->size()) throw std::invalid_argument("weight size does not match rule");
        if ((minus_dphi.array() < 0.0).any()) throw std::invalid_argument("weight must be nonnegative");
        mw_ = rule_->weight_vector().cwiseProduct(minus_dphi);
    }
    explicit WeightedInnerProduct(const Discretization& d) : WeightedInnerProduct(d.rule(), -d.dphi()) {}

    double operator()(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const { return mw_.dot(f.cwiseProduct(g)); }
    double norm(const Eigen::VectorXd& f) const { return std::sqrt((*this)(f, f)); }
    // node weights w_i (-phi'_i)
    const Eigen::VectorXd& mass() const { return mw_; }
    const RulePtr& rule() const { return rule_; }

private:
    RulePtr rule_;
    Eigen::VectorXd mw_;
};

// |LHS - RHS| of
//   -(T+[u,v], phi' f) + (T-[u,v], phi' g) = -(phi' u, T+[f,g]) + (phi' v, T-[f,g]).
inline double adjointness_residual(const GridFn& u, const GridFn& v, const GridFn& f, const GridFn& g,
                                   const ModeOperator& op, const Discretization& d) {
    for (const GridFn* x : {&u, &v, &f, &g})
        if (x->rule != op.rule) throw std::invalid_argument("rule mismatch");
    auto [tp, tm] = op.apply(u.values, v.values);
    auto [sp, sm] = op.apply(f.values, g.values);
    const Eigen::VectorXd wd = d.w().cwiseProduct(d.dphi());
    double lhs = -wd.dot(tp.cwiseProduct(f.values)) + wd.dot(tm.cwiseProduct(g.values));
    double rhs = -wd.dot(u.values.cwiseProduct(sp)) + wd.dot(v.values.cwiseProduct(sm));
    return std::abs(lhs - rhs);
}

// Obstruction scalar -(W+, phi' a) + (W-, phi' b).
inline double solvability(const GridFn& wp, const GridFn& wm, const EigenSolution& e) {
    require_same_rule(wp, e.a);
    require_same_rule(wm, e.b);
    const Eigen::VectorXd wd = e.disc->w().cwiseProduct(e.disc->dphi());
    return -wd.dot(wp.values.cwiseProduct(e.a.values)) + wd.dot(wm.values.cwiseProduct(e.b.values));
}

// Forward map of the one-dimensional problem:
//   F = (1 + lambda1 - z) f + (1/2n) int phi' f.
inline Eigen::VectorXd resolvent_forward(const Discretization& d, const Eigen::VectorXd& f, int n, double lambda1) {
    Eigen::VectorXd r = (lambda1 + (1.0 - d.z().array())).matrix().cwiseProduct(f);
    return (r.array() + d.phi_moment(f) / (2.0 * n)).matrix();
}

// Inverse of resolvent_forward for n != m, using int phi'/(1+lambda1-z) = -2m.
inline GridFn invert_resolvent_1d(const Discretization& d, const GridFn& F, int n, int m, double lambda1) {
    if (F.rule != d.rule()) throw std::invalid_argument("rule mismatch");
    if (n == m) throw ModeCollision("resolvent does not exist at n = m");
    const Eigen::VectorXd inv = (lambda1 + (1.0 - d.z().array())).inverse().matrix();
    const double c = d.phi_moment(F.values.cwiseProduct(inv)) / (2.0 * (m - n));
    return {d.rule(), ((F.values.array() + c) * inv.array()).matrix()};
}

struct OffModeSolution {
    GridFn u, v;
    int iterations = 0;
    double residual = 0.0;      // ||T_n[u,v] + W/n||_L2
    double norm_ratio = 0.0;    // (||u|| + ||v||) / (||W+|| + ||W-||)
};

// Solves T_n[u,v] = -(W+, W-)/n for n != m by the fixed point
//   u = -W+/(n L+) + eps U[u,v],  v = R[ W + eps V[u,v] ],
// where R inverts the one-dimensional problem at mode n.
inline OffModeSolution solve_offmode(int n, const GridFn& wp, const GridFn& wm, const EigenSolution& e,
                                     double tol = 1e-12, int max_iter = 500) {
    if (n < 1) throw std::invalid_argument("n must be >= 1");
    if (n == e.m) throw ModeCollision("solve_offmode called with n = m");
    require_same_rule(wp, e.a);
    require_same_rule(wm, e.a);
    const Discretization& d = *e.disc;
    const double eps = d.epsilon();
    const int N = d.size();
    const ModeOperator op = assemble_mode(n, e.lambda_offset, d);
    const Eigen::VectorXd lp = op.lambda_plus.values;
    const Eigen::MatrixXd self_div = d.self_divided(n * eps);
    const Eigen::VectorXd u0 = -wp.values.cwiseQuotient(n * lp);
    const Eigen::VectorXd W = -wm.values / (n * eps) + op.cross * u0 / (2.0 * n);
    const Eigen::VectorXd lam2_phi = (e.lambda2_eps + d.big_phi().array()).matrix();

    auto R = [&](const Eigen::VectorXd& F) { return invert_resolvent_1d(d, GridFn(d.rule(), F), n, e.m, e.lambda1).values; };

    Eigen::VectorXd u = Eigen::VectorXd::Zero(N), v = Eigen::VectorXd::Zero(N);
    OffModeSolution s;
    double prev = std::numeric_limits<double>::infinity();
    bool converged = false;
    for (int it = 1; it <= max_iter; ++it) {
        Eigen::VectorXd U = (op.self * u - op.cross * v).cwiseQuotient(2.0 * n * lp);
        Eigen::VectorXd V = -lam2_phi.cwiseProduct(v) + op.cross * U / (2.0 * n) - self_div * v / (2.0 * n);
        Eigen::VectorXd un = u0 + eps * U;
        Eigen::VectorXd vn = R(W + eps * V);
        double change = std::max((un - u).cwiseAbs().maxCoeff(), (vn - v).cwiseAbs().maxCoeff());
        double size = std::max(un.cwiseAbs().maxCoeff(), vn.cwiseAbs().maxCoeff());
        u = un;
        v = vn;
        s.iterations = it;
        if (!std::isfinite(change) || (it > 5 && change > prev && change > size))
            throw NonContraction("solve_offmode: iteration does not contract at n = " + std::to_string(n));
        prev = change;
        if (change <= tol * size || size == 0.0) {
            converged = true;
            break;
        }
    }
    if (!converged) throw NonContraction("solve_offmode: no convergence at n = " + std::to_string(n));
    s.u = GridFn(d.rule(), u);
    s.v = GridFn(d.rule(), v);
    auto [tp, tm] = op.apply(u, v);
    s.residual = std::hypot(GridFn(d.rule(), (tp + wp.values / n).eval()).l2(),
                            GridFn(d.rule(), (tm + wm.values / n).eval()).l2());
    double wn = wp.l2() + wm.l2();
    s.norm_ratio = wn > 0.0 ? (s.u.l2() + s.v.l2()) / wn : 0.0;
    return s;
}

struct ModeMSolution {
    GridFn u, v;
    double solvability = 0.0;   // relative obstruction scalar of the data
    double residual = 0.0;      // ||T_m[u,v] + W/m||_L2 / ||W/m||_L2
};

namespace detail {

// Orthonormal (Euclidean) basis of the complement of a vector r in R^k.
inline Eigen::MatrixXd complement_basis(const Eigen::VectorXd& r) {
    const Eigen::MatrixXd col = r;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(col);
    Eigen::MatrixXd Q = qr.householderQ();
    return Q.rightCols(r.size() - 1);
}

inline Eigen::VectorXd stacked_mass_pair(const EigenSolution& e) {
    const Eigen::VectorXd mw = -e.disc->w().cwiseProduct(e.disc->dphi());
    Eigen::VectorXd r(2 * mw.size());
    r << mw.cwiseProduct(-e.a.values), mw.cwiseProduct(e.b.values);
    return r;
}

}  // namespace detail

// Solves T_m[u,v] = -(W+, W-)/m with (u,v) weighted-orthogonal to (-a,b).
// Both the unknowns and the equations live in the Euclidean complement of
// M(-a,b), M = diag(w (-phi')); that complement is also the discrete range.
inline ModeMSolution solve_mode_m(const GridFn& wp, const GridFn& wm, const EigenSolution& e, double tol = 1e-8) {
    require_same_rule(wp, e.a);
    require_same_rule(wm, e.a);
    const int N = e.disc->size();
    const int m = e.m;
    ModeMSolution s;
    Eigen::VectorXd rhs(2 * N);
    rhs << -wp.values / m, -wm.values / m;
    const Eigen::VectorXd r = detail::stacked_mass_pair(e);
    const double rn = r.norm(), bn = rhs.norm();
    s.solvability = bn > 0.0 ? std::abs(r.dot(rhs)) / (rn * bn) : 0.0;
    if (s.solvability > tol)
        throw Obstruction("solve_mode_m: data not in the range (solvability " + std::to_string(s.solvability) + ")");
    if (bn == 0.0) {
        s.u = GridFn(e.disc->rule(), Eigen::VectorXd::Zero(N));
        s.v = s.u;
        return s;
    }
    const Eigen::MatrixXd T = assemble_mode(m, e.lambda_offset, *e.disc).matrix();
    const Eigen::MatrixXd Q = detail::complement_basis(r);
    Eigen::VectorXd c = (Q.transpose() * T * Q).partialPivLu().solve(Q.transpose() * rhs);
    Eigen::VectorXd x = Q * c;
    s.u = GridFn(e.disc->rule(), x.head(N));
    s.v = GridFn(e.disc->rule(), x.tail(N));
    Eigen::VectorXd res = T * x - rhs;
    auto l2 = [&](const Eigen::VectorXd& y) {
        return std::hypot(GridFn(e.disc->rule(), y.head(N)).l2(), GridFn(e.disc->rule(), y.tail(N)).l2());
    };
    s.residual = l2(res) / l2(rhs);
    return s;
}

// Bilinear forms of the mode-m operator in the weighted pairing.
class BilinearForms {
public:
    explicit BilinearForms(const EigenSolution& e)
        : e_(e), op_(assemble_mode(e.m, e.lambda_offset, *e.disc)), ip_(*e.disc) {
        const double eps = e.disc->epsilon();
        self_div_ = e.disc->self_divided(e.m * eps);
    }

    const WeightedInnerProduct& inner() const { return ip_; }
    const ModeOperator& op() const { return op_; }

    // B[(u1,v1),(u2,v2)] = (T+[u1,v1], u2) + (T-[u1,v1], v2), weighted.
    double B(const Eigen::VectorXd& u1, const Eigen::VectorXd& v1, const Eigen::VectorXd& u2,
             const Eigen::VectorXd& v2, bool with_cross = true) const {
        Eigen::VectorXd tp = op_.lambda_plus.values.cwiseProduct(u1) -
                             (op_.epsilon / (2.0 * m())) * (op_.self * u1);
        Eigen::VectorXd tm = op_.lambda_minus.values.cwiseProduct(v1) +
                             (op_.epsilon / (2.0 * m())) * (op_.self * v1);
        if (with_cross) {
            tp += (op_.epsilon / (2.0 * m())) * (op_.cross * v1);
            tm -= (op_.epsilon / (2.0 * m())) * (op_.cross * u1);
        }
        return ip_(tp, u2) + ip_(tm, v2);
    }

    // int (-phi')(1+lambda1-z) v1 v2 - (1/2m) int(-phi') v1 int(-phi') v2
    double script_B(const Eigen::VectorXd& v1, const Eigen::VectorXd& v2) const {
        const auto& mw = ip_.mass();
        Eigen::VectorXd s = (e_.lambda1 + (1.0 - e_.disc->z().array())).matrix();
        return mw.dot(s.cwiseProduct(v1).cwiseProduct(v2)) - mw.dot(v1) * mw.dot(v2) / (2.0 * m());
    }

    double B1(const Eigen::VectorXd& u) const {
        const Discretization& d = *e_.disc;
        const double eps = d.epsilon();
        Eigen::VectorXd c =
            (e_.lambda1 - 1.0 + d.z().array() + eps * (e_.lambda2_eps - d.big_phi().array())).matrix();
        Eigen::VectorXd wu = d.w().cwiseProduct(d.dphi()).cwiseProduct(u);
        return ip_(c.cwiseProduct(u), u) + wu.dot(op_.self * u) / (2.0 * m());
    }

    double B2(const Eigen::VectorXd& v) const {
        const Discretization& d = *e_.disc;
        Eigen::VectorXd c = (e_.lambda2_eps + d.big_phi().array()).matrix();
        Eigen::VectorXd wv = d.w().cwiseProduct(d.dphi()).cwiseProduct(v);
        return ip_(c.cwiseProduct(v), v) - wv.dot(self_div_ * v) / (2.0 * m());
    }

    // B[(u,v),(u,v)] - 2 int(-phi')u^2 - eps ScriptB[v,v] - eps B1[u,u] - eps^2 B2[v,v]
    double decomposition_residual(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
        const double eps = e_.disc->epsilon();
        return B(u, v, u, v) - 2.0 * ip_(u, u) - eps * script_B(v, v) - eps * B1(u) - eps * eps * B2(v);
    }

    // Projections onto the weighted complements of (-a,b) and of b0.
    std::pair<Eigen::VectorXd, Eigen::VectorXd> project_pair(Eigen::VectorXd u, Eigen::VectorXd v) const {
        const Eigen::VectorXd qa = -e_.a.values, qb = e_.b.values;
        double c = (ip_(u, qa) + ip_(v, qb)) / (ip_(qa, qa) + ip_(qb, qb));
        return {u - c * qa, v - c * qb};
    }
    Eigen::VectorXd project_b0(const Eigen::VectorXd& v) const {
        const Eigen::VectorXd& b0 = e_.b0.values;
        return v - ip_(v, b0) / ip_(b0, b0) * b0;
    }

private:
    int m() const { return e_.m; }
    EigenSolution e_;
    ModeOperator op_;
    WeightedInnerProduct ip_;
    Eigen::MatrixXd self_div_;
};

// Smooth random function: Legendre series with decaying N(0,1) coefficients.
template <class Rng>
Eigen::VectorXd random_smooth(const QuadratureRule& rule, Rng& rng, int degree = 8) {
    std::normal_distribution<double> nd;
    std::vector<double> c(degree + 1);
    for (int k = 0; k <= degree; ++k) c[k] = nd(rng) / (1.0 + k);
    Eigen::VectorXd out(rule.size());
    for (int i = 0; i < rule.size(); ++i) {
        double z = rule.nodes()[i], p0 = 1.0, p1 = z, s = c[0] + (degree > 0 ? c[1] * z : 0.0);
        for (int k = 2; k <= degree; ++k) {
            double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
            s += c[k] * p2;
            p0 = p1;
            p1 = p2;
        }
        out[i] = s;
    }
    return out;
}

struct CoercivityStats {
    int samples = 0;
    double min_B_ratio = 0.0;        // min B[(u,v),(u,v)] / (||u||^2 + eps ||v||^2)
    double min_script_ratio = 0.0;   // min ScriptB[v,v] / ||v||^2 over v orthogonal to b0
    double script_B_b0 = 0.0;        // ScriptB[b0,b0] / ||b0||^2
    double max_decomposition = 0.0;  // max relative decomposition residual
    double max_cross_effect = 0.0;   // max |B with cross - B without| / B
};

inline CoercivityStats coercivity_probe(int samples, const EigenSolution& e, std::uint64_t seed = 1) {
    if (samples < 1) throw std::invalid_argument("samples must be >= 1");
    BilinearForms forms(e);
    const auto& ip = forms.inner();
    const double eps = e.disc->epsilon();
    std::mt19937_64 rng(seed);
    CoercivityStats st;
    st.samples = samples;
    st.min_B_ratio = st.min_script_ratio = std::numeric_limits<double>::infinity();
    st.script_B_b0 = forms.script_B(e.b0.values, e.b0.values) / ip(e.b0.values, e.b0.values);
    for (int k = 0; k < samples; ++k) {
        auto [u, v] = forms.project_pair(random_smooth(*e.disc->rule(), rng), random_smooth(*e.disc->rule(), rng));
        double b = forms.B(u, v, u, v);
        double nrm = ip(u, u) + eps * ip(v, v);
        st.min_B_ratio = std::min(st.min_B_ratio, b / nrm);
        st.max_decomposition = std::max(st.max_decomposition, std::abs(forms.decomposition_residual(u, v)) / nrm);
        st.max_cross_effect = std::max(st.max_cross_effect, std::abs(b - forms.B(u, v, u, v, false)) / std::abs(b));
        Eigen::VectorXd w = forms.project_b0(random_smooth(*e.disc->rule(), rng));
        st.min_script_ratio = std::min(st.min_script_ratio, forms.script_B(w, w) / ip(w, w));
    }
    return st;
}

}  // namespace couette

#pragma once
// Travelling waves near the bifurcation point: the kernel element as a
// band field, the nonlinear level-set functional F and its directional
// derivative, the induced velocity, vorticity sampling and level curves.
//
// F[lambda, f] = L[lambda] f + f f_x - (1/4pi) int varpi'(yb) log R (f_x - fb_x)
// with R = (cosh(Y + f - fb) - cos X) / (cosh Y - cos X), X = x - xb,
// Y = y - yb. The log R factor is bounded, so the nonlinear part is done
// by plain tensor quadrature; L is applied mode by mode.

#include "bifurcate.hpp"
#include "parallel.hpp"
#include "strip_kernel.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <array>
#include <functional>
#include <mutex>
#include <numbers>

namespace couette {

struct QuadratureFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NonMonotoneCurves : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Largest admissible sigma * max|d_y h|.
inline constexpr double sigma_safety = 0.5;

struct KernelElement {
    BandField h;
    double scale = 1.0;   // divisor applied to (a, b)
};

// h = (a(z), b(z)) cos(m x) / scale with scale = max |d_y (a, b)|, so that
// max |d_y h| = 1 and sigma bounds the slope perturbation of the level curves.
inline KernelElement h_field(const EigenSolution& e, int nx) {
    if (2 * e.m >= nx) throw std::invalid_argument("x grid does not resolve mode m");
    const RulePtr& rule = e.disc->rule();
    const double eps = e.disc->epsilon();
    const Eigen::MatrixXd D = rule->differentiation();
    const double s =
        std::max((D * e.a.values).cwiseAbs().maxCoeff(), (D * e.b.values).cwiseAbs().maxCoeff()) / eps;
    return {cosine_field(nx, rule, eps, e.m, e.a.values / s, e.b.values / s), s};
}

// Rows 0..N-1 are the upper band, N..2N-1 the lower band.
inline Eigen::MatrixXd stack(const BandField& f) {
    Eigen::MatrixXd s(2 * f.upper.rows(), f.nx);
    s << f.upper, f.lower;
    return s;
}
inline BandField unstack(const Eigen::MatrixXd& s, const BandField& like) {
    BandField f(like.nx, like.rule, like.epsilon);
    const auto N = like.upper.rows();
    f.upper = s.topRows(N);
    f.lower = s.bottomRows(N);
    return f;
}

// Band nodes in physical coordinates. Node i < N is y = 1 + eps z_i, node
// N + i is y = -1 - eps z_i; the rules are rebuilt on the physical intervals.
class BandGeometry {
public:
    explicit BandGeometry(const Discretization& d) : profile_(d.profile()) {
        const double eps = d.epsilon();
        std::vector<double> up, lo;
        for (const Panel& p : d.rule()->panels()) {
            up.push_back(1.0 + eps * p.lo);
            lo.push_back(-1.0 - eps * p.lo);
        }
        up.push_back(1.0 + eps * d.rule()->hi());
        lo.push_back(-1.0 - eps * d.rule()->hi());
        upper_ = std::make_shared<const QuadratureRule>(d.rule()->order(), up);
        lower_ = std::make_shared<const QuadratureRule>(d.rule()->order(), lo);
        N_ = d.size();
        if (upper_->size() != N_ || lower_->size() != N_)
            throw std::invalid_argument("band rule collapsed: epsilon too small for the physical grid");
        y_.resize(2 * N_);
        w_.resize(2 * N_);
        for (int i = 0; i < N_; ++i) {
            y_[i] = upper_->nodes()[i];
            w_[i] = upper_->weights()[i];
            y_[N_ + i] = lower_->nodes()[N_ - 1 - i];
            w_[N_ + i] = lower_->weights()[N_ - 1 - i];
        }
        dvarpi_.resize(2 * N_);
        omega_.resize(2 * N_);
        for (int k = 0; k < 2 * N_; ++k) {
            dvarpi_[k] = profile_.varpi_prime(y_[k]);
            omega_[k] = profile_.omega_primitive(y_[k]);
        }
    }

    int size() const { return 2 * N_; }
    int band_size() const { return N_; }
    const Eigen::VectorXd& y() const { return y_; }
    const Eigen::VectorXd& weights() const { return w_; }
    const Eigen::VectorXd& dvarpi() const { return dvarpi_; }
    const Eigen::VectorXd& omega() const { return omega_; }

    // (K x)_k = int varpi'(yb) e^{-n |y_k - yb|} x(yb) dyb over both bands
    Eigen::MatrixXd kernel(int n) const {
        auto k = [n](double d) { return std::exp(-n * d); };
        Eigen::MatrixXd K(2 * N_, 2 * N_);
        K.topLeftCorner(N_, N_) = kink_matrix(*upper_, k);
        K.bottomRightCorner(N_, N_) = kink_matrix(*lower_, k).reverse();
        for (int i = 0; i < N_; ++i)
            for (int j = 0; j < N_; ++j) {
                K(i, N_ + j) = w_[N_ + j] * std::exp(-n * std::abs(y_[i] - y_[N_ + j]));
                K(N_ + i, j) = w_[j] * std::exp(-n * std::abs(y_[N_ + i] - y_[j]));
            }
        return K * dvarpi_.asDiagonal();
    }

private:
    Profile profile_;
    std::shared_ptr<const QuadratureRule> upper_, lower_;
    int N_ = 0;
    Eigen::VectorXd y_, w_, dvarpi_, omega_;
};

// L[lambda] h = (lambda + y - Omega(y)) h_x
//             + (1/4pi) int varpi'(yb) log(cosh(y-yb) - cos(x-xb)) hb_x,
// evaluated per x-mode with the x-integral in closed form.
class DirectLinear {
public:
    explicit DirectLinear(const Discretization& d) : geo_(d) {}
    const BandGeometry& geometry() const { return geo_; }

    // Per-mode matrix: multiplier minus (1/2n) kernel.
    Eigen::MatrixXd mode_matrix(double lambda, int n) const {
        Eigen::VectorXd mult = (lambda + geo_.y().array() - geo_.omega().array()).matrix();
        Eigen::MatrixXd M = -kernel(n) / (2.0 * n);
        M.diagonal() += mult;
        return M;
    }

    BandField apply(double lambda, const BandField& h) const {
        BandField out(h.nx, h.rule, h.epsilon);
        const int N = geo_.band_size();
        for (int n = 1; 2 * n < h.nx; ++n) {
            auto [cu, cl] = h.cosine_mode(n);
            auto [su, sl] = h.sine_mode(n);
            Eigen::VectorXd c(2 * N), s(2 * N);
            c << cu, cl;
            s << su, sl;
            if (c.cwiseAbs().maxCoeff() == 0.0 && s.cwiseAbs().maxCoeff() == 0.0) continue;
            const Eigen::MatrixXd M = mode_matrix(lambda, n);
            const Eigen::VectorXd rc = M * c, rs = M * s;
            for (int k = 0; k < h.nx; ++k) {
                Eigen::VectorXd col = -n * std::sin(n * h.x(k)) * rc + n * std::cos(n * h.x(k)) * rs;
                out.upper.col(k) += col.head(N);
                out.lower.col(k) += col.tail(N);
            }
        }
        return out;
    }

private:
    const Eigen::MatrixXd& kernel(int n) const {
        std::lock_guard lock(mutex_);
        while (static_cast<int>(kernels_.size()) < n) kernels_.push_back(geo_.kernel(static_cast<int>(kernels_.size()) + 1));
        return kernels_[n - 1];
    }
    BandGeometry geo_;
    mutable std::vector<Eigen::MatrixXd> kernels_;
    mutable std::mutex mutex_;
};

struct FEvaluation {
    BandField value;
    double quadrature_error = 0.0;   // L2 of (full grid - half grid) nonlinear part
    double nonlinear_sup = 0.0;
};

// Nonlinear functional and its derivative on a fixed band grid.
class WaveOperator {
public:
    WaveOperator(std::shared_ptr<const Discretization> d, int nx, double quad_rtol = 0.25)
        : d_(std::move(d)), nx_(nx), quad_rtol_(quad_rtol), lin_(*d_) {
        if (nx < 4 || nx % 2) throw std::invalid_argument("nx must be even and >= 4");
        const int N = d_->size();
        const double eps = d_->epsilon();
        const auto& geo = lin_.geometry();
        src_w_ = (2.0 * std::numbers::pi / nx) * geo.weights().cwiseProduct(geo.dvarpi());
        // Y = y_r - y_s: within a band from z-differences (no cancellation)
        Y_.resize(2 * N, 2 * N);
        auto z = d_->z();
        for (int r = 0; r < 2 * N; ++r)
            for (int s = 0; s < 2 * N; ++s) {
                const bool ru = r < N, su = s < N;
                const int i = ru ? r : r - N, j = su ? s : s - N;
                if (ru && su) Y_(r, s) = eps * (z[i] - z[j]);
                else if (!ru && !su) Y_(r, s) = -eps * (z[i] - z[j]);
                else Y_(r, s) = geo.y()[r] - geo.y()[s];
            }
        sx2_.resize(nx);
        for (int k = 0; k < nx; ++k) {
            double s = std::sin(std::numbers::pi * k / nx);
            sx2_[k] = 2.0 * s * s;
        }
    }

    int nx() const { return nx_; }
    const Discretization& disc() const { return *d_; }
    const DirectLinear& linear_part() const { return lin_; }

    BandField zero() const { return BandField(nx_, d_->rule(), d_->epsilon()); }

    BandField linear(double lambda, const BandField& h) const {
        check(h);
        return lin_.apply(lambda, h);
    }

    FEvaluation evaluate_F(double lambda, const BandField& f) const {
        check(f);
        const BandField fx_b = f.dx();
        const Eigen::MatrixXd F = stack(f), Fx = stack(fx_b);
        Eigen::MatrixXd fine = Eigen::MatrixXd::Zero(F.rows(), nx_), coarse = fine;
        const int R = static_cast<int>(F.rows());
        parallel_for(R, [&](int r) {
            for (int k = 0; k < nx_; ++k) {
                double sf = 0.0, sc = 0.0;
                for (int s = 0; s < R; ++s) {
                    const double Y = Y_(r, s), shY = 2.0 * sq(std::sinh(0.5 * Y)), W = src_w_[s];
                    if (W == 0.0) continue;
                    for (int l = 0; l < nx_; ++l) {
                        const double den = shY + sx2_[(k - l + nx_) % nx_];
                        if (den == 0.0) continue;
                        const double D = F(r, k) - F(s, l);
                        const double num = 2.0 * std::sinh(Y + 0.5 * D) * std::sinh(0.5 * D);
                        const double t = W * std::log1p(num / den) * (Fx(r, k) - Fx(s, l));
                        sf += t;
                        if (l % 2 == 0) sc += 2.0 * t;
                    }
                }
                fine(r, k) = sf;
                coarse(r, k) = sc;
            }
        });
        FEvaluation out;
        Eigen::MatrixXd total = stack(lin_.apply(lambda, f)) + F.cwiseProduct(Fx) - fine / (4.0 * std::numbers::pi);
        out.value = unstack(total, f);
        out.nonlinear_sup = fine.cwiseAbs().maxCoeff() / (4.0 * std::numbers::pi);
        // the trapezoid rule converges at first order across the near-coincident
        // ridge, so the half-grid difference estimates the error of the full grid
        out.quadrature_error = unstack((fine - coarse) / (4.0 * std::numbers::pi), f).l2();
        if (out.quadrature_error > quad_rtol_ * out.value.l2())
            throw QuadratureFailure("evaluate_F: nonlinear integral not resolved on the x grid");
        return out;
    }

    // D_f F[lambda, f] h
    BandField gateaux_derivative(double lambda, const BandField& f, const BandField& h) const {
        check(f);
        check(h);
        const Eigen::MatrixXd F = stack(f), Fx = stack(f.dx()), H = stack(h), Hx = stack(h.dx());
        Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(F.rows(), nx_);
        const int R = static_cast<int>(F.rows());
        parallel_for(R, [&](int r) {
            for (int k = 0; k < nx_; ++k) {
                double sum = 0.0;
                for (int s = 0; s < R; ++s) {
                    const double Y = Y_(r, s), shY = 2.0 * sq(std::sinh(0.5 * Y)), W = src_w_[s];
                    if (W == 0.0) continue;
                    for (int l = 0; l < nx_; ++l) {
                        const double sxx = sx2_[(k - l + nx_) % nx_];
                        const double den = shY + sxx;
                        if (den == 0.0) continue;
                        const double D = F(r, k) - F(s, l);
                        const double dfx = Fx(r, k) - Fx(s, l);
                        const double dh = H(r, k) - H(s, l), dhx = Hx(r, k) - Hx(s, l);
                        double term = 0.0;
                        if (D != 0.0 || dfx != 0.0) {
                            const double sarg = Y + D;
                            const double psi1 = std::sinh(sarg) / (2.0 * sq(std::sinh(0.5 * sarg)) + sxx);
                            const double logR = std::log1p(2.0 * std::sinh(Y + 0.5 * D) * std::sinh(0.5 * D) / den);
                            term = psi1 * dh * dfx + logR * dhx;
                        }
                        sum += W * term;
                    }
                }
                acc(r, k) = sum;
            }
        });
        Eigen::MatrixXd total = stack(lin_.apply(lambda, h)) + H.cwiseProduct(Fx) + F.cwiseProduct(Hx) -
                                acc / (4.0 * std::numbers::pi);
        return unstack(total, h);
    }

private:
    static double sq(double v) { return v * v; }
    void check(const BandField& f) const {
        if (f.nx != nx_ || f.rule != d_->rule()) throw std::invalid_argument("band field does not match the wave grid");
    }
    std::shared_ptr<const Discretization> d_;
    int nx_;
    double quad_rtol_;
    DirectLinear lin_;
    Eigen::VectorXd src_w_;
    Eigen::MatrixXd Y_;
    std::vector<double> sx2_;
};

// Kernels of the derivative of log(cosh s - cos X) in s:
//   Psi1 = sinh s / (cosh s - cos X),  Psi2 = cosh s / (cosh s - cos X).
struct PsiKernels {
    static double denominator(double s, double X) {
        const double a = std::sinh(0.5 * s), b = std::sin(0.5 * X);
        return 2.0 * (a * a + b * b);
    }
    static double psi1(double s, double X) { return std::sinh(s) / denominator(s, X); }
    static double psi2(double s, double X) { return std::cosh(s) / denominator(s, X); }

    // Offset form for a band function g: at target (x,y) and offset
    // (xb,yb), s = yb + g(x,y) - g(x-xb, y-yb) and X = xb.
    std::function<double(double, double)> g;
    double offset_s(double x, double y, double xb, double yb) const { return yb + g(x, y) - g(x - xb, y - yb); }
    double psi1_at(double x, double y, double xb, double yb) const { return psi1(offset_s(x, y, xb, yb), xb); }
    double psi2_at(double x, double y, double xb, double yb) const { return psi2(offset_s(x, y, xb, yb), xb); }
};

// Branch point sigma h with the kernel element h.
class WaveField {
public:
    WaveField(EigenSolution e, double sigma, int nx = 32) : eig_(std::move(e)), sigma_(sigma) {
        if (!(std::abs(sigma) < sigma_safety))
            throw NonMonotoneCurves("sigma * max|d_y h| >= " + std::to_string(sigma_safety) +
                                    ": level curves may fold");
        k_ = h_field(eig_, nx);
        f_ = sigma * k_.h;
    }

    const EigenSolution& eig() const { return eig_; }
    double sigma() const { return sigma_; }
    int m() const { return eig_.m; }
    int nx() const { return f_.nx; }
    double epsilon() const { return eig_.disc->epsilon(); }
    double lambda() const { return eig_.lambda(); }
    const BandField& h() const { return k_.h; }
    const BandField& f() const { return f_; }
    double h_scale() const { return k_.scale; }

    // Band membership: +1 upper, -1 lower, 0 outside; z is the band coordinate.
    int band_of(double y, double* z) const {
        const double eps = epsilon();
        if (std::abs(y - 1.0) <= eps) {
            *z = std::clamp((y - 1.0) / eps, -1.0, 1.0);
            return 1;
        }
        if (std::abs(y + 1.0) <= eps) {
            *z = std::clamp((-y - 1.0) / eps, -1.0, 1.0);
            return -1;
        }
        return 0;
    }
    // f^sigma at band coordinate z on the given band
    double f_band(int band, double z, double x) const {
        const GridFn& g = band > 0 ? eig_.a : eig_.b;
        return sigma_ / k_.scale * g(z) * std::cos(m() * x);
    }
    double f_at(double x, double y) const {
        double z;
        int b = band_of(y, &z);
        if (b == 0) throw std::domain_error("f_at: point outside the bands");
        return f_band(b, z, x);
    }

private:
    EigenSolution eig_;
    double sigma_;
    KernelElement k_;
    BandField f_;
};

// Vorticity of the wave at a physical point: eps between the deformed
// curves, 0 outside, varpi(y) inside a band where x2 = y + f(x1, y).
inline double omega_sampler(const WaveField& w, double x1, double x2) {
    const double eps = w.epsilon();
    const Profile& p = w.eig().disc->profile();
    // curve position in band coordinate z, relative to the band centre
    auto curve = [&](int band, double z) { return band * (1.0 + eps * z) + w.f_band(band, z, x1); };
    auto solve = [&](int band) {
        auto g = [&](double z) { return (band * eps * z + w.f_band(band, z, x1) - (x2 - band)) / eps; };
        auto tol = [](double a, double b) { return std::abs(a - b) < 1e-15; };
        auto r = boost::math::tools::bisect(g, -1.0, 1.0, tol);
        const double z = 0.5 * (r.first + r.second);
        return p.varpi(band * (1.0 + eps * z));
    };
    // monotonicity in z on the sampled column
    for (int band : {1, -1}) {
        double prev = curve(band, -1.0);
        for (int k = 1; k <= 64; ++k) {
            double c = curve(band, -1.0 + 2.0 * k / 64);
            if ((c - prev) * band <= 0.0) throw NonMonotoneCurves("omega_sampler: level curves not monotone");
            prev = c;
        }
    }
    if (x2 >= curve(1, 1.0)) return 0.0;
    if (x2 > curve(1, -1.0)) return solve(1);
    if (x2 >= curve(-1, -1.0)) return eps;
    if (x2 > curve(-1, 1.0)) return solve(-1);
    return 0.0;
}

struct Polyline {
    int band = 1;
    double level = 0.0;   // y of the undeformed curve
    std::vector<std::array<double, 2>> points;
};

// Deformed level curves (x, y + f(x, y)) at the given band coordinates.
inline std::vector<Polyline> level_curves(const WaveField& w, std::span<const double> z_levels, int points = 129) {
    std::vector<Polyline> out;
    const double eps = w.epsilon();
    for (int band : {1, -1})
        for (double z : z_levels) {
            Polyline pl;
            pl.band = band;
            pl.level = band * (1.0 + eps * z);
            for (int k = 0; k < points; ++k) {
                double x = 2.0 * std::numbers::pi * k / (points - 1);
                pl.points.push_back({x, pl.level + w.f_band(band, z, x)});
            }
            out.push_back(std::move(pl));
        }
    return out;
}

// u(x,y) = -(1/4pi) int varpi'(yt) log(cosh(y - Yt) - cos(x - xt)) (1, f_x(xt,yt)) dxt dyt,
// Yt = yt + f(xt, yt). For each source row the x-integral is split into
// the kernel at d0 = y - yt - f(x, yt), done in closed form by modes, and
// a bounded log1p remainder done by the trapezoid rule. The flat part
// (-Omega(y)) is taken from the profile; only the change from it is
// summed over the nodes, which keeps the |y - yt| kink out of the sum.
inline std::vector<std::array<double, 2>> velocity_field(const WaveField& w,
                                                          std::span<const std::array<double, 2>> pts,
                                                          int nx_quad = 128) {
    const Discretization& d = *w.eig().disc;
    const BandGeometry geo(d);
    const int N = d.size();
    const int m = w.m();
    const double pi = std::numbers::pi;
    const double amp = w.sigma() / w.h_scale();
    std::vector<std::array<double, 2>> out(pts.size());
    parallel_for(static_cast<int>(pts.size()), [&](int p) {
        const double x = pts[p][0], y = pts[p][1];
        double u1 = 0.0, u2 = 0.0;
        for (int s = 0; s < 2 * N; ++s) {
            const double A = amp * (s < N ? w.eig().a.values[s] : w.eig().b.values[s - N]);
            const double W = geo.weights()[s] * geo.dvarpi()[s];
            if (W == 0.0) continue;
            const double yt = geo.y()[s];
            const double d0 = y - yt - A * std::cos(m * x);
            // closed-form part: 4pi * (mean, mode-m sine coefficient)
            double i1 = 4.0 * pi * (mean_over_x(d0) - mean_over_x(y - yt));
            double i2 = -m * A * 4.0 * pi * fourier_coefficient(m, d0) * std::sin(m * x);
            if (A != 0.0) {
                const double sh0 = std::sinh(0.5 * d0);
                for (int l = 0; l < nx_quad; ++l) {
                    const double xt = 2.0 * pi * l / nx_quad;
                    const double dl = y - yt - A * std::cos(m * xt);
                    const double sx = std::sin(0.5 * (x - xt));
                    const double den = 2.0 * (sh0 * sh0 + sx * sx);
                    if (den == 0.0) continue;
                    const double r = std::log1p(2.0 * std::sinh(0.5 * (dl + d0)) * std::sinh(0.5 * (dl - d0)) / den);
                    const double q = 2.0 * pi / nx_quad;
                    i1 += q * r;
                    i2 += q * r * (-m * A * std::sin(m * xt));
                }
            }
            u1 += W * i1;
            u2 += W * i2;
        }
        out[p] = {-d.profile().omega_primitive(y) - u1 / (4.0 * pi), -u2 / (4.0 * pi)};
    });
    return out;
}

}  // namespace couette

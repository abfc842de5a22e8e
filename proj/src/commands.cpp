#include "couette/cli.hpp"

#include "couette/fit.hpp"
#include "couette/norms.hpp"
#include "couette/parallel.hpp"
#include "couette/range_solver.hpp"
#include "couette/strip_kernel.hpp"
#include "couette/wave.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>

namespace couette::cli {
namespace {

using json = nlohmann::ordered_json;

constexpr double wave_quad_rtol = 0.25;
constexpr double svd_threshold = 1e-6;

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) v = 0.0;   // no "-0"
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

// inf/nan are not JSON numbers: they become null
json jnum(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json jvec(const Eigen::VectorXd& v) {
    json a = json::array();
    for (double x : v) a.push_back(jnum(x));
    return a;
}

json jvec(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(jnum(x));
    return a;
}

std::string format_of(const RunConfig& c, const char* fallback) { return c.format.empty() ? fallback : c.format; }

int points_of(const RunConfig& c, int fallback) { return c.points > 0 ? c.points : fallback; }

json header(const RunConfig& c) {
    json j;
    j["schema"] = "1";
    j["command"] = c.command;
    return j;
}

json tolerances(const RunConfig& c, std::initializer_list<std::pair<const char*, double>> extra = {}) {
    json t;
    for (const auto& [k, v] : c.tolerances) t[k] = v;
    for (const auto& [k, v] : extra) t[k] = v;
    return t;
}

json params(const RunConfig& c) {
    json p;
    p["epsilon"] = c.epsilon;
    p["kappa"] = c.kappa;
    p["m"] = c.m;
    p["grid"] = c.grid;
    return p;
}

void emit(const RunConfig& c, std::ostream& out, const std::string& text, const std::string& path) {
    if (path.empty()) {
        out << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open output file: " + path);
    f << text;
    if (!f) throw std::runtime_error("write failed: " + path);
    (void)c;
}

void emit_json(const RunConfig& c, std::ostream& out, const json& j) { emit(c, out, j.dump(2) + "\n", c.out); }

class Csv {
public:
    explicit Csv(std::initializer_list<std::string> cols) {
        bool first = true;
        for (const auto& s : cols) {
            s_ << (first ? "" : ",") << s;
            first = false;
        }
        s_ << '\n';
    }
    Csv& row(std::initializer_list<double> vals) {
        bool first = true;
        for (double v : vals) {
            s_ << (first ? "" : ",") << num(v);
            first = false;
        }
        s_ << '\n';
        return *this;
    }
    Csv& raw(const std::string& line) {
        s_ << line << '\n';
        return *this;
    }
    std::string str() const { return s_.str(); }

private:
    std::ostringstream s_;
};

EigenSolution solve(const RunConfig& c) {
    SolveOptions o;
    o.order = c.grid;
    o.tol = c.tolerances.at("fixedpoint");
    return contraction_solve(c.m, {c.epsilon, c.kappa}, o);
}

json eigen_summary(const EigenSolution& e) {
    json j;
    j["lambda"] = e.lambda();
    j["lambda1"] = e.lambda1;
    j["lambda2_eps"] = e.lambda2_eps;
    j["a1"] = e.a1;
    j["iterations"] = e.iterations();
    j["nodes"] = e.disc->size();
    return j;
}

// ---------------------------------------------------------------- commands

int cmd_profile_table(const RunConfig& c, std::ostream& out) {
    const Profile p({c.epsilon, c.kappa});
    const int n = points_of(c, 401);
    if (n < 2) throw ConfigError("points must be >= 2");
    const double ymax = 1.0 + 2.0 * c.epsilon;
    std::vector<double> y(n), vp(n), vpp(n), om(n), z(n), ph(n), php(n), bph(n);
    for (int i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / (n - 1);
        y[i] = -ymax + 2.0 * ymax * t;
        vp[i] = p.varpi(y[i]);
        vpp[i] = p.varpi_prime(y[i]);
        om[i] = p.omega_primitive(y[i]);
        z[i] = -1.0 + 2.0 * t;
        ph[i] = p.phi(z[i]);
        php[i] = p.phi_prime(z[i]);
        bph[i] = p.big_phi(z[i]);
    }
    if (format_of(c, "csv") == "csv") {
        Csv csv{"y", "varpi", "varpi_prime", "omega", "z", "phi", "phi_prime", "big_phi"};
        for (int i = 0; i < n; ++i) csv.row({y[i], vp[i], vpp[i], om[i], z[i], ph[i], php[i], bph[i]});
        emit(c, out, csv.str(), c.out);
        return 0;
    }
    json j = header(c);
    j["epsilon"] = c.epsilon;
    j["kappa"] = c.kappa;
    j["points"] = n;
    j["tolerances"] = tolerances(c);
    j["y"] = jvec(y);
    j["varpi"] = jvec(vp);
    j["varpi_prime"] = jvec(vpp);
    j["omega"] = jvec(om);
    j["z"] = jvec(z);
    j["phi"] = jvec(ph);
    j["phi_prime"] = jvec(php);
    j["big_phi"] = jvec(bph);
    emit_json(c, out, j);
    return 0;
}

int cmd_lambda1(const RunConfig& c, std::ostream& out) {
    const double tol = c.tolerances.at("fixedpoint");
    json j = header(c);
    j["m"] = c.m;
    j["kappa"] = c.kappa;
    j["lambda1"] = solve_lambda1(c.m, c.kappa, tol, c.grid);
    if (c.kappa == 0.0) j["closed_form"] = lambda1_closed_form(c.m);
    j["tolerances"] = tolerances(c);
    emit_json(c, out, j);
    return 0;
}

int cmd_bifurcate(const RunConfig& c, std::ostream& out) {
    const EigenSolution e = solve(c);
    const CertificateReport cert = certify(e, c.modes, true, svd_threshold);
    json j = header(c);
    j["params"] = params(c);
    j.update(eigen_summary(e));
    j["residuals"] = {{"t_plus", e.residual.t_plus},
                      {"t_minus", e.residual.t_minus},
                      {"scale", e.residual.scale},
                      {"relative", e.residual.relative()}};
    j["contraction"] = {{"factor", e.contraction.factor},
                        {"c_a", e.contraction.c_a},
                        {"c_b", e.contraction.c_b},
                        {"c_lambda", e.contraction.c_lambda},
                        {"changes", jvec(e.contraction.changes)}};
    j["transversality"] = cert.transversality;
    j["a_norm_w"] = cert.a_norm_w;
    j["b_norm_w"] = cert.b_norm_w;
    j["kernel_svd_min"] = cert.kernel_svd_min;
    j["min_off_block"] = cert.min_off_block;
    j["near_zero_count"] = cert.near_zero_count;
    j["near_zero_block"] = cert.near_zero_block;
    j["tolerances"] = tolerances(c, {{"svd_threshold", svd_threshold}, {"residual", 1e-6}});
    const Discretization& d = *e.disc;
    j["nodes_table"] = {{"z", jvec(d.z())},      {"weight", jvec(d.w())},    {"a", jvec(e.a.values)},
                        {"b", jvec(e.b.values)}, {"b0", jvec(e.b0.values)}, {"a2_eps", jvec(e.a2_eps.values)},
                        {"b1_eps", jvec(e.b1_eps.values)}};
    emit_json(c, out, j);
    return 0;
}

int cmd_svd_spectrum(const RunConfig& c, std::ostream& out) {
    const EigenSolution e = solve(c);
    const CertificateReport cert = certify(e, c.modes, false, svd_threshold);
    if (format_of(c, "json") == "csv") {
        Csv csv{"n", "k", "singular_value", "relative"};
        for (const auto& s : cert.spectra)
            for (int k = 0; k < s.singular_values.size(); ++k)
                csv.row({double(s.n), double(k), s.singular_values[k], s.singular_values[k] / s.singular_values[0]});
        emit(c, out, csv.str(), c.out);
        return 0;
    }
    json j = header(c);
    j["params"] = params(c);
    j["lambda"] = e.lambda();
    j["threshold"] = svd_threshold;
    j["near_zero_count"] = cert.near_zero_count;
    j["near_zero_block"] = cert.near_zero_block;
    json blocks = json::array();
    for (const auto& s : cert.spectra)
        blocks.push_back({{"n", s.n}, {"relative_min", s.relative_min()}, {"singular_values", jvec(s.singular_values)}});
    j["blocks"] = blocks;
    j["tolerances"] = tolerances(c, {{"svd_threshold", svd_threshold}});
    emit_json(c, out, j);
    return 0;
}

int cmd_range_check(const RunConfig& c, std::ostream& out) {
    if (c.samples < 1) throw ConfigError("samples must be >= 1");
    const EigenSolution e = solve(c);
    const Discretization& d = *e.disc;
    const RulePtr R = d.rule();
    const int m = c.m;
    std::mt19937_64 rng(c.seed);
    auto rnd = [&] { return GridFn(R, random_smooth(*R, rng)); };

    double adj = 0.0;
    const int quads = 10 * c.samples;
    for (int k = 0; k < quads; ++k) {
        const int n = 1 + k % 8;
        const auto op = assemble_mode(n, e.lambda_offset, d);
        GridFn u = rnd(), v = rnd(), f = rnd(), g = rnd();
        adj = std::max(adj, adjointness_residual(u, v, f, g, op, d) / (u.l2() * f.l2() + v.l2() * g.l2()));
    }

    const auto opm = assemble_mode(m, e.lambda_offset, d);
    const WeightedInnerProduct ip(d);
    double solv = 0.0;
    for (int k = 0; k < c.samples; ++k) {
        auto [tp, tm] = opm.apply_T(rnd(), rnd());
        solv = std::max(solv, std::abs(solvability(tp, tm, e)) / (ip.norm(tp.values) * ip.norm(e.a.values) +
                                                                   ip.norm(tm.values) * ip.norm(e.b.values)));
    }

    double round_trip = 0.0;
    for (int k = 0; k < c.samples; ++k) {
        int n = 1 + k % 8;
        if (n == m) n = 9;
        GridFn F = rnd();
        auto f = invert_resolvent_1d(d, F, n, m, e.lambda1);
        round_trip = std::max(round_trip, (resolvent_forward(d, f.values, n, e.lambda1) - F.values).cwiseAbs().maxCoeff() /
                                              F.values.cwiseAbs().maxCoeff());
    }

    json off = json::array();
    for (int n = 1; n <= 4; ++n) {
        if (n == m) continue;
        GridFn u = rnd(), v = rnd();
        auto [wp, wm] = assemble_mode(n, e.lambda_offset, d).apply(u.values, v.values);
        auto s = solve_offmode(n, GridFn(R, (-n * wp).eval()), GridFn(R, (-n * wm).eval()), e,
                               c.tolerances.at("fixedpoint"));
        const double err = std::max((s.u.values - u.values).cwiseAbs().maxCoeff(),
                                    (s.v.values - v.values).cwiseAbs().maxCoeff()) /
                           std::max(u.values.cwiseAbs().maxCoeff(), v.values.cwiseAbs().maxCoeff());
        off.push_back({{"n", n},
                       {"iterations", s.iterations},
                       {"recovery_error", err},
                       {"residual", s.residual},
                       {"norm_ratio", s.norm_ratio}});
    }

    BilinearForms forms(e);
    auto [pu, pv] = forms.project_pair(random_smooth(*R, rng), random_smooth(*R, rng));
    auto [wp, wm] = opm.apply(pu, pv);
    auto sm = solve_mode_m(GridFn(R, (-m * wp).eval()), GridFn(R, (-m * wm).eval()), e);
    const double mode_err = std::max((sm.u.values - pu).cwiseAbs().maxCoeff(), (sm.v.values - pv).cwiseAbs().maxCoeff()) /
                            std::max(pu.cwiseAbs().maxCoeff(), pv.cwiseAbs().maxCoeff());
    bool obstruction = false;
    try {
        solve_mode_m(GridFn(R, (-m * wp + e.a.values).eval()), GridFn(R, (-m * wm).eval()), e);
    } catch (const Obstruction&) {
        obstruction = true;
    }

    const auto co = coercivity_probe(c.samples, e, c.seed);
    json j = header(c);
    j["params"] = params(c);
    j["lambda"] = e.lambda();
    j["samples"] = c.samples;
    j["seed"] = c.seed;
    j["adjointness"] = {{"quadruples", quads}, {"max_relative_residual", adj}};
    j["solvability_of_range"] = {{"samples", c.samples}, {"max_relative", solv}};
    j["inversion_round_trip"] = {{"samples", c.samples}, {"max_relative_error", round_trip}};
    j["off_mode"] = off;
    j["mode_m"] = {{"recovery_error", mode_err},
                   {"residual", sm.residual},
                   {"solvability", sm.solvability},
                   {"obstruction_detected", obstruction}};
    j["coercivity"] = {{"samples", co.samples},
                       {"min_b_ratio", co.min_B_ratio},
                       {"min_script_b_ratio", co.min_script_ratio},
                       {"script_b_b0", co.script_B_b0},
                       {"max_decomposition_residual", co.max_decomposition},
                       {"max_cross_effect", co.max_cross_effect}};
    j["tolerances"] = tolerances(c, {{"adjointness", 1e-9}, {"inversion", 1e-10}, {"mode_m_obstruction", 1e-8}});
    emit_json(c, out, j);
    return 0;
}

json curves_json(const std::vector<Polyline>& curves) {
    json a = json::array();
    for (const auto& pl : curves) {
        json x = json::array(), y = json::array();
        for (const auto& p : pl.points) {
            x.push_back(p[0]);
            y.push_back(p[1]);
        }
        a.push_back({{"band", pl.band}, {"level", pl.level}, {"x", x}, {"y", y}});
    }
    return a;
}

int cmd_wave_export(const RunConfig& c, std::ostream& out) {
    const WaveField w(solve(c), c.sigma, c.nx);
    const double eps = c.epsilon, pi = std::numbers::pi;
    const int nxl = 65, nyl = 41;
    Csv csv{"x", "y", "f_sigma", "omega"};
    json lattice = json::array();
    for (int band : {-1, 1}) {
        for (int r = 0; r < nyl; ++r) {
            const double y = band + eps * (-2.0 + 4.0 * r / (nyl - 1));
            for (int k = 0; k < nxl; ++k) {
                const double x = 2.0 * pi * k / (nxl - 1);
                double z;
                const double f = w.band_of(y, &z) != 0 ? w.f_at(x, y) : 0.0;
                const double om = omega_sampler(w, x, y);
                csv.row({x, y, f, om});
                lattice.push_back({x, y, f, om});
            }
        }
    }
    const std::vector<double> levels{-1.0, -0.5, 0.0, 0.5, 1.0};
    const auto curves = level_curves(w, levels, points_of(c, 129));
    json cj = header(c);
    cj["params"] = params(c);
    cj["sigma"] = c.sigma;
    cj["lambda"] = w.lambda();
    cj["h_scale"] = w.h_scale();
    cj["tolerances"] = tolerances(c);
    if (format_of(c, "csv") == "csv") {
        emit(c, out, csv.str(), c.out);
        if (!c.out.empty()) {
            cj["curves"] = curves_json(curves);
            emit(c, out, cj.dump(2) + "\n", c.out + ".curves.json");
        }
        return 0;
    }
    cj["lattice_columns"] = {"x", "y", "f_sigma", "omega"};
    cj["lattice"] = lattice;
    cj["curves"] = curves_json(curves);
    emit_json(c, out, cj);
    return 0;
}

int cmd_residual(const RunConfig& c, std::ostream& out) {
    if (c.sigmas.size() < 2) throw ConfigError("residual needs at least two sigmas");
    const EigenSolution e = solve(c);
    const WaveOperator op(e.disc, c.nx, wave_quad_rtol);
    const auto F0 = op.evaluate_F(e.lambda(), op.zero());
    std::vector<double> l2, sup, qerr;
    for (double s : c.sigmas) {
        const WaveField w(e, s, c.nx);
        const auto r = op.evaluate_F(e.lambda(), w.f());
        l2.push_back(r.value.l2());
        sup.push_back(r.value.sup());
        qerr.push_back(r.quadrature_error);
    }
    json j = header(c);
    j["params"] = params(c);
    j["nx"] = c.nx;
    j["lambda"] = e.lambda();
    j["f_zero_sup"] = F0.value.sup();
    j["sigmas"] = jvec(c.sigmas);
    j["residual_l2"] = jvec(l2);
    j["residual_sup"] = jvec(sup);
    j["quadrature_error"] = jvec(qerr);
    j["slope_l2"] = loglog_slope(c.sigmas, l2);
    j["tolerances"] = tolerances(c, {{"wave_quadrature_relative", wave_quad_rtol}});
    emit_json(c, out, j);
    return 0;
}

json report_json(const NormReport& r) {
    json j;
    j["epsilon"] = r.params.epsilon;
    j["kappa"] = r.params.kappa;
    j["m"] = r.m;
    j["sigma"] = r.sigma;
    j["gamma"] = r.gamma;
    j["lambda"] = r.lambda;
    j["l2"] = r.l2;
    j["h1dot"] = r.h1dot;
    j["h2dot"] = jnum(r.h2dot);
    j["interpolated_bound"] = jnum(r.interpolated_bound);
    j["profile_prime_sq"] = r.profile_prime_sq;
    j["profile_second_sq"] = jnum(r.profile_second_sq);
    j["second_distributional"] = r.second_distributional;
    j["h2_profile_ratio"] = r.h2_profile_ratio;
    j["predicted_scale"] = r.predicted_scale;
    return j;
}

int cmd_norms(const RunConfig& c, std::ostream& out) {
    const WaveField w(solve(c), c.sigma, c.nx);
    json j = header(c);
    j["params"] = params(c);
    j["nx"] = c.nx;
    j["report"] = report_json(norm_report(w, c.gamma));
    j["tolerances"] = tolerances(c);
    emit_json(c, out, j);
    return 0;
}

int cmd_sweep(const RunConfig& c, std::ostream& out) {
    std::vector<double> eps = c.epsilons, kap = c.kappas;
    if (eps.empty())
        for (int k = 1; k <= 10; ++k) eps.push_back(std::pow(10.0, -k));
    if (kap.empty()) kap.push_back(0.01);
    struct Task {
        double epsilon, kappa;
        std::vector<NormReport> reports;
        std::string status = "ok";
    };
    std::vector<Task> tasks;
    for (double k : kap)
        for (double e : eps) tasks.push_back({e, k, {}, "ok"});
    for (const auto& t : tasks) ProfileParams{t.epsilon, t.kappa}.validate();
    parallel_for(static_cast<int>(tasks.size()), [&](int i) {
        Task& t = tasks[i];
        try {
            RunConfig ci = c;
            ci.epsilon = t.epsilon;
            ci.kappa = t.kappa;
            const EigenSolution e = solve(ci);
            for (double s : c.sigmas) t.reports.push_back(norm_report(WaveField(e, s, c.nx), c.gamma));
        } catch (const BracketFailure&) {
            t.status = "bracket_failure";
        } catch (const NonContraction&) {
            t.status = "non_contraction";
        } catch (const NonMonotoneCurves&) {
            t.status = "non_monotone";
        }
    });
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (format_of(c, "csv") == "csv") {
        Csv csv{"epsilon", "kappa",   "m",     "sigma",            "gamma",
                "lambda",  "l2",      "h1dot", "h2dot",            "interpolated_bound",
                "profile_prime_sq",   "profile_second_sq",         "h2_profile_ratio", "status"};
        for (const auto& t : tasks) {
            if (t.reports.empty()) {
                for (double s : c.sigmas) {
                    std::string line;
                    for (double v : {t.epsilon, t.kappa, double(c.m), s, c.gamma}) line += num(v) + ",";
                    for (int k = 0; k < 8; ++k) line += num(nan) + ",";
                    csv.raw(line + t.status);
                }
                continue;
            }
            for (const auto& r : t.reports) {
                std::string line;
                for (double v : {t.epsilon, t.kappa, double(c.m), r.sigma, r.gamma, r.lambda, r.l2, r.h1dot, r.h2dot,
                                 r.interpolated_bound, r.profile_prime_sq, r.profile_second_sq, r.h2_profile_ratio})
                    line += num(v) + ",";
                csv.raw(line + t.status);
            }
        }
        emit(c, out, csv.str(), c.out);
        return 0;
    }
    json j = header(c);
    j["m"] = c.m;
    j["nx"] = c.nx;
    json rows = json::array();
    for (const auto& t : tasks) {
        json r = {{"epsilon", t.epsilon}, {"kappa", t.kappa}, {"status", t.status}};
        json reps = json::array();
        for (const auto& rep : t.reports) reps.push_back(report_json(rep));
        r["reports"] = reps;
        rows.push_back(r);
    }
    j["rows"] = rows;
    j["tolerances"] = tolerances(c);
    emit_json(c, out, j);
    return 0;
}

int cmd_validate_identities(const RunConfig& c, std::ostream& out) {
    const double qtol = c.tolerances.at("quad");
    json list = json::array();
    bool all = true;
    auto add = [&](const char* name, double residual, double tol) {
        const bool pass = residual <= tol;
        all = all && pass;
        list.push_back({{"identity", name}, {"max_residual", residual}, {"tolerance", tol}, {"pass", pass}});
    };
    const std::vector<double> ds{0.25, 0.5, 1.0, 2.0};
    double four = 0.0, mean = 0.0;
    for (double d : ds) {
        for (int n = 1; n <= 8; ++n)
            four = std::max(four, std::abs(kernel_mode_quadrature(n, d, qtol) - fourier_coefficient(n, d)));
        mean = std::max(mean, std::abs(kernel_mode_quadrature(0, d, qtol) - mean_over_x(d)));
    }
    add("kernel_fourier_coefficient", four, 1e-8);
    add("kernel_mean_over_x", mean, 1e-10);

    const Profile prof({c.epsilon, c.kappa});
    double prim = 0.0;
    for (int k = 0; k <= 40; ++k) {
        const double y = -1.0 - 2.0 * c.epsilon + (2.0 + 4.0 * c.epsilon) * k / 40.0;
        prim = std::max(prim, primitive_identity_check(prof, y, qtol));
    }
    add("velocity_primitive", prim, 1e-9);

    double l1 = 0.0;
    for (int m = 1; m <= 5; ++m) l1 = std::max(l1, std::abs(solve_lambda1(m, 0.0) - lambda1_closed_form(m)));
    add("lambda1_closed_form", l1, 1e-10);

    const EigenSolution e = solve(c);
    const Discretization& d = *e.disc;
    const double moment = d.phi_moment(e.b0.values) / (2.0 * c.m);
    double b0_eq = 0.0;
    for (int i = 0; i < d.size(); ++i)
        b0_eq = std::max(b0_eq, std::abs((e.lambda1 + (1.0 - d.z()[i])) * e.b0.values[i] + moment));
    add("b0_equation", b0_eq, 1e-9);
    add("a1_closed_form", std::abs(e.a1 - 0.5 * std::exp(-2.0 * c.m)), 1e-15);
    const double b0_norm = std::sqrt(2.0 / ((2.0 + e.lambda1) * e.lambda1));
    add("b0_l2_norm", std::abs(e.b0.l2() - b0_norm) / b0_norm, 1e-10);
    add("eigen_residual", e.residual.relative(), 1e-6);

    const GridFn& b0 = e.b0;
    add("adjointness_b0", adjointness_residual(b0, b0, b0, b0, assemble_mode(c.m, e.lambda_offset, d), d) /
                              (2.0 * b0.l2() * b0.l2()), 1e-10);
    const BilinearForms forms(e);
    add("script_b_b0", std::abs(forms.script_B(b0.values, b0.values)) / forms.inner()(b0.values, b0.values), 1e-9);

    json j = header(c);
    j["params"] = params(c);
    j["identities"] = list;
    j["all_pass"] = all;
    j["tolerances"] = tolerances(c);
    emit_json(c, out, j);
    return all ? 0 : 3;
}

const std::map<std::string, std::function<int(const RunConfig&, std::ostream&)>>& table() {
    static const std::map<std::string, std::function<int(const RunConfig&, std::ostream&)>> t{
        {"profile-table", cmd_profile_table}, {"lambda1", cmd_lambda1},
        {"bifurcate", cmd_bifurcate},         {"range-check", cmd_range_check},
        {"svd-spectrum", cmd_svd_spectrum},   {"wave-export", cmd_wave_export},
        {"residual", cmd_residual},           {"norms", cmd_norms},
        {"sweep", cmd_sweep},                 {"validate-identities", cmd_validate_identities}};
    return t;
}

const char* error_kind(const std::exception& ex) {
    if (dynamic_cast<const ConfigError*>(&ex)) return "config";
    if (dynamic_cast<const BracketFailure*>(&ex)) return "bracket_failure";
    if (dynamic_cast<const NonContraction*>(&ex)) return "non_contraction";
    if (dynamic_cast<const CertificationFailure*>(&ex)) return "certification_failure";
    if (dynamic_cast<const Obstruction*>(&ex)) return "obstruction";
    if (dynamic_cast<const QuadratureFailure*>(&ex)) return "quadrature_failure";
    if (dynamic_cast<const NonMonotoneCurves*>(&ex)) return "non_monotone_curves";
    if (dynamic_cast<const std::invalid_argument*>(&ex)) return "invalid_argument";
    return "runtime";
}

}  // namespace

void RunConfig::validate() const {
    ProfileParams{epsilon, kappa}.validate();
    for (const auto& [k, v] : tolerances)
        if (!(v > 0.0)) throw ConfigError("tolerance " + k + " must be > 0");
    if (grid < 16) throw ConfigError("grid must be >= 16");
    if (m < 1 || m > modes) throw ConfigError("m out of [1, modes]");
    if (nx < 4 || nx % 2 != 0) throw ConfigError("nx must be even and >= 4");
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma out of (0,1)");
    if (!format.empty() && format != "json" && format != "csv") throw ConfigError("format must be json or csv");
    for (double s : sigmas)
        if (!(s > 0.0)) throw ConfigError("sigmas must be > 0");
}

int run(const RunConfig& cfg, std::ostream& out) {
    try {
        auto it = table().find(cfg.command);
        if (it == table().end()) throw ConfigError("unknown command: " + cfg.command);
        cfg.validate();
        return it->second(cfg, out);
    } catch (const std::exception& ex) {
        json j;
        j["schema"] = "1";
        j["command"] = cfg.command;
        j["error"] = ex.what();
        j["kind"] = error_kind(ex);
        out << j.dump() << "\n";
        return dynamic_cast<const ConfigError*>(&ex) || dynamic_cast<const std::invalid_argument*>(&ex) ? 2 : 1;
    }
}

int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Traveling waves near a vortex-strip shear profile: numerical checks and exports"};
    app.set_config("--config", "", "TOML-style key = value file; command-line flags override it");
    app.require_subcommand(1);
    app.fallthrough();

    RunConfig cfg;
    double tol_fp = cfg.tolerances.at("fixedpoint"), tol_q = cfg.tolerances.at("quad");
    app.add_option("--epsilon", cfg.epsilon, "band half-width, in (0,1)");
    app.add_option("--kappa", cfg.kappa, "ramp mollification width, in [0,1)");
    app.add_option("--m", cfg.m, "bifurcating Fourier mode");
    app.add_option("--sigma", cfg.sigma, "branch amplitude");
    app.add_option("--gamma", cfg.gamma, "interpolation exponent, in (0,1)");
    app.add_option("--grid", cfg.grid, "Gauss-Legendre order per panel (>= 16)");
    app.add_option("--modes", cfg.modes, "Fourier blocks checked");
    app.add_option("--nx", cfg.nx, "x points of band fields");
    app.add_option("--tol-fixedpoint", tol_fp, "fixed-point / root stopping tolerance");
    app.add_option("--tol-quad", tol_q, "adaptive quadrature tolerance");
    app.add_option("--seed", cfg.seed, "random seed for probes");
    app.add_option("--out", cfg.out, "output path (default stdout)");
    app.add_option("--format", cfg.format, "json or csv");
    app.add_option("--points", cfg.points, "samples per table / polyline");
    app.add_option("--samples", cfg.samples, "random probes");
    app.add_option("--sigmas", cfg.sigmas, "comma-separated amplitudes")->delimiter(',');
    app.add_option("--epsilons", cfg.epsilons, "sweep: comma-separated epsilons")->delimiter(',');
    app.add_option("--kappas", cfg.kappas, "sweep: comma-separated kappas")->delimiter(',');
    for (const auto& name : commands()) app.add_subcommand(name);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        json j;
        j["schema"] = "1";
        j["error"] = e.what();
        j["kind"] = "config";
        out << j.dump() << "\n";
        return 2;
    }
    cfg.command = app.get_subcommands().front()->get_name();
    cfg.tolerances["fixedpoint"] = tol_fp;
    cfg.tolerances["quad"] = tol_q;
    return run(cfg, out);
}

}  // namespace couette::cli

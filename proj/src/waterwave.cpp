#include "microloc/waterwave.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>

#include "microloc/errors.hpp"

namespace microloc {

namespace {

Field real_of(Field f) {
    for (auto& z : f.v) z = cplx(z.real(), 0.0);
    return f;
}

Field dx_real(const Field& f) { return real_of(derivative(f)); }

template <class F>
Field map_field(const Field& a, F f) {
    Field r(a.grid);
    for (std::size_t i = 0; i < r.v.size(); ++i) r.v[i] = f(a.v[i].real());
    return r;
}

Field axpy(const Field& y, double a, const Field& x) {
    Field r = y;
    for (std::size_t i = 0; i < r.v.size(); ++i) r.v[i] += a * x.v[i];
    return r;
}

std::function<cplx(double)> sampler(const Field& f) {
    const Grid g = f.grid;
    auto vals = std::make_shared<cvec>(f.v);
    return [g, vals](double x) {
        long i = std::lround((x + 0.5 * g.L) / g.dx());
        i = ((i % g.n) + g.n) % g.n;
        return (*vals)[i];
    };
}

std::function<cplx(double)> side_power(double order, int sgn) {
    return [order, sgn](double xi) {
        if (xi == 0.0) return order < 0 ? cplx(INFINITY) : cplx(order == 0 ? 0.5 : 0.0);
        return sgn * xi > 0 ? cplx(std::pow(std::abs(xi), order)) : cplx(0.0);
    };
}

// c_+(x)|xi|^order on xi > 0, c_-(x)|xi|^order on xi < 0
Symbol two_sided(const Field& cp, const Field& cm, double order) {
    return Symbol::from_terms({{sampler(cp), side_power(order, +1)}, {sampler(cm), side_power(order, -1)}}, order);
}

double max_xi_power(const Grid& g) { return std::pow(g.nyquist(), 1.5); }

bool finite_field(const Field& f) {
    for (const auto& z : f.v)
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    return true;
}

Field apply_op(const Symbol& a, const Field& u, const WWOperators& ops, const DyadicPartition* part) {
    if (ops.dyadic && part) return dyadic_paradiff_apply(a, u, *part, ops.adm);
    return paradiff_apply(a, u, ops.adm);
}

}  // namespace

void SurfaceState::validate() const {
    if (eta.grid != psi.grid) throw std::invalid_argument("eta and psi live on different grids");
    if (eta.grid.dim != 1) throw std::invalid_argument("water waves are one-dimensional");
    for (const Field* f : {&eta, &psi})
        for (const auto& z : f->v)
            if (std::abs(z.imag()) > 1e-12 * std::max(1.0, std::abs(z.real())))
                throw std::invalid_argument("surface fields must be real");
    FluidDomain(eta, params.b, params.nz);
}

Field mean_curvature(const Field& eta) {
    Field e = dx_real(eta);
    return dx_real(map_field(e, [](double s) { return s / std::sqrt(1 + s * s); }));
}

WWRhs zcs_rhs(const SurfaceState& s) {
    const WWParams& p = s.params;
    Field G = real_of(p.dn(s.domain(), s.psi));
    Field ex = dx_real(s.eta), px = dx_real(s.psi), H = mean_curvature(s.eta);
    WWRhs r{G, Field(s.grid())};
    for (std::size_t i = 0; i < G.v.size(); ++i) {
        double e = ex.v[i].real(), q = px.v[i].real(), w = e * q + G.v[i].real();
        r.dpsi.v[i] = -p.g * s.eta.v[i].real() + p.kappa * H.v[i].real() - 0.5 * q * q + 0.5 * w * w / (1 + e * e);
    }
    return r;
}

std::vector<SurfaceState> integrate(const SurfaceState& s0, double T, double dt, const IntegrateOptions& opt) {
    s0.validate();
    if (!(dt > 0)) throw std::invalid_argument("time step must be positive");
    if (opt.samples < 1) throw std::invalid_argument("need at least one sample");
    const Grid& g = s0.grid();
    if (dt > opt.cfl / max_xi_power(g)) throw std::invalid_argument("time step violates the |xi|^{3/2} CFL bound");
    long per = std::max(1L, long(std::ceil(std::abs(T) / dt / opt.samples)));
    long steps = per * opt.samples;
    double h = T / double(steps);
    const double c = opt.eps_mollify * std::abs(h);
    const double nyq = M_PI / g.dx() * (1.0 - 1e-12);
    Multiplier moll = [c, nyq](double xi) {
        if (std::abs(xi) >= nyq) return cplx(0.0);
        return cplx(std::exp(-c * std::pow(std::abs(xi), 1.5)));
    };

    std::vector<SurfaceState> out{s0};
    SurfaceState s = s0;
    auto stage = [&](const SurfaceState& base, const WWRhs& k, double a) {
        SurfaceState r = base;
        r.eta = axpy(base.eta, a, k.deta);
        r.psi = axpy(base.psi, a, k.dpsi);
        return r;
    };
    for (long n = 1; n <= steps; ++n) {
        WWRhs k1, k2, k3, k4;
        try {
            k1 = zcs_rhs(s);
            k2 = zcs_rhs(stage(s, k1, 0.5 * h));
            k3 = zcs_rhs(stage(s, k2, 0.5 * h));
            k4 = zcs_rhs(stage(s, k3, h));
        } catch (const std::invalid_argument& e) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "surface left the admissible set near t = %.6g: ", s.t);
            throw BlowUp(buf + std::string(e.what()));
        }
        for (std::size_t i = 0; i < s.eta.v.size(); ++i) {
            s.eta.v[i] += h / 6 * (k1.deta.v[i] + 2.0 * k2.deta.v[i] + 2.0 * k3.deta.v[i] + k4.deta.v[i]);
            s.psi.v[i] += h / 6 * (k1.dpsi.v[i] + 2.0 * k2.dpsi.v[i] + 2.0 * k3.dpsi.v[i] + k4.dpsi.v[i]);
        }
        s.eta = multiplier_apply(s.eta, moll);
        s.psi = multiplier_apply(s.psi, moll);
        s.eta = real_of(s.eta);
        s.psi = real_of(s.psi);
        s.t = s0.t + h * double(n);
        if (!finite_field(s.eta) || !finite_field(s.psi)) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "non-finite surface state at t = %.6g", s.t);
            throw BlowUp(buf);
        }
        double lo = INFINITY;
        for (const auto& z : s.eta.v) lo = std::min(lo, z.real());
        if (!(s.params.b + lo > 0)) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "surface touches the bottom at t = %.6g", s.t);
            throw BlowUp(buf);
        }
        if (n % per == 0) out.push_back(s);
    }
    return out;
}

SurfaceState linear_evolution(const SurfaceState& s0, double t) {
    const WWParams& p = s0.params;
    const Grid& g = s0.grid();
    Field eh = forward(s0.eta), ph = forward(s0.psi);
    SurfaceState r = s0;
    Field re(g), rp(g);
    for (std::size_t k = 0; k < eh.v.size(); ++k) {
        double xi = std::abs(g.xi(int(k)));
        if (xi == 0.0) {
            re.v[k] = eh.v[k];
            rp.v[k] = ph.v[k] - p.g * t * eh.v[k];
            continue;
        }
        double T = xi * std::tanh(p.b * xi), S = p.g + p.kappa * xi * xi, w = std::sqrt(S * T);
        double c = std::cos(w * t), sn = std::sin(w * t);
        re.v[k] = c * eh.v[k] + T / w * sn * ph.v[k];
        rp.v[k] = c * ph.v[k] - S / w * sn * eh.v[k];
    }
    r.eta = real_of(inverse(re));
    r.psi = real_of(inverse(rp));
    r.t = s0.t + t;
    return r;
}

double ww_mass(const SurfaceState& s) {
    double m = 0;
    for (const auto& z : s.eta.v) m += z.real();
    return m * s.grid().dx();
}

double ww_energy(const SurfaceState& s) {
    const WWParams& p = s.params;
    Field G = real_of(p.dn(s.domain(), s.psi));
    Field ex = dx_real(s.eta);
    double e = 0;
    for (std::size_t i = 0; i < G.v.size(); ++i) {
        double et = s.eta.v[i].real(), sl = ex.v[i].real();
        e += 0.5 * s.psi.v[i].real() * G.v[i].real() + 0.5 * p.g * et * et + p.kappa * (std::sqrt(1 + sl * sl) - 1);
    }
    return e * s.grid().dx();
}

WWSymbols symmetrizer_symbols(const SurfaceState& s) {
    const Grid& g = s.grid();
    WWSymbols sy;
    sy.slope = dx_real(s.eta);
    DNSymbols dn = dn_symbols(s.eta, 1);
    Field cl = map_field(sy.slope, [](double e) { return std::pow(1 + e * e, -1.5); });
    Field dcl = dx_real(cl);
    cvec lp = dn.lambda1.plus, lm = dn.lambda1.minus;
    Field gp(g), gm(g), pp(g), pm(g), zp(g), zm(g), q(g);
    for (int i = 0; i < g.n; ++i) {
        double e2 = std::pow(sy.slope.v[i].real(), 2);
        double a = lp[i].real(), b = lm[i].real();
        gp.v[i] = std::sqrt(cl.v[i].real() * a);
        gm.v[i] = std::sqrt(cl.v[i].real() * b);
        pp.v[i] = std::sqrt(a) / std::sqrt(1 + e2);
        pm.v[i] = std::sqrt(b) / std::sqrt(1 + e2);
        q.v[i] = std::pow(1 + e2, 0.25);
        zp.v[i] = q.v[i] / pp.v[i];
        zm.v[i] = q.v[i] / pm.v[i];
    }
    sy.l2 = Symbol::from_terms({{sampler(cl), [](double xi) { return cplx(xi * xi); }}}, 2.0);
    sy.l1 = Symbol::from_terms({{sampler(dcl), [](double xi) { return cplx(0, -xi); }}}, 1.0);
    sy.gamma = two_sided(gp, gm, 1.5);
    sy.p = two_sided(pp, pm, 0.5);
    sy.q = Symbol::in_x(sampler(q));
    sy.zeta = two_sided(zp, zm, -0.5);
    return sy;
}

Symbol lambda_mu_symbol(const WWSymbols& sy, double mu) {
    if (mu == 0.0) return Symbol::in_xi([](double) { return cplx(1.0); });
    auto gam = sy.gamma.eval;
    double e = 2 * mu / 3;
    return Symbol::generic(
        [gam, e](double x, double xi) {
            double gv = gam(x, xi).real();
            double w = smoothstep(std::abs(xi) - 1.0);
            double reg = w * gv + (1 - w) * std::max(gv, 1.0);
            return cplx(std::pow(reg, e));
        },
        mu);
}

Field good_unknown(const SurfaceState& s, const WWOperators& ops) {
    BVFields bv = b_v_fields(s.domain(), s.psi, s.params.dn);
    Symbol B = Symbol::in_x(sampler(real_of(bv.B)));
    std::unique_ptr<DyadicPartition> part;
    if (ops.dyadic) part = std::make_unique<DyadicPartition>(make_dyadic_partition(s.grid()));
    return real_of(s.psi - apply_op(B, s.eta, ops, part.get()));
}

SymmetrizedPair symmetrized_pair(const SurfaceState& s, double mu, const WWOperators& ops) {
    WWSymbols sy = symmetrizer_symbols(s);
    std::unique_ptr<DyadicPartition> part;
    if (ops.dyadic) part = std::make_unique<DyadicPartition>(make_dyadic_partition(s.grid()));
    Field w = good_unknown(s, ops);
    Field a = real_of(apply_op(sy.p, s.eta, ops, part.get()));
    Field b = real_of(apply_op(sy.q, w, ops, part.get()));
    Symbol lam = lambda_mu_symbol(sy, mu);
    Field la = real_of(apply_op(lam, a, ops, part.get()));
    Field lb = real_of(apply_op(lam, b, ops, part.get()));
    SymmetrizedPair r{Field(s.grid()), Field(s.grid())};
    for (std::size_t i = 0; i < r.u.v.size(); ++i) {
        r.u.v[i] = cplx(lb.v[i].real(), -la.v[i].real());
        r.ubar.v[i] = cplx(lb.v[i].real(), la.v[i].real());
    }
    return r;
}

Field symmetrized_u(const SurfaceState& s, double mu, const WWOperators& ops) {
    return symmetrized_pair(s, mu, ops).u;
}

WWParams ww_params(const WWRunConfig& c) {
    WWParams p;
    p.g = c.g;
    p.b = c.b;
    p.nz = c.nz;
    p.dn.method = c.dn;
    p.dn.taylor_order = c.taylor_order;
    return p;
}

double ww_time_step(const Grid& g, const WWRunConfig& c) {
    return c.dt > 0 ? c.dt : c.cfl / max_xi_power(g);
}

Field band_limited_delta(const Grid& g, double x_s, double mass, double flat, double cut) {
    if (!(0 < flat && flat < cut && cut <= 1)) throw std::invalid_argument("need 0 < flat < cut <= 1");
    Field h(g);
    double a = flat * g.nyquist(), c = cut * g.nyquist();
    for (int k = 0; k < g.n; ++k) {
        if (k == g.nyquist_slot()) continue;
        double xi = g.xi(k);
        double taper = 1 - smoothstep((std::abs(xi) - a) / (c - a));
        h.v[k] = mass * taper * std::polar(1.0, -x_s * xi);
    }
    return real_of(inverse(h));
}

double packet_centre(const Field& u, double xc, double r, double xi_sign) {
    const Grid& g = u.grid;
    Field uh = forward(u);
    for (int k = 0; k < g.n; ++k)
        if (!(g.xi(k) * xi_sign > 0)) uh.v[k] = 0.0;
    Field up = inverse(uh);
    double m = 0, mx = 0;
    for (int i = 0; i < g.n; ++i) {
        double x = g.x(i);
        if (std::abs(x - xc) > r) continue;
        double w = std::norm(up.v[i]);
        m += w;
        mx += w * x;
    }
    return m > 0 ? mx / m : NAN;
}

namespace {

void check_run(const WWRunConfig& c) {
    if (c.n < 16 || c.n % 2) throw std::invalid_argument("grid size must be even and >= 16");
    if (!(c.L > 0)) throw std::invalid_argument("box length must be positive");
    if (!(c.b > 0)) throw std::invalid_argument("depth must be positive");
    if (c.h_grid.size() < 6) throw std::invalid_argument("h grid needs at least 6 points");
    if (c.eps_mollify < 0) throw std::invalid_argument("mollifier strength must be >= 0");
    if (c.dt > 0 && c.dt > c.cfl / max_xi_power(Grid(c.n, c.L)))
        throw std::invalid_argument("time step violates the |xi|^{3/2} CFL bound");
}

SurfaceState evolve(const SurfaceState& s0, double t0, const WWRunConfig& c) {
    if (t0 == 0.0) return s0;
    IntegrateOptions o;
    o.eps_mollify = c.eps_mollify;
    o.cfl = c.cfl;
    return integrate(s0, t0, ww_time_step(s0.grid(), c), o).back();
}

void require_admissible(const ProbeResult& p, std::size_t want) {
    if (p.h.size() < want)
        throw BoxViolation("probe '" + p.label + "' leaves the box or passes Nyquist on the configured h grid");
}

double min_mu(const WavefrontReport& r, const std::string& prefix) {
    double m = kInf;
    for (const auto& p : r.probes)
        if (p.label.rfind(prefix, 0) == 0) m = std::min(m, p.mu_hat);
    return m;
}

double max_mu(const WavefrontReport& r, const std::string& prefix) {
    double m = -kInf;
    for (const auto& p : r.probes)
        if (p.label.rfind(prefix, 0) == 0) m = std::max(m, p.mu_hat);
    return m;
}

// f minus its average over the outermost `width` cells on each side
Field edge_offset_removed(Field f, int width = 8) {
    const int n = f.grid.n;
    cplx m = 0.0;
    for (int i = 0; i < width; ++i) m += f.v[i] + f.v[n - 1 - i];
    m /= double(2 * width);
    for (auto& z : f.v) z -= m;
    return f;
}

double state_boundary_mass(const SurfaceState& s) {
    return std::max(boundary_mass(edge_offset_removed(s.eta)), boundary_mass(edge_offset_removed(s.psi)));
}

double state_nyquist_mass(const SurfaceState& s) { return std::max(nyquist_mass(s.eta), nyquist_mass(s.psi)); }

double relative_drift(double a, double b) { return std::abs(b - a) / std::max(std::abs(a), 1e-300); }

}  // namespace

ExperimentResult ww_infinite_experiment(const WWInfiniteConfig& cfg) {
    check_run(cfg.run);
    if (cfg.xi0 == 0.0) throw std::invalid_argument("experiment requires xi0 != 0");
    if (!(cfg.amplitude > 0)) throw std::invalid_argument("amplitude must be positive");
    Grid g(cfg.run.n, cfg.run.L);
    SurfaceState s0{Field(g), Field(g), 0.0, ww_params(cfg.run)};
    s0.psi = cfg.amplitude * real_of(packet_train(g, cfg.x0, cfg.xi0, 0.5, 1.0, cfg.run.h_grid, cfg.packet_c));
    SurfaceState s1 = evolve(s0, cfg.t0, cfg.run);
    Field u0 = symmetrized_u(s0, cfg.run.mu), u1 = symmetrized_u(s1, cfg.run.mu);

    ExperimentResult res;
    res.boundary_mass = state_boundary_mass(s1);
    res.nyquist_mass = state_nyquist_mass(s1);
    if (res.boundary_mass > cfg.run.boundary_tol) throw BoxViolation("evolved surface reaches the box boundary");
    if (res.nyquist_mass > cfg.run.boundary_tol) throw BoxViolation("evolved surface reaches the Nyquist band");

    double xt = cfg.x0 + 1.5 * cfg.t0 * std::pow(std::abs(cfg.xi0), -0.5) * cfg.xi0;
    std::vector<ControlPoint> pts = {{"predicted", xt, cfg.xi0}};
    auto factors = cfg.control_factors.empty() ? default_control_factors(0.5, 1.0) : cfg.control_factors;
    int idx = 0;
    for (auto [sx, sxi] : factors) pts.push_back({"control_" + std::to_string(idx++), sx * xt, sxi * cfg.xi0});
    if (cfg.t0 != 0.0) pts.push_back({"control_initial", cfg.x0, cfg.xi0});
    const rvec& hg = cfg.run.h_grid;
    res.report.h_grid = hg;
    res.report.tolerances = {{"tol_order", kTolOrder}, {"norm_floor", kNormFloor}, {"boundary", cfg.run.boundary_tol}};
    for (const auto& p : pts) {
        ProbeResult pr = make_probe(p.label, u1, p.x, p.xi, 0.5, 1.0, hg);
        require_admissible(pr, hg.size());
        res.report.probes.push_back(pr);
    }
    res.separation = min_mu(res.report, "control") - max_mu(res.report, "predicted");

    Field um = propagate_fractional(u0, cfg.t0, 1.5);
    rvec hs = hg;
    std::sort(hs.begin(), hs.end());
    double ratio = 0;
    for (std::size_t i = 1; i < hs.size(); ++i) ratio = std::max(ratio, hs[i - 1] / hs[i]);
    double worst = 0, worst_formula = 0;
    nlohmann::json centres = nlohmann::json::array();
    int count = std::min<int>(cfg.location_scales, int(hs.size()));
    for (int i = 0; i < count; ++i) {
        double h = hs[i], xc = xt / std::sqrt(h);
        double r = 0.4 * (1 - std::sqrt(ratio)) * std::abs(xc);
        double cw = packet_centre(u1, xc, r, cfg.xi0), cm = packet_centre(um, xc, r, cfg.xi0);
        worst = std::max(worst, std::abs(cw - cm) / g.dx());
        worst_formula = std::max(worst_formula, std::abs(cw - xc) / g.dx());
        centres.push_back({{"h", h}, {"predicted", xc}, {"ww", cw}, {"model", cm}});
    }
    res.extras = {{"transported_x", xt},
                  {"transported_xi", cfg.xi0},
                  {"boundary_mass", res.boundary_mass},
                  {"nyquist_mass", res.nyquist_mass},
                  {"separation", number_or_inf(res.separation)},
                  {"location_error_cells", worst},
                  {"formula_error_cells", worst_formula},
                  {"packet_centres", centres},
                  {"mass_drift", std::abs(ww_mass(s1) - ww_mass(s0))},
                  {"energy_drift", relative_drift(ww_energy(s0), ww_energy(s1))}};
    return res;
}

ExperimentResult ww_smoothing_experiment(const WWSmoothingConfig& cfg) {
    check_run(cfg.run);
    if (!(cfg.t0 > 0)) throw std::invalid_argument("smoothing experiment requires t0 > 0");
    if (!(cfg.amplitude > 0)) throw std::invalid_argument("amplitude must be positive");
    if (!(cfg.bump_width > 0)) throw std::invalid_argument("bump width must be positive");
    if (cfg.xi0.empty()) throw std::invalid_argument("need at least one frequency");
    for (double xi : cfg.xi0)
        if (xi == 0.0) throw std::invalid_argument("frequencies must be nonzero");
    Grid g(cfg.run.n, cfg.run.L);
    double A = cfg.bump_amplitude, w = cfg.bump_width;
    double xs = cfg.x_s >= 0 ? cfg.x_s : (A != 0.0 ? w / std::sqrt(2.0) : 0.0);
    SurfaceState s0{from_function(g, [A, w](double x) { return cplx(A * std::exp(-x * x / (w * w))); }), Field(g), 0.0,
                    ww_params(cfg.run)};
    s0.psi = band_limited_delta(g, xs, cfg.amplitude, cfg.flat_fraction, cfg.cut_fraction);
    SurfaceMetric m = A != 0.0 ? gaussian_bump_metric(A, w) : flat_metric();

    ExperimentResult res;
    nlohmann::json rays = nlohmann::json::array();
    std::vector<std::pair<double, double>> dirs;
    for (double xi : cfg.xi0) {
        PhasePoint z0;
        z0.x = {xs, 0};
        z0.xi = {xi, 0};
        AsymptoticResult a = asymptotic_direction(m, z0, cfg.s_max);
        if (a.trapped || !a.converged) throw FlowError("ray from the singular point does not escape");
        dirs.push_back({xi, a.xi_inf[0]});
        rays.push_back({{"xi0", xi}, {"xi_inf", a.xi_inf[0]}, {"s_escape", a.s_escape}, {"cauchy_gap", a.cauchy_gap}});
    }

    SurfaceState s1 = evolve(s0, cfg.t0, cfg.run);
    Field u1 = symmetrized_u(s1, cfg.run.mu);
    res.boundary_mass = state_boundary_mass(s1);
    res.nyquist_mass = state_nyquist_mass(s1);
    if (res.boundary_mass > cfg.run.boundary_tol) throw BoxViolation("evolved surface reaches the box boundary");

    const rvec& hg = cfg.run.h_grid;
    res.report.h_grid = hg;
    res.report.tolerances = {{"tol_order", kTolOrder}, {"norm_floor", kNormFloor}, {"boundary", cfg.run.boundary_tol}};
    auto locus = [&](double xi) { return 1.5 * cfg.t0 * std::pow(std::abs(xi), -0.5) * xi; };
    double margin = kInf;
    for (std::size_t i = 0; i < dirs.size(); ++i) {
        auto [xi0, xinf] = dirs[i];
        std::string tag = std::to_string(i);
        double xb = locus(xinf);
        for (auto [label, px, pxi] :
             {std::tuple{"predicted_" + tag, xb, xinf}, std::tuple{"control_unbent_" + tag, locus(xi0), xi0},
              std::tuple{"control_freq_" + tag, xb, 2 * xinf}, std::tuple{"control_mirror_" + tag, -xb, xinf}}) {
            ProbeResult p = make_probe(label, u1, px, pxi, 0.5, 1.0, hg);
            require_admissible(p, hg.size());
            res.report.probes.push_back(p);
        }
        margin = std::min(margin, res.report.probe("control_unbent_" + tag).mu_hat -
                                      res.report.probe("predicted_" + tag).mu_hat);
    }
    res.separation = min_mu(res.report, "control") - max_mu(res.report, "predicted");
    res.extras = {{"boundary_mass", res.boundary_mass},
                  {"singular_point", xs},
                  {"rays", rays},
                  {"bent_margin", number_or_inf(margin)},
                  {"separation", number_or_inf(res.separation)},
                  {"mass_drift", std::abs(ww_mass(s1) - ww_mass(s0))}};
    return res;
}

}  // namespace microloc

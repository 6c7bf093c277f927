#include "microloc/model_eq.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "microloc/errors.hpp"

namespace microloc {

Field propagate_fractional(const Field& u0, double t, double gamma) {
    if (t == 0.0) return u0;
    return multiplier_apply(u0, Multiplier([=](double xi) { return std::polar(1.0, -t * std::pow(std::abs(xi), gamma)); }));
}

Field propagate(const Field& u0, const ModelParams& p) {
    if (!(p.gamma >= 1.0)) throw std::invalid_argument("dispersion exponent must be >= 1");
    if (u0.grid != p.grid) throw std::invalid_argument("field grid does not match model grid");
    return propagate_fractional(u0, p.t, p.gamma);
}

double group_velocity(double xi, double gamma) {
    if (xi == 0.0) return gamma == 1.0 ? 0.0 : (gamma > 1.0 ? 0.0 : INFINITY);
    return gamma * std::pow(std::abs(xi), gamma - 2.0) * xi;
}

cplx free_gaussian(double x, double t, double sigma) {
    cplx s2(sigma * sigma, 2.0 * t);
    return std::sqrt(cplx(sigma * sigma) / s2) * std::exp(-x * x / (2.0 * s2));
}

Field packet_train(const Grid& g, double x0, double xi0, double delta, double rho, const rvec& h_grid, double c,
                   double mu0) {
    Field u(g);
    for (double h : h_grid) {
        double w = c * std::pow(h, 0.5 * (rho - delta));
        Field p = wave_packet(g, x0 * std::pow(h, -delta), xi0 * std::pow(h, -rho), w, true);
        u += std::pow(h, mu0) * p;
    }
    return u;
}

Field power_chirp(const Grid& g, double x0, double xi0, double delta, double rho, double alpha, double x_on,
                  double x_off) {
    if (!(delta > 0)) throw std::invalid_argument("power chirp needs delta > 0");
    if (x0 == 0.0) throw std::invalid_argument("power chirp needs x0 != 0");
    double p = rho / delta, s = x0 > 0 ? 1.0 : -1.0, Y0 = std::abs(x0);
    Field u(g);
    for (int i = 0; i < g.n; ++i) {
        double y = s * g.x(i);
        if (y <= 0) continue;
        double amp = std::pow(1 + y * y, -0.5 * alpha) * (1 - bump(y / x_on)) * bump(y / x_off);
        if (amp == 0.0) continue;
        double phase = s * xi0 * Y0 / (p + 1) * std::pow(y / Y0, p + 1);
        u.v[i] = std::polar(amp, phase);
    }
    return u;
}

void check_ray_relation(double gamma, double delta, double rho) {
    if (std::abs(rho * gamma - (delta + rho)) > 1e-12)
        throw std::invalid_argument("transport experiment requires rho*gamma == delta + rho");
}

std::vector<std::pair<double, double>> default_control_factors(double delta, double rho) {
    if (delta == rho) return {{1, -1}, {-1, 1}, {-1, -1}, {1, 2}, {2, 1}};
    return {{1, -1}, {-1, 1}, {-1, -1}, {0.5, 1}, {2, 1}};
}

TransportConfig transport_defaults(double gamma) {
    TransportConfig c;
    if (gamma == 2.0) return c;
    if (gamma == 1.5) {
        c.gamma = 1.5;
        c.delta = 0.5;
        c.rho = 1.0;
        c.x0 = 1.0;
        c.xi0 = 1.5;
        c.t0 = 1.0;
        c.L = 128.0;
        c.h_grid = geometric_h_grid(0.125, std::sqrt(0.5), 6);
        return c;
    }
    throw std::invalid_argument("no default transport parameters for this gamma");
}

namespace {

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

}  // namespace

ExperimentResult transport_experiment(const TransportConfig& cfg) {
    check_ray_relation(cfg.gamma, cfg.delta, cfg.rho);
    if (cfg.xi0 == 0.0) throw std::invalid_argument("transport experiment requires xi0 != 0");
    if (cfg.h_grid.size() < 6) throw std::invalid_argument("h grid needs at least 6 points");
    Grid g(cfg.n, cfg.L);
    Field u0 = packet_train(g, cfg.x0, cfg.xi0, cfg.delta, cfg.rho, cfg.h_grid, cfg.packet_c, cfg.packet_mu0);
    Field u = propagate_fractional(u0, cfg.t0, cfg.gamma);

    ExperimentResult res;
    res.boundary_mass = boundary_mass(u);
    res.nyquist_mass = nyquist_mass(u);
    if (res.boundary_mass > cfg.boundary_tol) throw BoxViolation("evolved field reaches the box boundary");
    if (res.nyquist_mass > cfg.boundary_tol) throw BoxViolation("evolved field reaches the Nyquist band");

    double xt = cfg.x0 + cfg.t0 * group_velocity(cfg.xi0, cfg.gamma);
    std::vector<ControlPoint> pts = {{"predicted", xt, cfg.xi0}};
    auto factors = cfg.control_factors.empty() ? default_control_factors(cfg.delta, cfg.rho) : cfg.control_factors;
    int idx = 0;
    for (auto [sx, sxi] : factors) pts.push_back({"control_" + std::to_string(idx++), sx * xt, sxi * cfg.xi0});
    if (cfg.include_initial && cfg.t0 != 0.0) {
        bool dup = false;
        for (const auto& p : pts)
            if (std::abs(p.x - cfg.x0) < 1e-9 && std::abs(p.xi - cfg.xi0) < 1e-9) dup = true;
        if (!dup) pts.push_back({"control_initial", cfg.x0, cfg.xi0});
    }
    res.report.h_grid = cfg.h_grid;
    res.report.tolerances = {{"tol_order", kTolOrder}, {"norm_floor", kNormFloor}, {"boundary", cfg.boundary_tol}};
    for (const auto& p : pts) {
        ProbeResult pr = make_probe(p.label, u, p.x, p.xi, cfg.delta, cfg.rho, cfg.h_grid);
        require_admissible(pr, cfg.h_grid.size());
        res.report.probes.push_back(pr);
    }
    res.separation = min_mu(res.report, "control") - max_mu(res.report, "predicted");
    res.extras = {{"transported_x", xt},
                  {"transported_xi", cfg.xi0},
                  {"boundary_mass", res.boundary_mass},
                  {"nyquist_mass", res.nyquist_mass},
                  {"separation", number_or_inf(res.separation)}};
    return res;
}

SmoothingConfig smoothing_defaults(double gamma) {
    SmoothingConfig c;
    c.gamma = gamma;
    if (gamma == 2.0) return c;
    if (gamma == 1.5) {
        c.xi0 = {-1.0, 1.0};
        c.boundary_tol = 1e-6;
        return c;
    }
    return c;
}

double smoothing_locus(double xi, double t0, double gamma) { return t0 * group_velocity(xi, gamma); }

ExperimentResult smoothing_experiment(const SmoothingConfig& cfg) {
    if (!(cfg.gamma > 1.0)) throw std::invalid_argument("smoothing experiment requires gamma > 1");
    if (!(cfg.rho * cfg.gamma > cfg.delta + cfg.rho)) throw std::invalid_argument("smoothing experiment requires rho*gamma > delta + rho");
    if (cfg.t0 == 0.0) throw std::invalid_argument("smoothing experiment requires t0 != 0");
    if (cfg.h_grid.size() < 6) throw std::invalid_argument("h grid needs at least 6 points");
    Grid g(cfg.n, cfg.L);
    double sigma = cfg.width_cells * g.dx();
    Field u0 = from_function(g, [sigma](double x) {
        return cplx(std::exp(-x * x / (2 * sigma * sigma)) / std::sqrt(2 * M_PI * sigma * sigma));
    });
    Field u = propagate_fractional(u0, cfg.t0, cfg.gamma);

    ExperimentResult res;
    res.boundary_mass = boundary_mass(u);
    res.nyquist_mass = nyquist_mass(u0);
    if (res.boundary_mass > cfg.boundary_tol) throw BoxViolation("evolved field reaches the box boundary");

    double pd = cfg.rho * (cfg.gamma - 1.0), pr = cfg.rho;
    res.report.h_grid = cfg.h_grid;
    res.report.tolerances = {{"tol_order", kTolOrder}, {"norm_floor", kNormFloor}, {"boundary", cfg.boundary_tol},
                             {"near_delta_width", sigma}};
    for (std::size_t i = 0; i < cfg.xi0.size(); ++i) {
        double xi = cfg.xi0[i], x = smoothing_locus(xi, cfg.t0, cfg.gamma);
        std::string tag = std::to_string(i);
        for (auto [label, px, pxi] : {std::tuple{"predicted_" + tag, x, xi}, std::tuple{"control_freq_" + tag, x, 2 * xi},
                                      std::tuple{"control_mirror_" + tag, -x, xi}}) {
            ProbeResult p = make_probe(label, u, px, pxi, pd, pr, cfg.h_grid);
            require_admissible(p, cfg.h_grid.size());
            res.report.probes.push_back(p);
        }
    }
    res.separation = min_mu(res.report, "control") - max_mu(res.report, "predicted");
    res.extras = {{"boundary_mass", res.boundary_mass},
                  {"near_delta_width", sigma},
                  {"probe_scaling", {pd, pr}},
                  {"separation", number_or_inf(res.separation)}};
    return res;
}

ExperimentResult fourier_symmetry_experiment(const SymmetryConfig& cfg) {
    if (cfg.x0 == 0.0 || cfg.xi0 == 0.0) throw std::invalid_argument("symmetry experiment requires x0, xi0 != 0");
    if (cfg.h_grid.size() < 6) throw std::invalid_argument("h grid needs at least 6 points");
    Grid g(cfg.n, cfg.L > 0 ? cfg.L : std::sqrt(2 * M_PI * cfg.n));
    Field u = packet_train(g, cfg.x0, cfg.xi0, cfg.delta, cfg.rho, cfg.h_grid, cfg.packet_c, cfg.packet_mu0);
    Field v = fourier_dual(u);

    ExperimentResult res;
    res.boundary_mass = std::max(boundary_mass(u), boundary_mass(v));
    res.nyquist_mass = std::max(nyquist_mass(u), nyquist_mass(v));
    res.report.h_grid = cfg.h_grid;
    res.report.tolerances = {{"tol_order", kTolOrder}, {"norm_floor", kNormFloor}};
    auto add = [&](const std::string& label, const Field& f, double x, double xi, double d, double r) {
        ProbeResult p = make_probe(label, f, x, xi, d, r, cfg.h_grid);
        require_admissible(p, cfg.h_grid.size());
        res.report.probes.push_back(p);
        return p.mu_hat;
    };
    double mu_u = add("predicted_u", u, cfg.x0, cfg.xi0, cfg.delta, cfg.rho);
    double mu_v = add("predicted_dual", v, cfg.xi0, -cfg.x0, cfg.rho, cfg.delta);
    add("control_u_0", u, cfg.x0, -cfg.xi0, cfg.delta, cfg.rho);
    add("control_u_1", u, -cfg.x0, cfg.xi0, cfg.delta, cfg.rho);
    add("control_dual_0", v, -cfg.xi0, -cfg.x0, cfg.rho, cfg.delta);
    add("control_dual_1", v, cfg.xi0, cfg.x0, cfg.rho, cfg.delta);
    res.separation = min_mu(res.report, "control") - max_mu(res.report, "predicted");
    res.extras = {{"mu_u", number_or_inf(mu_u)},
                  {"mu_dual", number_or_inf(mu_v)},
                  {"difference", number_or_inf(std::abs(mu_u - mu_v))},
                  {"separation", number_or_inf(res.separation)}};
    return res;
}

ExperimentResult scaling_experiment(const ScalingConfig& cfg) {
    if (!(cfg.gamma > 0)) throw std::invalid_argument("scaling exponent must be positive");
    if (cfg.h_grid.size() < 6) throw std::invalid_argument("h grid needs at least 6 points");
    Grid g(cfg.n, cfg.L);
    Field u = power_chirp(g, cfg.x0, cfg.xi0, cfg.delta, cfg.rho, cfg.alpha, cfg.x_on, cfg.x_off);

    ExperimentResult res;
    res.boundary_mass = boundary_mass(u);
    res.nyquist_mass = nyquist_mass(u);
    res.report.h_grid = cfg.h_grid;
    res.report.tolerances = {{"tol_order", kTolOrder}, {"norm_floor", kNormFloor}};
    for (auto [label, d, r] : {std::tuple{"predicted", cfg.delta, cfg.rho},
                               std::tuple{"predicted_scaled", cfg.delta / cfg.gamma, cfg.rho / cfg.gamma}}) {
        ProbeResult p = make_probe(label, u, cfg.x0, cfg.xi0, d, r, cfg.h_grid);
        require_admissible(p, cfg.h_grid.size());
        res.report.probes.push_back(p);
    }
    double mu = res.report.probes[0].mu_hat, ms = res.report.probes[1].mu_hat;
    res.extras = {{"mu", number_or_inf(mu)},
                  {"mu_scaled", number_or_inf(ms)},
                  {"ratio", number_or_inf(mu / ms)},
                  {"expected_ratio", cfg.gamma}};
    return res;
}

double kernel_modulus_error(const Grid& g, double t, double width_cells, double radius) {
    double sigma = width_cells * g.dx();
    Field u0 = from_function(g, [sigma](double x) {
        return cplx(std::exp(-x * x / (2 * sigma * sigma)) / std::sqrt(2 * M_PI * sigma * sigma));
    });
    Field u = propagate_fractional(u0, 0.5 * t, 2.0);
    double worst = 0.0, ref = std::sqrt(2 * M_PI * t);
    for (int i = 0; i < g.n; ++i)
        if (std::abs(g.x(i)) <= radius) worst = std::max(worst, std::abs(std::abs(u.v[i]) * ref - 1.0));
    return worst;
}

EscapeValue escape_symbol_model(double s, double x, double xi, const EscapeModelParams& p) {
    double v = group_velocity(xi, p.gamma);
    double y = (x - s * v - p.x0) / (1 + s);
    double fx = bump(y), fxi = bump((xi - p.xi0) / p.eps);
    return {fx * fxi, -y * bump_deriv(y) / (1 + s) * fxi};
}

double escape_model_transport_fd(double s, double x, double xi, const EscapeModelParams& p, double h) {
    auto chi = [&](double ss, double xx) { return escape_symbol_model(ss, xx, xi, p).value; };
    double ds = (8 * (chi(s + h, x) - chi(s - h, x)) - (chi(s + 2 * h, x) - chi(s - 2 * h, x))) / (12 * h);
    double dx = (8 * (chi(s, x + h) - chi(s, x - h)) - (chi(s, x + 2 * h) - chi(s, x - 2 * h))) / (12 * h);
    return ds + group_velocity(xi, p.gamma) * dx;
}

}  // namespace microloc

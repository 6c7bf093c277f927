#include "microloc/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "microloc/parallel.hpp"

namespace microloc {

namespace {

inline double ef(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }
inline double ef_deriv(double t) { return t > 0.0 ? std::exp(-1.0 / t) / (t * t) : 0.0; }

double smoothstep_deriv(double t) {
    if (t <= 0.0 || t >= 1.0) return 0.0;
    double a = ef(t), b = ef(1 - t);
    double s = a + b;
    return (ef_deriv(t) * b + a * ef_deriv(1 - t)) / (s * s);
}

}  // namespace

double smoothstep(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    double a = ef(t), b = ef(1 - t);
    return a / (a + b);
}

double bump(double r) { return 1.0 - smoothstep(2.0 * std::abs(r) - 1.0); }

double bump_deriv(double r) {
    double s = r > 0 ? 1.0 : (r < 0 ? -1.0 : 0.0);
    return -2.0 * s * smoothstep_deriv(2.0 * std::abs(r) - 1.0);
}

Symbol Symbol::from_terms(std::vector<SymbolTerm> t, double mu, double k) {
    Symbol s;
    s.mu = mu;
    s.k = k;
    s.terms = std::move(t);
    auto copy = s.terms;
    s.eval = [copy](double x, double xi) {
        cplx acc = 0.0;
        for (const auto& term : copy) acc += term.fx(x) * term.fxi(xi);
        return acc;
    };
    return s;
}

Symbol Symbol::in_x(std::function<cplx(double)> f, double k) {
    return from_terms({{std::move(f), [](double) { return cplx(1.0); }}}, 0.0, k);
}

Symbol Symbol::in_xi(std::function<cplx(double)> f, double mu) {
    return from_terms({{[](double) { return cplx(1.0); }, std::move(f)}}, mu, 0.0);
}

Symbol Symbol::generic(std::function<cplx(double, double)> f, double mu, double k) {
    Symbol s;
    s.eval = std::move(f);
    s.mu = mu;
    s.k = k;
    return s;
}

Symbol window_symbol(double x0, double xi0, double rx, double rxi) {
    if (!(rx > 0) || !(rxi > 0)) throw std::invalid_argument("window radii must be positive");
    Symbol s = Symbol::from_terms({{[=](double x) { return cplx(bump((x - x0) / rx)); },
                                    [=](double xi) { return cplx(bump((xi - xi0) / rxi)); }}});
    s.support = SupportBox{x0 - rx, x0 + rx, xi0 - rxi, xi0 + rxi};
    return s;
}

Symbol default_window(double x0, double xi0) {
    double rx = 0.25 * std::max(std::abs(x0), 1.0);
    double rxi = xi0 != 0.0 ? 0.25 * std::abs(xi0) : 0.25;
    return window_symbol(x0, xi0, rx, rxi);
}

Field op_quantize(const Symbol& a, const Field& u, double h, double delta, double rho, QuantPath path) {
    if (!(h > 0.0)) throw std::invalid_argument("semiclassical scale h must be positive");
    const Grid& g = u.grid;
    if (g.dim != 1) throw std::invalid_argument("op_quantize is one-dimensional");
    const double sx = std::pow(h, delta), sxi = std::pow(h, rho);
    const int n = g.n;
    Field uh = forward(u);

    bool use_sep = path == QuantPath::separable || (path == QuantPath::automatic && a.separable());
    if (use_sep) {
        if (!a.separable()) throw std::invalid_argument("symbol has no separable representation");
        Field out(g);
        for (const auto& term : a.terms) {
            Field s = uh;
            for (int k = 0; k < n; ++k) s.v[k] *= term.fxi(sxi * g.xi(k));
            Field v = inverse(s);
            for (int i = 0; i < n; ++i) out.v[i] += term.fx(sx * g.x(i)) * v.v[i];
        }
        return out;
    }

    Field out(g);
    const double w = 1.0 / g.L;  // (2 pi)^-1 dxi
    parallel_for(std::size_t(n), [&](std::size_t i) {
        double x = g.x(int(i));
        cplx acc = 0.0;
        for (int k = 0; k < n; ++k) {
            double xi = g.xi(k);
            acc += std::polar(1.0, x * xi) * a(sx * x, sxi * xi) * uh.v[k];
        }
        out.v[i] = acc * w;
    });
    return out;
}

double weighted_norm(const Field& u, double nu, double k) {
    const Grid& g = u.grid;
    Field v = nu == 0.0 ? u
                        : multiplier_apply(u, Multiplier2([nu](double a, double b) {
                              return cplx(std::pow(1.0 + a * a + b * b, 0.5 * nu));
                          }));
    if (k != 0.0) {
        Field wgt = from_function(g, std::function<cplx(double, double)>([k](double a, double b) {
                                      return cplx(std::pow(1.0 + a * a + b * b, 0.5 * k));
                                  }));
        v = pointwise(wgt, v);
    }
    return l2_norm(v);
}

Field DyadicPartition::apply(int j, const Field& u) const {
    if (u.grid != grid) throw std::invalid_argument("partition built on a different grid");
    Field out(grid);
    for (std::size_t i = 0; i < u.size(); ++i) out.v[i] = pieces[j][i] * u.v[i];
    return out;
}

double DyadicPartition::value(int j, double r) const {
    auto chi0 = [this](double t) { return 1.0 - smoothstep((t - a) / (b - a)); };
    if (j == 0) return chi0(r);
    if (j == J) return 1.0 - chi0(r / std::ldexp(1.0, J - 1));
    return chi0(r / std::ldexp(1.0, j)) - chi0(r / std::ldexp(1.0, j - 1));
}

DyadicPartition make_dyadic_partition(const Grid& g, double C) {
    if (!(C > std::sqrt(2.0))) throw std::invalid_argument("ring constant must exceed sqrt(2)");
    DyadicPartition p;
    p.grid = g;
    p.C = C;
    p.J = int(std::ceil(std::log2(0.5 * g.L)));
    if (p.J < 2) throw std::invalid_argument("grid too small for three dyadic rings");
    double a = 1.0, b = 2.0;
    if (C < 2.0) {
        a = 2.0 / C;
        b = C;
    }
    p.a = a;
    p.b = b;
    auto chi0 = [a, b](double r) { return 1.0 - smoothstep((r - a) / (b - a)); };
    std::size_t N = g.size();
    rvec radius(N);
    if (g.dim == 1) {
        for (int i = 0; i < g.n; ++i) radius[i] = std::abs(g.x(i));
    } else {
        for (int i = 0; i < g.n; ++i)
            for (int j = 0; j < g.n; ++j) radius[std::size_t(i) * g.n + j] = std::hypot(g.x(i), g.x(j));
    }
    p.pieces.assign(p.J + 1, rvec(N));
    for (std::size_t i = 0; i < N; ++i) {
        double r = radius[i];
        p.pieces[0][i] = chi0(r);
        for (int j = 1; j < p.J; ++j) p.pieces[j][i] = chi0(r / std::ldexp(1.0, j)) - chi0(r / std::ldexp(1.0, j - 1));
        p.pieces[p.J][i] = 1.0 - chi0(r / std::ldexp(1.0, p.J - 1));
    }
    return p;
}

double dyadic_norm(const Field& u, double nu, double k, const DyadicPartition& part) {
    double s = 0.0;
    for (int j = 0; j <= part.J; ++j) {
        double wn = weighted_norm(part.apply(j, u), nu, 0.0);
        s += std::pow(2.0, 2.0 * j * k) * wn * wn;
    }
    return std::sqrt(s);
}

Field fourier_dual(const Field& u) {
    const Grid& g = u.grid;
    if (g.dim != 1) throw std::invalid_argument("fourier_dual needs d = 1");
    Field f = forward(u), r(Grid(g.n, g.n * g.dxi()));
    for (int i = 0; i < g.n; ++i) r.v[i] = f.v[(i - g.n / 2 + g.n) % g.n];
    return r;
}

rvec geometric_h_grid(double h0, double ratio, int count) {
    if (!(h0 > 0) || !(ratio > 0 && ratio < 1) || count < 1) throw std::invalid_argument("bad geometric h grid");
    rvec h(count);
    for (int i = 0; i < count; ++i) h[i] = h0 * std::pow(ratio, i);
    return h;
}

rvec default_h_grid() { return geometric_h_grid(0.25, 0.5, 8); }

rvec admissible_h(const Grid& g, const SupportBox& box, double delta, double rho, const rvec& h_grid) {
    double xr = std::max(std::abs(box.x_lo), std::abs(box.x_hi));
    double xir = std::max(std::abs(box.xi_lo), std::abs(box.xi_hi));
    rvec out;
    for (double h : h_grid) {
        double X = xr / std::pow(h, delta), Xi = xir / std::pow(h, rho);
        if (X <= 0.5 * g.L * (1 + 1e-12) && Xi <= g.nyquist() * (1 + 1e-12)) out.push_back(h);
    }
    return out;
}

LogFit loglog_fit(const rvec& x, const rvec& y, double floor) {
    LogFit fit;
    rvec lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (y[i] > floor && x[i] > 0) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(y[i]));
        }
    fit.used = int(lx.size());
    if (fit.used < 3) return fit;
    double n = lx.size(), mx = 0, my = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
    return fit;
}

DecayFit estimate_decay_order(const Field& u, double x0, double xi0, double delta, double rho,
                              const Symbol& window, const rvec& h_grid, bool truncate) {
    (void)x0;
    (void)xi0;
    for (std::size_t i = 1; i < h_grid.size(); ++i)
        if (!(h_grid[i] < h_grid[i - 1])) throw std::invalid_argument("h grid must be strictly decreasing");
    DecayFit fit;
    fit.h = (truncate && window.support) ? admissible_h(u.grid, *window.support, delta, rho, h_grid) : h_grid;
    fit.norms.assign(fit.h.size(), 0.0);
    double nu = l2_norm(u);
    if (nu == 0.0) return fit;
    parallel_for(fit.h.size(), [&](std::size_t i) {
        fit.norms[i] = l2_norm(op_quantize(window, u, fit.h[i], delta, rho)) / nu;
    });
    LogFit lf = loglog_fit(fit.h, fit.norms);
    fit.mu = lf.slope;
    fit.r2 = lf.used >= 3 ? lf.r2 : 0.0;
    return fit;
}

DecayFit estimate_decay_order(const Field& u, double x0, double xi0, double delta, double rho,
                              const rvec& h_grid, bool truncate) {
    return estimate_decay_order(u, x0, xi0, delta, rho, default_window(x0, xi0), h_grid, truncate);
}

bool singular_at(const ProbeResult& p, double sigma, double tol) { return p.mu_hat < sigma - tol; }

const ProbeResult& WavefrontReport::probe(const std::string& label) const {
    for (const auto& p : probes)
        if (p.label == label) return p;
    throw std::out_of_range("no probe labelled " + label);
}

ProbeResult make_probe(const std::string& label, const Field& u, double x0, double xi0, double delta,
                       double rho, const rvec& h_grid) {
    DecayFit f = estimate_decay_order(u, x0, xi0, delta, rho, h_grid);
    ProbeResult p;
    p.label = label;
    p.x0 = x0;
    p.xi0 = xi0;
    p.delta = delta;
    p.rho = rho;
    p.mu_hat = f.mu;
    p.r2 = f.r2;
    p.h = f.h;
    p.norms = f.norms;
    return p;
}

nlohmann::json number_or_inf(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    return v;
}

double parse_number_or_inf(const nlohmann::json& j) {
    if (j.is_string()) {
        auto s = j.get<std::string>();
        if (s == "inf") return kInf;
        if (s == "-inf") return -kInf;
        return std::numeric_limits<double>::quiet_NaN();
    }
    return j.get<double>();
}

nlohmann::json to_json(const WavefrontReport& r) {
    nlohmann::json probes = nlohmann::json::array();
    for (const auto& p : r.probes) {
        probes.push_back({{"label", p.label},
                          {"x0", p.x0},
                          {"xi0", p.xi0},
                          {"delta", p.delta},
                          {"rho", p.rho},
                          {"mu_hat", number_or_inf(p.mu_hat)},
                          {"r2", p.r2},
                          {"h", p.h},
                          {"norms", p.norms}});
    }
    nlohmann::json tol = nlohmann::json::object();
    for (const auto& [k, v] : r.tolerances) tol[k] = number_or_inf(v);
    return {{"probes", probes}, {"h_grid", r.h_grid}, {"tolerances", tol}};
}

WavefrontReport report_from_json(const nlohmann::json& j) {
    WavefrontReport r;
    for (const auto& p : j.at("probes")) {
        ProbeResult q;
        q.label = p.value("label", "");
        q.x0 = p.at("x0").get<double>();
        q.xi0 = p.at("xi0").get<double>();
        q.delta = p.at("delta").get<double>();
        q.rho = p.at("rho").get<double>();
        q.mu_hat = parse_number_or_inf(p.at("mu_hat"));
        q.r2 = p.at("r2").get<double>();
        if (p.contains("h")) q.h = p.at("h").get<rvec>();
        if (p.contains("norms")) q.norms = p.at("norms").get<rvec>();
        r.probes.push_back(q);
    }
    r.h_grid = j.at("h_grid").get<rvec>();
    if (j.contains("tolerances"))
        for (const auto& [k, v] : j.at("tolerances").items()) r.tolerances[k] = parse_number_or_inf(v);
    return r;
}

}  // namespace microloc

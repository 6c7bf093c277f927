#include "microloc/flows.hpp"

#include <algorithm>
#include <boost/math/interpolators/cardinal_quintic_b_spline.hpp>
#include <boost/numeric/odeint.hpp>
#include <fstream>
#include <sstream>

#include "microloc/parallel.hpp"
#include "microloc/quantize.hpp"

namespace microloc {

namespace odeint = boost::numeric::odeint;

namespace {

using State = std::vector<double>;
using Rhs = std::function<void(const State&, State&, double)>;

double dot(const Vec2& a, const Vec2& b, int d) {
    double s = 0;
    for (int i = 0; i < d; ++i) s += a[i] * b[i];
    return s;
}

Vec2 matvec(const Mat2& m, const Vec2& v) { return {m[0] * v[0] + m[1] * v[1], m[2] * v[0] + m[3] * v[1]}; }

double norm(const Vec2& a, int d) { return std::sqrt(dot(a, a, d)); }

std::string where(double s, const State& y, int d) {
    std::ostringstream os;
    os << "s=" << s << " x=(";
    for (int i = 0; i < d; ++i) os << (i ? "," : "") << y[i];
    os << ") xi=(";
    for (int i = 0; i < d; ++i) os << (i ? "," : "") << y[d + i];
    os << ")";
    return os.str();
}

// adaptive Dormand-Prince 5(4); lands exactly on every checkpoint and on t_end
template <class OnStep>
void drive(const Rhs& f, State& y, double t0, double t_end, double tol, const rvec& checkpoints, int d,
           OnStep on_step, long& steps, long& rejected) {
    if (t_end == t0) return;
    auto ctrl = odeint::make_controlled(tol, tol, odeint::runge_kutta_dopri5<State>());
    double dir = t_end > t0 ? 1.0 : -1.0;
    double t = t0, dt = dir * std::min(1e-2, std::abs(t_end - t0));
    std::size_t next = 0;
    while (next < checkpoints.size() && dir * (checkpoints[next] - t0) <= 0) ++next;
    const long max_steps = 50000000;
    while (dir * (t_end - t) > 0) {
        double target = next < checkpoints.size() ? checkpoints[next] : t_end;
        if (dir * (target - t_end) > 0) target = t_end;
        double used = dt;
        bool clamped = dir * (t + used - target) >= 0;
        if (clamped) used = target - t;
        double t_prev = t;
        auto res = ctrl.try_step(std::ref(f), y, t, used);
        if (res == odeint::fail) {
            ++rejected;
            dt = used;
            if (std::abs(dt) < 1e-14 * std::max(1.0, std::abs(t)))
                throw FlowError("step size underflow at " + where(t, y, d));
            continue;
        }
        ++steps;
        if (steps > max_steps) throw FlowError("step budget exhausted at " + where(t, y, d));
        for (double v : y)
            if (!std::isfinite(v)) throw FlowError("non-finite state at " + where(t_prev, y, d));
        bool hit = clamped;
        if (clamped) {
            t = target;
            if (next < checkpoints.size() && target == checkpoints[next]) ++next;
        } else {
            dt = used;
        }
        on_step(t, y, hit);
    }
}

Rhs hamilton_rhs(const Hamiltonian& H) {
    int d = H.d;
    return [H, d](const State& y, State& dy, double) {
        Vec2 x{0, 0}, xi{0, 0}, hx, hxi;
        for (int i = 0; i < d; ++i) x[i] = y[i], xi[i] = y[d + i];
        H.gradient(x, xi, hx, hxi);
        for (int i = 0; i < d; ++i) dy[i] = hxi[i], dy[d + i] = -hx[i];
    };
}

State pack(const PhasePoint& z) {
    State y(2 * z.d);
    for (int i = 0; i < z.d; ++i) y[i] = z.x[i], y[z.d + i] = z.xi[i];
    return y;
}

PhasePoint unpack(const State& y, int d) {
    PhasePoint z;
    z.d = d;
    for (int i = 0; i < d; ++i) z.x[i] = y[i], z.xi[i] = y[d + i];
    return z;
}

void require_nonzero_xi(const PhasePoint& z) {
    if (norm(z.xi, z.d) == 0.0) throw std::invalid_argument("flow requires xi0 != 0");
    if (z.d != 1 && z.d != 2) throw std::invalid_argument("flow dimension must be 1 or 2");
}

double radial_bump(const Vec2& r, int d) { return bump(norm(r, d)); }

Vec2 radial_bump_grad(const Vec2& r, int d) {
    double n = norm(r, d);
    if (n == 0.0) return {0, 0};
    double g = bump_deriv(n) / n;
    return {g * r[0], d > 1 ? g * r[1] : 0.0};
}

}  // namespace

double SurfaceMetric::G(const Vec2& x, const Vec2& xi) const {
    Vec2 g = grad(x);
    double p = dot(g, xi, d), q = 1 + dot(g, g, d);
    return dot(xi, xi, d) - p * p / q;
}

void SurfaceMetric::dG(const Vec2& x, const Vec2& xi, Vec2& gx, Vec2& gxi) const {
    Vec2 g = grad(x);
    Mat2 h = hess(x);
    double p = dot(g, xi, d), q = 1 + dot(g, g, d);
    Vec2 hxi = matvec(h, xi), hg = matvec(h, g);
    gx = {0, 0};
    gxi = {0, 0};
    for (int k = 0; k < d; ++k) {
        gxi[k] = 2 * xi[k] - 2 * p * g[k] / q;
        gx[k] = -2 * p * hxi[k] / q + 2 * p * p * hg[k] / (q * q);
    }
}

double SurfaceMetric::H(const Vec2& x, const Vec2& xi) const { return std::pow(G(x, xi), 0.75); }

void SurfaceMetric::dH(const Vec2& x, const Vec2& xi, Vec2& hx, Vec2& hxi) const {
    Vec2 gx, gxi;
    dG(x, xi, gx, gxi);
    double c = 0.75 * std::pow(G(x, xi), -0.25);
    for (int k = 0; k < 2; ++k) hx[k] = c * gx[k], hxi[k] = c * gxi[k];
}

SurfaceMetric flat_metric(int d) {
    SurfaceMetric m;
    m.d = d;
    m.eta = [](const Vec2&) { return 0.0; };
    m.grad = [](const Vec2&) { return Vec2{0, 0}; };
    m.hess = [](const Vec2&) { return Mat2{0, 0, 0, 0}; };
    return m;
}

SurfaceMetric gaussian_bump_metric(double amp, double w, int d, Vec2 c) {
    SurfaceMetric m;
    m.d = d;
    auto shift = [c, d](const Vec2& x) { return Vec2{x[0] - c[0], d > 1 ? x[1] - c[1] : 0.0}; };
    m.eta = [=](const Vec2& x) {
        Vec2 r = shift(x);
        return amp * std::exp(-dot(r, r, d) / (w * w));
    };
    m.grad = [=](const Vec2& x) {
        Vec2 r = shift(x);
        double e = amp * std::exp(-dot(r, r, d) / (w * w));
        return Vec2{-2 * r[0] / (w * w) * e, -2 * r[1] / (w * w) * e};
    };
    m.hess = [=](const Vec2& x) {
        Vec2 r = shift(x);
        double e = amp * std::exp(-dot(r, r, d) / (w * w)), w2 = w * w, w4 = w2 * w2;
        return Mat2{e * (4 * r[0] * r[0] / w4 - 2 / w2), e * 4 * r[0] * r[1] / w4, e * 4 * r[0] * r[1] / w4,
                    d > 1 ? e * (4 * r[1] * r[1] / w4 - 2 / w2) : 0.0};
    };
    return m;
}

SurfaceMetric sampled_metric(const Field& eta) {
    const Grid& g = eta.grid;
    if (g.dim != 1) throw std::invalid_argument("sampled metric supports d = 1 only");
    std::vector<double> y(3 * g.n + 1);
    for (int k = 0; k < 3 * g.n + 1; ++k) y[k] = eta.v[k % g.n].real();
    auto sp = boost::math::interpolators::cardinal_quintic_b_spline<double>(y, -1.5 * g.L, g.dx());
    double L = g.L;
    auto wrap = [L](double x) { return x - L * std::floor((x + 0.5 * L) / L); };
    SurfaceMetric m;
    m.d = 1;
    m.eta = [=](const Vec2& x) { return sp(wrap(x[0])); };
    m.grad = [=](const Vec2& x) { return Vec2{sp.prime(wrap(x[0])), 0}; };
    m.hess = [=](const Vec2& x) { return Mat2{sp.double_prime(wrap(x[0])), 0, 0, 0}; };
    return m;
}

double weighted_hessian_norm(const SurfaceMetric& m, double R, int samples) {
    double best = 0;
    int ny = m.d > 1 ? samples : 1;
    for (int i = 0; i < samples; ++i)
        for (int j = 0; j < ny; ++j) {
            Vec2 x{-R + 2 * R * i / (samples - 1), m.d > 1 ? -R + 2 * R * j / (samples - 1) : 0.0};
            Mat2 h = m.hess(x);
            double op;
            if (m.d == 1) {
                op = std::abs(h[0]);
            } else {
                double tr = 0.5 * (h[0] + h[3]), det = h[0] * h[3] - h[1] * h[2];
                double disc = std::sqrt(std::max(0.0, tr * tr - det));
                op = std::max(std::abs(tr + disc), std::abs(tr - disc));
            }
            best = std::max(best, std::sqrt(1 + dot(x, x, m.d)) * op);
        }
    return best;
}

Hamiltonian hamiltonian_H(const SurfaceMetric& m) {
    return {m.d, [m](const Vec2& x, const Vec2& xi) { return m.H(x, xi); },
            [m](const Vec2& x, const Vec2& xi, Vec2& hx, Vec2& hxi) { m.dH(x, xi, hx, hxi); }};
}

Hamiltonian hamiltonian_G(const SurfaceMetric& m) {
    return {m.d, [m](const Vec2& x, const Vec2& xi) { return m.G(x, xi); },
            [m](const Vec2& x, const Vec2& xi, Vec2& gx, Vec2& gxi) { m.dG(x, xi, gx, gxi); }};
}

Hamiltonian fractional_hamiltonian(double gamma, int d) {
    return {d, [=](const Vec2&, const Vec2& xi) { return std::pow(norm(xi, d), gamma); },
            [=](const Vec2&, const Vec2& xi, Vec2& hx, Vec2& hxi) {
                double r = norm(xi, d), c = gamma * std::pow(r, gamma - 2);
                hx = {0, 0};
                hxi = {c * xi[0], d > 1 ? c * xi[1] : 0.0};
            }};
}

Trajectory integrate_hamiltonian(const Hamiltonian& H, const PhasePoint& z0, double s_end, double tol,
                                 const rvec& checkpoints, bool record_steps) {
    require_nonzero_xi(z0);
    int d = z0.d;
    Trajectory tr;
    tr.d = d;
    tr.tol = tol;
    tr.s.push_back(0.0);
    tr.z.push_back(z0);
    double h0 = H.value(z0.x, z0.xi);
    State y = pack(z0);
    drive(hamilton_rhs(H), y, 0.0, s_end, tol, checkpoints, d,
          [&](double s, const State& st, bool hit) {
              PhasePoint z = unpack(st, d);
              if (norm(z.xi, d) < 1e-12 * norm(z0.xi, d)) throw FlowError("xi reached 0 at " + where(s, st, d));
              tr.h_drift = std::max(tr.h_drift, std::abs(H.value(z.x, z.xi) - h0) / std::abs(h0));
              if (record_steps || hit || s == s_end) {
                  tr.s.push_back(s);
                  tr.z.push_back(z);
              }
          },
          tr.steps, tr.rejected);
    return tr;
}

Trajectory integrate_hamiltonian(const SurfaceMetric& m, const PhasePoint& z0, double s_end, double tol,
                                 const rvec& checkpoints, bool record_steps) {
    return integrate_hamiltonian(hamiltonian_H(m), z0, s_end, tol, checkpoints, record_steps);
}

PhasePoint flow_point(const Hamiltonian& H, const PhasePoint& z0, double s, double tol) {
    if (s == 0.0) return z0;
    return integrate_hamiltonian(H, z0, s, tol, {}, false).back();
}

ReparamResult reparam_check(const SurfaceMetric& m, const PhasePoint& z0, double s_end, double tol,
                            int checkpoints) {
    require_nonzero_xi(z0);
    int d = z0.d;
    ReparamResult res;
    rvec cps;
    for (int k = 1; k <= checkpoints; ++k) cps.push_back(s_end * k / checkpoints);
    Hamiltonian H = hamiltonian_H(m);
    Rhs base = hamilton_rhs(H);
    Rhs aug = [&](const State& y, State& dy, double s) {
        base(y, dy, s);
        Vec2 x{0, 0}, xi{0, 0};
        for (int i = 0; i < d; ++i) x[i] = y[i], xi[i] = y[d + i];
        dy[2 * d] = 0.75 * std::pow(m.G(x, xi), -0.25);
    };
    State y = pack(z0);
    y.push_back(0.0);
    std::vector<PhasePoint> phi_pts;
    long steps = 0, rej = 0;
    drive(aug, y, 0.0, s_end, tol, cps, d,
          [&](double s, const State& st, bool hit) {
              if (!hit) return;
              res.s.push_back(s);
              res.phi.push_back(st[2 * d]);
              phi_pts.push_back(unpack(st, d));
          },
          steps, rej);
    Trajectory geo = integrate_hamiltonian(hamiltonian_G(m), z0, res.phi.back(), tol, res.phi, false);
    std::size_t j = 1;
    for (std::size_t k = 0; k < res.phi.size(); ++k) {
        while (j < geo.s.size() && geo.s[j] != res.phi[k]) ++j;
        if (j >= geo.s.size()) throw FlowError("geodesic checkpoint missing");
        const PhasePoint &a = phi_pts[k], &b = geo.z[j];
        for (int i = 0; i < d; ++i)
            res.deviation = std::max({res.deviation, std::abs(a.x[i] - b.x[i]), std::abs(a.xi[i] - b.xi[i])});
    }
    return res;
}

AsymptoticResult asymptotic_direction(const SurfaceMetric& m, const PhasePoint& z0, double s_max,
                                      double escape_radius, double tol, double cauchy_tol) {
    require_nonzero_xi(z0);
    int d = z0.d;
    if (escape_radius <= 0) escape_radius = 50 * norm(z0.x, d) + 100;
    Hamiltonian H = hamiltonian_H(m);
    Rhs base = hamilton_rhs(H);
    Rhs aug = [&](const State& y, State& dy, double s) {
        base(y, dy, s);
        Vec2 xi{0, 0};
        for (int i = 0; i < d; ++i) xi[i] = y[d + i];
        double r = norm(xi, d);
        for (int i = 0; i < d; ++i) dy[2 * d + i] = 1.5 * std::pow(r, -0.5) * xi[i];
    };
    State y = pack(z0);
    y.resize(3 * d, 0.0);
    AsymptoticResult res;
    double xi0n = norm(z0.xi, d);
    long steps = 0, rej = 0;
    double s = 0.0;
    bool escaped = false;
    for (double cp = 1.0; s < s_max; cp *= 2) {
        double target = std::min(cp, s_max);
        drive(aug, y, s, target, tol, {}, d,
              [&](double t, const State& st, bool) {
                  Vec2 x{0, 0}, xi{0, 0};
                  for (int i = 0; i < d; ++i) x[i] = st[i], xi[i] = st[d + i];
                  if (norm(xi, d) < 1e-8 * xi0n) throw FlowError("xi tends to 0 along the flow at " + where(t, st, d));
                  if (!escaped && norm(x, d) > escape_radius) {
                      escaped = true;
                      res.s_escape = t;
                  }
              },
              steps, rej);
        s = target;
        Vec2 xi{0, 0}, z{0, 0};
        for (int i = 0; i < d; ++i) xi[i] = y[d + i], z[i] = y[i] - z0.x[i] - y[2 * d + i];
        res.checkpoints.push_back(s);
        res.xi_at.push_back(xi);
        res.z_at.push_back(z);
        std::size_t k = res.xi_at.size();
        if (k >= 2) {
            Vec2 dxi{xi[0] - res.xi_at[k - 2][0], xi[1] - res.xi_at[k - 2][1]};
            Vec2 dz{z[0] - res.z_at[k - 2][0], z[1] - res.z_at[k - 2][1]};
            res.cauchy_gap = std::max(norm(dxi, d), norm(dz, d));
            if (escaped && res.cauchy_gap < cauchy_tol) {
                res.converged = true;
                break;
            }
        }
    }
    res.trapped = !escaped;
    res.xi_inf = res.xi_at.back();
    res.z_inf = res.z_at.back();
    return res;
}

NontrapResult nontrapping_diagnostic(const SurfaceMetric& m, const PhasePoint& z0, double s_end, int samples,
                                     double tol) {
    rvec cps;
    for (int k = 1; k <= samples; ++k) cps.push_back(s_end * k / samples);
    Trajectory tr = integrate_hamiltonian(m, z0, s_end, tol, cps, false);
    NontrapResult r;
    r.min_slope = INFINITY;
    for (const auto& z : tr.z) {
        Vec2 hx, hxi;
        m.dH(z.x, z.xi, hx, hxi);
        r.min_slope = std::min(r.min_slope, dot(hxi, z.xi, z.d) - dot(z.x, hx, z.d));
    }
    r.certificate = r.min_slope > 0;
    return r;
}

std::vector<NontrapResult> nontrapping_survey(const SurfaceMetric& m, const std::vector<PhasePoint>& z0s,
                                              double s_end, int samples) {
    std::vector<NontrapResult> out(z0s.size());
    parallel_for(z0s.size(), [&](std::size_t i) { out[i] = nontrapping_diagnostic(m, z0s[i], s_end, samples); });
    return out;
}

SurfaceEscape::SurfaceEscape(const Hamiltonian& H_, const PhasePoint& z0, double s_, const SurfaceEscapeParams& p_,
                             double tol_)
    : H(H_), p(p_), s(s_), tol(tol_) {
    if (!(s > 0)) throw std::invalid_argument("escape symbol requires s > 0");
    if (!(xi_radius() > 0)) throw std::invalid_argument("escape symbol requires delta > s^-nu");
    zs = flow_point(H, z0, s, tol);
    Vec2 hx, hxi;
    H.gradient(zs.x, zs.xi, hx, hxi);
    dzs.d = zs.d;
    dzs.x = hxi;
    dzs.xi = {-hx[0], -hx[1]};
}

EscapeSample SurfaceEscape::eval(const Vec2& x, const Vec2& xi) const {
    int d = zs.d;
    double rx = x_radius(), rxi = xi_radius(), sg = p.sign;
    double drxi = p.nu * std::pow(s, -p.nu - 1);
    Vec2 Y{0, 0}, W{0, 0}, dY{0, 0}, dW{0, 0};
    for (int i = 0; i < d; ++i) {
        Y[i] = (x[i] - zs.x[i]) / rx;
        W[i] = (xi[i] - sg * zs.xi[i]) / rxi;
        dY[i] = -dzs.x[i] / rx - Y[i] / s;
        dW[i] = -sg * dzs.xi[i] / rxi - W[i] * drxi / rxi;
    }
    double fy = radial_bump(Y, d), fw = radial_bump(W, d);
    Vec2 gy = radial_bump_grad(Y, d), gw = radial_bump_grad(W, d);
    double ds = dot(gy, dY, d) * fw + fy * dot(gw, dW, d);
    Vec2 cx{gy[0] / rx * fw, gy[1] / rx * fw}, cxi{fy * gw[0] / rxi, fy * gw[1] / rxi};
    Vec2 hx, hxi;
    H.gradient(x, xi, hx, hxi);
    double bracket = dot(hxi, cx, d) - dot(hx, cxi, d);
    return {fy * fw, ds + sg * bracket};
}

double SurfaceEscape::transport_fd(const Vec2& x, const Vec2& xi, double h) const {
    int d = zs.d;
    auto chi_at = [&](const PhasePoint& z, double ss, const Vec2& xx, const Vec2& ee) {
        double rx = p.lambda * p.delta * ss, rxi = p.delta - std::pow(ss, -p.nu);
        Vec2 Y{0, 0}, W{0, 0};
        for (int i = 0; i < d; ++i) {
            Y[i] = (xx[i] - z.x[i]) / rx;
            W[i] = (ee[i] - p.sign * z.xi[i]) / rxi;
        }
        return radial_bump(Y, d) * radial_bump(W, d);
    };
    PhasePoint zp = flow_point(H, zs, h, tol), zm = flow_point(H, zs, -h, tol);
    PhasePoint zp2 = flow_point(H, zs, 2 * h, tol), zm2 = flow_point(H, zs, -2 * h, tol);
    auto d5 = [h](double fp, double fm, double fp2, double fm2) { return (8 * (fp - fm) - (fp2 - fm2)) / (12 * h); };
    double ds = d5(chi_at(zp, s + h, x, xi), chi_at(zm, s - h, x, xi), chi_at(zp2, s + 2 * h, x, xi),
                   chi_at(zm2, s - 2 * h, x, xi));
    double bracket = 0;
    for (int i = 0; i < d; ++i) {
        auto sh = [&](const Vec2& v, double a) {
            Vec2 w = v;
            w[i] += a;
            return w;
        };
        double hxi = d5(H.value(x, sh(xi, h)), H.value(x, sh(xi, -h)), H.value(x, sh(xi, 2 * h)),
                        H.value(x, sh(xi, -2 * h)));
        double hx = d5(H.value(sh(x, h), xi), H.value(sh(x, -h), xi), H.value(sh(x, 2 * h), xi),
                       H.value(sh(x, -2 * h), xi));
        double cx = d5(chi_at(zs, s, sh(x, h), xi), chi_at(zs, s, sh(x, -h), xi), chi_at(zs, s, sh(x, 2 * h), xi),
                       chi_at(zs, s, sh(x, -2 * h), xi));
        double cxi = d5(chi_at(zs, s, x, sh(xi, h)), chi_at(zs, s, x, sh(xi, -h)), chi_at(zs, s, x, sh(xi, 2 * h)),
                        chi_at(zs, s, x, sh(xi, -2 * h)));
        bracket += hxi * cx - hx * cxi;
    }
    return ds + p.sign * bracket;
}

EscapeSurvey escape_symbol_survey(const SurfaceEscape& e, int nx, int nxi, bool with_fd) {
    if (e.zs.d != 1) throw std::invalid_argument("escape survey supports d = 1");
    EscapeSurvey r;
    r.min_transport = INFINITY;
    double rx = e.x_radius(), rxi = e.xi_radius(), worst = 0;
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < nxi; ++j) {
            Vec2 x{e.zs.x[0] + rx * (-1 + 2.0 * (i + 0.5) / nx), 0};
            Vec2 xi{e.p.sign * e.zs.xi[0] + rxi * (-1 + 2.0 * (j + 0.5) / nxi), 0};
            EscapeSample v = e.eval(x, xi);
            r.min_transport = std::min(r.min_transport, v.transport);
            r.max_transport = std::max(r.max_transport, std::abs(v.transport));
            if (with_fd) worst = std::max(worst, std::abs(e.transport_fd(x, xi) - v.transport));
        }
    r.max_fd_error = r.max_transport > 0 ? worst / r.max_transport : worst;
    return r;
}

void write_trajectory_csv(const std::string& path, const Trajectory& t, const Hamiltonian& H) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    f.precision(17);
    if (t.d == 1)
        f << "s,x,xi,H,x_dot_xi\n";
    else
        f << "s,x1,x2,xi1,xi2,H,x_dot_xi\n";
    for (std::size_t k = 0; k < t.s.size(); ++k) {
        const PhasePoint& z = t.z[k];
        f << t.s[k];
        for (int i = 0; i < t.d; ++i) f << ',' << z.x[i];
        for (int i = 0; i < t.d; ++i) f << ',' << z.xi[i];
        f << ',' << H.value(z.x, z.xi) << ',' << dot(z.x, z.xi, t.d) << '\n';
    }
    if (!f) throw std::runtime_error("write failed for " + path);
}

}  // namespace microloc

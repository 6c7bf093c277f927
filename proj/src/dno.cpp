#include "microloc/dno.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace microloc {

namespace {

Field radial_multiplier(const Field& f, const std::function<double(double)>& m) {
    if (f.grid.dim == 1) return multiplier_apply(f, Multiplier([&](double xi) { return cplx(m(std::abs(xi))); }));
    return multiplier_apply(f, Multiplier2([&](double a, double b) { return cplx(m(std::hypot(a, b))); }));
}

// |xi|^m T_m(|xi|), T_m = 1 for even m and tanh(b|xi|) for odd m
Field dn_power(const Field& f, int m, double b) {
    return radial_multiplier(f, [m, b](double r) {
        double p = m == 0 ? 1.0 : std::pow(r, m);
        return m % 2 ? p * std::tanh(b * r) : p;
    });
}

Field real_field(Field f) {
    for (auto& z : f.v) z = cplx(z.real(), 0.0);
    return f;
}

double factorial(int m) {
    double f = 1;
    for (int i = 2; i <= m; ++i) f *= i;
    return f;
}

Field scaled(const Field& a, const rvec& w) {
    Field r = a;
    for (std::size_t i = 0; i < r.v.size(); ++i) r.v[i] *= w[i];
    return r;
}

}  // namespace

Field derivative(const Field& f, int axis) {
    if (f.grid.dim == 1) return multiplier_apply(f, Multiplier([](double xi) { return cplx(0, xi); }));
    return multiplier_apply(f, Multiplier2([axis](double a, double b) { return cplx(0, axis == 0 ? a : b); }));
}

FluidDomain::FluidDomain(Field e, double b_, int nz_) : eta(std::move(e)), b(b_), nz(nz_) { validate(); }

void FluidDomain::validate() const {
    if (!(b > 0)) throw std::invalid_argument("depth b must be positive");
    if (nz < 4 || nz % 2) throw std::invalid_argument("nz must be even and >= 4");
    double lo = INFINITY;
    for (const auto& z : eta.v) lo = std::min(lo, z.real());
    if (!(b + lo > 0)) throw std::invalid_argument("fluid depth b + min eta must be positive");
}

Field dn_flat(const Field& psi, double b) {
    return radial_multiplier(psi, [b](double r) { return r * std::tanh(b * r); });
}

Field dn_taylor(const FluidDomain& dom, const Field& psi, int M, TaylorInfo* info) {
    dom.validate();
    if (psi.grid != dom.grid()) throw std::invalid_argument("psi and eta live on different grids");
    const Grid& g = dom.grid();
    int d = g.dim;
    Field eta = real_field(dom.eta);
    std::vector<Field> grad_eta;
    for (int a = 0; a < d; ++a) grad_eta.push_back(real_field(derivative(eta, a)));
    // eta^m / m!
    std::vector<rvec> powers(M + 1, rvec(g.size(), 1.0));
    for (int m = 1; m <= M; ++m)
        for (std::size_t i = 0; i < g.size(); ++i) powers[m][i] = powers[m - 1][i] * eta.v[i].real() / m;

    std::vector<Field> c{psi};
    Field total(g);
    rvec norms;
    for (int j = 0; j <= M; ++j) {
        if (j > 0) {
            Field cj(g);
            for (int m = 1; m <= j; ++m) cj -= scaled(dn_power(c[j - m], m, dom.b), powers[m]);
            c.push_back(cj);
        }
        Field Gj(g);
        for (int m = 0; m <= j; ++m) Gj += scaled(dn_power(c[j - m], m + 1, dom.b), powers[m]);
        for (int m = 0; m + 1 <= j; ++m) {
            Field base = dn_power(c[j - 1 - m], m, dom.b);
            for (int a = 0; a < d; ++a) Gj -= pointwise(grad_eta[a], scaled(derivative(base, a), powers[m]));
        }
        double nj = l2_norm(Gj);
        norms.push_back(nj);
        if (info) info->term_norms = norms;
        double top = *std::max_element(norms.begin(), norms.end());
        if (j >= 2 && norms[j - 1] > 1e-10 * top && nj >= norms[j - 1])
            throw DNError("Taylor expansion of the DN operator diverges (term ratio >= 1); use the elliptic method");
        total += Gj;
    }
    if (info) info->term_norms = norms;
    return real_field(total);
}

namespace {

// one tridiagonal solve per Fourier mode: rows j = 1..nz, unknowns dv_1..dv_nz
void solve_modes(std::vector<Field>& rhs, const rvec& cbar, double sbar, double dz, const Grid& g) {
    int nz = int(rhs.size()) - 1;
    rvec lo(nz + 1), di(nz + 1), up(nz + 1);
    std::vector<cplx> r(nz + 1);
    for (int k = 0; k < g.n; ++k) {
        double xi2 = g.xi(k) * g.xi(k);
        for (int j = 1; j <= nz; ++j) {
            if (j < nz) {
                lo[j] = j > 1 ? cbar[j - 1] / dz : 0.0;
                up[j] = cbar[j] / dz;
                di[j] = -dz * sbar * xi2 - (cbar[j - 1] + cbar[j]) / dz;
            } else {
                lo[j] = cbar[j - 1] / dz;
                up[j] = 0.0;
                di[j] = -0.5 * dz * sbar * xi2 - cbar[j - 1] / dz;
            }
            r[j] = -rhs[j].v[k];
        }
        for (int j = 2; j <= nz; ++j) {
            double w = lo[j] / di[j - 1];
            di[j] -= w * up[j - 1];
            r[j] -= w * r[j - 1];
        }
        r[nz] /= di[nz];
        for (int j = nz - 1; j >= 1; --j) r[j] = (r[j] - up[j] * r[j + 1]) / di[j];
        for (int j = 1; j <= nz; ++j) rhs[j].v[k] = r[j];
    }
}

Field dn_elliptic_raw(const FluidDomain& dom, const Field& psi, int nz, const EllipticOptions& opt,
                      EllipticInfo* info) {
    const Grid& g = dom.grid();
    const std::size_t n = g.size();
    double b = dom.b, dz = b / nz;
    Field eta = real_field(dom.eta);
    Field etax = real_field(derivative(eta));
    rvec s(n), ex(n);
    double sbar = 0;
    for (std::size_t i = 0; i < n; ++i) {
        s[i] = 1 + eta.v[i].real() / b;
        ex[i] = etax.v[i].real();
        sbar += s[i] / n;
    }
    auto a_at = [&](double z, std::size_t i) { return (1 + z / b) * ex[i]; };
    // c_{j+1/2}
    std::vector<rvec> ch(nz, rvec(n));
    rvec cbar(nz, 0.0);
    for (int j = 0; j < nz; ++j) {
        double z = -(j + 0.5) * dz;
        for (std::size_t i = 0; i < n; ++i) {
            double a = a_at(z, i);
            ch[j][i] = (1 + a * a) / s[i];
            cbar[j] += ch[j][i] / n;
        }
    }
    std::vector<Field> v(nz + 1, Field(g));
    v[0] = real_field(psi);
    std::vector<Field> vx(nz + 1, Field(g)), F(nz, Field(g)), R(nz + 1, Field(g));
    Field dE0(g);

    auto residual = [&]() {
        for (int j = 0; j <= nz; ++j) vx[j] = derivative(v[j]);
        for (int j = 0; j < nz; ++j) {
            double z = -(j + 0.5) * dz;
            for (std::size_t i = 0; i < n; ++i)
                F[j].v[i] = ch[j][i] * (v[j].v[i] - v[j + 1].v[i]) / dz -
                            a_at(z, i) * 0.5 * (vx[j].v[i] + vx[j + 1].v[i]);
        }
        for (int j = 0; j <= nz; ++j) {
            Field E(g);
            double z = -j * dz;
            for (std::size_t i = 0; i < n; ++i) {
                cplx vz = j == 0    ? (v[0].v[i] - v[1].v[i]) / dz
                          : j < nz ? (v[j - 1].v[i] - v[j + 1].v[i]) / (2 * dz)
                                   : cplx(0.0);
                E.v[i] = s[i] * vx[j].v[i] - a_at(z, i) * vz;
            }
            Field dE = derivative(E);
            if (j == 0) {
                dE0 = dE;
                continue;
            }
            for (std::size_t i = 0; i < n; ++i)
                R[j].v[i] = j < nz ? dz * dE.v[i] + F[j - 1].v[i] - F[j].v[i] : 0.5 * dz * dE.v[i] + F[j - 1].v[i];
        }
    };

    auto flux = [&]() {
        Field G(g);
        for (std::size_t i = 0; i < n; ++i) G.v[i] = F[0].v[i] - 0.5 * dz * dE0.v[i];
        return G;
    };
    using Levels = std::vector<Field>;  // index 1..nz
    const Field psi_r = v[0], zero(g);
    auto eval = [&](const Levels& x, bool with_psi) {
        v[0] = with_psi ? psi_r : zero;
        for (int j = 1; j <= nz; ++j) v[j] = x[j];
        residual();
        return R;
    };
    auto precond = [&](const Levels& r) {
        Levels out(nz + 1);
        for (int j = 1; j <= nz; ++j) out[j] = forward(r[j]);
        solve_modes(out, cbar, sbar, dz, g);
        for (int j = 1; j <= nz; ++j) out[j] = real_field(inverse(out[j]));
        return out;
    };
    auto dot = [&](const Levels& a, const Levels& b) {
        double acc = 0;
        for (int j = 1; j <= nz; ++j)
            for (std::size_t i = 0; i < n; ++i) acc += a[j].v[i].real() * b[j].v[i].real();
        return acc;
    };
    auto axpy = [&](Levels& y, double a, const Levels& x) {
        for (int j = 1; j <= nz; ++j)
            for (std::size_t i = 0; i < n; ++i) y[j].v[i] += a * x[j].v[i];
    };

    // right-preconditioned restarted GMRES on the affine residual, started from v_j = psi
    const int m = 16;
    Levels x(nz + 1, psi_r);
    Levels Fx = eval(x, true);
    Field G = flux();
    double scale = std::max(max_abs(psi), 1e-300);
    int it = 0;
    double change = INFINITY;
    while (it < opt.max_iter) {
        Levels r(nz + 1, Field(g));
        axpy(r, -1.0, Fx);
        double beta = std::sqrt(dot(r, r));
        if (beta == 0.0) {
            change = 0.0;
            break;
        }
        std::vector<Levels> V{r};
        for (int j = 1; j <= nz; ++j) V[0][j] *= 1.0 / beta;
        std::vector<rvec> H(m + 1, rvec(m, 0.0));
        rvec cs(m), sn(m), gv(m + 1, 0.0);
        gv[0] = beta;
        int k = 0;
        while (k < m && it < opt.max_iter) {
            Levels w = eval(precond(V[k]), false);
            for (int i = 0; i <= k; ++i) {
                H[i][k] = dot(V[i], w);
                axpy(w, -H[i][k], V[i]);
            }
            H[k + 1][k] = std::sqrt(dot(w, w));
            for (int i = 0; i < k; ++i) {
                double t = cs[i] * H[i][k] + sn[i] * H[i + 1][k];
                H[i + 1][k] = -sn[i] * H[i][k] + cs[i] * H[i + 1][k];
                H[i][k] = t;
            }
            double den = std::hypot(H[k][k], H[k + 1][k]);
            double hk1 = H[k + 1][k];
            cs[k] = H[k][k] / den;
            sn[k] = hk1 / den;
            H[k][k] = den;
            gv[k + 1] = -sn[k] * gv[k];
            gv[k] *= cs[k];
            ++it;
            ++k;
            if (hk1 == 0.0 || std::abs(gv[k]) <= 1e-13 * beta) break;
            for (int j = 1; j <= nz; ++j) w[j] *= 1.0 / hk1;
            V.push_back(std::move(w));
        }
        rvec y(k);
        for (int i = k - 1; i >= 0; --i) {
            double t = gv[i];
            for (int l = i + 1; l < k; ++l) t -= H[i][l] * y[l];
            y[i] = t / H[i][i];
        }
        Levels u(nz + 1, Field(g));
        for (int i = 0; i < k; ++i) axpy(u, y[i], V[i]);
        axpy(x, 1.0, precond(u));
        Fx = eval(x, true);
        Field Gn = flux();
        change = max_abs(Gn - G);
        G = Gn;
        if (change <= opt.tol * std::max(scale, max_abs(G))) break;
    }
    if (!(change <= opt.tol * std::max(scale, max_abs(G))))
    {
        char buf[160];
        std::snprintf(buf, sizeof buf, "elliptic DN solve did not converge (relative flux update %.3e after %d iterations)",
                      change / scale, it);
        throw DNError(buf);
    }
    if (info) {
        info->iterations = std::max(info->iterations, it);
        double r = 0;
        for (int j = 1; j <= nz; ++j) r = std::max(r, max_abs(R[j]));
        info->residual = std::max(info->residual, r / scale);
    }
    return real_field(G);
}

}  // namespace

Field dn_elliptic(const FluidDomain& dom, const Field& psi, const EllipticOptions& opt, EllipticInfo* info) {
    dom.validate();
    if (dom.grid().dim != 1) throw std::invalid_argument("dn_elliptic supports d = 1 only");
    if (psi.grid != dom.grid()) throw std::invalid_argument("psi and eta live on different grids");
    if (info) *info = EllipticInfo{};
    Field fine = dn_elliptic_raw(dom, psi, dom.nz, opt, info);
    if (!opt.richardson) return fine;
    Field coarse = dn_elliptic_raw(dom, psi, dom.nz / 2, opt, info);
    Field out(dom.grid());
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] = (4.0 * fine.v[i] - coarse.v[i]) / 3.0;
    return out;
}

Field DNSolver::operator()(const FluidDomain& dom, const Field& psi) const {
    return method == DNMethod::elliptic ? dn_elliptic(dom, psi, elliptic) : dn_taylor(dom, psi, taylor_order);
}

// ---- symbols ----

namespace {

int nearest_index(const Grid& g, double x) {
    double u = (x + 0.5 * g.L) / g.dx();
    long i = std::lround(u);
    i %= g.n;
    if (i < 0) i += g.n;
    return int(i);
}

HomSymbol hom(const Grid& g, double order, cvec plus, cvec minus) { return {g, order, std::move(plus), std::move(minus)}; }

HomSymbol hom_const(const Grid& g, double order, cplx p, cplx m) {
    return hom(g, order, cvec(g.n, p), cvec(g.n, m));
}

HomSymbol operator*(const HomSymbol& a, const HomSymbol& b) {
    HomSymbol r = a;
    r.order = a.order + b.order;
    for (int i = 0; i < a.grid.n; ++i) r.plus[i] *= b.plus[i], r.minus[i] *= b.minus[i];
    return r;
}

HomSymbol operator+(const HomSymbol& a, const HomSymbol& b) {
    if (std::abs(a.order - b.order) > 1e-12) throw std::logic_error("adding symbols of different order");
    HomSymbol r = a;
    for (int i = 0; i < a.grid.n; ++i) r.plus[i] += b.plus[i], r.minus[i] += b.minus[i];
    return r;
}

HomSymbol scale(const HomSymbol& a, cplx c) {
    HomSymbol r = a;
    for (int i = 0; i < a.grid.n; ++i) r.plus[i] *= c, r.minus[i] *= c;
    return r;
}

HomSymbol times_field(const HomSymbol& a, const cvec& f) {
    HomSymbol r = a;
    for (int i = 0; i < a.grid.n; ++i) r.plus[i] *= f[i], r.minus[i] *= f[i];
    return r;
}

HomSymbol reciprocal(const HomSymbol& a) {
    HomSymbol r = a;
    r.order = -a.order;
    for (int i = 0; i < a.grid.n; ++i) r.plus[i] = 1.0 / a.plus[i], r.minus[i] = 1.0 / a.minus[i];
    return r;
}

cvec dx_vec(const Grid& g, const cvec& c) { return derivative(Field(g, c)).v; }

HomSymbol d_x(const HomSymbol& a) { return hom(a.grid, a.order, dx_vec(a.grid, a.plus), dx_vec(a.grid, a.minus)); }

// D_x = -i d_x
HomSymbol D_x(const HomSymbol& a) { return scale(d_x(a), cplx(0, -1)); }

HomSymbol d_xi(const HomSymbol& a) {
    HomSymbol r = a;
    r.order = a.order - 1;
    for (int i = 0; i < a.grid.n; ++i) r.plus[i] *= a.order, r.minus[i] *= -a.order;
    return r;
}

HomSymbol zero_like(const Grid& g, double order) { return hom_const(g, order, 0.0, 0.0); }

}  // namespace

cplx HomSymbol::at(int i, double xi) const {
    if (xi == 0.0) return order > 0 ? 0.0 : (order == 0 ? 0.5 * (plus[i] + minus[i]) : cplx(INFINITY));
    return (xi > 0 ? plus[i] : minus[i]) * std::pow(std::abs(xi), order);
}

cplx HomSymbol::operator()(double x, double xi) const { return at(nearest_index(grid, x), xi); }

Symbol HomSymbol::symbol() const {
    Grid g = grid;
    cvec p = plus, m = minus;
    double o = order;
    auto lookup = [g](const cvec& c) { return [g, c](double x) { return c[nearest_index(g, x)]; }; };
    auto side = [o](int sgn) {
        return [o, sgn](double xi) {
            if (xi == 0.0) return cplx(o == 0 ? 0.5 : 0.0);
            return (sgn * xi > 0) ? cplx(std::pow(std::abs(xi), o)) : cplx(0.0);
        };
    };
    return Symbol::from_terms({{lookup(p), side(+1)}, {lookup(m), side(-1)}}, o, 0.0);
}

cplx DNSymbols::lambda(double x, double xi) const {
    Vec2 xx{x, 0}, ee{xi, 0};
    return lambda1_at(xx, ee) + lambda0_at(xx, ee);
}

DNSymbols dn_symbols(const Field& eta_field, int J) {
    const Grid& g = eta_field.grid;
    if (g.dim != 1) throw std::invalid_argument("grid symbols support d = 1; use the analytic overload for d = 2");
    if (J < 1) throw std::invalid_argument("J must be >= 1");
    Field eta = real_field(eta_field);
    cvec e1 = real_field(derivative(eta)).v, e2 = real_field(derivative(derivative(eta))).v;
    cvec c(g.n), q(g.n), ce2(g.n);
    for (int i = 0; i < g.n; ++i) {
        q[i] = 1.0 + e1[i] * e1[i];
        c[i] = 1.0 / q[i];
        ce2[i] = c[i] * e2[i];
    }
    DNSymbols S;
    S.d = 1;
    // a^(1)_pm = c (i eta' xi +- |xi|)
    cvec ap(g.n), am(g.n), bp(g.n), bm(g.n);
    for (int i = 0; i < g.n; ++i) {
        cplx ie(0, e1[i].real());
        ap[i] = c[i] * (ie + 1.0);
        am[i] = c[i] * (-ie + 1.0);
        bp[i] = c[i] * (ie - 1.0);
        bm[i] = c[i] * (-ie - 1.0);
    }
    HomSymbol a1p = hom(g, 1, ap, am), a1m = hom(g, 1, bp, bm);
    S.a_plus.push_back(a1p);
    S.a_minus.push_back(a1m);
    if (J >= 2) {
        HomSymbol N = scale(d_xi(a1m) * d_x(a1p), cplx(0, 1));
        HomSymbol diff = a1p + scale(a1m, -1.0);  // a+ - a-
        HomSymbol inv = reciprocal(diff);
        S.a_minus.push_back((N + scale(times_field(a1m, ce2), -1.0)) * inv);
        S.a_plus.push_back(scale((N + scale(times_field(a1p, ce2), -1.0)) * inv, -1.0));
    }
    // a^(m-1)_- = (a^(1)_- - a^(1)_+)^-1 sum_{k,l in [m,1]} sum_{alpha = k+l-m} d_xi^alpha a^(k)_- D_x^alpha a^(l)_+ / alpha!
    HomSymbol inv_m = reciprocal(a1m + scale(a1p, -1.0));
    for (int m = 0; (int)S.a_minus.size() < J; --m) {
        HomSymbol acc = zero_like(g, m);
        for (int k = m; k <= 1; ++k)
            for (int l = m; l <= 1; ++l) {
                int alpha = k + l - m;
                if (alpha < 0) continue;
                HomSymbol A = S.a_minus[1 - k], B = S.a_plus[1 - l];
                for (int r = 0; r < alpha; ++r) A = d_xi(A), B = D_x(B);
                acc = acc + scale(A * B, 1.0 / factorial(alpha));
            }
        HomSymbol next = acc * inv_m;
        S.a_minus.push_back(next);
        S.a_plus.push_back(scale(next, -1.0));
    }
    // lambda^(1) = sqrt((1+eta'^2) xi^2 - (eta' xi)^2) = |xi|
    S.lambda1 = hom_const(g, 1, 1.0, 1.0);
    // lambda^(0) = (1+eta'^2)/(2 lambda1) { d_x(alpha1 eta') + i d_xi lambda1 d_x alpha1 }
    HomSymbol alpha1 = times_field(S.lambda1 + times_field(hom_const(g, 1, cplx(0, 1), cplx(0, -1)), e1), c);
    HomSymbol brace = d_x(times_field(alpha1, e1)) + scale(d_xi(S.lambda1) * d_x(alpha1), cplx(0, 1));
    S.lambda0 = times_field(scale(reciprocal(S.lambda1) * brace, 0.5), q);

    auto L1 = S.lambda1, L0 = S.lambda0;
    auto AP = S.a_plus, AM = S.a_minus;
    S.lambda1_at = [L1](const Vec2& x, const Vec2& xi) { return L1(x[0], xi[0]).real(); };
    S.lambda0_at = [L0](const Vec2& x, const Vec2& xi) { return L0(x[0], xi[0]); };
    S.a_at = [AP, AM](const Vec2& x, const Vec2& xi, int sign, int order) {
        const auto& v = sign > 0 ? AP : AM;
        std::size_t k = std::size_t(1 - order);
        if (k >= v.size()) throw std::out_of_range("symbol order not computed");
        return v[k](x[0], xi[0]);
    };
    return S;
}

DNSymbols dn_symbols(const SurfaceMetric& m, int J) {
    if (J < 1 || J > 2) throw std::invalid_argument("analytic symbols provide orders 1 and 0 (J <= 2)");
    int d = m.d;
    auto dot = [d](const Vec2& a, const Vec2& b) {
        double s = 0;
        for (int i = 0; i < d; ++i) s += a[i] * b[i];
        return s;
    };
    auto mv = [](const Mat2& h, const Vec2& v) { return Vec2{h[0] * v[0] + h[1] * v[1], h[2] * v[0] + h[3] * v[1]}; };
    DNSymbols S;
    S.d = d;
    S.lambda1_at = [=](const Vec2& x, const Vec2& xi) {
        Vec2 g = m.grad(x);
        double p = dot(g, xi);
        return std::sqrt(std::max(0.0, (1 + dot(g, g)) * dot(xi, xi) - p * p));
    };
    S.lambda0_at = [=](const Vec2& x, const Vec2& xi) {
        Vec2 g = m.grad(x);
        Mat2 H = m.hess(x);
        double q = 1 + dot(g, g), p = dot(g, xi), xx = dot(xi, xi);
        double L = std::sqrt(std::max(0.0, q * xx - p * p));
        if (L == 0.0) return cplx(0.0);
        Vec2 Hg = mv(H, g), Hx = mv(H, xi);
        cplx alpha = cplx(L, p) / q, div = alpha * (H[0] + (d > 1 ? H[3] : 0.0)), tr = 0.0;
        for (int k = 0; k < d; ++k) {
            double qk = 2 * Hg[k], pk = Hx[k];
            double Lk = (qk * xx - 2 * p * pk) / (2 * L);
            cplx ak = cplx(Lk, pk) / q - cplx(L, p) * qk / (q * q);
            double Lxi = (q * xi[k] - p * g[k]) / L;
            div += ak * g[k];
            tr += cplx(0, 1) * Lxi * ak;
        }
        return q / (2 * L) * (div + tr);
    };
    S.a_at = [=](const Vec2& x, const Vec2& xi, int sign, int order) -> cplx {
        Vec2 g = m.grad(x);
        Mat2 H = m.hess(x);
        double q = 1 + dot(g, g), c = 1 / q, p = dot(g, xi), xx = dot(xi, xi);
        double r = std::sqrt(std::max(0.0, c * xx - c * c * p * p));
        cplx ap = cplx(0.0, c * p) + r, am = cplx(0.0, c * p) - r;
        if (order == 1) return sign > 0 ? ap : am;
        if (order != 0) throw std::out_of_range("symbol order not computed");
        if (r == 0.0) return 0.0;
        Vec2 Hg = mv(H, g), Hx = mv(H, xi);
        cplx N = 0.0;
        for (int k = 0; k < d; ++k) {
            double ck = -2 * c * c * Hg[k], pk = Hx[k];
            double r2k = ck * xx - 2 * c * ck * p * p - 2 * c * c * p * pk;
            cplx dxa = cplx(0, ck * p + c * pk) + r2k / (2 * r);
            double r2xi = 2 * c * xi[k] - 2 * c * c * p * g[k];
            cplx dxia = cplx(0, c * g[k]) - r2xi / (2 * r);
            N += cplx(0, 1) * dxia * dxa;
        }
        double lap = H[0] + (d > 1 ? H[3] : 0.0);
        if (sign < 0) return (N - c * lap * am) / (ap - am);
        return (N - c * lap * ap) / (am - ap);
    };
    return S;
}

BVFields b_v_fields(const FluidDomain& dom, const Field& psi, const DNSolver& solver) {
    BVFields r;
    r.G = solver(dom, psi);
    Field ex = real_field(derivative(dom.eta)), px = real_field(derivative(psi));
    r.B = Field(dom.grid());
    r.V = Field(dom.grid());
    for (std::size_t i = 0; i < r.G.v.size(); ++i) {
        double e = ex.v[i].real();
        double B = (e * px.v[i].real() + r.G.v[i].real()) / (1 + e * e);
        r.B.v[i] = B;
        r.V.v[i] = px.v[i].real() - B * e;
    }
    return r;
}

double shape_derivative_check(const FluidDomain& dom, const Field& psi, const Field& phi, double h,
                              const DNSolver& solver) {
    BVFields bv = b_v_fields(dom, psi, solver);
    FluidDomain up = dom, dn = dom;
    up.eta = real_field(dom.eta + cplx(h) * phi);
    dn.eta = real_field(dom.eta - cplx(h) * phi);
    Field fd = cplx(0.5 / h) * (solver(up, psi) - solver(dn, psi));
    Field exact = cplx(-1.0) * (solver(dom, real_field(pointwise(bv.B, phi))) + real_field(derivative(pointwise(bv.V, phi))));
    double base = l2_norm(bv.G);
    if (base == 0.0) return l2_norm(fd - exact);
    return l2_norm(fd - exact) / base;
}

Field dn_paralinearization_remainder(const FluidDomain& dom, const Field& psi, const DNSolver& solver,
                                     const AdmissiblePair& adm) {
    BVFields bv = b_v_fields(dom, psi, solver);
    DNSymbols S = dn_symbols(dom.eta, 2);
    Symbol lam1 = S.lambda1.symbol(), lam0 = S.lambda0.symbol();
    std::vector<SymbolTerm> terms = lam1.terms;
    terms.insert(terms.end(), lam0.terms.begin(), lam0.terms.end());
    Symbol lam = Symbol::from_terms(terms, 1.0, 0.0);
    Field omega = psi - paradiff_apply(field_symbol(bv.B), dom.eta, adm);
    Field ex = real_field(derivative(dom.eta));
    Field para = paradiff_apply(lam, omega, adm) - paradiff_apply(field_symbol(bv.V), ex, adm);
    return real_field(bv.G - para);
}

}  // namespace microloc

#include <cmath>

#include "doctest.h"
#include "microloc/errors.hpp"
#include "microloc/waterwave.hpp"

using namespace microloc;

namespace {

Field fn(const Grid& g, const std::function<double(double)>& f) {
    return from_function(g, [&](double x) { return cplx(f(x)); });
}

double rel_l2(const Field& a, const Field& b) { return l2_norm(a - b) / l2_norm(b); }

SurfaceState torus_state(int n, const std::function<double(double)>& eta, const std::function<double(double)>& psi,
                         DNMethod m = DNMethod::elliptic, int nz = 32) {
    Grid g(n, 2 * M_PI);
    WWParams p;
    p.nz = nz;
    p.dn.method = m;
    p.dn.taylor_order = 6;
    return {fn(g, eta), fn(g, psi), 0.0, p};
}

double max_dt(const Grid& g) { return 0.5 / std::pow(g.nyquist(), 1.5); }

}  // namespace

TEST_CASE("mean curvature") {
    Grid g(256, 2 * M_PI);
    CHECK(max_abs(mean_curvature(Field(g))) == 0.0);
    double eps = 1e-3;
    Field h = mean_curvature(fn(g, [eps](double x) { return eps * std::cos(x); }));
    CHECK(max_abs(h + fn(g, [eps](double x) { return eps * std::cos(x); })) < 1e-8);

    Grid G(2048, 20.0);
    double R = 4.0;
    Field arc = fn(G, [R](double x) { return std::abs(x) < 3.0 ? bump(x / 3.0) * std::sqrt(R * R - x * x) : 0.0; });
    Field H = mean_curvature(arc);
    double worst = 0;
    for (int i = 0; i < G.n; ++i)
        if (std::abs(G.x(i)) <= 1.0) worst = std::max(worst, std::abs(H.v[i].real() + 1.0 / R));
    CHECK(worst < 1e-4);
}

TEST_CASE("ZCS right-hand side") {
    SurfaceState rest = torus_state(32, [](double) { return 0.0; }, [](double) { return 0.0; });
    WWRhs r = zcs_rhs(rest);
    CHECK(max_abs(r.deta) == 0.0);
    CHECK(max_abs(r.dpsi) == 0.0);

    double eps = 1e-3;
    SurfaceState s = torus_state(32, [](double) { return 0.0; }, [eps](double x) { return eps * std::sin(x); });
    r = zcs_rhs(s);
    Field expect = fn(s.grid(), [eps](double x) { return eps * std::tanh(1.0) * std::sin(x); });
    CHECK(max_abs(r.deta - expect) < eps * eps);

    SurfaceState t = torus_state(64, [](double x) { return 0.1 * std::cos(x) + 0.02 * std::sin(3 * x); },
                                 [](double x) { return 0.05 * std::sin(2 * x); });
    r = zcs_rhs(t);
    for (const Field* f : {&r.deta, &r.dpsi})
        for (const auto& z : f->v) CHECK(z.imag() == 0.0);
}

TEST_CASE("integration: rest, linear dispersion, reversibility") {
    SurfaceState rest = torus_state(32, [](double) { return 0.0; }, [](double) { return 0.0; });
    auto traj = integrate(rest, 0.1, max_dt(rest.grid()));
    CHECK(max_abs(traj.back().eta) == 0.0);
    CHECK(max_abs(traj.back().psi) == 0.0);

    double eps = 1e-4;
    SurfaceState s = torus_state(32, [eps](double x) { return eps * std::cos(x); }, [](double) { return 0.0; });
    double omega = std::sqrt(2.0 * std::tanh(1.0)), T = 2 * M_PI / omega;
    IntegrateOptions o;
    o.eps_mollify = 0.0;
    SurfaceState end = integrate(s, T, max_dt(s.grid()), o).back();
    SurfaceState lin = linear_evolution(s, T);
    CHECK(rel_l2(end.eta, lin.eta) < 1e-3);
    CHECK(rel_l2(end.eta, s.eta) < 1e-3);
    CHECK(end.t == doctest::Approx(T));

    SurfaceState f = integrate(s, 0.2, max_dt(s.grid()), o).back();
    SurfaceState back = integrate(f, -0.2, max_dt(s.grid()), o).back();
    CHECK(max_abs(back.eta - s.eta) < 1e-5 * eps);
    CHECK(max_abs(back.psi - s.psi) < 1e-5 * eps);

    CHECK_THROWS_AS(integrate(s, 0.1, 10 * max_dt(s.grid())), std::invalid_argument);
}

TEST_CASE("blow-up is reported with a time stamp") {
    SurfaceState s = torus_state(32, [](double x) { return 0.01 * std::cos(x); }, [](double) { return 0.0; });
    s.psi.v[5] = NAN;
    try {
        integrate(s, 0.1, max_dt(s.grid()));
        FAIL("expected blow-up");
    } catch (const BlowUp& e) {
        CHECK(std::string(e.what()).find("t = ") != std::string::npos);
    }
}

TEST_CASE("mass, energy and realness over unit time") {
    SurfaceState s = torus_state(32, [](double x) { return 0.01 * std::cos(x) + 0.004 * std::sin(2 * x); },
                                 [](double x) { return 0.01 * std::sin(x); });
    IntegrateOptions o;
    o.eps_mollify = 0.0;
    o.samples = 4;
    auto traj = integrate(s, 1.0, max_dt(s.grid()), o);
    REQUIRE(traj.size() == 5);
    double m0 = ww_mass(s), e0 = ww_energy(s);
    for (const auto& st : traj) {
        CHECK(std::abs(ww_mass(st) - m0) <= 1e-8);
        CHECK(std::abs(ww_energy(st) - e0) <= 1e-5 * std::abs(e0));
        for (const auto& z : st.eta.v) CHECK(z.imag() == 0.0);
    }
}

TEST_CASE("linear limit is approached at second order") {
    rvec eps{1e-2, 1e-3, 1e-4}, err;
    IntegrateOptions o;
    o.eps_mollify = 0.0;
    for (double e : eps) {
        SurfaceState s = torus_state(32, [e](double x) { return e * std::cos(x); }, [e](double x) { return e * std::sin(2 * x); });
        SurfaceState end = integrate(s, 1.0, max_dt(s.grid()), o).back();
        SurfaceState lin = linear_evolution(s, 1.0);
        err.push_back(std::hypot(l2_norm(end.eta - lin.eta), l2_norm(end.psi - lin.psi)));
    }
    LogFit f = loglog_fit(eps, err, 0.0);
    CHECK(f.slope == doctest::Approx(2.0).epsilon(0.2));
}

TEST_CASE("symmetrizer symbols") {
    SurfaceState flat = torus_state(64, [](double) { return 0.0; }, [](double) { return 0.0; });
    WWSymbols f = symmetrizer_symbols(flat);
    for (double x : {-1.0, 0.3, 2.0})
        for (double xi : {-3.0, 0.5, 7.0}) {
            double a = std::abs(xi);
            CHECK(std::abs(f.l2(x, xi) - a * a) < 1e-12);
            CHECK(std::abs(f.l1(x, xi)) < 1e-12);
            CHECK(std::abs(f.gamma(x, xi) - std::pow(a, 1.5)) < 1e-12);
            CHECK(std::abs(f.p(x, xi) - std::sqrt(a)) < 1e-12);
            CHECK(std::abs(f.q(x, xi) - 1.0) < 1e-12);
            CHECK(std::abs(f.zeta(x, xi) - 1 / std::sqrt(a)) < 1e-12);
        }

    SurfaceState s = torus_state(64, [](double x) { return 0.2 * std::cos(x) + 0.1 * std::sin(2 * x); },
                                 [](double) { return 0.0; });
    WWSymbols w = symmetrizer_symbols(s);
    DNSymbols dn = dn_symbols(s.eta, 1);
    for (int i = 0; i < 64; i += 5) {
        double x = s.grid().x(i);
        for (double xi : {-4.0, -0.7, 1.3, 6.0}) {
            cplx g = w.gamma(x, xi);
            CHECK(std::abs(g * g - w.l2(x, xi) * dn.lambda1(x, xi)) < 1e-12 * std::norm(g) + 1e-14);
            CHECK(std::abs(w.gamma(x, 2 * xi) - std::pow(2.0, 1.5) * g) < 1e-12 * std::abs(g));
            double e = w.slope.v[i].real();
            CHECK(std::abs(w.q(x, xi) - std::pow(1 + e * e, 0.25)) < 1e-12);
            CHECK(std::abs(w.zeta(x, xi) * w.p(x, xi) - w.q(x, xi)) < 1e-12);
        }
    }
}

TEST_CASE("good unknown") {
    SurfaceState flat = torus_state(64, [](double) { return 0.0; }, [](double x) { return std::sin(x) + 0.3 * std::cos(5 * x); });
    CHECK(max_abs(good_unknown(flat) - flat.psi) == 0.0);

    auto eta = [](double x) { return 0.1 * std::cos(x) + 0.05 * std::cos(6 * x); };
    SurfaceState a = torus_state(64, eta, [](double x) { return std::sin(x) + std::cos(2 * x); });
    SurfaceState b = torus_state(64, eta, [](double x) { return std::cos(7 * x); });
    SurfaceState ab = torus_state(64, eta, [](double x) { return 2 * (std::sin(x) + std::cos(2 * x)) - std::cos(7 * x); });
    Field lhs = good_unknown(ab), rhs = 2.0 * good_unknown(a) - good_unknown(b);
    CHECK(max_abs(lhs - rhs) < 1e-12 * max_abs(lhs));

    Field tb = a.psi - good_unknown(a);
    Field th = forward(tb);
    double lowpass = 0;
    for (int k = 0; k < 64; ++k)
        if (std::abs(a.grid().xi(k)) < 0.25) lowpass = std::max(lowpass, std::abs(th.v[k]));
    CHECK(lowpass < 1e-13);
    CHECK(max_abs(tb) > 1e-3);
}

TEST_CASE("symmetrized variable") {
    Grid g(256, 40.0);
    auto psi = [](double x) { return std::exp(-x * x) * std::cos(6 * x) + 0.5 * std::exp(-(x - 3) * (x - 3)); };
    WWParams p;
    p.nz = 32;
    SurfaceState flat{Field(g), fn(g, psi), 0.0, p};
    double mu = 1.5;
    for (bool dyadic : {false, true}) {
        WWOperators ops;
        ops.dyadic = dyadic;
        SymmetrizedPair w = symmetrized_pair(flat, mu, ops);
        Field uh = forward(w.u), ph = forward(flat.psi);
        double worst = 0, scale = 0;
        for (int k = 0; k < g.n; ++k) {
            double xi = std::abs(g.xi(k));
            if (xi < 2.0) continue;
            double expect = std::pow(xi, mu) * std::abs(ph.v[k]);
            worst = std::max(worst, std::abs(std::abs(uh.v[k]) - expect));
            scale = std::max(scale, expect);
        }
        if (!dyadic) CHECK(worst < 1e-6 * scale);
        if (dyadic) CHECK(worst < 1e-2 * scale);
        for (std::size_t i = 0; i < w.u.v.size(); ++i) CHECK(std::abs(w.ubar.v[i] - std::conj(w.u.v[i])) < 1e-10);
    }

    auto eta = [](double x) { return 0.05 * std::exp(-x * x / 4); };
    SurfaceState a{fn(g, eta), fn(g, psi), 0.0, p};
    SurfaceState b{fn(g, eta), fn(g, [](double x) { return std::exp(-(x + 2) * (x + 2)) * std::sin(4 * x); }), 0.0, p};
    SurfaceState ab{a.eta, a.psi + b.psi, 0.0, p};
    SurfaceState z{a.eta, Field(g), 0.0, p};
    Field u_ab = symmetrized_u(ab, 1.0), rhs = symmetrized_u(a, 1.0) + symmetrized_u(b, 1.0) - symmetrized_u(z, 1.0);
    CHECK(max_abs(u_ab - rhs) < 1e-12 * max_abs(u_ab));
}

TEST_CASE("experiments: reductions") {
    WWSmoothingConfig c;
    c.run.n = 1024;
    c.run.L = 100.0;
    c.run.h_grid = geometric_h_grid(0.25, std::sqrt(0.5), 6);
    c.bump_amplitude = 0.0;
    c.x_s = 0.0;
    c.t0 = 0.5;
    ExperimentResult r = ww_smoothing_experiment(c);
    for (const auto& ray : r.extras["rays"]) CHECK(ray["xi_inf"].get<double>() == doctest::Approx(ray["xi0"].get<double>()));
    for (std::size_t i = 0; i < c.xi0.size(); ++i) {
        const ProbeResult& p = r.report.probe("predicted_" + std::to_string(i));
        CHECK(p.x0 == doctest::Approx(smoothing_locus(c.xi0[i], c.t0, 1.5)).epsilon(1e-12));
    }

    WWInfiniteConfig ic;
    ic.run.n = 1024;
    ic.run.L = 100.0;
    ic.run.h_grid = geometric_h_grid(0.25, std::sqrt(0.5), 6);
    ic.t0 = 0.0;
    ExperimentResult z = ww_infinite_experiment(ic);
    CHECK(z.report.probe("predicted").x0 == ic.x0);
    CHECK(z.report.probe("predicted").xi0 == ic.xi0);
}

#include <cmath>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "microloc/quantize.hpp"

using namespace microloc;

namespace {

Field random_field(const Grid& g, std::mt19937& rng) {
    std::normal_distribution<double> nd;
    Field f(g);
    for (auto& z : f.v) z = {nd(rng), nd(rng)};
    return f;
}

// smooth random field: random spectrum with Gaussian envelope
Field smooth_random(const Grid& g, std::mt19937& rng, double width = 2.0) {
    Field f = random_field(g, rng);
    Field s = forward(f);
    multiply_spectrum(s, [width](double xi) { return cplx(std::exp(-xi * xi / (2 * width * width))); });
    Field r = inverse(s);
    for (int i = 0; i < g.n; ++i) r.v[i] *= std::exp(-g.x(i) * g.x(i) / 4.0);
    return r;
}

double rel_diff(const Field& a, const Field& b) { return max_abs(a - b) / std::max(max_abs(b), 1e-300); }

}  // namespace

TEST_CASE("bump and smoothstep") {
    CHECK(bump(0.0) == 1.0);
    CHECK(bump(0.5) == 1.0);
    CHECK(bump(1.0) == 0.0);
    CHECK(bump(-1.3) == 0.0);
    CHECK(bump(0.75) == doctest::Approx(0.5));
    for (double r = -1.2; r < 1.2; r += 0.013) {
        double fd = (bump(r + 1e-6) - bump(r - 1e-6)) / 2e-6;
        CHECK(std::abs(bump_deriv(r) - fd) < 1e-5);
        CHECK(r * bump_deriv(r) <= 0.0);
    }
}

TEST_CASE("op_quantize trivial symbols") {
    std::mt19937 rng(1);
    Grid g(128, 20.0);
    Field u = smooth_random(g, rng);
    Symbol one = Symbol::in_x([](double) { return cplx(1.0); });
    for (auto path : {QuantPath::separable, QuantPath::dense})
        CHECK(rel_diff(op_quantize(one, u, 0.3, 1.0, 1.0, path), u) < 1e-12);

    Symbol xs = Symbol::in_x([](double x) { return cplx(x); }, 1.0);
    Field expect(g);
    for (int i = 0; i < g.n; ++i) expect.v[i] = 0.5 * g.x(i) * u.v[i];
    for (auto path : {QuantPath::separable, QuantPath::dense})
        CHECK(rel_diff(op_quantize(xs, u, 0.5, 1.0, 0.0, path), expect) < 1e-12);

    Symbol xis = Symbol::in_xi([](double xi) { return cplx(xi); }, 1.0);
    for (double h : {0.1, 0.7, 3.0}) {
        Field ref = multiplier_apply(u, Multiplier([h](double xi) { return cplx(h * xi); }));
        CHECK(rel_diff(op_quantize(xis, u, h, 0.0, 1.0), ref) < 1e-10);
    }
    CHECK_THROWS(op_quantize(one, u, 0.0, 1, 1));
    CHECK_THROWS(op_quantize(one, u, -1.0, 1, 1));
}

TEST_CASE("dense and separable paths agree on random separable symbols") {
    std::mt19937 rng(2);
    std::uniform_real_distribution<double> ud(-1, 1);
    Grid g(128, 16.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<SymbolTerm> terms;
        int m = 1 + trial % 3;
        for (int t = 0; t < m; ++t) {
            double a = ud(rng), b = ud(rng), c = ud(rng), d = 1 + ud(rng);
            terms.push_back({[=](double x) { return cplx(std::cos(a * x + b), c); },
                             [=](double xi) { return cplx(std::exp(-d * xi * xi / 4), a * xi); }});
        }
        Symbol s = Symbol::from_terms(terms);
        Field u = random_field(g, rng);
        double h = 0.2 + 0.6 * (ud(rng) + 1), delta = 0.5 * (1 + ud(rng)), rho = 0.5 * (1 + ud(rng));
        Field fast = op_quantize(s, u, h, delta, rho, QuantPath::separable);
        Field slow = op_quantize(s, u, h, delta, rho, QuantPath::dense);
        CHECK(rel_diff(fast, slow) < 1e-10);
    }
}

TEST_CASE("weighted norm") {
    std::mt19937 rng(4);
    Grid g(1024, 60.0);
    Field gauss = from_function(g, [](double x) { return cplx(std::pow(M_PI, -0.25) * std::exp(-x * x / 2)); });
    CHECK(weighted_norm(gauss, 0, 0) == doctest::Approx(1.0).epsilon(1e-10));
    Field u = random_field(g, rng);
    CHECK(weighted_norm(u, 0, 0) == doctest::Approx(l2_norm(u)).epsilon(1e-14));

    Grid gs(128, 12.0);
    const double nus[] = {0.0, 0.5, 1.0, 2.0}, ks[] = {0.0, 1.0, 2.0};
    for (int trial = 0; trial < 100; ++trial) {
        Field f = random_field(gs, rng);
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 3; ++b) {
                double w = weighted_norm(f, nus[a], ks[b]);
                if (a + 1 < 4) CHECK(w <= weighted_norm(f, nus[a + 1], ks[b]) * (1 + 1e-14));
                if (b + 1 < 3) CHECK(w <= weighted_norm(f, nus[a], ks[b + 1]) * (1 + 1e-14));
            }
    }
}

TEST_CASE("dyadic partition") {
    Grid g(2048, 128.0);
    DyadicPartition p = make_dyadic_partition(g, 2.0);
    CHECK(p.J == 6);
    double worst = 0.0;
    for (int i = 0; i < g.n; ++i) {
        double s = 0;
        for (int j = 0; j <= p.J; ++j) {
            CHECK(p.pieces[j][i] >= 0.0);
            s += p.pieces[j][i];
        }
        worst = std::max(worst, std::abs(s - 1));
    }
    CHECK(worst < 1e-10);
    CHECK(p.pieces[0][g.n / 2] == 1.0);
    for (int i = 0; i < g.n; ++i) {
        double r = std::abs(g.x(i));
        if (r < 8.0 / p.C || r > p.C * 8.0) CHECK(p.pieces[3][i] == 0.0);
    }
    CHECK_THROWS(make_dyadic_partition(Grid(64, 3.0), 2.0));
    CHECK_THROWS(make_dyadic_partition(g, 1.2));

    Grid g2(64, 40.0, 2);
    DyadicPartition p2 = make_dyadic_partition(g2, 2.0);
    for (std::size_t i = 0; i < g2.size(); ++i) {
        double s = 0;
        for (const auto& piece : p2.pieces) s += piece[i];
        CHECK(std::abs(s - 1) < 1e-10);
    }
}

TEST_CASE("dyadic norm examples") {
    Grid g(2048, 128.0);
    // C = 1.8 leaves a plateau psi_2 == 1 on 3.6 <= |x| <= 4.44
    DyadicPartition p = make_dyadic_partition(g, 1.8);
    Field u(g);
    for (int i = 0; i < g.n; ++i) {
        double x = g.x(i);
        u.v[i] = bump((x - 4.0) / 0.4) * std::polar(1.0, 2.0 * x);
    }
    for (int k = 0; k <= 2; ++k) {
        double single = std::pow(2.0, 2 * k) * weighted_norm(p.apply(2, u), 1.0, 0.0);
        double full = dyadic_norm(u, 1.0, k, p);
        CHECK(std::abs(full - single) < 1e-8 * full);
    }
    double a = dyadic_norm(u, 1.0, 1.0, p);
    CHECK(dyadic_norm(2.0 * u, 1.0, 1.0, p) == doctest::Approx(2 * a).epsilon(1e-13));
}

TEST_CASE("dyadic norm equivalence") {
    Grid g(2048, 256.0);
    DyadicPartition p = make_dyadic_partition(g, 2.0);
    double worst = 1.0;
    for (int nu = 0; nu <= 2; ++nu)
        for (int k = 0; k <= 2; ++k) worst = std::max(worst, fixtures::norm_equivalence_constant(p, nu, k, 50, 11 + 3 * nu + k));
    MESSAGE("C0 = " << worst);
    CHECK(worst <= 4.0);
}

TEST_CASE("loglog fit and h grids") {
    rvec h = geometric_h_grid(0.25, 0.5, 6), y;
    for (double v : h) y.push_back(3.0 * std::pow(v, 1.7));
    LogFit f = loglog_fit(h, y);
    CHECK(f.slope == doctest::Approx(1.7).epsilon(1e-12));
    CHECK(f.r2 == doctest::Approx(1.0));
    rvec tiny(6, 1e-20);
    CHECK(std::isinf(loglog_fit(h, tiny).slope));
    rvec d = default_h_grid();
    CHECK(d.size() == 8);
    CHECK(d.front() == 0.25);
    CHECK(d.back() == std::ldexp(1.0, -9));
}

TEST_CASE("disjoint window gives rapid decay") {
    Grid g(1024, 100.0);
    Field u = wave_packet(g, 0.0, 5.0, 1.0, true);
    rvec hs = geometric_h_grid(0.25, 0.5, 6);
    DecayFit fit = estimate_decay_order(u, 2.0, 1.0, 1.0, 1.0, hs);
    CHECK(fit.mu >= 8.0);
    // dense oracle at every h
    Symbol w = default_window(2.0, 1.0);
    for (std::size_t i = 0; i < fit.h.size(); ++i) {
        double dense = l2_norm(op_quantize(w, u, fit.h[i], 1.0, 1.0, QuantPath::dense)) / l2_norm(u);
        CHECK(std::abs(dense - fit.norms[i]) < 1e-12);
    }
}

TEST_CASE("admissible h truncation") {
    Grid g(256, 64.0);
    SupportBox box{1.5, 2.5, 0.75, 1.25};
    rvec hs = admissible_h(g, box, 1.0, 1.0, default_h_grid());
    for (double h : hs) {
        CHECK(2.5 / h <= 32.0);
        CHECK(1.25 / h <= g.nyquist());
    }
    CHECK(hs.size() == 2);
}

TEST_CASE("sharp Garding lower bound") {
    Grid g(512, 80.0);
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> ud(-1, 1);
    for (int trial = 0; trial < 10; ++trial) {
        double x0 = 2 * ud(rng), xi0 = 1 + ud(rng) * 0.5, rx = 0.5 + 0.2 * ud(rng), rxi = 0.4 + 0.1 * ud(rng);
        Symbol a = window_symbol(x0, xi0, rx, rxi);
        double worst = 0.0;
        rvec negs;
        for (double h : geometric_h_grid(0.5, 0.5, 5)) {
            // packet sitting on the edge of the scaled support, where KN operators go negative
            double d = 0.5, r = 0.5;
            Field u = wave_packet(g, (x0 + rx) / std::pow(h, d), (xi0 - rxi) / std::pow(h, r), 1.0, true);
            double val = inner(u, op_quantize(a, u, h, d, r)).real();
            double neg = std::max(0.0, -val);
            negs.push_back(neg);
            worst = std::max(worst, neg / std::pow(h, d + r));
        }
        MESSAGE("Garding constant C = " << worst);
        CHECK(std::isfinite(worst));
        CHECK(worst < 1.0);
    }
}

TEST_CASE("composition remainder order") {
    Grid g(1024, 80.0);
    auto G = [](double t, double c) { return std::exp(-(t - c) * (t - c) / 2); };
    auto dG = [&](double t, double c) { return -(t - c) * G(t, c); };
    Symbol a = Symbol::from_terms({{[&](double x) { return cplx(G(x, 0.3)); }, [&](double xi) { return cplx(G(xi, -0.2)); }}});
    Symbol b = Symbol::from_terms({{[&](double x) { return cplx(G(x, -0.5)); }, [&](double xi) { return cplx(G(xi, 0.4)); }}});
    Field u = wave_packet(g, 0.5, 0.5, 1.5, true);
    for (double dr : {0.5, 1.0}) {
        double delta = dr / 2, rho = dr / 2;
        rvec hs = geometric_h_grid(0.5, 0.5, 5), errs;
        for (double h : hs) {
            double sc = std::pow(h, delta + rho);
            Symbol ab = Symbol::from_terms(
                {{[&](double x) { return cplx(G(x, 0.3) * G(x, -0.5)); }, [&](double xi) { return cplx(G(xi, -0.2) * G(xi, 0.4)); }},
                 {[&, sc](double x) { return cplx(0, -sc) * G(x, 0.3) * dG(x, -0.5); },
                  [&](double xi) { return cplx(dG(xi, -0.2) * G(xi, 0.4)); }}});
            Field lhs = op_quantize(a, op_quantize(b, u, h, delta, rho), h, delta, rho);
            Field rhs = op_quantize(ab, u, h, delta, rho);
            errs.push_back(l2_norm(lhs - rhs));
        }
        LogFit f = loglog_fit(hs, errs);
        MESSAGE("composition slope " << f.slope << " expected " << 2 * dr);
        CHECK(std::abs(f.slope - 2 * dr) < 0.4);
    }
}

TEST_CASE("report json round trip") {
    WavefrontReport r;
    r.h_grid = {0.25, 0.125};
    r.tolerances["tol_order"] = kTolOrder;
    ProbeResult p;
    p.label = "a";
    p.x0 = 1.5;
    p.xi0 = -2;
    p.delta = 1;
    p.rho = 0.5;
    p.mu_hat = 1.25;
    p.r2 = 0.99;
    p.h = r.h_grid;
    p.norms = {1e-3, 2e-4};
    r.probes.push_back(p);
    p.label = "b";
    p.mu_hat = kInf;
    r.probes.push_back(p);
    auto j = to_json(r);
    CHECK(j["probes"][1]["mu_hat"] == "inf");
    WavefrontReport back = report_from_json(nlohmann::json::parse(j.dump()));
    CHECK(back == r);
    WavefrontReport empty;
    CHECK(report_from_json(to_json(empty)) == empty);
    CHECK(singular_at(r.probes[0], 2.0));
    CHECK(!singular_at(r.probes[0], 1.5));
}

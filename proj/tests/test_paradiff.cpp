#include <cmath>
#include <fstream>
#include <random>

#include "doctest.h"
#include "microloc/paradiff.hpp"

using namespace microloc;

namespace {

double rel_diff(const Field& a, const Field& b) { return max_abs(a - b) / std::max(max_abs(b), 1e-300); }

Field random_smooth(const Grid& g, std::mt19937& rng, double kmax) {
    std::normal_distribution<double> nd;
    Field s(g);
    for (int k = 0; k < g.n; ++k)
        s.v[k] = cplx(nd(rng), nd(rng)) * std::exp(-std::pow(g.xi(k) / kmax, 2));
    return inverse(s);
}

// |x|^p e^{-x^2}: Sobolev regularity just below p + 1/2
double rough(double x, double p) { return std::pow(std::abs(x), p) * std::exp(-x * x); }

double high_tail(const Field& f, double cutoff) {
    Field s = forward(f);
    double m = 0;
    for (int k = 0; k < f.grid.n; ++k)
        if (std::abs(f.grid.xi(k)) >= cutoff) m = std::max(m, std::abs(s.v[k]));
    return m;
}

}  // namespace

TEST_CASE("admissible pair") {
    AdmissiblePair adm;
    CHECK(adm.chi(0.05, 1.0) == 1.0);
    CHECK(adm.chi(0.5, 1.0) == 0.0);
    CHECK(adm.chi(-0.3, 2.0) == adm.chi(0.3, -2.0));
    CHECK(adm.chi(0.3, 2.0) == doctest::Approx(adm.chi(3.0, 20.0)));
    CHECK(adm.pi(0.5) == 0.0);
    CHECK(adm.pi(1.0) == 1.0);
    CHECK(adm.pi(-0.2) == 0.0);
    CHECK_THROWS(AdmissiblePair(0.5, 0.1));
    CHECK_THROWS(AdmissiblePair(0.1, 1.0));
}

TEST_CASE("constant and multiplier symbols") {
    std::mt19937 rng(1);
    Grid g(256, 30.0);
    AdmissiblePair adm;
    Field u = random_smooth(g, rng, 10.0);
    Symbol c = Symbol::in_x([](double) { return cplx(2.5); });
    Field ref = 2.5 * multiplier_apply(u, Multiplier([&](double xi) { return cplx(adm.pi(xi)); }));
    CHECK(rel_diff(paradiff_apply(c, u, adm), ref) < 1e-10);
    CHECK(rel_diff(paradiff_apply(c, u, adm, ParadiffPath::generic), ref) < 1e-10);

    auto m = [](double xi) { return cplx(std::sqrt(1 + xi * xi), 0.3 * xi); };
    Symbol ms = Symbol::in_xi(m, 1.0);
    Field ref2 = multiplier_apply(u, Multiplier([&](double xi) { return m(xi) * adm.pi(xi); }), Nyquist::keep);
    CHECK(rel_diff(paradiff_apply(ms, u, adm), ref2) < 1e-10);
    CHECK(rel_diff(paradiff_apply(ms, u, adm, ParadiffPath::generic), ref2) < 1e-10);
}

TEST_CASE("generic and separable paths agree") {
    std::mt19937 rng(2);
    Grid g(128, 20.0);
    Field u = random_smooth(g, rng, 8.0);
    Symbol s = Symbol::from_terms({{[](double x) { return cplx(std::exp(-x * x / 8), 0.1 * x); },
                                    [](double xi) { return cplx(std::cos(xi), 1.0); }}});
    CHECK(rel_diff(paradiff_apply(s, u, {}, ParadiffPath::generic), paradiff_apply(s, u, {}, ParadiffPath::separable)) <
          1e-12);
}

TEST_CASE("frequency support and linearity") {
    std::mt19937 rng(3);
    Grid g(512, 50.0);
    AdmissiblePair adm;
    Field u = random_smooth(g, rng, 6.0), v = random_smooth(g, rng, 6.0);
    Symbol a = Symbol::from_terms({{[](double x) { return cplx(1 + 0.5 * std::sin(x)); },
                                    [](double xi) { return cplx(xi * xi); }}});
    Symbol b = Symbol::in_x([](double x) { return cplx(std::exp(-x * x)); });
    Field t = paradiff_apply(a, u, adm);
    Field th = forward(t);
    double cut = (1 - adm.eps2) / 2;
    for (int k = 0; k < g.n; ++k)
        if (std::abs(g.xi(k)) <= cut) CHECK(std::abs(th.v[k]) < 1e-13 * max_abs(th));
    cplx al(0.7, -0.2), be(-1.1, 0.4);
    Field lhs = paradiff_apply(a, al * u + be * v, adm);
    Field rhs = al * t + be * paradiff_apply(a, v, adm);
    CHECK(rel_diff(lhs, rhs) < 1e-12);
    Symbol ab = Symbol::from_terms({a.terms[0], {[](double x) { return cplx(3.0 * std::exp(-x * x)); }, b.terms[0].fxi}});
    CHECK(rel_diff(paradiff_apply(ab, u, adm), t + 3.0 * paradiff_apply(b, u, adm)) < 1e-12);
}

TEST_CASE("smooth x-symbol acts as multiplication at high frequency") {
    Grid g(4096, 200.0);
    Symbol a = Symbol::in_x([](double x) { return cplx(bump(x / 6.0)); });
    rvec xs, errs;
    for (double xi0 : {4.0, 8.0, 16.0, 32.0}) {
        Field u = wave_packet(g, 0.0, xi0, 4.0, true);
        Field au(g);
        for (int i = 0; i < g.n; ++i) au.v[i] = bump(g.x(i) / 6.0) * u.v[i];
        xs.push_back(xi0);
        errs.push_back(l2_norm(paradiff_apply(a, u) - au));
    }
    LogFit f = loglog_fit(xs, errs, 1e-15);
    MESSAGE("||T_a u - a u|| decay slope in xi0: " << f.slope);
    CHECK(f.slope <= -0.7);
}

TEST_CASE("dyadic paradifferential operator") {
    Grid g(8192, 256.0);
    DyadicPartition part = make_dyadic_partition(g, 2.0);
    AdmissiblePair adm;
    CHECK(part.J == 7);
    CHECK(neighbour_width(part.J) == 3);
    CHECK(neighbour_width(12) == 10);
    CHECK(neighbour_width(3) == 2);

    Symbol one = Symbol::in_x([](double) { return cplx(1.0); });
    double lim = std::ldexp(1.0, part.J - 2);
    Field u(g);
    for (int i = 0; i < g.n; ++i) u.v[i] = bump(g.x(i) / lim) * std::polar(1.0, 40.0 * g.x(i));
    Field ref = multiplier_apply(u, Multiplier([&](double xi) { return cplx(adm.pi(xi)); }));
    CHECK(l2_norm(dyadic_paradiff_apply(one, u, part, adm) - ref) / l2_norm(u) < 1e-6);

    std::mt19937 rng(5);
    double C = 0;
    Symbol sgn = Symbol::in_xi([](double xi) { return cplx(xi >= 0 ? 1.0 : -1.0); });
    for (int trial = 0; trial < 5; ++trial) {
        Field r = random_smooth(g, rng, 20.0);
        C = std::max(C, l2_norm(dyadic_paradiff_apply(sgn, r, part, adm)) / l2_norm(r));
    }
    MESSAGE("degree-0 symbol bound C = " << C);
    CHECK(C < 10.0);

    Grid gl(4096, 4096.0);
    DyadicPartition pl = make_dyadic_partition(gl, 2.0);
    CHECK(pl.J == 11);
    Field ring(gl);
    for (int i = 0; i < gl.n; ++i) ring.v[i] = pl.pieces[8][i] * std::polar(1.0, 1.0 * gl.x(i));
    int used = 0;
    Symbol a = Symbol::from_terms({{[](double x) { return cplx(1 + 0.1 * std::cos(x)); },
                                    [](double xi) { return cplx(1.0, 0.01 * xi); }}});
    Field p = dyadic_paradiff_apply(a, ring, pl, adm, -1, &used);
    CHECK(used <= 21);
    CHECK(used < pl.J + 1);
    Field full(gl);
    int w = neighbour_width(pl.J);
    for (int j = 0; j <= pl.J; ++j) {
        rvec wt = widened_piece(pl, j, w);
        Field v(gl);
        for (std::size_t i = 0; i < v.size(); ++i) v.v[i] = wt[i] * ring.v[i];
        const DyadicPartition* pp = &pl;
        auto fx = a.terms[0].fx;
        Symbol aj = Symbol::from_terms({{[pp, j, fx](double x) { return pp->value(j, std::abs(x)) * fx(x); }, a.terms[0].fxi}});
        Field t = paradiff_apply(aj, v, adm);
        for (std::size_t i = 0; i < t.size(); ++i) full.v[i] += wt[i] * t.v[i];
    }
    CHECK(max_abs(full - p) == 0.0);
}

TEST_CASE("paraproduct remainder") {
    Grid g(512, 40.0);
    Field c = from_function(g, [](double) { return cplx(1.7); });
    Field b = from_function(g, [](double x) { return cplx(std::exp(-x * x / 4) * std::cos(3 * x)); });
    RemainderResult r = paraproduct_remainder(c, b);
    CHECK(high_tail(r.remainder, 1.0) < 1e-8);

    Field a = from_function(g, [](double x) { return cplx(std::exp(-(x - 1) * (x - 1))); });
    RemainderResult r1 = paraproduct_remainder(a, b), r2 = paraproduct_remainder(b, a);
    CHECK(rel_diff(r1.remainder, r2.remainder) < 1e-12);
    CHECK(r1.rows.size() == 3 * default_s_values().size());
    MESSAGE("paraproduct order gain (smooth inputs) " << r1.order_gain);
    CHECK(std::isfinite(r1.order_gain));

    Field rough_f = from_function(g, [](double x) { return cplx(rough(x, 0.7)); });
    CHECK_THROWS(paraproduct_remainder(rough_f, rough_f));
}

TEST_CASE("paraproduct remainder is smoother than the paraproducts under refinement") {
    auto f = [](double x) { return (1 + std::pow(std::abs(x), 0.7)) * std::exp(-x * x); };
    auto rows = paraproduct_refinement(f, f, 16.0, {256, 512, 1024}, 1.8);
    auto norm_of = [&](const std::string& label, int n) {
        for (const auto& r : rows)
            if (r.label == label && r.resolution == n) return r.norm;
        return -1.0;
    };
    double ratio_r = norm_of("remainder", 1024) / norm_of("remainder", 256);
    double ratio_t = norm_of("T_a b", 1024) / norm_of("T_a b", 256);
    MESSAGE("H^1.8 growth 256->1024: remainder " << ratio_r << ", paraproduct " << ratio_t);
    CHECK(ratio_r < 1.3);
    CHECK(ratio_t > 1.8);
}

TEST_CASE("paralinearization remainder") {
    Grid g(512, 40.0);
    Field u = from_function(g, [](double x) { return cplx(0.3 * std::exp(-x * x / 2) * std::sin(2 * x)); });
    RemainderResult lin = paralinearization_remainder([](double v) { return 2.0 * v; }, [](double) { return 2.0; }, u);
    CHECK(high_tail(lin.remainder, 1.0) < 1e-8);

    RemainderResult sq = paralinearization_remainder([](double v) { return v * v; }, [](double v) { return 2 * v; }, u);
    RemainderResult pp = paraproduct_remainder(u, u);
    CHECK(rel_diff(sq.remainder, pp.remainder) < 1e-10);

    std::vector<double> norms;
    for (int n : {256, 512, 1024}) {
        Grid gn(n, 16.0);
        Field v = from_function(gn, [](double x) { return cplx(0.1 * rough(x, 0.7)); });
        RemainderResult s = paralinearization_remainder([](double t) { return std::sin(t); },
                                                        [](double t) { return std::cos(t); }, v, {}, {1.8});
        norms.push_back(sobolev_norm(s.remainder, 1.8));
    }
    MESSAGE("sin paralinearization H^1.8 growth " << norms[2] / norms[0]);
    CHECK(norms[2] / norms[0] < 1.3);
}

TEST_CASE("changing the admissible pair gains regularity") {
    AdmissiblePair a1(0.1, 0.5), a2(0.05, 0.25);
    double s = 1.0, ratio_u = 0, ratio_d = 0;
    std::vector<double> nu, nd;
    for (int n : {256, 512, 1024}) {
        Grid g(n, 2 * M_PI);
        Field uh(g);
        for (int k = 0; k < n; ++k) {
            int kk = g.wavenumber(k);
            if (kk == -n / 2) continue;
            uh.v[k] = std::polar(std::pow(1.0 + std::abs(kk), -1.5), 0.7 * kk * kk);
        }
        Field u = inverse(uh);
        Symbol a = Symbol::in_x([](double x) { return cplx(std::exp(std::cos(x))); });
        Field d = paradiff_apply(a, u, a1) - paradiff_apply(a, u, a2);
        nu.push_back(sobolev_norm(u, s));
        nd.push_back(sobolev_norm(d, s + 0.8));
    }
    ratio_u = nu[2] / nu[0];
    ratio_d = nd[2] / nd[0];
    MESSAGE("growth: u in H^1 " << ratio_u << ", difference in H^1.8 " << ratio_d);
    CHECK(ratio_d <= std::max(1.2, ratio_u));
}

TEST_CASE("remainder csv") {
    std::vector<RemainderRow> rows = {{"remainder", 0.5, 1e-3, 256}};
    auto path = std::string("/tmp/microloc_remainder.csv");
    write_remainder_csv(path, rows);
    std::ifstream in(path);
    std::string header, line;
    std::getline(in, header);
    std::getline(in, line);
    CHECK(header == "label,s,norm,resolution");
    CHECK(line.rfind("remainder,0.5,", 0) == 0);
}

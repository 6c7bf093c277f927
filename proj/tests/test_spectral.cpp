#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "microloc/spectral.hpp"

using namespace microloc;

namespace {

Field random_field(const Grid& g, std::mt19937& rng) {
    std::normal_distribution<double> nd;
    Field f(g);
    for (auto& z : f.v) z = {nd(rng), nd(rng)};
    return f;
}

double max_diff(const Field& a, const Field& b) { return max_abs(a - b); }

}  // namespace

TEST_CASE("grid validation") {
    CHECK_THROWS(Grid(7, 1.0));
    CHECK_THROWS(Grid(6, 1.0));
    CHECK_THROWS(Grid(16, -1.0));
    CHECK_THROWS(Grid(16, 1.0, 3));
    Grid g(16, 2 * M_PI);
    CHECK(g.dx() == doctest::Approx(2 * M_PI / 16));
    CHECK(g.xi(1) == doctest::Approx(1.0));
    CHECK(g.xi(15) == doctest::Approx(-1.0));
    CHECK(g.xi(g.nyquist_slot()) == doctest::Approx(-8.0));
    CHECK(g.x(0) == doctest::Approx(-M_PI));
}

TEST_CASE("constant field has only the zero mode") {
    Grid g(8, 3.0);
    Field f = from_function(g, [](double) { return cplx(1.0); });
    Field s = forward(f);
    CHECK(std::abs(s[0] - cplx(3.0)) < 1e-14);
    for (int k = 1; k < 8; ++k) CHECK(std::abs(s[k]) < 1e-14);
}

TEST_CASE("plane wave e^{i xi_1 x} sits at k=1") {
    Grid g(32, 5.0);
    double xi1 = g.xi(1);
    Field s = forward(from_function(g, [=](double x) { return std::polar(1.0, xi1 * x); }));
    CHECK(std::abs(s[1] - cplx(5.0)) < 1e-12);
    for (int k = 0; k < 32; ++k)
        if (k != 1) CHECK(std::abs(s[k]) < 1e-12);
}

TEST_CASE("round trip, Parseval and linearity on random fields") {
    std::mt19937 rng(7);
    for (int dim : {1, 2}) {
        Grid g(dim == 1 ? 256 : 32, 7.3, dim);
        for (int trial = 0; trial < 5; ++trial) {
            Field f = random_field(g, rng), h = random_field(g, rng);
            Field rt = inverse(forward(f));
            CHECK(max_diff(rt, f) < 1e-12 * max_abs(f));
            double a = l2_norm(f), b = l2_norm_spectral(forward(f));
            CHECK(std::abs(a - b) < 1e-12 * a);
            cplx al(0.3, -1.2), be(2.0, 0.5);
            Field lhs = forward(al * f + be * h);
            Field rhs = al * forward(f) + be * forward(h);
            CHECK(max_diff(lhs, rhs) < 1e-12 * max_abs(rhs));
        }
    }
}

TEST_CASE("wave packet") {
    Grid g(512, 40.0);
    CHECK_THROWS(wave_packet(g, 0, 0, g.dx()));
    Field p = wave_packet(g, 0.0, 0.0, 1.0);
    int imax = 0;
    for (int i = 0; i < g.n; ++i) {
        CHECK(std::abs(p[i].imag()) < 1e-15);
        CHECK(p[i].real() > 0);
        if (std::abs(p[i]) > std::abs(p[imax])) imax = i;
    }
    CHECK(g.x(imax) == doctest::Approx(0.0));

    double xi0 = g.xi(37) + 0.3 * g.dxi();
    Field s = forward(wave_packet(g, 3.0, xi0, 1.5));
    int kmax = 0;
    for (int k = 0; k < g.n; ++k)
        if (std::abs(s[k]) > std::abs(s[kmax])) kmax = k;
    CHECK(std::abs(g.xi(kmax) - xi0) <= g.dxi());

    Field u = wave_packet(g, -10, 2.0, 0.8, true), v = wave_packet(g, 10, -1.0, 0.8, true);
    CHECK(l2_norm(u) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(l2_norm(u + v) - std::sqrt(2.0)) < 1e-8);
}

TEST_CASE("multiplier examples") {
    Grid g(64, 2 * M_PI);
    std::mt19937 rng(3);
    Field f = random_field(g, rng);
    CHECK(max_diff(multiplier_apply(f, Multiplier([](double) { return cplx(1.0); })), f) < 1e-12);

    Field s = from_function(g, [](double x) { return cplx(std::sin(x)); });
    Field ds = multiplier_apply(s, Multiplier([](double xi) { return cplx(0, xi); }));
    Field c = from_function(g, [](double x) { return cplx(std::cos(x)); });
    CHECK(max_diff(ds, c) < 1e-10);

    double b = 0.7;
    Field e = from_function(g, [](double x) { return std::polar(1.0, x); });
    Field te = multiplier_apply(e, Multiplier([b](double xi) { return cplx(std::abs(xi) * std::tanh(b * std::abs(xi))); }));
    CHECK(max_diff(te, std::tanh(b) * e) < 1e-12);

    CHECK_THROWS(multiplier_apply(f, Multiplier([](double) { return cplx(NAN); })));
}

TEST_CASE("multiplier composition") {
    std::mt19937 rng(11);
    Grid g(128, 10.0);
    Field f = random_field(g, rng);
    auto m1 = [](double xi) { return cplx(std::exp(-0.1 * xi * xi), 0.2 * xi); };
    auto m2 = [](double xi) { return cplx(1.0 / (1 + xi * xi), std::sin(xi)); };
    Field a = multiplier_apply(multiplier_apply(f, Multiplier(m2), Nyquist::keep), Multiplier(m1), Nyquist::keep);
    Field b = multiplier_apply(f, Multiplier([&](double xi) { return m1(xi) * m2(xi); }), Nyquist::keep);
    CHECK(max_diff(a, b) < 1e-12 * max_abs(b));
}

TEST_CASE("odd multipliers drop the Nyquist mode") {
    Grid g(16, 2 * M_PI);
    Field nyq = from_function(g, [&](double x) { return std::polar(1.0, g.nyquist() * x); });
    Field d = multiplier_apply(nyq, Multiplier([](double xi) { return cplx(0, xi); }));
    CHECK(max_abs(d) < 1e-12);
    Field e = multiplier_apply(nyq, Multiplier([](double xi) { return cplx(xi * xi); }));
    CHECK(max_diff(e, 64.0 * nyq) < 1e-10);
}

TEST_CASE("field binary and csv output") {
    std::mt19937 rng(5);
    Grid g(32, 4.5);
    Field f = random_field(g, rng);
    auto dir = std::filesystem::temp_directory_path() / "microloc_field_test";
    std::filesystem::create_directories(dir);
    auto path = (dir / "f.bin").string();
    write_field(path, f);
    Field r = read_field(path);
    CHECK(r.grid == g);
    CHECK(max_diff(r, f) == 0.0);
    CHECK(std::filesystem::file_size(path) == 16 + 32 * 16);
    write_field_csv((dir / "f.csv").string(), f);
    CHECK(std::filesystem::exists(dir / "f.csv"));
    CHECK_THROWS(read_field((dir / "missing.bin").string()));
}

TEST_CASE("boundary and nyquist diagnostics") {
    Grid g(256, 40.0);
    Field p = wave_packet(g, 0, 1.0, 1.0);
    CHECK(boundary_mass(p) < 1e-30);
    CHECK(nyquist_mass(p) < 1e-14);
    Field q = wave_packet(g, 19.0, 1.0, 1.0);
    CHECK(boundary_mass(q) > 0.1);
}

#pragma once

#include <complex>
#include <functional>
#include <string>
#include <vector>

namespace microloc {

using cplx = std::complex<double>;
using cvec = std::vector<cplx>;
using rvec = std::vector<double>;

// Periodic box [-L/2, L/2)^dim with n points per axis.
struct Grid {
    int dim = 1;
    int n = 0;
    double L = 0.0;

    Grid() = default;
    Grid(int n, double L, int dim = 1);

    double dx() const { return L / n; }
    double dxi() const { return 2.0 * M_PI / L; }
    double nyquist() const { return M_PI * n / L; }
    std::size_t size() const { return dim == 1 ? std::size_t(n) : std::size_t(n) * n; }
    double x(int i) const { return -0.5 * L + i * dx(); }
    // array slot -> signed wavenumber in [-n/2, n/2)
    int wavenumber(int i) const { return i < n / 2 ? i : i - n; }
    double xi(int i) const { return dxi() * wavenumber(i); }
    int nyquist_slot() const { return n / 2; }

    bool operator==(const Grid& o) const { return dim == o.dim && n == o.n && L == o.L; }
    bool operator!=(const Grid& o) const { return !(*this == o); }
};

struct Field {
    Grid grid;
    cvec v;

    Field() = default;
    explicit Field(const Grid& g) : grid(g), v(g.size()) {}
    Field(const Grid& g, cvec values);

    std::size_t size() const { return v.size(); }
    cplx& operator[](std::size_t i) { return v[i]; }
    const cplx& operator[](std::size_t i) const { return v[i]; }

    Field& operator+=(const Field& o);
    Field& operator-=(const Field& o);
    Field& operator*=(cplx a);
};

Field operator+(Field a, const Field& b);
Field operator-(Field a, const Field& b);
Field operator*(cplx a, Field f);

enum class Direction { forward, inverse };

// f^(xi) = dx * sum f(x) e^{-i x xi}; inverse is its exact lattice inverse.
Field transform(const Field& f, Direction dir);
inline Field forward(const Field& f) { return transform(f, Direction::forward); }
inline Field inverse(const Field& f) { return transform(f, Direction::inverse); }

Field wave_packet(const Grid& g, double x0, double xi0, double w, bool normalize = false);

using Multiplier = std::function<cplx(double)>;
using Multiplier2 = std::function<cplx(double, double)>;

enum class Nyquist { automatic, keep, zero };

// inverse(m * forward(f)). In automatic mode the Nyquist coefficient is
// dropped whenever m(-xi_N) != m(xi_N).
Field multiplier_apply(const Field& f, const Multiplier& m, Nyquist mode = Nyquist::automatic);
Field multiplier_apply(const Field& f, const Multiplier2& m, Nyquist mode = Nyquist::automatic);
// same on spectral data already in hand
void multiply_spectrum(Field& spec, const Multiplier& m, Nyquist mode = Nyquist::automatic);

Field from_function(const Grid& g, const std::function<cplx(double)>& f);
Field from_function(const Grid& g, const std::function<cplx(double, double)>& f);
Field real_part(const Field& f);
Field pointwise(const Field& a, const Field& b);

double l2_norm(const Field& f);
double l2_norm_spectral(const Field& fhat);
cplx inner(const Field& a, const Field& b);  // sum conj(a) b dx^dim
double max_abs(const Field& f);
// largest |f| over the outermost `width` cells of the box, relative to max |f|
double boundary_mass(const Field& f, int width = 8);
// largest |f^| over the outermost `width` wavenumbers, relative to max |f^|
double nyquist_mass(const Field& f, int width = 8);

void write_field(const std::string& path, const Field& f);
Field read_field(const std::string& path);
void write_field_csv(const std::string& path, const Field& f);

}  // namespace microloc

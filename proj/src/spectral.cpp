#include "microloc/spectral.hpp"

#include <fftw3.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <mutex>
#include <stdexcept>
#include <tuple>

#include "json.hpp"

namespace microloc {

static_assert(std::endian::native == std::endian::little, "field I/O assumes a little-endian host");

Grid::Grid(int n_, double L_, int dim_) : dim(dim_), n(n_), L(L_) {
    if (dim != 1 && dim != 2) throw std::invalid_argument("grid dimension must be 1 or 2");
    if (n < 8 || n % 2 != 0) throw std::invalid_argument("grid size must be even and >= 8");
    if ((n & (n - 1)) != 0) throw std::invalid_argument("grid size must be a power of two");
    if (!(L > 0.0)) throw std::invalid_argument("box length must be positive");
}

Field::Field(const Grid& g, cvec values) : grid(g), v(std::move(values)) {
    if (v.size() != g.size()) throw std::invalid_argument("field length does not match grid");
}

Field& Field::operator+=(const Field& o) {
    if (grid != o.grid) throw std::invalid_argument("grid mismatch");
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += o.v[i];
    return *this;
}

Field& Field::operator-=(const Field& o) {
    if (grid != o.grid) throw std::invalid_argument("grid mismatch");
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= o.v[i];
    return *this;
}

Field& Field::operator*=(cplx a) {
    for (auto& z : v) z *= a;
    return *this;
}

Field operator+(Field a, const Field& b) { return a += b; }
Field operator-(Field a, const Field& b) { return a -= b; }
Field operator*(cplx a, Field f) { return f *= a; }

namespace {

struct PlanCache {
    std::mutex m;
    std::map<std::tuple<int, int, int>, fftw_plan> plans;

    fftw_plan get(int dim, int n, int sign) {
        std::lock_guard<std::mutex> lock(m);
        auto key = std::make_tuple(dim, n, sign);
        auto it = plans.find(key);
        if (it != plans.end()) return it->second;
        std::size_t len = dim == 1 ? std::size_t(n) : std::size_t(n) * n;
        fftw_complex* a = fftw_alloc_complex(len);
        fftw_complex* b = fftw_alloc_complex(len);
        unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        fftw_plan p = dim == 1 ? fftw_plan_dft_1d(n, a, b, sign, flags)
                               : fftw_plan_dft_2d(n, n, a, b, sign, flags);
        fftw_free(a);
        fftw_free(b);
        plans[key] = p;
        return p;
    }

    ~PlanCache() {
        for (auto& kv : plans) fftw_destroy_plan(kv.second);
    }
};

PlanCache& plan_cache() {
    static PlanCache cache;
    return cache;
}

void raw_fft(const cvec& in, cvec& out, const Grid& g, int sign) {
    fftw_plan p = plan_cache().get(g.dim, g.n, sign);
    out.resize(in.size());
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in.data())),
                     reinterpret_cast<fftw_complex*>(out.data()));
}

inline double parity(int i) { return (i & 1) ? -1.0 : 1.0; }

}  // namespace

Field transform(const Field& f, Direction dir) {
    const Grid& g = f.grid;
    if (f.v.size() != g.size()) throw std::invalid_argument("grid mismatch in transform");
    Field out(g);
    const int n = g.n;
    if (dir == Direction::forward) {
        raw_fft(f.v, out.v, g, FFTW_FORWARD);
        double scale = std::pow(g.dx(), g.dim);
        if (g.dim == 1) {
            for (int k = 0; k < n; ++k) out.v[k] *= scale * parity(k);
        } else {
            for (int k1 = 0; k1 < n; ++k1)
                for (int k2 = 0; k2 < n; ++k2) out.v[std::size_t(k1) * n + k2] *= scale * parity(k1 + k2);
        }
    } else {
        cvec tmp = f.v;
        if (g.dim == 1) {
            for (int k = 0; k < n; ++k) tmp[k] *= parity(k);
        } else {
            for (int k1 = 0; k1 < n; ++k1)
                for (int k2 = 0; k2 < n; ++k2) tmp[std::size_t(k1) * n + k2] *= parity(k1 + k2);
        }
        raw_fft(tmp, out.v, g, FFTW_BACKWARD);
        double scale = 1.0 / (double(g.size()) * std::pow(g.dx(), g.dim));
        for (auto& z : out.v) z *= scale;
    }
    return out;
}

Field wave_packet(const Grid& g, double x0, double xi0, double w, bool normalize) {
    if (w < 2.0 * g.dx()) throw std::invalid_argument("wave packet width under-resolved (w < 2 dx)");
    if (g.dim != 1) throw std::invalid_argument("wave_packet is one-dimensional");
    Field f(g);
    for (int i = 0; i < g.n; ++i) {
        double acc = 0.0;
        // periodize over the neighbouring images
        for (int m = -1; m <= 1; ++m) {
            double y = g.x(i) - x0 + m * g.L;
            acc += std::exp(-y * y / (2 * w * w));
        }
        f.v[i] = std::polar(acc, xi0 * g.x(i));
    }
    if (normalize) f *= 1.0 / l2_norm(f);
    return f;
}

void multiply_spectrum(Field& spec, const Multiplier& m, Nyquist mode) {
    const Grid& g = spec.grid;
    if (g.dim != 1) throw std::invalid_argument("one-dimensional multiplier on a 2D grid");
    for (int k = 0; k < g.n; ++k) {
        cplx mk = m(g.xi(k));
        if (!std::isfinite(mk.real()) || !std::isfinite(mk.imag()))
            throw std::domain_error("multiplier is not finite on the dual lattice");
        spec.v[k] *= mk;
    }
    int kn = g.nyquist_slot();
    bool drop = mode == Nyquist::zero;
    if (mode == Nyquist::automatic) {
        cplx a = m(-g.nyquist()), b = m(g.nyquist());
        drop = std::abs(a - b) > 1e-14 * std::max(1.0, std::abs(a));
    }
    if (drop) spec.v[kn] = 0.0;
}

Field multiplier_apply(const Field& f, const Multiplier& m, Nyquist mode) {
    Field s = forward(f);
    multiply_spectrum(s, m, mode);
    return inverse(s);
}

Field multiplier_apply(const Field& f, const Multiplier2& m, Nyquist mode) {
    const Grid& g = f.grid;
    if (g.dim == 1) return multiplier_apply(f, Multiplier([&](double xi) { return m(xi, 0.0); }), mode);
    Field s = forward(f);
    const int n = g.n, kn = g.nyquist_slot();
    double N = g.nyquist();
    bool drop1 = false, drop2 = false;
    if (mode == Nyquist::automatic) {
        for (int k = 0; k < n && !(drop1 && drop2); ++k) {
            double t = g.xi(k);
            if (std::abs(m(-N, t) - m(N, t)) > 1e-14 * std::max(1.0, std::abs(m(N, t)))) drop1 = true;
            if (std::abs(m(t, -N) - m(t, N)) > 1e-14 * std::max(1.0, std::abs(m(t, N)))) drop2 = true;
        }
    } else if (mode == Nyquist::zero) {
        drop1 = drop2 = true;
    }
    for (int k1 = 0; k1 < n; ++k1)
        for (int k2 = 0; k2 < n; ++k2) {
            cplx mk = m(g.xi(k1), g.xi(k2));
            if (!std::isfinite(mk.real()) || !std::isfinite(mk.imag()))
                throw std::domain_error("multiplier is not finite on the dual lattice");
            auto& z = s.v[std::size_t(k1) * n + k2];
            z *= mk;
            if ((drop1 && k1 == kn) || (drop2 && k2 == kn)) z = 0.0;
        }
    return inverse(s);
}

Field from_function(const Grid& g, const std::function<cplx(double)>& f) {
    if (g.dim != 1) throw std::invalid_argument("one-dimensional sampler on a 2D grid");
    Field out(g);
    for (int i = 0; i < g.n; ++i) out.v[i] = f(g.x(i));
    return out;
}

Field from_function(const Grid& g, const std::function<cplx(double, double)>& f) {
    Field out(g);
    if (g.dim == 1) {
        for (int i = 0; i < g.n; ++i) out.v[i] = f(g.x(i), 0.0);
        return out;
    }
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) out.v[std::size_t(i) * g.n + j] = f(g.x(i), g.x(j));
    return out;
}

Field real_part(const Field& f) {
    Field out(f.grid);
    for (std::size_t i = 0; i < f.size(); ++i) out.v[i] = f.v[i].real();
    return out;
}

Field pointwise(const Field& a, const Field& b) {
    if (a.grid != b.grid) throw std::invalid_argument("grid mismatch");
    Field out(a.grid);
    for (std::size_t i = 0; i < a.size(); ++i) out.v[i] = a.v[i] * b.v[i];
    return out;
}

double l2_norm(const Field& f) {
    double s = 0.0;
    for (const auto& z : f.v) s += std::norm(z);
    return std::sqrt(s * std::pow(f.grid.dx(), f.grid.dim));
}

double l2_norm_spectral(const Field& fhat) {
    double s = 0.0;
    for (const auto& z : fhat.v) s += std::norm(z);
    double w = std::pow(fhat.grid.dxi() / (2 * M_PI), fhat.grid.dim);
    return std::sqrt(s * w);
}

cplx inner(const Field& a, const Field& b) {
    if (a.grid != b.grid) throw std::invalid_argument("grid mismatch");
    cplx s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a.v[i]) * b.v[i];
    return s * std::pow(a.grid.dx(), a.grid.dim);
}

double max_abs(const Field& f) {
    double m = 0.0;
    for (const auto& z : f.v) m = std::max(m, std::abs(z));
    return m;
}

double boundary_mass(const Field& f, int width) {
    const Grid& g = f.grid;
    double peak = max_abs(f);
    if (peak == 0.0) return 0.0;
    double m = 0.0;
    auto edge = [&](int i) { return i < width || i >= g.n - width; };
    if (g.dim == 1) {
        for (int i = 0; i < g.n; ++i)
            if (edge(i)) m = std::max(m, std::abs(f.v[i]));
    } else {
        for (int i = 0; i < g.n; ++i)
            for (int j = 0; j < g.n; ++j)
                if (edge(i) || edge(j)) m = std::max(m, std::abs(f.v[std::size_t(i) * g.n + j]));
    }
    return m / peak;
}

double nyquist_mass(const Field& f, int width) {
    Field s = forward(f);
    const Grid& g = f.grid;
    double peak = max_abs(s);
    if (peak == 0.0) return 0.0;
    double m = 0.0;
    auto edge = [&](int k) { return std::abs(g.wavenumber(k)) > g.n / 2 - width; };
    if (g.dim == 1) {
        for (int k = 0; k < g.n; ++k)
            if (edge(k)) m = std::max(m, std::abs(s.v[k]));
    } else {
        for (int i = 0; i < g.n; ++i)
            for (int j = 0; j < g.n; ++j)
                if (edge(i) || edge(j)) m = std::max(m, std::abs(s.v[std::size_t(i) * g.n + j]));
    }
    return m / peak;
}

void write_field(const std::string& path, const Field& f) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::ios_base::failure("cannot open " + path);
    std::int64_t n = f.grid.n;
    double L = f.grid.L;
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    out.write(reinterpret_cast<const char*>(&L), sizeof L);
    out.write(reinterpret_cast<const char*>(f.v.data()), std::streamsize(f.v.size() * sizeof(cplx)));
    if (!out) throw std::ios_base::failure("write failed: " + path);

    nlohmann::json h = {{"n", f.grid.n}, {"L", f.grid.L}, {"dim", f.grid.dim},
                        {"layout", "int64 n, float64 L, interleaved float64 re/im, little-endian"}};
    std::ofstream hdr(path + ".json");
    if (!hdr) throw std::ios_base::failure("cannot open " + path + ".json");
    hdr << h.dump(2) << "\n";
}

Field read_field(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::ios_base::failure("cannot open " + path);
    std::int64_t n = 0;
    double L = 0.0;
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    in.read(reinterpret_cast<char*>(&L), sizeof L);
    int dim = 1;
    std::ifstream hdr(path + ".json");
    if (hdr) dim = nlohmann::json::parse(hdr).value("dim", 1);
    Grid g(int(n), L, dim);
    Field f(g);
    in.read(reinterpret_cast<char*>(f.v.data()), std::streamsize(f.v.size() * sizeof(cplx)));
    if (!in) throw std::ios_base::failure("truncated field file " + path);
    return f;
}

void write_field_csv(const std::string& path, const Field& f) {
    std::ofstream out(path);
    if (!out) throw std::ios_base::failure("cannot open " + path);
    out.precision(17);
    const Grid& g = f.grid;
    if (g.dim == 1) {
        out << "x,abs,arg\n";
        for (int i = 0; i < g.n; ++i) out << g.x(i) << ',' << std::abs(f.v[i]) << ',' << std::arg(f.v[i]) << '\n';
    } else {
        out << "x1,x2,abs,arg\n";
        for (int i = 0; i < g.n; ++i)
            for (int j = 0; j < g.n; ++j) {
                const auto& z = f.v[std::size_t(i) * g.n + j];
                out << g.x(i) << ',' << g.x(j) << ',' << std::abs(z) << ',' << std::arg(z) << '\n';
            }
    }
    if (!out) throw std::ios_base::failure("write failed: " + path);
}

}  // namespace microloc

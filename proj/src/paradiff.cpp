#include "microloc/paradiff.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "microloc/parallel.hpp"

namespace microloc {

AdmissiblePair::AdmissiblePair(double e1, double e2) : eps1(e1), eps2(e2) {
    if (!(0 < e1 && e1 < e2 && e2 < 1)) throw std::invalid_argument("admissible pair needs 0 < eps1 < eps2 < 1");
}

double AdmissiblePair::chi(double theta, double eta) const {
    double ae = std::abs(eta);
    if (ae == 0.0) return theta == 0.0 ? 1.0 : 0.0;
    double r = std::abs(theta) / ae;
    return 1.0 - smoothstep((r - eps1) / (eps2 - eps1));
}

double AdmissiblePair::pi(double eta) const { return smoothstep(2.0 * std::abs(eta) - 1.0); }

Symbol field_symbol(const Field& f) {
    const Grid g = f.grid;
    auto vals = std::make_shared<cvec>(f.v);
    auto sampler = [g, vals](double x) {
        long i = std::lround((x + 0.5 * g.L) / g.dx());
        i = ((i % g.n) + g.n) % g.n;
        return (*vals)[i];
    };
    return Symbol::in_x(sampler);
}

namespace {

// out^(xi_l) += (1/L) sum_k chi(xi_l - eta_k, eta_k) pi(eta_k) ahat_k(l - k) weight_k
template <class ColumnHat>
void accumulate(const Grid& g, const AdmissiblePair& adm, const Field& uh, const ColumnHat& column,
                const std::function<cplx(int)>& weight, cvec& outh) {
    const int n = g.n;
    for (int k = 0; k < n; ++k) {
        if (uh.v[k] == 0.0) continue;
        double eta = g.xi(k);
        double pk = adm.pi(eta);
        if (pk == 0.0) continue;
        const cvec& ah = column(k);
        cplx wk = pk * weight(k) * uh.v[k] / g.L;
        int kk = g.wavenumber(k);
        int band = int(std::ceil(adm.eps2 * std::abs(kk))) + 1;
        for (int d = -band; d <= band; ++d) {
            int ll = kk + d;
            if (ll < -n / 2 || ll >= n / 2) continue;
            if (d < -n / 2 || d >= n / 2) continue;
            double c = adm.chi(g.dxi() * d, eta);
            if (c == 0.0) continue;
            int l = ll < 0 ? ll + n : ll;
            int di = d < 0 ? d + n : d;
            outh[l] += c * ah[di] * wk;
        }
    }
}

}  // namespace

Field paradiff_apply(const Symbol& a, const Field& u, const AdmissiblePair& adm, ParadiffPath path) {
    const Grid& g = u.grid;
    if (g.dim != 1) throw std::invalid_argument("paradiff_apply is one-dimensional");
    const int n = g.n;
    Field uh = forward(u);
    Field outh(g);
    bool sep = path == ParadiffPath::separable || (path == ParadiffPath::automatic && a.separable());
    if (sep) {
        if (!a.separable()) throw std::invalid_argument("symbol has no separable representation");
        for (const auto& term : a.terms) {
            Field c(g);
            for (int i = 0; i < n; ++i) c.v[i] = term.fx(g.x(i));
            Field ch = forward(c);
            accumulate(g, adm, uh, [&](int) -> const cvec& { return ch.v; },
                       [&](int k) { return term.fxi(g.xi(k)); }, outh.v);
        }
        return inverse(outh);
    }
    // generic: transform x -> a(x, eta_k) for every active column
    std::vector<cvec> cols(n);
    std::vector<int> active;
    for (int k = 0; k < n; ++k)
        if (uh.v[k] != 0.0 && adm.pi(g.xi(k)) != 0.0) active.push_back(k);
    parallel_for(active.size(), [&](std::size_t idx) {
        int k = active[idx];
        double eta = g.xi(k);
        Field c(g);
        for (int i = 0; i < n; ++i) c.v[i] = a(g.x(i), eta);
        cols[k] = forward(c).v;
    });
    accumulate(g, adm, uh, [&](int k) -> const cvec& { return cols[k]; }, [](int) { return cplx(1.0); }, outh.v);
    return inverse(outh);
}

int neighbour_width(int J) { return J >= 12 ? 10 : std::max(2, J / 2); }

rvec widened_piece(const DyadicPartition& part, int j, int width) {
    rvec w(part.grid.size(), 0.0);
    for (int k = std::max(0, j - width); k <= std::min(part.J, j + width); ++k)
        for (std::size_t i = 0; i < w.size(); ++i) w[i] += part.pieces[k][i];
    return w;
}

Field dyadic_paradiff_apply(const Symbol& a, const Field& u, const DyadicPartition& part, const AdmissiblePair& adm,
                            int width, int* used) {
    if (u.grid != part.grid) throw std::invalid_argument("partition built on a different grid");
    const Grid& g = u.grid;
    if (width < 0) width = neighbour_width(part.J);
    Field out(g);
    int count = 0;
    for (int j = 0; j <= part.J; ++j) {
        rvec wt = widened_piece(part, j, width);
        Field v(g);
        bool any = false;
        for (std::size_t i = 0; i < v.size(); ++i) {
            v.v[i] = wt[i] * u.v[i];
            if (v.v[i] != 0.0) any = true;
        }
        if (!any) continue;
        ++count;
        Symbol aj;
        const DyadicPartition* pp = &part;
        if (a.separable()) {
            std::vector<SymbolTerm> terms;
            for (const auto& t : a.terms) {
                auto fx = t.fx;
                terms.push_back({[fx, pp, j](double x) { return pp->value(j, std::abs(x)) * fx(x); }, t.fxi});
            }
            aj = Symbol::from_terms(terms, a.mu, a.k);
        } else {
            auto ev = a.eval;
            aj = Symbol::generic([ev, pp, j](double x, double xi) { return pp->value(j, std::abs(x)) * ev(x, xi); },
                                 a.mu, a.k);
        }
        Field t = paradiff_apply(aj, v, adm);
        for (std::size_t i = 0; i < t.size(); ++i) out.v[i] += wt[i] * t.v[i];
    }
    if (used) *used = count;
    return out;
}

double sobolev_norm(const Field& u, double s) { return weighted_norm(u, s, 0.0); }

rvec default_s_values() { return {0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0}; }

double sobolev_growth(const Field& f, const rvec& s_values) {
    rvec ln;
    for (double s : s_values) ln.push_back(std::log(std::max(sobolev_norm(f, s), 1e-300)));
    double ms = 0, ml = 0;
    for (std::size_t i = 0; i < s_values.size(); ++i) {
        ms += s_values[i];
        ml += ln[i];
    }
    ms /= s_values.size();
    ml /= s_values.size();
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < s_values.size(); ++i) {
        sxx += (s_values[i] - ms) * (s_values[i] - ms);
        sxy += (s_values[i] - ms) * (ln[i] - ml);
    }
    return sxy / sxx;
}

namespace {

void add_rows(std::vector<RemainderRow>& rows, const std::string& label, const Field& f, const rvec& s_values) {
    for (double s : s_values) rows.push_back({label, s, sobolev_norm(f, s), f.grid.n});
}

}  // namespace

RemainderResult paraproduct_remainder(const Field& a, const Field& b, const AdmissiblePair& adm,
                                      const rvec& s_values) {
    if (a.grid != b.grid) throw std::invalid_argument("grid mismatch");
    if (nyquist_mass(a) > 1e-10 || nyquist_mass(b) > 1e-10)
        throw std::domain_error("paraproduct inputs are not resolved below Nyquist");
    RemainderResult r;
    Field tab = paradiff_apply(field_symbol(a), b, adm);
    Field tba = paradiff_apply(field_symbol(b), a, adm);
    r.remainder = pointwise(a, b) - tab - tba;
    double ga = sobolev_growth(a, s_values), gb = sobolev_growth(b, s_values);
    r.order_gain = std::min(ga, gb) - sobolev_growth(r.remainder, s_values);
    add_rows(r.rows, "remainder", r.remainder, s_values);
    add_rows(r.rows, "a", a, s_values);
    add_rows(r.rows, "b", b, s_values);
    return r;
}

RemainderResult paralinearization_remainder(const std::function<double(double)>& F,
                                            const std::function<double(double)>& dF, const Field& u,
                                            const AdmissiblePair& adm, const rvec& s_values) {
    const Grid& g = u.grid;
    Field fu(g), du(g);
    for (std::size_t i = 0; i < u.size(); ++i) {
        double v = u.v[i].real();
        fu.v[i] = F(v);
        du.v[i] = dF(v);
    }
    RemainderResult r;
    r.remainder = fu - paradiff_apply(field_symbol(du), real_part(u), adm);
    r.order_gain = sobolev_growth(u, s_values) - sobolev_growth(r.remainder, s_values);
    add_rows(r.rows, "remainder", r.remainder, s_values);
    add_rows(r.rows, "u", u, s_values);
    return r;
}

std::vector<RemainderRow> paraproduct_refinement(const std::function<double(double)>& fa,
                                                 const std::function<double(double)>& fb, double L,
                                                 const std::vector<int>& ns, double s, const AdmissiblePair& adm) {
    std::vector<RemainderRow> rows;
    for (int n : ns) {
        Grid g(n, L);
        Field a = from_function(g, [&](double x) { return cplx(fa(x)); });
        Field b = from_function(g, [&](double x) { return cplx(fb(x)); });
        Field tab = paradiff_apply(field_symbol(a), b, adm);
        Field tba = paradiff_apply(field_symbol(b), a, adm);
        Field R = pointwise(a, b) - tab - tba;
        rows.push_back({"remainder", s, sobolev_norm(R, s), n});
        rows.push_back({"T_a b", s, sobolev_norm(tab, s), n});
        rows.push_back({"T_b a", s, sobolev_norm(tba, s), n});
    }
    return rows;
}

void write_remainder_csv(const std::string& path, const std::vector<RemainderRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::ios_base::failure("cannot open " + path);
    out.precision(17);
    out << "label,s,norm,resolution\n";
    for (const auto& r : rows) out << r.label << ',' << r.s << ',' << r.norm << ',' << r.resolution << '\n';
    if (!out) throw std::ios_base::failure("write failed: " + path);
}

}  // namespace microloc

#include <openssl/evp.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "microloc/dno.hpp"
#include "microloc/errors.hpp"
#include "microloc/flows.hpp"
#include "microloc/model_eq.hpp"
#include "microloc/paradiff.hpp"
#include "microloc/parallel.hpp"
#include "microloc/waterwave.hpp"

using namespace microloc;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kSchemaVersion = 1;

struct IOError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IOError("cannot read " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IOError("cannot write " + p.string());
    out << text;
    if (!out) throw IOError("write failed: " + p.string());
}

// SHA-1 of "blob <size>\0<content>", as git hashes a file
std::string git_hash(const std::string& content) {
    std::string blob = "blob " + std::to_string(content.size()) + std::string(1, '\0') + content;
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!EVP_Digest(blob.data(), blob.size(), md, &len, EVP_sha1(), nullptr)) throw std::runtime_error("sha1 failed");
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", md[i]);
        hex += buf;
    }
    return hex;
}

void apply_set(json& cfg, const std::string& kv) {
    auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    std::string key = kv.substr(0, eq), text = kv.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::parse_error&) {
        value = text;
    }
    json* node = &cfg;
    std::stringstream ss(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!node->contains(parts[i])) (*node)[parts[i]] = json::object();
        node = &(*node)[parts[i]];
        if (!node->is_object()) throw std::invalid_argument("--set path '" + key + "' crosses a non-object");
    }
    (*node)[parts.back()] = value;
}

// typed access to one JSON object; unknown keys are rejected by finish()
class Params {
public:
    Params(const json& j, std::string where) : j_(j.is_null() ? json::object() : j), where_(std::move(where)) {
        if (!j_.is_object()) throw std::invalid_argument(where_ + " must be an object");
    }

    template <class T>
    T get(const std::string& key, T def) {
        used_.insert(key);
        if (!j_.contains(key)) return def;
        try {
            return j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw std::invalid_argument(where_ + "." + key + " has the wrong type");
        }
    }

    rvec h_grid(const std::string& key, rvec def) {
        used_.insert(key);
        if (!j_.contains(key)) return def;
        const json& v = j_.at(key);
        if (v.is_array()) return get<rvec>(key, def);
        if (v.is_object()) {
            Params p(v, where_ + "." + key);
            double h0 = p.get("h0", 0.25), ratio = p.get("ratio", 0.5);
            int count = p.get("count", 6);
            p.finish();
            return geometric_h_grid(h0, ratio, count);
        }
        throw std::invalid_argument(where_ + "." + key + " must be an array or {h0, ratio, count}");
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key())) throw std::invalid_argument("unknown key " + where_ + "." + it.key());
    }

private:
    json j_;
    std::string where_;
    std::set<std::string> used_;
};

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}

void check_grid(int n, double L) {
    require(n >= 16 && (n & (n - 1)) == 0, "n must be a power of two >= 16");
    require(L > 0, "L must be positive");
}

void check_h_grid(const rvec& h) {
    require(h.size() >= 6, "h grid needs at least 6 points");
    for (std::size_t i = 0; i < h.size(); ++i) {
        require(h[i] > 0, "h grid entries must be positive");
        if (i) require(h[i] < h[i - 1], "h grid must be strictly decreasing");
    }
}

struct Check {
    std::string name;
    double value;
    std::string op;  // ">=" or "<="
    double limit;
    bool pass() const { return op == ">=" ? value >= limit : value <= limit; }
};

json to_json(const Check& c) {
    return {{"name", c.name}, {"value", number_or_inf(c.value)}, {"op", c.op}, {"limit", c.limit}, {"pass", c.pass()}};
}

struct Table {
    std::string file;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string csv(const Table& t) {
    std::string s;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) s += (i ? "," : "") + cells[i];
        s += "\n";
    };
    line(t.header);
    for (const auto& r : t.rows) line(r);
    return s;
}

struct RunOutput {
    WavefrontReport report;
    json extras = json::object();
    std::vector<Check> checks;
    std::vector<Table> tables;
    json grid = json::object();
};

using Runner = std::function<RunOutput()>;

// -- kinds ------------------------------------------------------------------

WWRunConfig ww_run_params(Params& p, WWRunConfig r) {
    r.n = p.get("n", r.n);
    r.L = p.get("L", r.L);
    r.g = p.get("g", r.g);
    r.b = p.get("b", r.b);
    r.nz = p.get("nz", r.nz);
    std::string dn = p.get<std::string>("dn", r.dn == DNMethod::taylor ? "taylor" : "elliptic");
    require(dn == "taylor" || dn == "elliptic", "params.dn must be 'taylor' or 'elliptic'");
    r.dn = dn == "taylor" ? DNMethod::taylor : DNMethod::elliptic;
    r.taylor_order = p.get("taylor_order", r.taylor_order);
    r.dt = p.get("dt", r.dt);
    r.cfl = p.get("cfl", r.cfl);
    r.eps_mollify = p.get("eps_mollify", r.eps_mollify);
    r.mu = p.get("mu", r.mu);
    r.h_grid = p.h_grid("h_grid", r.h_grid);
    r.boundary_tol = p.get("boundary_tol", r.boundary_tol);
    check_grid(r.n, r.L);
    check_h_grid(r.h_grid);
    require(r.b > 0, "depth b must be positive");
    require(r.g >= 0, "gravity g must be >= 0");
    require(r.nz >= 4 && r.nz % 2 == 0, "nz must be even and >= 4");
    require(r.taylor_order >= 1, "taylor_order must be >= 1");
    require(r.dt >= 0, "dt must be >= 0");
    require(r.cfl > 0, "cfl must be positive");
    require(r.eps_mollify >= 0, "eps_mollify must be >= 0");
    require(r.boundary_tol > 0, "boundary_tol must be positive");
    return r;
}

std::vector<std::pair<double, double>> factor_list(Params& p, const std::string& key) {
    auto raw = p.get<std::vector<std::vector<double>>>(key, {});
    std::vector<std::pair<double, double>> out;
    for (const auto& f : raw) {
        require(f.size() == 2, "params." + key + " entries must be [sx, sxi]");
        out.push_back({f[0], f[1]});
    }
    return out;
}

RunOutput experiment_output(const ExperimentResult& r) {
    RunOutput o;
    o.report = r.report;
    o.extras = r.extras;
    o.extras["separation"] = number_or_inf(r.separation);
    o.extras["boundary_mass"] = r.boundary_mass;
    o.extras["nyquist_mass"] = r.nyquist_mass;
    return o;
}

Runner model_transport(const json& params, Params& th) {
    Params p(params, "params");
    double gamma = p.get("gamma", 2.0);
    require(gamma == 2.0 || gamma == 1.5, "model_transport defaults exist for gamma = 2 and 3/2");
    TransportConfig c = transport_defaults(gamma);
    c.delta = p.get("delta", c.delta);
    c.rho = p.get("rho", c.rho);
    c.x0 = p.get("x0", c.x0);
    c.xi0 = p.get("xi0", c.xi0);
    c.t0 = p.get("t0", c.t0);
    c.n = p.get("n", c.n);
    c.L = p.get("L", c.L);
    c.h_grid = p.h_grid("h_grid", c.h_grid);
    c.packet_c = p.get("packet_c", c.packet_c);
    c.packet_mu0 = p.get("packet_mu0", c.packet_mu0);
    c.control_factors = factor_list(p, "control_factors");
    c.include_initial = p.get("include_initial", c.include_initial);
    c.boundary_tol = p.get("boundary_tol", c.boundary_tol);
    p.finish();
    check_grid(c.n, c.L);
    check_h_grid(c.h_grid);
    check_ray_relation(c.gamma, c.delta, c.rho);
    require(c.xi0 != 0.0, "xi0 must be nonzero");
    double min_sep = th.get("min_separation", 2.0);
    return [c, min_sep] {
        RunOutput o = experiment_output(transport_experiment(c));
        o.checks.push_back({"separation", parse_number_or_inf(o.extras["separation"]), ">=", min_sep});
        o.grid = {{"n", c.n}, {"L", c.L}};
        return o;
    };
}

Runner model_smoothing(const json& params, Params& th) {
    Params p(params, "params");
    double gamma = p.get("gamma", 2.0);
    SmoothingConfig c = smoothing_defaults(gamma);
    c.delta = p.get("delta", c.delta);
    c.rho = p.get("rho", c.rho);
    c.t0 = p.get("t0", c.t0);
    c.n = p.get("n", c.n);
    c.L = p.get("L", c.L);
    c.xi0 = p.get("xi0", c.xi0);
    c.h_grid = p.h_grid("h_grid", c.h_grid);
    c.width_cells = p.get("width_cells", c.width_cells);
    c.boundary_tol = p.get("boundary_tol", c.boundary_tol);
    p.finish();
    check_grid(c.n, c.L);
    check_h_grid(c.h_grid);
    require(c.gamma > 1.0, "gamma must be > 1");
    require(c.t0 != 0.0, "t0 must be nonzero");
    require(c.width_cells >= 2.0, "width_cells must be >= 2");
    double min_sep = th.get("min_separation", 2.0);
    return [c, min_sep] {
        RunOutput o = experiment_output(smoothing_experiment(c));
        o.checks.push_back({"separation", parse_number_or_inf(o.extras["separation"]), ">=", min_sep});
        o.grid = {{"n", c.n}, {"L", c.L}};
        return o;
    };
}

Runner ww_infinite(const json& params, Params& th) {
    Params p(params, "params");
    WWInfiniteConfig c;
    c.run = ww_run_params(p, c.run);
    c.x0 = p.get("x0", c.x0);
    c.xi0 = p.get("xi0", c.xi0);
    c.t0 = p.get("t0", c.t0);
    c.amplitude = p.get("amplitude", c.amplitude);
    c.packet_c = p.get("packet_c", c.packet_c);
    c.control_factors = factor_list(p, "control_factors");
    c.location_scales = p.get("location_scales", c.location_scales);
    p.finish();
    require(c.xi0 != 0.0, "xi0 must be nonzero");
    require(c.amplitude > 0, "amplitude must be positive");
    require(c.location_scales >= 1, "location_scales must be >= 1");
    double max_cells = th.get("max_location_cells", 1.0);
    return [c, max_cells] {
        RunOutput o = experiment_output(ww_infinite_experiment(c));
        o.checks.push_back({"location_error_cells", parse_number_or_inf(o.extras["location_error_cells"]), "<=", max_cells});
        o.grid = {{"n", c.run.n}, {"L", c.run.L}};
        Table t{"packet_centres.csv", {"h", "ww", "model", "predicted"}, {}};
        for (const auto& pc : o.extras["packet_centres"])
            t.rows.push_back({fmt(pc["h"]), fmt(pc["ww"]), fmt(pc["model"]), fmt(pc["predicted"])});
        o.tables.push_back(t);
        return o;
    };
}

Runner ww_smoothing(const json& params, Params& th) {
    Params p(params, "params");
    WWSmoothingConfig c;
    c.run = ww_run_params(p, c.run);
    c.bump_amplitude = p.get("bump_amplitude", c.bump_amplitude);
    c.bump_width = p.get("bump_width", c.bump_width);
    c.x_s = p.get("x_s", c.x_s);
    c.amplitude = p.get("amplitude", c.amplitude);
    c.flat_fraction = p.get("flat_fraction", c.flat_fraction);
    c.cut_fraction = p.get("cut_fraction", c.cut_fraction);
    c.t0 = p.get("t0", c.t0);
    c.xi0 = p.get("xi0", c.xi0);
    c.s_max = p.get("s_max", c.s_max);
    p.finish();
    require(c.bump_width > 0, "bump_width must be positive");
    require(c.run.b + std::min(0.0, c.bump_amplitude) > 0, "bump reaches the bottom");
    require(c.amplitude > 0, "amplitude must be positive");
    require(0 < c.flat_fraction && c.flat_fraction < c.cut_fraction && c.cut_fraction <= 1, "need 0 < flat_fraction < cut_fraction <= 1");
    require(c.t0 > 0, "t0 must be positive");
    require(!c.xi0.empty(), "xi0 must not be empty");
    double min_margin = th.get("min_bent_margin", 1.0);
    return [c, min_margin] {
        RunOutput o = experiment_output(ww_smoothing_experiment(c));
        o.checks.push_back({"bent_margin", parse_number_or_inf(o.extras["bent_margin"]), ">=", min_margin});
        o.grid = {{"n", c.run.n}, {"L", c.run.L}};
        Table t{"rays.csv", {"xi0", "xi_inf", "s_escape", "cauchy_gap"}, {}};
        for (const auto& r : o.extras["rays"])
            t.rows.push_back({fmt(r["xi0"]), fmt(r["xi_inf"]), fmt(r["s_escape"]), fmt(r["cauchy_gap"])});
        o.tables.push_back(t);
        return o;
    };
}

Runner dno_validation(const json& params, Params& th) {
    Params p(params, "params");
    int n = p.get("n", 128);
    double L = p.get("L", 2 * M_PI), b = p.get("b", 1.0);
    auto nzs = p.get<std::vector<int>>("nz_list", {16, 32, 64, 128});
    auto modes = p.get<std::vector<int>>("modes", {1, 2, 3, 4});
    int order = p.get("taylor_order", 4), check_nz = p.get("check_nz", 64);
    p.finish();
    check_grid(n, L);
    require(b > 0, "depth b must be positive");
    require(nzs.size() >= 2, "nz_list needs at least two entries");
    for (int nz : nzs) require(nz >= 4 && nz % 2 == 0, "nz values must be even and >= 4");
    require(!modes.empty(), "modes must not be empty");
    for (int k : modes) require(k >= 1 && k < n / 2, "modes must lie in [1, n/2)");
    double max_taylor = th.get("max_taylor_error", 1e-10), max_ell = th.get("max_elliptic_error", 1e-6);
    double slope_target = th.get("slope_target", 2.0), slope_band = th.get("slope_band", 0.4);
    return [=] {
        RunOutput o;
        Grid g(n, L);
        Table t{"dn_flat_errors.csv", {"method", "nz", "k", "error"}, {}};
        double worst_taylor = 0, worst_ell = 0;
        rvec raw_nz, raw_err;
        for (int k : modes) {
            double xi = g.dxi() * k;
            Field psi = from_function(g, [xi](double x) { return cplx(std::cos(xi * x)); });
            Field exact = dn_flat(psi, b);
            auto err = [&](const Field& f) { return l2_norm(f - exact) / l2_norm(exact); };
            double et = err(dn_taylor(FluidDomain(Field(g), b, check_nz), psi, order));
            worst_taylor = std::max(worst_taylor, et);
            t.rows.push_back({"taylor", "0", std::to_string(k), fmt(et)});
            for (int nz : nzs) {
                FluidDomain dom(Field(g), b, nz);
                double er = err(dn_elliptic(dom, psi));
                double e2 = err(dn_elliptic(dom, psi, {false}));
                t.rows.push_back({"elliptic", std::to_string(nz), std::to_string(k), fmt(er)});
                t.rows.push_back({"elliptic_raw", std::to_string(nz), std::to_string(k), fmt(e2)});
                if (nz == check_nz) worst_ell = std::max(worst_ell, er);
                if (k == modes.front()) {
                    raw_nz.push_back(nz);
                    raw_err.push_back(e2);
                }
            }
        }
        double slope = -loglog_fit(raw_nz, raw_err, 0.0).slope;
        o.checks.push_back({"taylor_error", worst_taylor, "<=", max_taylor});
        o.checks.push_back({"elliptic_error_nz" + std::to_string(check_nz), worst_ell, "<=", max_ell});
        o.checks.push_back({"slope_low", slope, ">=", slope_target - slope_band});
        o.checks.push_back({"slope_high", slope, "<=", slope_target + slope_band});
        o.extras = {{"raw_slope", slope}, {"worst_taylor", worst_taylor}, {"worst_elliptic", worst_ell}};
        o.grid = {{"n", n}, {"L", L}, {"b", b}};
        o.tables.push_back(t);
        return o;
    };
}

Runner flow_survey(const json& params, Params& th, unsigned seed) {
    Params p(params, "params");
    double amp = p.get("bump_amplitude", 1.0), w = p.get("bump_width", 1.0);
    int count = p.get("count", 20);
    double x_range = p.get("x_range", 5.0), xi_min = p.get("xi_min", 0.3), xi_max = p.get("xi_max", 2.0);
    double s_end = p.get("s_end", 50.0), tol = p.get("tol", 1e-10);
    int samples = p.get("samples", 2000), trajectories = p.get("trajectories", 4);
    p.finish();
    require(w > 0, "bump_width must be positive");
    require(count >= 1, "count must be >= 1");
    require(0 < xi_min && xi_min < xi_max, "need 0 < xi_min < xi_max");
    require(s_end > 0 && tol > 0 && samples >= 2, "s_end, tol and samples must be positive");
    double max_drift = th.get("max_h_drift", 1e-8), min_frac = th.get("min_certified_fraction", 1.0);
    return [=] {
        SurfaceMetric m = gaussian_bump_metric(amp, w);
        std::mt19937 rng(seed);
        std::uniform_real_distribution<double> ux(-x_range, x_range), uk(xi_min, xi_max), sg(-1, 1);
        std::vector<PhasePoint> pts;
        for (int i = 0; i < count; ++i) {
            double x = ux(rng), k = uk(rng);
            pts.push_back({1, {x, 0}, {sg(rng) < 0 ? -k : k, 0}});
        }
        auto survey = nontrapping_survey(m, pts, s_end, samples);
        std::vector<double> drift(count);
        std::vector<AsymptoticResult> asym(count);
        parallel_for(count, [&](std::size_t i) {
            drift[i] = integrate_hamiltonian(m, pts[i], s_end, tol, {}, false).h_drift;
            try {
                asym[i] = asymptotic_direction(m, pts[i]);
            } catch (const FlowError&) {
                asym[i].trapped = true;
            }
        });
        RunOutput o;
        Table t{"survey.csv", {"i", "x0", "xi0", "min_slope", "certificate", "h_drift", "xi_inf", "converged"}, {}};
        int certified = 0;
        double worst = 0;
        for (int i = 0; i < count; ++i) {
            certified += survey[i].certificate;
            worst = std::max(worst, drift[i]);
            t.rows.push_back({std::to_string(i), fmt(pts[i].x[0]), fmt(pts[i].xi[0]), fmt(survey[i].min_slope),
                              survey[i].certificate ? "1" : "0", fmt(drift[i]), fmt(asym[i].xi_inf[0]),
                              asym[i].converged ? "1" : "0"});
        }
        o.tables.push_back(t);
        for (int i = 0; i < std::min(trajectories, count); ++i) {
            auto tr = integrate_hamiltonian(m, pts[i], s_end, tol);
            Table tt{"trajectory_" + std::to_string(i) + ".csv", {"s", "x", "xi", "H"}, {}};
            Hamiltonian H = hamiltonian_H(m);
            for (std::size_t k = 0; k < tr.s.size(); ++k)
                tt.rows.push_back({fmt(tr.s[k]), fmt(tr.z[k].x[0]), fmt(tr.z[k].xi[0]), fmt(H.value(tr.z[k].x, tr.z[k].xi))});
            o.tables.push_back(tt);
        }
        o.checks.push_back({"max_h_drift", worst, "<=", max_drift});
        o.checks.push_back({"certified_fraction", double(certified) / count, ">=", min_frac});
        o.extras = {{"certified", certified}, {"count", count}, {"max_h_drift", worst}};
        return o;
    };
}

Runner paradiff_diagnostics(const json& params, Params& th) {
    Params p(params, "params");
    double power = p.get("power", 0.7), L = p.get("L", 16.0), s = p.get("s", 1.8);
    auto ns = p.get<std::vector<int>>("resolutions", {256, 512, 1024});
    double e1 = p.get("eps1", 0.1), e2 = p.get("eps2", 0.5);
    p.finish();
    require(power > 0, "power must be positive");
    require(L > 0, "L must be positive");
    require(ns.size() >= 2, "resolutions needs at least two entries");
    for (int n : ns) check_grid(n, L);
    AdmissiblePair adm(e1, e2);
    double max_rem = th.get("max_remainder_growth", 1.3), min_par = th.get("min_paraproduct_growth", 1.8);
    return [=] {
        auto f = [power](double x) { return (1 + std::pow(std::abs(x), power)) * std::exp(-x * x); };
        auto rows = paraproduct_refinement(f, f, L, ns, s, adm);
        auto norm_of = [&](const std::string& label, int n) {
            for (const auto& r : rows)
                if (r.label == label && r.resolution == n) return r.norm;
            return std::nan("");
        };
        RunOutput o;
        Table t{"remainder.csv", {"label", "s", "norm", "resolution"}, {}};
        for (const auto& r : rows) t.rows.push_back({r.label, fmt(r.s), fmt(r.norm), std::to_string(r.resolution)});
        o.tables.push_back(t);
        double gr = norm_of("remainder", ns.back()) / norm_of("remainder", ns.front());
        double gp = norm_of("T_a b", ns.back()) / norm_of("T_a b", ns.front());
        o.checks.push_back({"remainder_growth", gr, "<=", max_rem});
        o.checks.push_back({"paraproduct_growth", gp, ">=", min_par});
        o.extras = {{"remainder_growth", gr}, {"paraproduct_growth", gp}, {"s", s}};
        return o;
    };
}

struct Plan {
    json config;
    std::string kind;
    fs::path output;
    std::string hash;
    unsigned seed = 0;
    Runner run;
};

Plan plan(json cfg) {
    Params top(cfg, "config");
    int version = top.get("schema_version", kSchemaVersion);
    require(version == kSchemaVersion, "unsupported schema_version " + std::to_string(version));
    Plan pl;
    pl.kind = top.get<std::string>("kind", "");
    pl.output = top.get<std::string>("output", "microloc_out/" + pl.kind);
    pl.seed = top.get("seed", 1u);
    json params = top.get("params", json::object());
    json thresholds = top.get("thresholds", json::object());
    top.finish();
    Params th(thresholds, "thresholds");
    if (pl.kind == "model_transport") pl.run = model_transport(params, th);
    else if (pl.kind == "model_smoothing") pl.run = model_smoothing(params, th);
    else if (pl.kind == "ww_infinite") pl.run = ww_infinite(params, th);
    else if (pl.kind == "ww_smoothing") pl.run = ww_smoothing(params, th);
    else if (pl.kind == "dno_validation") pl.run = dno_validation(params, th);
    else if (pl.kind == "flow_survey") pl.run = flow_survey(params, th, pl.seed);
    else if (pl.kind == "paradiff_diagnostics") pl.run = paradiff_diagnostics(params, th);
    else throw std::invalid_argument("unknown kind '" + pl.kind + "'");
    th.finish();
    pl.config = cfg;
    json hashed = cfg;
    hashed.erase("output");
    pl.hash = git_hash(hashed.dump());
    return pl;
}

json prepare(const std::string& path, const std::vector<std::string>& sets) {
    json cfg = load_json(path);
    if (!cfg.is_object()) throw std::invalid_argument("config must be a JSON object");
    for (const auto& kv : sets) apply_set(cfg, kv);
    return cfg;
}

Table decay_table(const WavefrontReport& r) {
    Table t{"decay.csv", {"label", "h", "log_h", "norm", "log_norm"}, {}};
    for (const auto& p : r.probes)
        for (std::size_t i = 0; i < p.h.size(); ++i)
            t.rows.push_back({p.label, fmt(p.h[i]), fmt(std::log(p.h[i])), fmt(p.norms[i]),
                              p.norms[i] > 0 ? fmt(std::log(p.norms[i])) : "-inf"});
    return t;
}

std::string summary_text(const json& manifest, const json& report) {
    std::ostringstream s;
    s << "kind: " << manifest.value("kind", "") << "\n";
    s << "config hash: " << manifest.value("config_hash", "") << "\n";
    s << "status: " << manifest.value("status", "") << "\n";
    if (manifest.contains("error")) s << "error: " << manifest["error"].get<std::string>() << "\n";
    if (report.contains("checks") && !report["checks"].empty()) {
        s << "\nthresholds\n";
        for (const auto& c : report["checks"]) {
            s << "  " << (c["pass"].get<bool>() ? "PASS" : "FAIL") << "  " << c["name"].get<std::string>() << " = "
              << c["value"].dump() << " (" << c["op"].get<std::string>() << " " << c["limit"].dump() << ")\n";
        }
    }
    if (report.contains("report") && !report["report"]["probes"].empty()) {
        s << "\nprobes\n";
        for (const auto& p : report["report"]["probes"]) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "  %-20s x0=%-9.4g xi0=%-9.4g (%g,%g)  mu=%s  r2=%.3f\n",
                          p["label"].get<std::string>().c_str(), p["x0"].get<double>(), p["xi0"].get<double>(),
                          p["delta"].get<double>(), p["rho"].get<double>(), p["mu_hat"].dump().c_str(),
                          p["r2"].get<double>());
            s << buf;
        }
    }
    return s.str();
}

void emit(const fs::path& dir, const json& manifest, const json& report, const std::vector<Table>& tables) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IOError("cannot create " + dir.string() + ": " + ec.message());
    for (const auto& t : tables) write_text(dir / t.file, csv(t));
    write_text(dir / "report.json", report.dump(2) + "\n");
    write_text(dir / "summary.txt", summary_text(manifest, report));
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

int cmd_run(const std::string& path, const std::vector<std::string>& sets) {
    Plan pl;
    try {
        pl = plan(prepare(path, sets));
    } catch (const IOError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "invalid config: " << e.what() << "\n";
        return 2;
    }
    json manifest = {{"schema_version", kSchemaVersion}, {"kind", pl.kind}, {"config", pl.config},
                     {"config_hash", pl.hash}, {"seed", pl.seed}};
    json report = {{"schema_version", kSchemaVersion}, {"kind", pl.kind}, {"config_hash", pl.hash}};
    std::vector<Table> tables;
    int code = 0;
    std::cerr << "running " << pl.kind << " with " << worker_count() << " worker(s)\n";
    try {
        RunOutput o = pl.run();
        bool ok = true;
        json checks = json::array();
        for (const auto& c : o.checks) {
            checks.push_back(to_json(c));
            ok = ok && c.pass();
        }
        report["report"] = microloc::to_json(o.report);
        report["extras"] = o.extras;
        report["checks"] = checks;
        manifest["grid"] = o.grid;
        manifest["tolerances"] = o.report.tolerances;
        manifest["checks"] = checks;
        tables = o.tables;
        if (!o.report.probes.empty()) tables.push_back(decay_table(o.report));
        code = ok ? 0 : 1;
        manifest["status"] = ok ? "pass" : "fail";
    } catch (const std::invalid_argument& e) {
        code = 2;
        manifest["status"] = "invalid";
        manifest["error"] = e.what();
    } catch (const std::exception& e) {
        code = 3;
        manifest["status"] = "error";
        manifest["error"] = e.what();
    }
    manifest["exit_code"] = code;
    json files = json::array();
    for (const auto& t : tables) files.push_back(t.file);
    for (const char* f : {"report.json", "summary.txt"}) files.push_back(f);
    manifest["files"] = files;
    try {
        emit(pl.output, manifest, report, tables);
    } catch (const IOError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    std::cout << summary_text(manifest, report);
    if (manifest.contains("error")) std::cerr << "error: " << manifest["error"].get<std::string>() << "\n";
    return code;
}

int cmd_validate(const std::string& path, const std::vector<std::string>& sets) {
    try {
        Plan pl = plan(prepare(path, sets));
        std::cout << "valid " << pl.kind << " config, hash " << pl.hash << "\n";
        return 0;
    } catch (const IOError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "invalid config: " << e.what() << "\n";
        return 2;
    }
}

int cmd_report(const std::string& dir) {
    try {
        json manifest = load_json((fs::path(dir) / "manifest.json").string());
        json report = load_json((fs::path(dir) / "report.json").string());
        if (report.value("config_hash", "") != manifest.value("config_hash", ""))
            throw IOError("report.json and manifest.json disagree on the config hash");
        if (report.contains("report")) report_from_json(report["report"]);
        std::cout << summary_text(manifest, report);
        return 0;
    } catch (const IOError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: malformed report: " << e.what() << "\n";
        return 4;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"microlocal singularity experiments"};
    app.require_subcommand(1);
    std::string config, dir;
    std::vector<std::string> sets;

    auto* run = app.add_subcommand("run", "run the experiment described by a config");
    run->add_option("config", config, "config JSON")->required();
    run->add_option("--set", sets, "override a config key, e.g. params.n=1024");
    auto* validate = app.add_subcommand("validate", "check a config without running it");
    validate->add_option("config", config, "config JSON")->required();
    validate->add_option("--set", sets, "override a config key");
    auto* report = app.add_subcommand("report", "print the summary of a finished run");
    report->add_option("dir", dir, "output directory of a run")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    if (*run) return cmd_run(config, sets);
    if (*validate) return cmd_validate(config, sets);
    return cmd_report(dir);
}

#pragma once

#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "microloc/spectral.hpp"

namespace microloc {

// C^inf step, 0 for t <= 0 and 1 for t >= 1
double smoothstep(double t);
// even bump: 1 on |r| <= 1/2, 0 on |r| >= 1
double bump(double r);
// derivative of bump with respect to r
double bump_deriv(double r);

struct SymbolTerm {
    std::function<cplx(double)> fx;
    std::function<cplx(double)> fxi;
};

struct SupportBox {
    double x_lo, x_hi, xi_lo, xi_hi;
};

struct Symbol {
    std::function<cplx(double, double)> eval;
    double mu = 0.0;  // order in xi
    double k = 0.0;   // order in x
    std::vector<SymbolTerm> terms;  // non-empty: eval == sum fx(x) fxi(xi)
    std::optional<SupportBox> support;

    cplx operator()(double x, double xi) const { return eval(x, xi); }
    bool separable() const { return !terms.empty(); }

    static Symbol from_terms(std::vector<SymbolTerm> terms, double mu = 0.0, double k = 0.0);
    static Symbol in_x(std::function<cplx(double)> f, double k = 0.0);
    static Symbol in_xi(std::function<cplx(double)> f, double mu = 0.0);
    static Symbol generic(std::function<cplx(double, double)> f, double mu = 0.0, double k = 0.0);
};

// bump((x-x0)/rx) bump((xi-xi0)/rxi)
Symbol window_symbol(double x0, double xi0, double rx, double rxi);
// radii 0.25 max(|x0|,1) and 0.25 |xi0| (0.25 if xi0 = 0)
Symbol default_window(double x0, double xi0);

enum class QuantPath { automatic, dense, separable };

// Kohn-Nirenberg action of a(h^delta x, h^rho xi), one dimension
Field op_quantize(const Symbol& a, const Field& u, double h, double delta, double rho,
                  QuantPath path = QuantPath::automatic);

double weighted_norm(const Field& u, double nu, double k);

struct DyadicPartition {
    Grid grid;
    double C = 2.0;
    int J = 0;
    double a = 1.0, b = 2.0;   // transition of the base cutoff
    std::vector<rvec> pieces;  // pieces[j][i]: psi_j at grid point i

    Field apply(int j, const Field& u) const;
    double value(int j, double r) const;  // psi_j at radius r
};

DyadicPartition make_dyadic_partition(const Grid& g, double C = 2.0);
double dyadic_norm(const Field& u, double nu, double k, const DyadicPartition& part);

// forward(u) as a field in xi on the dual box: n points, length n * dxi, centred; d = 1
Field fourier_dual(const Field& u);

rvec geometric_h_grid(double h0, double ratio, int count);
rvec default_h_grid();  // 2^-2 ... 2^-9

// h values whose scaled window support fits inside the box and below Nyquist
rvec admissible_h(const Grid& g, const SupportBox& box, double delta, double rho, const rvec& h_grid);

constexpr double kTolOrder = 0.5;
constexpr double kNormFloor = 1e-14;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct DecayFit {
    double mu = kInf;
    double r2 = 0.0;
    rvec h;
    rvec norms;  // relative to ||u||
};

DecayFit estimate_decay_order(const Field& u, double x0, double xi0, double delta, double rho,
                              const Symbol& window, const rvec& h_grid, bool truncate = true);
DecayFit estimate_decay_order(const Field& u, double x0, double xi0, double delta, double rho,
                              const rvec& h_grid, bool truncate = true);

// fitted slope and R^2 of log y against log x, ignoring y below floor
struct LogFit {
    double slope = kInf;
    double intercept = 0.0;
    double r2 = 0.0;
    int used = 0;
};
LogFit loglog_fit(const rvec& x, const rvec& y, double floor = kNormFloor);

struct ProbeResult {
    std::string label;
    double x0 = 0, xi0 = 0, delta = 0, rho = 0;
    double mu_hat = kInf;
    double r2 = 0;
    rvec h;
    rvec norms;

    bool operator==(const ProbeResult&) const = default;
};

// singular at order sigma when mu_hat < sigma - tol
bool singular_at(const ProbeResult& p, double sigma, double tol = kTolOrder);

struct WavefrontReport {
    std::vector<ProbeResult> probes;
    rvec h_grid;
    std::map<std::string, double> tolerances;

    const ProbeResult& probe(const std::string& label) const;
    bool operator==(const WavefrontReport&) const = default;
};

ProbeResult make_probe(const std::string& label, const Field& u, double x0, double xi0, double delta,
                       double rho, const rvec& h_grid);

nlohmann::json to_json(const WavefrontReport& r);
WavefrontReport report_from_json(const nlohmann::json& j);
nlohmann::json number_or_inf(double v);
double parse_number_or_inf(const nlohmann::json& j);

}  // namespace microloc

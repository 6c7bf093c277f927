#pragma once

#include <utility>
#include <vector>

#include "microloc/dno.hpp"
#include "microloc/model_eq.hpp"

namespace microloc {

struct WWParams {
    double g = 1.0, b = 1.0, kappa = 1.0;
    int nz = 64;
    DNSolver dn;
};

struct SurfaceState {
    Field eta, psi;
    double t = 0.0;
    WWParams params;

    const Grid& grid() const { return eta.grid; }
    FluidDomain domain() const { return FluidDomain(eta, params.b, params.nz); }
    // throws unless both fields are real, share a grid and b + min eta > 0
    void validate() const;
};

// d_x(eta' / sqrt(1 + eta'^2))
Field mean_curvature(const Field& eta);

struct WWRhs {
    Field deta, dpsi;
};

WWRhs zcs_rhs(const SurfaceState& s);

struct IntegrateOptions {
    double eps_mollify = 1e-6;
    double cfl = 0.5;  // |dt| <= cfl / max|xi|^{3/2}
    int samples = 1;   // states returned at `samples` equal intervals, plus the initial one
};

// RK4; after each step both fields are multiplied by exp(-eps_mollify |dt| |xi|^{3/2})
// and the Nyquist mode is removed.
// T < 0 integrates backwards. Throws BlowUp on non-finite values or loss of depth.
std::vector<SurfaceState> integrate(const SurfaceState& s0, double T, double dt, const IntegrateOptions& opt = {});

// exact solution of the linearization about rest, omega^2 = (g + kappa xi^2) |xi| tanh(b|xi|)
SurfaceState linear_evolution(const SurfaceState& s0, double t);

double ww_mass(const SurfaceState& s);
// (1/2) int psi G psi + (g/2) int eta^2 + kappa int (sqrt(1 + eta'^2) - 1)
double ww_energy(const SurfaceState& s);

struct WWSymbols {
    Symbol l2, l1, gamma, p, q, zeta;
    Field slope;  // eta'
};

WWSymbols symmetrizer_symbols(const SurfaceState& s);
// (gamma~)^{2 mu / 3}, gamma~ = gamma blended into max(gamma, 1) below |xi| = 2
Symbol lambda_mu_symbol(const WWSymbols& sy, double mu);

struct WWOperators {
    AdmissiblePair adm;
    bool dyadic = true;  // sum of dyadic pieces in x, else one global paraproduct
};

// psi - T_B eta
Field good_unknown(const SurfaceState& s, const WWOperators& ops = {});

struct SymmetrizedPair {
    Field u, ubar;
};

// u = Lambda^mu (-i T_p eta + T_q omega), ubar = Lambda^mu (i T_p eta + T_q omega)
SymmetrizedPair symmetrized_pair(const SurfaceState& s, double mu, const WWOperators& ops = {});
Field symmetrized_u(const SurfaceState& s, double mu, const WWOperators& ops = {});

struct WWRunConfig {
    int n = 4096;
    double L = 200.0;
    double g = 1.0, b = 1.0;
    int nz = 64;
    DNMethod dn = DNMethod::taylor;
    int taylor_order = 4;
    double dt = 0.0;  // 0 -> cfl / max|xi|^{3/2}
    double cfl = 0.5;
    double eps_mollify = 1e-6;
    double mu = 1.0;
    rvec h_grid = geometric_h_grid(0.25, 0.5, 6);
    double boundary_tol = 1e-6;
};

WWParams ww_params(const WWRunConfig& c);
double ww_time_step(const Grid& g, const WWRunConfig& c);

struct WWInfiniteConfig {
    WWRunConfig run;
    double x0 = 1.0, xi0 = 0.3, t0 = 1.0;
    double amplitude = 1e-6;
    double packet_c = 1.0;
    std::vector<std::pair<double, double>> control_factors;  // empty -> defaults for (1/2, 1)
    int location_scales = 3;  // finest scales compared against the model propagation
};

// packet train in psi over a flat surface; probes of u(t0) at the transported point and controls.
// extras: location_error_cells (ww vs model_eq gamma = 3/2 packet centres), mass and energy drift
ExperimentResult ww_infinite_experiment(const WWInfiniteConfig& cfg);

struct WWSmoothingConfig {
    WWRunConfig run = [] {
        WWRunConfig r;
        r.h_grid = geometric_h_grid(0.25, std::sqrt(0.5), 8);
        return r;
    }();
    double bump_amplitude = 0.05, bump_width = 1.0;
    double x_s = -1.0;  // < 0 -> steepest point of the bump
    double amplitude = 1e-5;  // mass of the singular datum
    double flat_fraction = 0.45, cut_fraction = 0.75;
    double t0 = 1.0;
    rvec xi0 = {-0.25, 0.25};
    double s_max = 1e3;
};

// mass e^{-i x_s xi} on |xi| <= flat Nyquist, smoothly cut off at |xi| = cut Nyquist
Field band_limited_delta(const Grid& g, double x_s, double mass, double flat = 0.45, double cut = 0.75);

// band-limited delta in psi at x_s over a Gaussian bump; xi_inf from the flow of the initial surface.
// probes: bent prediction, unbent prediction, frequency and mirror controls
ExperimentResult ww_smoothing_experiment(const WWSmoothingConfig& cfg);

// centre of |u^+|^2 within radius r of xc, u^+ the part of u with frequencies of the sign of xi
double packet_centre(const Field& u, double xc, double r, double xi_sign);

}  // namespace microloc

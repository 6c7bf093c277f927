#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "microloc/quantize.hpp"

namespace microloc {

struct ModelParams {
    double gamma = 2.0;
    double t = 0.0;
    Grid grid;
};

// exact lattice solution of d_t u + i|D|^gamma u = 0
Field propagate_fractional(const Field& u0, double t, double gamma);

// throws unless gamma >= 1 and u0 lives on p.grid
Field propagate(const Field& u0, const ModelParams& p);

// group velocity gamma |xi|^{gamma-2} xi
double group_velocity(double xi, double gamma);

// exact solution of d_t u = i u_xx from exp(-x^2 / (2 sigma^2)), evaluated at x
cplx free_gaussian(double x, double t, double sigma);

// one unit-L2 Gaussian per scale at (x0 h^-delta, xi0 h^-rho), width c h^{(rho-delta)/2}, amplitude h^mu0
Field packet_train(const Grid& g, double x0, double xi0, double delta, double rho, const rvec& h_grid,
                   double c = 1.0, double mu0 = 0.0);

// <x>^-alpha e^{i Phi(x)} on the half line through x0, where Phi' traces the ray
// xi = xi0 (x/x0)^{rho/delta}; smooth cut-on at |x| = x_on, cut-off at |x| = x_off
Field power_chirp(const Grid& g, double x0, double xi0, double delta, double rho, double alpha, double x_on,
                  double x_off);

struct ControlPoint {
    std::string label;
    double x, xi;
};

struct TransportConfig {
    double gamma = 2.0, delta = 1.0, rho = 1.0;
    double x0 = -0.45, xi0 = 0.45, t0 = 1.0;
    int n = 4096;
    double L = 160.0;
    rvec h_grid = geometric_h_grid(0.5, 0.5, 6);
    double packet_c = 1.0, packet_mu0 = 0.0;
    // controls as multiples (sx, sxi) of the transported point; empty -> defaults
    std::vector<std::pair<double, double>> control_factors;
    bool include_initial = true;
    double boundary_tol = 1e-10;
};

struct ExperimentResult {
    WavefrontReport report;
    std::string predicted_label = "predicted";
    double separation = 0.0;  // min control mu - max predicted mu
    double boundary_mass = 0.0;
    double nyquist_mass = 0.0;
    nlohmann::json extras = nlohmann::json::object();
};

// the default parameter sets for gamma = 2 with (1,1) and gamma = 3/2 with (1/2,1)
TransportConfig transport_defaults(double gamma);
std::vector<std::pair<double, double>> default_control_factors(double delta, double rho);

ExperimentResult transport_experiment(const TransportConfig& cfg);

struct SmoothingConfig {
    double gamma = 2.0, delta = 0.0, rho = 1.0;
    double t0 = 1.0;
    int n = 1 << 18;
    double L = 2048.0;
    rvec xi0 = {-1.0, -0.5, 0.5, 1.0};
    rvec h_grid = geometric_h_grid(0.1, std::sqrt(0.5), 6);
    double width_cells = 2.0;  // near-delta width in units of dx
    double boundary_tol = 1e-10;
};

SmoothingConfig smoothing_defaults(double gamma);
// singular locus point at time t0 for frequency xi
double smoothing_locus(double xi, double t0, double gamma);
ExperimentResult smoothing_experiment(const SmoothingConfig& cfg);

// sup over |x| <= radius of | |u(t)| (2 pi t)^{1/2} - 1 | for the evolved unit-mass Gaussian of width
// width_cells*dx under exp(i t Delta / 2)
double kernel_modulus_error(const Grid& g, double t, double width_cells, double radius);

struct EscapeValue {
    double value;
    double transport;  // d_s chi + {|xi|^gamma, chi}
};

struct EscapeModelParams {
    double x0 = 0.0, xi0 = 1.0, gamma = 2.0, eps = 0.5;
};

EscapeValue escape_symbol_model(double s, double x, double xi, const EscapeModelParams& p);
// same transport derivative by fourth-order centred differences with step h
double escape_model_transport_fd(double s, double x, double xi, const EscapeModelParams& p, double h = 1e-4);

struct SymmetryConfig {
    double x0 = 1.0, xi0 = 1.0, delta = 0.5, rho = 1.0;
    int n = 4096;
    double L = 0.0;  // 0 -> sqrt(2 pi n), the self-dual box
    rvec h_grid = geometric_h_grid(0.5, std::sqrt(0.5), 9);
    double packet_c = 1.0, packet_mu0 = 1.0;
};

// packet train u probed at (x0, xi0) with (delta, rho) and fourier_dual(u) at (xi0, -x0) with (rho, delta).
// separation = min control mu - max of the two; extras: mu_u, mu_dual, difference
ExperimentResult fourier_symmetry_experiment(const SymmetryConfig& cfg);

struct ScalingConfig {
    double x0 = 16.0, xi0 = 4.0, delta = 1.0, rho = 1.0, gamma = 2.0;
    double alpha = 1.5;  // chirp amplitude <x>^-alpha
    int n = 1 << 18;
    double L = 2000.0;
    double x_on = 1.0, x_off = 920.0;
    rvec h_grid = geometric_h_grid(0.5, std::sqrt(0.5), 8);
};

// power chirp probed with (delta, rho) and (delta/gamma, rho/gamma) on the same h grid; extras: mu, mu_scaled, ratio
ExperimentResult scaling_experiment(const ScalingConfig& cfg);

void check_ray_relation(double gamma, double delta, double rho);

}  // namespace microloc

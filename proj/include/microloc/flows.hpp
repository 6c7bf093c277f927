#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "microloc/spectral.hpp"

namespace microloc {

using Vec2 = std::array<double, 2>;
using Mat2 = std::array<double, 4>;  // row-major

struct PhasePoint {
    int d = 1;
    Vec2 x{0, 0}, xi{0, 0};
};

// graph surface y = eta(x) over R^d, d in {1,2}; only the first d components are used
struct SurfaceMetric {
    int d = 1;
    std::function<double(const Vec2&)> eta;
    std::function<Vec2(const Vec2&)> grad;
    std::function<Mat2(const Vec2&)> hess;

    // |xi|^2 - (grad eta . xi)^2 / (1 + |grad eta|^2)
    double G(const Vec2& x, const Vec2& xi) const;
    void dG(const Vec2& x, const Vec2& xi, Vec2& gx, Vec2& gxi) const;
    double H(const Vec2& x, const Vec2& xi) const;
    void dH(const Vec2& x, const Vec2& xi, Vec2& hx, Vec2& hxi) const;
};

SurfaceMetric flat_metric(int d = 1);
// amp exp(-|x - c|^2 / w^2)
SurfaceMetric gaussian_bump_metric(double amp, double w, int d = 1, Vec2 c = {0, 0});
// periodic sample of eta, quintic B-spline derivatives; d = 1
SurfaceMetric sampled_metric(const Field& eta);
// sup over |x_i| <= R of <x> |hess eta|_op on a (samples)^d lattice
double weighted_hessian_norm(const SurfaceMetric& m, double R = 20.0, int samples = 801);

struct Hamiltonian {
    int d = 1;
    std::function<double(const Vec2&, const Vec2&)> value;
    std::function<void(const Vec2&, const Vec2&, Vec2&, Vec2&)> gradient;  // (d_x, d_xi)
};

Hamiltonian hamiltonian_H(const SurfaceMetric& m);
Hamiltonian hamiltonian_G(const SurfaceMetric& m);
// |xi|^gamma
Hamiltonian fractional_hamiltonian(double gamma, int d = 1);

struct FlowError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Trajectory {
    int d = 1;
    rvec s;
    std::vector<PhasePoint> z;
    double tol = 0.0;
    long steps = 0, rejected = 0;
    double h_drift = 0.0;  // max relative |H(z_s) - H(z_0)|
    const PhasePoint& back() const { return z.back(); }
};

// dense samples at every accepted step; checkpoints (sorted in the direction of s_end) are hit exactly
Trajectory integrate_hamiltonian(const Hamiltonian& H, const PhasePoint& z0, double s_end, double tol = 1e-10,
                                 const rvec& checkpoints = {}, bool record_steps = true);
Trajectory integrate_hamiltonian(const SurfaceMetric& m, const PhasePoint& z0, double s_end, double tol = 1e-10,
                                 const rvec& checkpoints = {}, bool record_steps = true);
PhasePoint flow_point(const Hamiltonian& H, const PhasePoint& z0, double s, double tol = 1e-10);

// max over checkpoints of |Phi_s - Geo_{phi_s}|, phi_s = (3/4) int_0^s G(Phi)^{-1/4}
struct ReparamResult {
    double deviation = 0.0;
    rvec s, phi;
};
ReparamResult reparam_check(const SurfaceMetric& m, const PhasePoint& z0, double s_end, double tol = 1e-10,
                            int checkpoints = 64);

struct AsymptoticResult {
    Vec2 xi_inf{0, 0}, z_inf{0, 0};
    bool trapped = false;
    bool converged = false;
    double s_escape = -1.0;
    double cauchy_gap = 0.0;
    rvec checkpoints;
    std::vector<Vec2> xi_at, z_at;
};

// escape_radius <= 0 -> 50|x0| + 100
AsymptoticResult asymptotic_direction(const SurfaceMetric& m, const PhasePoint& z0, double s_max = 1e3,
                                      double escape_radius = -1.0, double tol = 1e-10, double cauchy_tol = 1e-6);

struct NontrapResult {
    double min_slope = 0.0;
    bool certificate = false;
};

// d/ds (x.xi) = d_xi H . xi - x . d_x H sampled on `samples` uniform points of [0, s_end]
NontrapResult nontrapping_diagnostic(const SurfaceMetric& m, const PhasePoint& z0, double s_end,
                                     int samples = 2000, double tol = 1e-10);
std::vector<NontrapResult> nontrapping_survey(const SurfaceMetric& m, const std::vector<PhasePoint>& z0s,
                                              double s_end, int samples = 2000);

struct SurfaceEscapeParams {
    double lambda = 4.0, delta = 0.5, nu = 0.5;
    int sign = +1;
};

struct EscapeSample {
    double value;
    double transport;  // d_s chi +- {H, chi}
};

// phi((x - x_s)/(lambda delta s)) phi((xi -+ xi_s)/(delta - s^-nu)) along the H-trajectory z_s of zs
struct SurfaceEscape {
    Hamiltonian H;
    SurfaceEscapeParams p;
    double s;
    PhasePoint zs;   // point of the trajectory at s
    PhasePoint dzs;  // its s-derivative X_H(z_s)

    SurfaceEscape(const Hamiltonian& H, const PhasePoint& z0, double s, const SurfaceEscapeParams& p,
                  double tol = 1e-12);
    EscapeSample eval(const Vec2& x, const Vec2& xi) const;
    // same transport derivative with centred differences in s, x, xi (trajectory re-integrated over +-h)
    double transport_fd(const Vec2& x, const Vec2& xi, double h = 1e-5) const;
    double x_radius() const { return p.lambda * p.delta * s; }
    double xi_radius() const { return p.delta - std::pow(s, -p.nu); }
    double tol = 1e-12;
};

struct EscapeSurvey {
    double min_transport = 0.0;
    double max_fd_error = 0.0;  // relative to max |transport|
    double max_transport = 0.0;
};

// nx x nxi lattice over the support box (d = 1)
EscapeSurvey escape_symbol_survey(const SurfaceEscape& e, int nx = 40, int nxi = 40, bool with_fd = true);

void write_trajectory_csv(const std::string& path, const Trajectory& t, const Hamiltonian& H);

}  // namespace microloc

#pragma once

#include <stdexcept>
#include <vector>

#include "microloc/flows.hpp"
#include "microloc/paradiff.hpp"

namespace microloc {

struct FluidDomain {
    Field eta;  // real surface elevation
    double b = 1.0;
    int nz = 64;

    FluidDomain() = default;
    FluidDomain(Field eta, double b = 1.0, int nz = 64);
    const Grid& grid() const { return eta.grid; }
    // throws unless b + min eta > 0
    void validate() const;
};

struct DNError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// |D| tanh(b|D|) psi
Field dn_flat(const Field& psi, double b);

struct TaylorInfo {
    rvec term_norms;
};

// sum_{j<=M} G_j(eta) psi of the expansion about the flat surface; d = 1, 2
Field dn_taylor(const FluidDomain& dom, const Field& psi, int M = 4, TaylorInfo* info = nullptr);

struct EllipticOptions {
    bool richardson = true;  // combine nz and nz/2 as (4 G_nz - G_nz/2) / 3
    double tol = 1e-10;
    int max_iter = 200;  // preconditioned Krylov steps
};

struct EllipticInfo {
    int iterations = 0;
    double residual = 0.0;
};

// flattened strip y = z + (1 + z/b) eta(x), finite volumes in z, spectral in x; d = 1
Field dn_elliptic(const FluidDomain& dom, const Field& psi, const EllipticOptions& opt = {},
                  EllipticInfo* info = nullptr);

enum class DNMethod { elliptic, taylor };

struct DNSolver {
    DNMethod method = DNMethod::elliptic;
    EllipticOptions elliptic;
    int taylor_order = 4;
    Field operator()(const FluidDomain& dom, const Field& psi) const;
};

// c_+(x)|xi|^order for xi > 0 and c_-(x)|xi|^order for xi < 0 on the grid of eta; d = 1
struct HomSymbol {
    Grid grid;
    double order = 0.0;
    cvec plus, minus;

    cplx at(int i, double xi) const;
    cplx operator()(double x, double xi) const;
    Symbol symbol() const;
};

struct DNSymbols {
    int d = 1;
    // d = 1: exact homogeneous calculus on the grid of eta
    HomSymbol lambda1, lambda0;
    std::vector<HomSymbol> a_plus, a_minus;  // orders 1, 0, -1, ...
    // d = 1, 2: closures (for d = 2 only orders 1 and 0)
    std::function<double(const Vec2&, const Vec2&)> lambda1_at;
    std::function<cplx(const Vec2&, const Vec2&)> lambda0_at;
    std::function<cplx(const Vec2&, const Vec2&, int, int)> a_at;  // (x, xi, sign, order)
    // order-1 + order-0 symbol of lambda
    cplx lambda(double x, double xi) const;
};

// J orders of a_pm: 1, 0, ..., 2 - J
DNSymbols dn_symbols(const Field& eta, int J = 2);
// d = 2 closures from analytic gradient and Hessian (J <= 2)
DNSymbols dn_symbols(const SurfaceMetric& eta, int J = 2);

struct BVFields {
    Field B, V;
    Field G;  // G(eta) psi
};

BVFields b_v_fields(const FluidDomain& dom, const Field& psi, const DNSolver& solver = {});

// ||(G(eta + h phi) psi - G(eta - h phi) psi)/(2h) - (-G(eta)(B phi) - d_x(V phi))|| / ||G(eta) psi||
double shape_derivative_check(const FluidDomain& dom, const Field& psi, const Field& phi, double h,
                              const DNSolver& solver = {});

// G(eta)psi - [T_lambda(psi - T_B eta) - T_V d_x eta]
Field dn_paralinearization_remainder(const FluidDomain& dom, const Field& psi, const DNSolver& solver = {},
                                     const AdmissiblePair& adm = {});

Field derivative(const Field& f, int axis = 0);

}  // namespace microloc

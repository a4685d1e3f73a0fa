#pragma once
// Discrete Hamiltonian structure on marker charts: the canonical one-form on
// chart data, its exterior derivative, the cotangent pairing, the induced
// Poisson bracket, Hamiltonian directions, and the frozen-in transport check.
// Densities travel as per-marker mass components (trapezoid weights folded
// in), phase-space functions are caller-supplied closures with analytic first
// partials, and every integral is the same trapezoid sum the rest of the
// library uses. One configuration dimension only.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "core/chart.hpp"
#include "core/symbol.hpp"

namespace kmw {

// Scalar field on the (q, p) plane with analytic first partials. Unset
// closures read as identically zero, so sparse directions stay terse.
struct PhaseFunction {
    std::function<double(double q, double p)> f;
    std::function<double(double q, double p)> fq;
    std::function<double(double q, double p)> fp;
};

struct Monomial {
    double c = 0.0;
    int iq = 0;
    int ip = 0;
};

PhaseFunction pf_constant(double c);
PhaseFunction pf_poly(std::vector<Monomial> terms);
PhaseFunction pf_sum(PhaseFunction a, PhaseFunction b);
PhaseFunction pf_product(PhaseFunction a, PhaseFunction b);
PhaseFunction pf_scale(PhaseFunction a, double s);

// Max relative mismatch between the analytic partials and central differences
// over the chart markers; a smoke test for caller-supplied closures.
double pf_self_check(const PhaseFunction& g, const MarkerChart& chart);

// Tangent direction at a chart: the marker displacement is the Hamiltonian
// field of dg, dmu perturbs the per-marker mass components, dphi shifts the
// phase at the base marker.
struct TangentPerturbation {
    PhaseFunction dg;
    std::vector<double> dmu; // mass components, one per marker (empty = zero)
    double dphi = 0.0;
};

// Covector data: per-marker density components paired against dg and a
// phase-space function paired against dmu. A constant generator moves no
// marker, so a derivative of an actual functional has dF_dg summing to zero;
// hamiltonian_vector silently projects nothing and inherits any violation.
struct FunctionalDerivative {
    std::vector<double> dF_dg; // mass components (empty = zero)
    PhaseFunction dF_dmu;
};

struct Observables {
    double p_phi = 0.0;
    double energy = 0.0;
};

Observables observables(const MarkerChart& chart, const DispersionSymbol& sym, double t,
                        int threads = 1);

// One-form: -sum_i dg(z_i) rho_i mu_i - p_phi (p.dg_p(base) - dg(base) - dphi),
// assembled so a constant dg cancels marker by marker and gives exactly zero.
double theta_eval(const MarkerChart& chart, const DispersionSymbol& sym, double t,
                  const TangentPerturbation& v, int threads = 1);

// Exterior derivative of the one-form on two tangent directions; the term
// grouping makes the swap an exact floating-point negation.
double dtheta_eval(const MarkerChart& chart, const DispersionSymbol& sym, double t,
                   const TangentPerturbation& v1, const TangentPerturbation& v2,
                   int threads = 1);

// Cotangent pairing <alpha, v>; purely kinematic, no symbol involved.
double pairing_eval(const MarkerChart& chart, const FunctionalDerivative& alpha,
                    const TangentPerturbation& v);

double poisson_bracket(const MarkerChart& chart, const DispersionSymbol& sym, double t,
                       const FunctionalDerivative& dF, const FunctionalDerivative& dG,
                       int threads = 1);

// Hamiltonian direction of dF: dg = -dF_dmu/rho as a phase-space function,
// dmu per marker from the bracket with rho, dphi the canonical lift
// p.dg_p(base) - dg(base). time_dependent adds the -rho_dot mu / rho term.
TangentPerturbation hamiltonian_vector(const MarkerChart& chart, const DispersionSymbol& sym,
                                       double t, const FunctionalDerivative& dF,
                                       bool time_dependent = false, int threads = 1);

// Derivative data of the energy observable: dF_dg = 0, dF_dmu = -E rho. Its
// Hamiltonian direction is the ray field the time stepper integrates.
FunctionalDerivative energy_functional(const DispersionSymbol& sym, double t);

struct FrozenInReport {
    double theta_t0 = 0.0;
    double theta_t1 = 0.0;
    double defect = 0.0;    // theta_t1 - theta_t0
    double fd_spread = 0.0; // transported value at s vs s/2, a step-size check
};

// Evolves the chart and its +-s perturbations along v from t0 to t1 (rk4,
// fixed step h, no refinement), reads the transported tangent off central
// differences at s and s/2, and compares the one-form at both ends. s is
// shrunk automatically when v is large.
FrozenInReport frozen_in_check(const MarkerChart& chart, const DispersionSymbol& sym,
                               const TangentPerturbation& v, double t0, double t1, double h,
                               double s = 1e-4);

// Chart displaced by amplitude a along v: markers by the Hamiltonian field of
// dg, phases by a (dphi + ell(z_i) - ell(base)) with ell = p.dg_p - dg,
// weights by a dmu / tw. Labels and fold counters stay put.
MarkerChart perturb_chart(const MarkerChart& chart, const TangentPerturbation& v, double a);

// One-form on a tangent given discretely by marker displacements dzq and
// per-marker phase rates ds (the representation finite-difference transport
// produces); the generator values along the chart are p_i dzq_i - ds_i + ds_base.
double theta_eval_discrete(const MarkerChart& chart, const DispersionSymbol& sym, double t,
                           std::span<const double> dzq, std::span<const double> ds,
                           int threads = 1);

// Reparametrization direction on an exact origin-centered circle chart with
// uniform density: dg = a C with C = (q^2 + p^2 - r^2)/2 vanishing on the
// chart, dmu the analytic transport of the density along that field, dphi the
// canonical lift. Such directions span the kernel of the two-form.
TangentPerturbation gauge_tangent_circle(const MarkerChart& chart, const PhaseFunction& a);

} // namespace kmw

#pragma once
// Dispersion symbols D(q, p, t, U) with analytic first partials, the builtin
// families, and the frequency solve that turns a symbol into ray data.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "core/common.hpp"

namespace kmw {

using SymbolFn = std::function<double(std::span<const double> q, std::span<const double> p,
                                      double t, double u)>;
using SymbolGradFn = std::function<void(std::span<const double> q, std::span<const double> p,
                                        double t, double u, std::span<double> out)>;

// D and its first partials. branch_hint seeds the frequency solve and selects
// the root when D(z, t, .) has several.
struct DispersionSymbol {
    SymbolFn eval;
    SymbolFn du;
    SymbolGradFn dq;
    SymbolGradFn dp;
    SymbolFn dt;
    double branch_hint = 1.0;
    std::string label = "user";
};

// Frequency E with D(q, p, t, -E) = 0, the weight rho = dD/dU there, and the
// ray velocity (dD/dp / rho, -dD/dq / rho) from implicit differentiation.
struct FrequencyData {
    double e = 0.0;
    double rho = 0.0;
    std::vector<double> qdot;
    std::vector<double> pdot;
};

// D = -U - |p|^2/2 - V(q); V is a polynomial in the first configuration
// coordinate (supply an empty polynomial for a free particle).
DispersionSymbol make_schrodinger(Polynomial v = {}, double branch_hint = 1.0);

// D = -U - (|p|^2 + omega^2 |q|^2) / 2.
DispersionSymbol make_harmonic(double omega, double branch_hint = 1.0);

// D = U^2 - c(q)^2 |p|^2 with a polynomial sound speed c in the first
// configuration coordinate. Two frequency branches; the hint picks one.
DispersionSymbol make_helmholtz(Polynomial c, double branch_hint = 1.0);

FrequencyData frequency_data(const DispersionSymbol& sym, std::span<const double> q,
                             std::span<const double> p, double t);

// Same solve seeded from a caller-provided frequency instead of the symbol's
// hint; used wherever branch continuity matters more than the global hint.
FrequencyData frequency_data_seeded(const DispersionSymbol& sym, std::span<const double> q,
                                    std::span<const double> p, double t, double e_seed);

// Max relative disagreement between the analytic partials and central
// differences of eval over n_samples random points. Intended as a smoke test
// for user-supplied closures; the builtins sit near rounding level.
double partials_self_check(const DispersionSymbol& sym, std::size_t dim, int n_samples,
                           std::uint64_t seed);

} // namespace kmw

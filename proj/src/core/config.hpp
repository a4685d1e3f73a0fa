#pragma once
// Strict run-configuration handling: JSON text in, validated RunConfig out,
// plus builders turning the descriptor blocks into live objects. Unknown keys
// are rejected everywhere; numeric emission uses the shortest round-trip form
// so emit -> parse -> emit is a fixed point.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "core/chart.hpp"
#include "core/dynamics.hpp"
#include "core/symbol.hpp"

namespace kmw {

struct SymbolConfig {
    std::string kind = "schrodinger"; // schrodinger | harmonic | helmholtz
    double omega = 1.0;               // harmonic
    std::vector<double> potential;    // schrodinger, polynomial coefficients
    std::vector<double> speed = {1.0}; // helmholtz, polynomial coefficients
    double branch_hint = 1.0;
};

// Amplitude profile for phase-function initial data.
struct AmplitudeConfig {
    std::string kind = "constant"; // constant | poly | gaussian
    double value = 1.0;            // constant
    std::vector<double> coeffs;    // poly
    double alpha = 1.0;            // gaussian exp(-alpha (q - center)^2)
    double center = 0.0;
};

struct InitialConfig {
    std::string kind = "circle"; // circle | phase_function
    // circle
    double radius = 1.0;
    std::size_t n = 256;
    double total_weight = 1.0;
    // phase_function
    std::vector<double> s_coeffs; // polynomial phase S(q)
    AmplitudeConfig amp;
    double q_min = -1.0;
    double q_max = 1.0;
    std::size_t grid_n = 257;
};

struct GridConfig {
    double min = -3.0;
    double max = 3.0;
    std::size_t n = 241;
};

struct OutputsConfig {
    std::string dir;             // usually supplied by the --out flag
    std::size_t save_every = 0;  // frame stride; 0 keeps first and last only
    GridConfig q_grid;
};

struct QuantizeConfig {
    double radius_min = 0.1;
    double radius_max = 2.0;
    std::size_t n_levels = 5;
    std::size_t markers = 4096;
};

struct VerifyConfig {
    std::vector<std::string> properties; // empty = all
    std::uint64_t seeds = 1;
    double t = 0.0;
};

struct RunConfig {
    SymbolConfig symbol;
    double epsilon = 0.05;
    InitialConfig initial;
    EvolveSettings evolve;
    OutputsConfig outputs;
    QuantizeConfig quantize;
    VerifyConfig verify;
};

// Parse and fully validate a JSON document. Unknown keys raise parse_error
// naming the key; bad values raise validation_error naming the field.
RunConfig parse_config(const std::string& text);

// Normalized JSON emission with every block and every default spelled out.
std::string emit_config(const RunConfig& cfg);

DispersionSymbol build_symbol(const SymbolConfig& cfg);

MarkerChart build_initial_chart(const InitialConfig& cfg, double epsilon);

const char* scheme_name(Scheme scheme);
Scheme scheme_from_name(const std::string& name);

// Every property name verify understands, in report order.
const std::vector<std::string>& verify_property_names();

} // namespace kmw

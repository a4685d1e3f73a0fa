#pragma once
// Discretized marker charts: a one-parameter family of phase-space markers
// carrying density weights, phases, and fold counters, plus the discrete
// geometry built on them (trapezoid quadrature, label-derivatives, loop
// action, fold bookkeeping, relabeling, refinement, CSV round-trip).

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "core/common.hpp"

namespace kmw {

enum class Topology { circle, line };

struct MarkerChart {
    std::size_t dim = 1;
    Topology topology = Topology::line;
    double period = 0.0; // label period, circles only
    double epsilon = 1.0;
    std::size_t base_index = 0;
    std::vector<double> labels;  // n, strictly increasing
    std::vector<double> q;       // n*dim, flattened row-major
    std::vector<double> p;       // n*dim
    std::vector<double> weights; // n, density in the label coordinate
    std::vector<double> phases;  // n
    std::vector<int> maslov;     // n, accumulated fold count

    std::size_t size() const { return labels.size(); }
    std::span<const double> q_at(std::size_t i) const { return row(q, i, dim); }
    std::span<double> q_at(std::size_t i) { return row(q, i, dim); }
    std::span<const double> p_at(std::size_t i) const { return row(p, i, dim); }
    std::span<double> p_at(std::size_t i) { return row(p, i, dim); }
};

void validate(const MarkerChart& chart);

// Quadrature weights of the trapezoid rule on the label grid; every integral
// over the chart is a plain weighted sum with these.
std::vector<double> trapezoid_weights(const MarkerChart& chart);
double total_weight(const MarkerChart& chart);

// Per-segment dq/dx (one configuration dimension only). Circles include the
// wrap segment as the last entry, so the count equals the marker count; lines
// have one fewer.
std::vector<double> segment_projection_jacobians(const MarkerChart& chart);

// Centered label-derivatives at the markers (one-sided at line ends).
std::vector<double> marker_projection_jacobians(const MarkerChart& chart); // dq/dx
std::vector<double> marker_momentum_jacobians(const MarkerChart& chart);   // dp/dx

// Fold-crossing increment shared by time stepping and chain assembly:
// sgn(P) * (sgn(j_after) - sgn(j_before)) / 2.
int fold_jump(double j_before, double j_after, double p_deriv);

struct QuantizationData {
    double loop_action = 0.0;  // shoelace sum over all segments incl. wrap
    long maslov_index = 0;     // fold jumps accumulated once around the loop
    double bs_value = 0.0;     // loop_action + (epsilon*pi/2)*maslov_index
    long n = 0;                // nearest integer level of bs_value/(2*pi*epsilon)
    double bs_residual = 0.0;  // |bs_value - 2*pi*epsilon*n|
};
QuantizationData quantization_data(const MarkerChart& chart);

double loop_action(const MarkerChart& chart);

// Max defect of the midpoint-rule phase increments along the chain; circles
// also check the wrap segment against the loop action.
double phase_coherence_residual(const MarkerChart& chart);

// Markers on the q-grid of a phase function s with momenta s'(q), weights
// amp(q)^2, phases s(q), and zero fold count. A null s_prime falls back to a
// fourth-order difference of s.
MarkerChart init_from_phase_function(const std::function<double(double)>& s,
                                     const std::function<double(double)>& s_prime,
                                     const std::function<double(double)>& amp, double q_min,
                                     double q_max, std::size_t n, double epsilon);

// Clockwise circle q = r cos(x), p = -r sin(x) on a uniform label grid with
// uniform density summing to total_weight, chained phases, and fold counters
// assembled with fold_jump (0 on the lower half, 1 on the upper).
MarkerChart init_circle(double radius, std::size_t n, double epsilon, double total_weight = 1.0);

// Label change leaving the markers in place. Circles rotate the marker arrays
// over the fixed (uniform) label grid; markers carried across the wrap pick up
// the loop action and the loop fold index. Lines substitute new label values
// from a strictly increasing map and rescale the densities by its discrete
// Jacobian on the trapezoid stencil, preserving the total weight exactly.
struct GaugeMap {
    long circle_shift = 0;
    std::function<double(double)> relabel; // lines
};
MarkerChart gauge_transform(const MarkerChart& chart, const GaugeMap& map);

// Insert midpoint markers until no segment jumps farther than max_spacing in
// q or p (max-norm). Positions come from a cubic through the four nearest
// markers, densities from the trapezoid-exact average, phases from the
// midpoint rule, fold counters from the left marker.
void refine(MarkerChart& chart, double max_spacing, std::size_t marker_cap = 1000000);

std::string chart_to_csv(const MarkerChart& chart);
MarkerChart chart_from_csv(const std::string& text);
void save_chart_csv(const MarkerChart& chart, const std::string& path);
MarkerChart load_chart_csv(const std::string& path);

// Midpoint-rule circulation of p.dq around every plaquette of an n0 x n1
// label grid of markers (row-major, dim components each); the max magnitude
// measures how far the gridded family is from Lagrangian.
double lagrangian_plaquette_residual(std::span<const double> q, std::span<const double> p,
                                     std::size_t n0, std::size_t n1, std::size_t dim);

} // namespace kmw

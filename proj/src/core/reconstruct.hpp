#pragma once
// Wave-field synthesis from a marker chart: away from folds the field is a
// superposition of eikonal branches found by scanning chart segments; near a
// fold the chart is re-read as momentum-space eikonal data and the field comes
// from an oversampled oscillatory integral, which stays finite where the
// branch amplitudes diverge. Global phase is meaningful modulo quarter turns
// only; tests compare phase differences, never absolute phase.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "core/chart.hpp"

namespace kmw {

enum class FieldMethod { branch_sum, momentum_integral };

struct Branch {
    std::size_t segment_index = 0;
    double q = 0.0;
    double p = 0.0;
    double amplitude = 0.0; // sqrt(weight / |dq/dx|) interpolated to the crossing
    double phase = 0.0;     // unreduced phase section value at the crossing
    int maslov = 0;
};

struct FieldSample {
    double q = 0.0;
    std::complex<double> value{0.0, 0.0};
    std::vector<Branch> branches; // regular crossings, ordered by segment index
    FieldMethod method = FieldMethod::branch_sum;
};

struct ReconstructOptions {
    // <0 picks 0.1 * median |segment dq/dx|; segments straddling a sign change
    // of dq/dx are treated as folded regardless of magnitude.
    double caustic_threshold = -1.0;
    int points_per_cycle = 32; // quadrature samples per full phase cycle
    std::size_t max_quadrature_points = std::size_t{1} << 22;
    int threads = 1;
};

// All chart segments crossing configuration point q, with data interpolated
// to the crossing. Folded segments are reported too; callers that need the
// regular subset filter by the threshold. Empty when q is outside the chart.
std::vector<Branch> branches_at(const MarkerChart& chart, double q,
                                const ReconstructOptions& opt = {});

// Field at a single point. branch_sum adds amplitude * exp(i(phase/eps -
// maslov*pi/2)) over regular branches and refuses folded queries
// (caustic_at_query); momentum_integral evaluates the oscillatory integral
// over every monotone-momentum window of the chart, which is uniformly valid
// through folds.
FieldSample field_at(const MarkerChart& chart, double q,
                     FieldMethod method = FieldMethod::branch_sum,
                     const ReconstructOptions& opt = {});

// Hybrid profile: branch_sum wherever every covering segment is regular,
// momentum_integral for queries within a fold's diffraction width. Throws
// unresolved_caustic if a folded region is not covered by any monotone
// momentum window.
std::vector<FieldSample> field_profile(const MarkerChart& chart, std::span<const double> q_grid,
                                       const ReconstructOptions& opt = {});

} // namespace kmw

#pragma once
// Time stepping of marker charts under a dispersion symbol: ray transport of
// positions and phases, exact density reweighting, fold counting, and the
// evolve driver with per-step diagnostics.

#include <cstddef>
#include <vector>

#include "core/chart.hpp"
#include "core/symbol.hpp"

namespace kmw {

enum class Scheme { rk4, midpoint, variational };

struct EvolveSettings {
    Scheme scheme = Scheme::rk4;
    double h = 1e-3;
    double t0 = 0.0;
    double t1 = 1.0;
    std::size_t refine_every = 0; // 0 disables refinement
    double max_spacing = 0.1;
    double caustic_threshold = -1.0; // carried to reconstruction; <0 picks automatically
    std::size_t marker_cap = 1000000;
    std::size_t frame_stride = 0; // 0 keeps only the first and last frames
    int threads = 1;
};

struct DiagnosticsRecord {
    double t = 0.0;
    double wave_action = 0.0;
    double energy = 0.0;
    double coherence = 0.0;
    double bs_residual = 0.0; // NaN for open charts
    std::size_t n_markers = 0;
};

struct Trajectory {
    std::vector<double> times;                  // frame times
    std::vector<MarkerChart> frames;            // saved charts
    std::vector<DiagnosticsRecord> diagnostics; // one record per step plus the start
};

// Integral of the symbol slope against the density; conserved exactly by the
// reweighting in step(), so its drift measures bookkeeping bugs, not the
// integrator.
double wave_action(const MarkerChart& chart, const DispersionSymbol& sym, double t,
                   int threads = 1);

// Minus the integral of frequency times slope against the density.
double wave_energy(const MarkerChart& chart, const DispersionSymbol& sym, double t,
                   int threads = 1);

// Advance every marker from t to t+h (h may be negative), update phases along
// the rays, reweight densities by the slope ratio, and count fold crossings.
void step(MarkerChart& chart, const DispersionSymbol& sym, double t, double h, Scheme scheme,
          int threads = 1);

Trajectory evolve(MarkerChart chart, const DispersionSymbol& sym, const EvolveSettings& settings);

} // namespace kmw

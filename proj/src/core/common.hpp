#pragma once
// Shared plumbing for the wave-chart core: error codes, small vector helpers,
// polynomials, and the number formatting used by every serializer.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace kmw {

enum class Errc {
    invalid_argument,
    no_convergence,
    degenerate_symbol,
    open_topology,
    orientation,
    caustic_at_query,
    unresolved_caustic,
    zero_weight,
    refinement_explosion,
    parse_error,
    validation_error,
    io_error,
    internal,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(message), code_(code) {}
    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
    throw Error(code, message);
}

inline std::span<const double> row(const std::vector<double>& flat, std::size_t i, std::size_t dim) {
    return {flat.data() + i * dim, dim};
}

inline std::span<double> row(std::vector<double>& flat, std::size_t i, std::size_t dim) {
    return {flat.data() + i * dim, dim};
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

inline double norm_inf(std::span<const double> a) {
    double m = 0.0;
    for (double x : a) m = std::max(m, std::abs(x));
    return m;
}

// Shortest decimal string that parses back to exactly the same double.
std::string format_shortest(double x);

// Dense polynomial in one variable, coefficient order c[0] + c[1]*x + ...
struct Polynomial {
    std::vector<double> c;

    double operator()(double x) const;
    double deriv(double x) const;
    Polynomial derivative() const;
    bool empty() const { return c.empty(); }
};

// Chunked deterministic parallel loop: fn(first, last) over disjoint ranges.
// Results must be written to per-index slots; no reductions happen here, so
// the output is identical for every thread count.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t, std::size_t)>& fn);

} // namespace kmw

#include "core/common.hpp"

#include <charconv>
#include <mutex>
#include <thread>

namespace kmw {

const char* errc_name(Errc code) {
    switch (code) {
        case Errc::invalid_argument: return "InvalidArgument";
        case Errc::no_convergence: return "NoConvergence";
        case Errc::degenerate_symbol: return "DegenerateSymbol";
        case Errc::open_topology: return "OpenTopology";
        case Errc::orientation: return "Orientation";
        case Errc::caustic_at_query: return "CausticAtQuery";
        case Errc::unresolved_caustic: return "UnresolvedCaustic";
        case Errc::zero_weight: return "ZeroWeight";
        case Errc::refinement_explosion: return "RefinementExplosion";
        case Errc::parse_error: return "ParseError";
        case Errc::validation_error: return "ValidationError";
        case Errc::io_error: return "IoError";
        case Errc::internal: return "Internal";
    }
    return "Unknown";
}

std::string format_shortest(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

double Polynomial::operator()(double x) const {
    double v = 0.0;
    for (std::size_t k = c.size(); k-- > 0;) v = v * x + c[k];
    return v;
}

double Polynomial::deriv(double x) const {
    double v = 0.0;
    for (std::size_t k = c.size(); k-- > 1;) v = v * x + c[k] * static_cast<double>(k);
    return v;
}

Polynomial Polynomial::derivative() const {
    Polynomial d;
    if (c.size() <= 1) return d;
    d.c.resize(c.size() - 1);
    for (std::size_t k = 1; k < c.size(); ++k) d.c[k - 1] = c[k] * static_cast<double>(k);
    return d;
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    std::size_t workers = threads > 1 ? std::min<std::size_t>(static_cast<std::size_t>(threads), n) : 1;
    if (workers <= 1) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::mutex err_mutex;
    std::exception_ptr err;
    std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        std::size_t first = w * chunk;
        std::size_t last = std::min(n, first + chunk);
        if (first >= last) break;
        pool.emplace_back([&, first, last] {
            try {
                fn(first, last);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!err) err = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

} // namespace kmw

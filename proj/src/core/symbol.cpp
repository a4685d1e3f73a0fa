#include "core/symbol.hpp"

#include <cmath>
#include <memory>
#include <random>

namespace kmw {

namespace {

double sq_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

FrequencyData solve_frequency(const DispersionSymbol& sym, std::span<const double> q,
                              std::span<const double> p, double t, double e0) {
    if (!sym.eval || !sym.du || !sym.dq || !sym.dp)
        fail(Errc::invalid_argument, "symbol is missing eval or a first partial");
    double e = e0;
    double d = sym.eval(q, p, t, -e);
    for (int it = 0; it < 50; ++it) {
        const double dd = sym.du(q, p, t, -e);
        if (std::abs(dd) < 1e-10)
            fail(Errc::degenerate_symbol,
                 "dD/dU vanished while solving D = 0 for the frequency (" + sym.label + ")");
        // A residual at rounding level with a healthy slope is a solved simple
        // root. With a small slope keep iterating: near a multiple root the
        // step never stagnates and the slope check above eventually fires.
        if (std::abs(d) <= 1e-13 * std::max(1.0, std::abs(e)) && std::abs(dd) >= 1e-6) break;
        const double de = d / dd;
        e += de;
        d = sym.eval(q, p, t, -e);
        if (std::abs(de) <= 1e-12 * std::max(1.0, std::abs(e))) break;
    }
    if (!(std::abs(d) <= 1e-12 * std::max(1.0, std::abs(e))))
        fail(Errc::no_convergence,
             "frequency iteration did not reach D = 0 (" + sym.label + ")");

    FrequencyData out;
    out.e = e;
    out.rho = sym.du(q, p, t, -e);
    if (std::abs(out.rho) < 1e-10)
        fail(Errc::degenerate_symbol,
             "dD/dU vanished at the solved frequency (" + sym.label + ")");
    const std::size_t dim = q.size();
    std::vector<double> gq(dim), gp(dim);
    sym.dq(q, p, t, -e, gq);
    sym.dp(q, p, t, -e, gp);
    out.qdot.resize(dim);
    out.pdot.resize(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        out.qdot[i] = gp[i] / out.rho;
        out.pdot[i] = -gq[i] / out.rho;
    }
    return out;
}

} // namespace

DispersionSymbol make_schrodinger(Polynomial v, double branch_hint) {
    DispersionSymbol s;
    s.label = "schrodinger";
    s.branch_hint = branch_hint;
    auto pot = std::make_shared<Polynomial>(std::move(v));
    s.eval = [pot](std::span<const double> q, std::span<const double> p, double, double u) {
        double val = -u - 0.5 * sq_norm(p);
        if (!pot->empty()) val -= (*pot)(q[0]);
        return val;
    };
    s.du = [](std::span<const double>, std::span<const double>, double, double) { return -1.0; };
    s.dq = [pot](std::span<const double> q, std::span<const double>, double, double,
                 std::span<double> out) {
        for (double& x : out) x = 0.0;
        if (!pot->empty()) out[0] = -pot->deriv(q[0]);
    };
    s.dp = [](std::span<const double>, std::span<const double> p, double, double,
              std::span<double> out) {
        for (std::size_t i = 0; i < p.size(); ++i) out[i] = -p[i];
    };
    s.dt = [](std::span<const double>, std::span<const double>, double, double) { return 0.0; };
    return s;
}

DispersionSymbol make_harmonic(double omega, double branch_hint) {
    DispersionSymbol s;
    s.label = "harmonic";
    s.branch_hint = branch_hint;
    const double w2 = omega * omega;
    s.eval = [w2](std::span<const double> q, std::span<const double> p, double, double u) {
        return -u - 0.5 * (sq_norm(p) + w2 * sq_norm(q));
    };
    s.du = [](std::span<const double>, std::span<const double>, double, double) { return -1.0; };
    s.dq = [w2](std::span<const double> q, std::span<const double>, double, double,
                std::span<double> out) {
        for (std::size_t i = 0; i < q.size(); ++i) out[i] = -w2 * q[i];
    };
    s.dp = [](std::span<const double>, std::span<const double> p, double, double,
              std::span<double> out) {
        for (std::size_t i = 0; i < p.size(); ++i) out[i] = -p[i];
    };
    s.dt = [](std::span<const double>, std::span<const double>, double, double) { return 0.0; };
    return s;
}

DispersionSymbol make_helmholtz(Polynomial c, double branch_hint) {
    DispersionSymbol s;
    s.label = "helmholtz";
    s.branch_hint = branch_hint;
    auto speed = std::make_shared<Polynomial>(std::move(c));
    if (speed->empty()) fail(Errc::invalid_argument, "helmholtz needs a sound speed");
    s.eval = [speed](std::span<const double> q, std::span<const double> p, double, double u) {
        const double cv = (*speed)(q[0]);
        return u * u - cv * cv * sq_norm(p);
    };
    s.du = [](std::span<const double>, std::span<const double>, double, double u) {
        return 2.0 * u;
    };
    s.dq = [speed](std::span<const double> q, std::span<const double> p, double, double,
                   std::span<double> out) {
        for (double& x : out) x = 0.0;
        out[0] = -2.0 * (*speed)(q[0]) * speed->deriv(q[0]) * sq_norm(p);
    };
    s.dp = [speed](std::span<const double> q, std::span<const double> p, double, double,
                   std::span<double> out) {
        const double cv = (*speed)(q[0]);
        for (std::size_t i = 0; i < p.size(); ++i) out[i] = -2.0 * cv * cv * p[i];
    };
    s.dt = [](std::span<const double>, std::span<const double>, double, double) { return 0.0; };
    return s;
}

FrequencyData frequency_data(const DispersionSymbol& sym, std::span<const double> q,
                             std::span<const double> p, double t) {
    return solve_frequency(sym, q, p, t, sym.branch_hint);
}

FrequencyData frequency_data_seeded(const DispersionSymbol& sym, std::span<const double> q,
                                    std::span<const double> p, double t, double e_seed) {
    return solve_frequency(sym, q, p, t, e_seed);
}

double partials_self_check(const DispersionSymbol& sym, std::size_t dim, int n_samples,
                           std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::vector<double> q(dim), p(dim), gq(dim), gp(dim), qs(dim), ps(dim);
    double worst = 0.0;
    const double h = 1e-6;
    auto update = [&](double analytic, double a, double b) {
        const double fd = (a - b) / (2.0 * h);
        const double rel = std::abs(analytic - fd) / std::max(1.0, std::abs(fd));
        if (rel > worst) worst = rel;
    };
    for (int s = 0; s < n_samples; ++s) {
        for (std::size_t i = 0; i < dim; ++i) {
            q[i] = 2.0 * unit(rng);
            p[i] = 2.0 * unit(rng);
        }
        const double t = unit(rng);
        const double u = 2.0 * unit(rng);
        sym.dq(q, p, t, u, gq);
        sym.dp(q, p, t, u, gp);
        for (std::size_t i = 0; i < dim; ++i) {
            qs = q;
            qs[i] = q[i] + h;
            const double a = sym.eval(qs, p, t, u);
            qs[i] = q[i] - h;
            update(gq[i], a, sym.eval(qs, p, t, u));
            ps = p;
            ps[i] = p[i] + h;
            const double b = sym.eval(q, ps, t, u);
            ps[i] = p[i] - h;
            update(gp[i], b, sym.eval(q, ps, t, u));
        }
        update(sym.du(q, p, t, u), sym.eval(q, p, t, u + h), sym.eval(q, p, t, u - h));
        if (sym.dt)
            update(sym.dt(q, p, t, u), sym.eval(q, p, t + h, u), sym.eval(q, p, t - h, u));
    }
    return worst;
}

} // namespace kmw

#include "core/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kmw {

namespace {

// Gaussian elimination with partial pivoting; a is n x n row-major and both
// arguments are destroyed. Returns the solution in b.
void solve_linear(std::vector<double>& a, std::vector<double>& b, std::size_t n) {
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
        if (a[piv * n + col] == 0.0)
            fail(Errc::no_convergence, "singular jacobian in an implicit step");
        if (piv != col) {
            for (std::size_t k = col; k < n; ++k) std::swap(a[piv * n + k], a[col * n + k]);
            std::swap(b[piv], b[col]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r * n + col] / a[col * n + col];
            if (f == 0.0) continue;
            for (std::size_t k = col; k < n; ++k) a[r * n + k] -= f * a[col * n + k];
            b[r] -= f * b[col];
        }
    }
    for (std::size_t r = n; r-- > 0;) {
        double acc = b[r];
        for (std::size_t k = r + 1; k < n; ++k) acc -= a[r * n + k] * b[k];
        b[r] = acc / a[r * n + r];
    }
}

struct MarkerState {
    std::vector<double> q, p;
    double s = 0.0;
};

void rk4_marker(MarkerState& m, const DispersionSymbol& sym, double t, double h) {
    const std::size_t dim = m.q.size();
    struct Rate {
        std::vector<double> dq, dp;
        double ds = 0.0;
    };
    auto rate_at = [&](const std::vector<double>& q, const std::vector<double>& p, double tt) {
        const auto fd = frequency_data(sym, q, p, tt);
        Rate r;
        r.dq = fd.qdot;
        r.dp = fd.pdot;
        r.ds = dot(p, fd.qdot) - fd.e;
        return r;
    };
    auto shifted = [&](const Rate& r, double f, std::vector<double>& q, std::vector<double>& p) {
        for (std::size_t d = 0; d < dim; ++d) {
            q[d] = m.q[d] + f * r.dq[d];
            p[d] = m.p[d] + f * r.dp[d];
        }
    };
    std::vector<double> q(dim), p(dim);
    const Rate k1 = rate_at(m.q, m.p, t);
    shifted(k1, 0.5 * h, q, p);
    const Rate k2 = rate_at(q, p, t + 0.5 * h);
    shifted(k2, 0.5 * h, q, p);
    const Rate k3 = rate_at(q, p, t + 0.5 * h);
    shifted(k3, h, q, p);
    const Rate k4 = rate_at(q, p, t + h);
    for (std::size_t d = 0; d < dim; ++d) {
        m.q[d] += h / 6.0 * (k1.dq[d] + 2.0 * k2.dq[d] + 2.0 * k3.dq[d] + k4.dq[d]);
        m.p[d] += h / 6.0 * (k1.dp[d] + 2.0 * k2.dp[d] + 2.0 * k3.dp[d] + k4.dp[d]);
    }
    m.s += h / 6.0 * (k1.ds + 2.0 * k2.ds + 2.0 * k3.ds + k4.ds);
}

void midpoint_marker(MarkerState& m, const DispersionSymbol& sym, double t, double h) {
    const std::size_t dim = m.q.size();
    const std::size_t n = 2 * dim;
    const double th = t + 0.5 * h;
    std::vector<double> z0(n), z1(n);
    for (std::size_t d = 0; d < dim; ++d) {
        z0[d] = m.q[d];
        z0[dim + d] = m.p[d];
    }
    {
        const auto fd = frequency_data(sym, m.q, m.p, t);
        for (std::size_t d = 0; d < dim; ++d) {
            z1[d] = m.q[d] + h * fd.qdot[d];
            z1[dim + d] = m.p[d] + h * fd.pdot[d];
        }
    }
    std::vector<double> qm(dim), pm(dim), f(n), f2(n), jac(n * n), rhs(n);
    auto residual = [&](const std::vector<double>& z, std::vector<double>& out) {
        for (std::size_t d = 0; d < dim; ++d) {
            qm[d] = 0.5 * (z0[d] + z[d]);
            pm[d] = 0.5 * (z0[dim + d] + z[dim + d]);
        }
        const auto fd = frequency_data(sym, qm, pm, th);
        for (std::size_t d = 0; d < dim; ++d) {
            out[d] = z[d] - z0[d] - h * fd.qdot[d];
            out[dim + d] = z[dim + d] - z0[dim + d] - h * fd.pdot[d];
        }
    };
    bool settled = false;
    for (int it = 0; it < 50 && !settled; ++it) {
        residual(z1, f);
        for (std::size_t j = 0; j < n; ++j) {
            const double dz = 1e-7 * std::max(1.0, std::abs(z1[j]));
            const double keep = z1[j];
            z1[j] = keep + dz;
            residual(z1, f2);
            z1[j] = keep - dz;
            residual(z1, rhs);
            z1[j] = keep;
            for (std::size_t i = 0; i < n; ++i) jac[i * n + j] = (f2[i] - rhs[i]) / (2.0 * dz);
        }
        for (std::size_t i = 0; i < n; ++i) rhs[i] = -f[i];
        std::vector<double> a = jac;
        solve_linear(a, rhs, n);
        double dmax = 0.0, zmax = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            z1[i] += rhs[i];
            dmax = std::max(dmax, std::abs(rhs[i]));
            zmax = std::max(zmax, std::abs(z1[i]));
        }
        if (dmax <= 1e-14 * zmax) settled = true;
    }
    residual(z1, f);
    double fmax = 0.0;
    for (std::size_t i = 0; i < n; ++i) fmax = std::max(fmax, std::abs(f[i]));
    if (!(fmax <= 1e-10 * std::max(1.0, std::abs(h))))
        fail(Errc::no_convergence, "implicit midpoint step did not settle");
    for (std::size_t d = 0; d < dim; ++d) {
        qm[d] = 0.5 * (z0[d] + z1[d]);
        pm[d] = 0.5 * (z0[dim + d] + z1[dim + d]);
    }
    const auto fd = frequency_data(sym, qm, pm, th);
    double inc = 0.0;
    for (std::size_t d = 0; d < dim; ++d) inc += pm[d] * (z1[d] - z0[d]);
    m.s += inc - h * fd.e;
    for (std::size_t d = 0; d < dim; ++d) {
        m.q[d] = z1[d];
        m.p[d] = z1[dim + d];
    }
}

// One-step stationarity of the discrete phase integral: the midpoint symbol
// constraint pins the effective frequency K, and the remaining equations are
// the discrete rays it generates.
void variational_marker(MarkerState& m, const DispersionSymbol& sym, double t, double h) {
    const std::size_t dim = m.q.size();
    const std::size_t n = 2 * dim + 1;
    const double th = t + 0.5 * h;
    MarkerState pred = m;
    rk4_marker(pred, sym, t, h);
    std::vector<double> u(n);
    for (std::size_t d = 0; d < dim; ++d) {
        u[d] = pred.q[d];
        u[dim + d] = pred.p[d];
    }
    u[2 * dim] = pred.s;
    std::vector<double> qm(dim), pm(dim), gq(dim), gp(dim);
    std::vector<double> f(n), f2(n), f3(n), jac(n * n), rhs(n);
    auto residual = [&](const std::vector<double>& z, std::vector<double>& out) {
        double pdq = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            qm[d] = 0.5 * (m.q[d] + z[d]);
            pm[d] = 0.5 * (m.p[d] + z[dim + d]);
            pdq += pm[d] * (z[d] - m.q[d]);
        }
        const double k = (z[2 * dim] - m.s - pdq) / h;
        const double dd = sym.du(qm, pm, th, k);
        if (std::abs(dd) < 1e-10)
            fail(Errc::degenerate_symbol, "symbol slope vanished inside a variational step");
        sym.dq(qm, pm, th, k, gq);
        sym.dp(qm, pm, th, k, gp);
        for (std::size_t d = 0; d < dim; ++d) {
            out[d] = z[d] - m.q[d] - h * gp[d] / dd;
            out[dim + d] = z[dim + d] - m.p[d] + h * gq[d] / dd;
        }
        out[2 * dim] = sym.eval(qm, pm, th, k);
    };
    bool settled = false;
    for (int it = 0; it < 50 && !settled; ++it) {
        residual(u, f);
        for (std::size_t j = 0; j < n; ++j) {
            const double dz = 1e-7 * std::max(1.0, std::abs(u[j]));
            const double keep = u[j];
            u[j] = keep + dz;
            residual(u, f2);
            u[j] = keep - dz;
            residual(u, f3);
            u[j] = keep;
            for (std::size_t i = 0; i < n; ++i) jac[i * n + j] = (f2[i] - f3[i]) / (2.0 * dz);
        }
        for (std::size_t i = 0; i < n; ++i) rhs[i] = -f[i];
        std::vector<double> a = jac;
        solve_linear(a, rhs, n);
        double dmax = 0.0, umax = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            u[i] += rhs[i];
            dmax = std::max(dmax, std::abs(rhs[i]));
            umax = std::max(umax, std::abs(u[i]));
        }
        if (dmax <= 1e-14 * umax) settled = true;
    }
    residual(u, f);
    double fmax = 0.0;
    for (std::size_t i = 0; i < n; ++i) fmax = std::max(fmax, std::abs(f[i]));
    if (!(fmax <= 1e-9))
        fail(Errc::no_convergence, "variational step did not settle");
    for (std::size_t d = 0; d < dim; ++d) {
        m.q[d] = u[d];
        m.p[d] = u[dim + d];
    }
    m.s = u[2 * dim];
}

} // namespace

double wave_action(const MarkerChart& chart, const DispersionSymbol& sym, double t, int threads) {
    const std::size_t n = chart.size();
    std::vector<double> term(n);
    parallel_for(n, threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i)
            term[i] = frequency_data(sym, chart.q_at(i), chart.p_at(i), t).rho * chart.weights[i];
    });
    const auto tw = trapezoid_weights(chart);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += tw[i] * term[i];
    return acc;
}

double wave_energy(const MarkerChart& chart, const DispersionSymbol& sym, double t, int threads) {
    const std::size_t n = chart.size();
    std::vector<double> term(n);
    parallel_for(n, threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const auto fd = frequency_data(sym, chart.q_at(i), chart.p_at(i), t);
            term[i] = fd.e * fd.rho * chart.weights[i];
        }
    });
    const auto tw = trapezoid_weights(chart);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += tw[i] * term[i];
    return -acc;
}

void step(MarkerChart& chart, const DispersionSymbol& sym, double t, double h, Scheme scheme,
          int threads) {
    validate(chart);
    const std::size_t n = chart.size();
    std::vector<double> j_before, p_before;
    if (chart.dim == 1) {
        j_before = marker_projection_jacobians(chart);
        p_before = marker_momentum_jacobians(chart);
    }
    std::vector<double> rho_ratio(n);
    parallel_for(n, threads, [&](std::size_t lo, std::size_t hi) {
        MarkerState m;
        for (std::size_t i = lo; i < hi; ++i) {
            m.q.assign(chart.q_at(i).begin(), chart.q_at(i).end());
            m.p.assign(chart.p_at(i).begin(), chart.p_at(i).end());
            m.s = chart.phases[i];
            const double rho0 = frequency_data(sym, m.q, m.p, t).rho;
            switch (scheme) {
            case Scheme::rk4: rk4_marker(m, sym, t, h); break;
            case Scheme::midpoint: midpoint_marker(m, sym, t, h); break;
            case Scheme::variational: variational_marker(m, sym, t, h); break;
            }
            const double rho1 = frequency_data(sym, m.q, m.p, t + h).rho;
            rho_ratio[i] = rho0 / rho1;
            std::copy(m.q.begin(), m.q.end(), chart.q_at(i).begin());
            std::copy(m.p.begin(), m.p.end(), chart.p_at(i).begin());
            chart.phases[i] = m.s;
        }
    });
    for (std::size_t i = 0; i < n; ++i) chart.weights[i] *= rho_ratio[i];
    if (chart.dim == 1) {
        const auto j_after = marker_projection_jacobians(chart);
        const auto p_after = marker_momentum_jacobians(chart);
        for (std::size_t i = 0; i < n; ++i) {
            const bool sb = j_before[i] >= 0.0;
            const bool sa = j_after[i] >= 0.0;
            if (sb == sa) continue;
            chart.maslov[i] += (j_after[i] * p_after[i] > 0.0 ? 1 : 0) -
                               (j_before[i] * p_before[i] > 0.0 ? 1 : 0);
        }
    }
}

Trajectory evolve(MarkerChart chart, const DispersionSymbol& sym, const EvolveSettings& s) {
    validate(chart);
    if (!(s.h > 0.0)) fail(Errc::invalid_argument, "evolve needs a positive step size");
    if (s.t1 < s.t0) fail(Errc::invalid_argument, "evolve needs t1 >= t0");
    const double span = s.t1 - s.t0;
    const auto n_full = static_cast<std::size_t>(std::floor(span / s.h + 1e-9));
    const double remainder = span - static_cast<double>(n_full) * s.h;
    const bool tail = remainder > 1e-9 * s.h;
    const std::size_t n_steps = n_full + (tail ? 1 : 0);

    Trajectory out;
    auto record = [&](double t) {
        DiagnosticsRecord rec;
        rec.t = t;
        rec.wave_action = wave_action(chart, sym, t, s.threads);
        rec.energy = wave_energy(chart, sym, t, s.threads);
        rec.coherence = phase_coherence_residual(chart);
        rec.bs_residual = (chart.topology == Topology::circle && chart.dim == 1)
                              ? quantization_data(chart).bs_residual
                              : std::numeric_limits<double>::quiet_NaN();
        rec.n_markers = chart.size();
        out.diagnostics.push_back(rec);
    };
    auto save_frame = [&](double t) {
        out.times.push_back(t);
        out.frames.push_back(chart);
    };

    record(s.t0);
    save_frame(s.t0);
    double t = s.t0;
    for (std::size_t k = 0; k < n_steps; ++k) {
        const double target = (k + 1 == n_steps) ? s.t1 : s.t0 + static_cast<double>(k + 1) * s.h;
        step(chart, sym, t, target - t, s.scheme, s.threads);
        t = target;
        if (s.refine_every > 0 && (k + 1) % s.refine_every == 0 && k + 1 != n_steps)
            refine(chart, s.max_spacing, s.marker_cap);
        record(t);
        const bool last = k + 1 == n_steps;
        if (last || (s.frame_stride > 0 && (k + 1) % s.frame_stride == 0)) save_frame(t);
    }
    if (n_steps == 0 && s.t1 > s.t0) {
        // span smaller than a tolerance-scaled step: jump straight to t1
        step(chart, sym, t, s.t1 - t, s.scheme, s.threads);
        record(s.t1);
        save_frame(s.t1);
    }
    return out;
}

} // namespace kmw

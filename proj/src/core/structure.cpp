#include "core/structure.hpp"

#include <array>
#include <cmath>
#include <string>
#include <utility>

#include "core/dynamics.hpp"

namespace kmw {

namespace {

double ev(const std::function<double(double, double)>& g, double q, double p) {
    return g ? g(q, p) : 0.0;
}

double ipow(double x, int n) {
    double r = 1.0;
    for (int k = 0; k < n; ++k) r *= x;
    return r;
}

void check_dim(const MarkerChart& chart) {
    if (chart.dim != 1)
        fail(Errc::invalid_argument, "structure operations support one configuration dimension");
}

double component(const std::vector<double>& list, std::size_t i, std::size_t n,
                 const char* what) {
    if (list.empty()) return 0.0;
    if (list.size() != n) fail(Errc::invalid_argument, std::string(what) + " has wrong length");
    return list[i];
}

void require_slope(double rho) {
    if (std::abs(rho) < 1e-12)
        fail(Errc::zero_weight, "dispersion slope vanishes on the chart");
}

// rho and its phase-space partials at one point; the shifted frequency solves
// are seeded from the central root so the finite differences stay on branch.
struct RhoDerivs {
    double rho = 0.0;
    double rho_q = 0.0;
    double rho_p = 0.0;
    double e = 0.0;
};

RhoDerivs rho_derivs(const DispersionSymbol& sym, double q, double p, double t) {
    const std::array<double, 1> qa{q}, pa{p};
    const auto c = frequency_data(sym, qa, pa, t);
    const double hq = 1e-6 * std::max(1.0, std::abs(q));
    const double hp = 1e-6 * std::max(1.0, std::abs(p));
    const std::array<double, 1> qhi{q + hq}, qlo{q - hq}, phi{p + hp}, plo{p - hp};
    const auto cq1 = frequency_data_seeded(sym, qhi, pa, t, c.e);
    const auto cq0 = frequency_data_seeded(sym, qlo, pa, t, c.e);
    const auto cp1 = frequency_data_seeded(sym, qa, phi, t, c.e);
    const auto cp0 = frequency_data_seeded(sym, qa, plo, t, c.e);
    return {c.rho, (cq1.rho - cq0.rho) / (2.0 * hq), (cp1.rho - cp0.rho) / (2.0 * hp), c.e};
}

double rho_time_rate(const DispersionSymbol& sym, double q, double p, double t, double e_seed) {
    const std::array<double, 1> qa{q}, pa{p};
    const double ht = 1e-6 * std::max(1.0, std::abs(t));
    const auto c1 = frequency_data_seeded(sym, qa, pa, t + ht, e_seed);
    const auto c0 = frequency_data_seeded(sym, qa, pa, t - ht, e_seed);
    return (c1.rho - c0.rho) / (2.0 * ht);
}

} // namespace

PhaseFunction pf_constant(double c) {
    PhaseFunction g;
    g.f = [c](double, double) { return c; };
    g.fq = [](double, double) { return 0.0; };
    g.fp = [](double, double) { return 0.0; };
    return g;
}

PhaseFunction pf_poly(std::vector<Monomial> terms) {
    PhaseFunction g;
    g.f = [terms](double q, double p) {
        double s = 0.0;
        for (const auto& m : terms) s += m.c * ipow(q, m.iq) * ipow(p, m.ip);
        return s;
    };
    g.fq = [terms](double q, double p) {
        double s = 0.0;
        for (const auto& m : terms)
            if (m.iq > 0) s += m.c * m.iq * ipow(q, m.iq - 1) * ipow(p, m.ip);
        return s;
    };
    g.fp = [terms](double q, double p) {
        double s = 0.0;
        for (const auto& m : terms)
            if (m.ip > 0) s += m.c * m.ip * ipow(q, m.iq) * ipow(p, m.ip - 1);
        return s;
    };
    return g;
}

PhaseFunction pf_sum(PhaseFunction a, PhaseFunction b) {
    PhaseFunction g;
    g.f = [a, b](double q, double p) { return ev(a.f, q, p) + ev(b.f, q, p); };
    g.fq = [a, b](double q, double p) { return ev(a.fq, q, p) + ev(b.fq, q, p); };
    g.fp = [a, b](double q, double p) { return ev(a.fp, q, p) + ev(b.fp, q, p); };
    return g;
}

PhaseFunction pf_product(PhaseFunction a, PhaseFunction b) {
    PhaseFunction g;
    g.f = [a, b](double q, double p) { return ev(a.f, q, p) * ev(b.f, q, p); };
    g.fq = [a, b](double q, double p) {
        return ev(a.fq, q, p) * ev(b.f, q, p) + ev(a.f, q, p) * ev(b.fq, q, p);
    };
    g.fp = [a, b](double q, double p) {
        return ev(a.fp, q, p) * ev(b.f, q, p) + ev(a.f, q, p) * ev(b.fp, q, p);
    };
    return g;
}

PhaseFunction pf_scale(PhaseFunction a, double s) {
    PhaseFunction g;
    g.f = [a, s](double q, double p) { return s * ev(a.f, q, p); };
    g.fq = [a, s](double q, double p) { return s * ev(a.fq, q, p); };
    g.fp = [a, s](double q, double p) { return s * ev(a.fp, q, p); };
    return g;
}

double pf_self_check(const PhaseFunction& g, const MarkerChart& chart) {
    check_dim(chart);
    double worst = 0.0;
    for (std::size_t i = 0; i < chart.size(); ++i) {
        const double q = chart.q[i];
        const double p = chart.p[i];
        const double hq = 1e-6 * std::max(1.0, std::abs(q));
        const double hp = 1e-6 * std::max(1.0, std::abs(p));
        const double dq = (ev(g.f, q + hq, p) - ev(g.f, q - hq, p)) / (2.0 * hq);
        const double dp = (ev(g.f, q, p + hp) - ev(g.f, q, p - hp)) / (2.0 * hp);
        const double aq = ev(g.fq, q, p);
        const double ap = ev(g.fp, q, p);
        worst = std::max(worst, std::abs(dq - aq) / std::max(1.0, std::abs(aq)));
        worst = std::max(worst, std::abs(dp - ap) / std::max(1.0, std::abs(ap)));
    }
    return worst;
}

Observables observables(const MarkerChart& chart, const DispersionSymbol& sym, double t,
                        int threads) {
    check_dim(chart);
    return {wave_action(chart, sym, t, threads), wave_energy(chart, sym, t, threads)};
}

double theta_eval(const MarkerChart& chart, const DispersionSymbol& sym, double t,
                  const TangentPerturbation& v, int threads) {
    check_dim(chart);
    const std::size_t n = chart.size();
    const auto tw = trapezoid_weights(chart);
    std::vector<double> rho(n), g(n), mass(n);
    parallel_for(n, threads, [&](std::size_t a, std::size_t b) {
        for (std::size_t i = a; i < b; ++i) {
            rho[i] = frequency_data(sym, chart.q_at(i), chart.p_at(i), t).rho;
            g[i] = ev(v.dg.f, chart.q[i], chart.p[i]);
            mass[i] = chart.weights[i] * tw[i];
        }
    });
    const std::size_t b = chart.base_index;
    const double gb = g[b];
    const double thb = chart.p[b] * ev(v.dg.fp, chart.q[b], chart.p[b]);
    double s = 0.0;
    double pphi = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        s += rho[i] * mass[i] * (gb - g[i]);
        pphi += rho[i] * mass[i];
    }
    return s + pphi * (v.dphi - thb);
}

double dtheta_eval(const MarkerChart& chart, const DispersionSymbol& sym, double t,
                   const TangentPerturbation& v1, const TangentPerturbation& v2, int threads) {
    check_dim(chart);
    const std::size_t n = chart.size();
    const auto tw = trapezoid_weights(chart);
    std::vector<double> rho(n), rq(n), rp(n), mass(n);
    std::vector<double> g1(n), g1q(n), g1p(n), g2(n), g2q(n), g2p(n);
    parallel_for(n, threads, [&](std::size_t a, std::size_t b) {
        for (std::size_t i = a; i < b; ++i) {
            const double q = chart.q[i];
            const double p = chart.p[i];
            const auto rd = rho_derivs(sym, q, p, t);
            rho[i] = rd.rho;
            rq[i] = rd.rho_q;
            rp[i] = rd.rho_p;
            mass[i] = chart.weights[i] * tw[i];
            g1[i] = ev(v1.dg.f, q, p);
            g1q[i] = ev(v1.dg.fq, q, p);
            g1p[i] = ev(v1.dg.fp, q, p);
            g2[i] = ev(v2.dg.f, q, p);
            g2q[i] = ev(v2.dg.fq, q, p);
            g2p[i] = ev(v2.dg.fp, q, p);
        }
    });
    // every addend is grouped so that swapping the arguments negates it bit
    // for bit, which makes the antisymmetry exact in floating point
    double s = 0.0;
    double l1 = 0.0;
    double l2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double m1 = component(v1.dmu, i, n, "dmu");
        const double m2 = component(v2.dmu, i, n, "dmu");
        const double pb12 = g1q[i] * g2p[i] - g1p[i] * g2q[i];
        const double br1 = rq[i] * g1p[i] - rp[i] * g1q[i];
        const double br2 = rq[i] * g2p[i] - rp[i] * g2q[i];
        const double t1 = pb12 * rho[i] * mass[i];
        const double t2 = g1[i] * br2 * mass[i];
        const double t3 = g2[i] * br1 * mass[i];
        const double t4 = (g1[i] * rho[i]) * m2;
        const double t5 = (g2[i] * rho[i]) * m1;
        s += t1 + (t2 - t3) + (t4 - t5);
        l1 += br1 * mass[i] + rho[i] * m1;
        l2 += br2 * mass[i] + rho[i] * m2;
    }
    const std::size_t b = chart.base_index;
    const double ell1 = chart.p[b] * g1p[b] - g1[b];
    const double ell2 = chart.p[b] * g2p[b] - g2[b];
    return s + (l1 * (v2.dphi - ell2) - l2 * (v1.dphi - ell1));
}

double pairing_eval(const MarkerChart& chart, const FunctionalDerivative& alpha,
                    const TangentPerturbation& v) {
    check_dim(chart);
    const std::size_t n = chart.size();
    const auto tw = trapezoid_weights(chart);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double q = chart.q[i];
        const double p = chart.p[i];
        const double mass = chart.weights[i] * tw[i];
        const double br = ev(alpha.dF_dmu.fq, q, p) * ev(v.dg.fp, q, p) -
                          ev(alpha.dF_dmu.fp, q, p) * ev(v.dg.fq, q, p);
        s += ev(v.dg.f, q, p) * component(alpha.dF_dg, i, n, "dF_dg");
        s += br * mass;
        s += ev(alpha.dF_dmu.f, q, p) * component(v.dmu, i, n, "dmu");
    }
    return s;
}

double poisson_bracket(const MarkerChart& chart, const DispersionSymbol& sym, double t,
                       const FunctionalDerivative& dF, const FunctionalDerivative& dG,
                       int threads) {
    check_dim(chart);
    const std::size_t n = chart.size();
    const auto tw = trapezoid_weights(chart);
    std::vector<double> rho(n), rq(n), rp(n), mass(n);
    std::vector<double> pF(n), pFq(n), pFp(n), pG(n), pGq(n), pGp(n);
    parallel_for(n, threads, [&](std::size_t a, std::size_t b) {
        for (std::size_t i = a; i < b; ++i) {
            const double q = chart.q[i];
            const double p = chart.p[i];
            const auto rd = rho_derivs(sym, q, p, t);
            rho[i] = rd.rho;
            rq[i] = rd.rho_q;
            rp[i] = rd.rho_p;
            mass[i] = chart.weights[i] * tw[i];
            pF[i] = ev(dF.dF_dmu.f, q, p);
            pFq[i] = ev(dF.dF_dmu.fq, q, p);
            pFp[i] = ev(dF.dF_dmu.fp, q, p);
            pG[i] = ev(dG.dF_dmu.f, q, p);
            pGq[i] = ev(dG.dF_dmu.fq, q, p);
            pGp[i] = ev(dG.dF_dmu.fp, q, p);
        }
    });
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        require_slope(rho[i]);
        const double r2 = rho[i] * rho[i];
        const double aFq = (pFq[i] * rho[i] - pF[i] * rq[i]) / r2;
        const double aFp = (pFp[i] * rho[i] - pF[i] * rp[i]) / r2;
        const double aGq = (pGq[i] * rho[i] - pG[i] * rq[i]) / r2;
        const double aGp = (pGp[i] * rho[i] - pG[i] * rp[i]) / r2;
        const double kF = component(dF.dF_dg, i, n, "dF_dg");
        const double kG = component(dG.dF_dg, i, n, "dF_dg");
        const double t1 = (pF[i] * kG - pG[i] * kF) / rho[i];
        const double t2 = rho[i] * (aFq * aGp - aFp * aGq) * mass[i];
        s += t1 - t2;
    }
    return s;
}

TangentPerturbation hamiltonian_vector(const MarkerChart& chart, const DispersionSymbol& sym,
                                       double t, const FunctionalDerivative& dF,
                                       bool time_dependent, int threads) {
    check_dim(chart);
    const std::size_t n = chart.size();
    const auto tw = trapezoid_weights(chart);
    TangentPerturbation x;
    x.dmu.resize(n);
    parallel_for(n, threads, [&](std::size_t a, std::size_t b) {
        for (std::size_t i = a; i < b; ++i) {
            const double q = chart.q[i];
            const double p = chart.p[i];
            const auto rd = rho_derivs(sym, q, p, t);
            require_slope(rd.rho);
            const double r2 = rd.rho * rd.rho;
            const double aFq = (ev(dF.dF_dmu.fq, q, p) * rd.rho - ev(dF.dF_dmu.f, q, p) * rd.rho_q) / r2;
            const double aFp = (ev(dF.dF_dmu.fp, q, p) * rd.rho - ev(dF.dF_dmu.f, q, p) * rd.rho_p) / r2;
            const double br = rd.rho_q * aFp - rd.rho_p * aFq;
            const double mass = chart.weights[i] * tw[i];
            double acc = component(dF.dF_dg, i, n, "dF_dg") + br * mass;
            if (time_dependent) acc -= rho_time_rate(sym, q, p, t, rd.e) * mass;
            x.dmu[i] = acc / rd.rho;
        }
    });
    const PhaseFunction pf = dF.dF_dmu;
    x.dg.f = [sym, pf, t](double q, double p) {
        const std::array<double, 1> qa{q}, pa{p};
        const auto c = frequency_data(sym, qa, pa, t);
        require_slope(c.rho);
        return -ev(pf.f, q, p) / c.rho;
    };
    x.dg.fq = [sym, pf, t](double q, double p) {
        const auto rd = rho_derivs(sym, q, p, t);
        require_slope(rd.rho);
        return -(ev(pf.fq, q, p) * rd.rho - ev(pf.f, q, p) * rd.rho_q) / (rd.rho * rd.rho);
    };
    x.dg.fp = [sym, pf, t](double q, double p) {
        const auto rd = rho_derivs(sym, q, p, t);
        require_slope(rd.rho);
        return -(ev(pf.fp, q, p) * rd.rho - ev(pf.f, q, p) * rd.rho_p) / (rd.rho * rd.rho);
    };
    const std::size_t b = chart.base_index;
    x.dphi = chart.p[b] * x.dg.fp(chart.q[b], chart.p[b]) - x.dg.f(chart.q[b], chart.p[b]);
    return x;
}

FunctionalDerivative energy_functional(const DispersionSymbol& sym, double t) {
    FunctionalDerivative d;
    d.dF_dmu.f = [sym, t](double q, double p) {
        const std::array<double, 1> qa{q}, pa{p};
        const auto c = frequency_data(sym, qa, pa, t);
        return -c.e * c.rho;
    };
    // E partials come from implicit differentiation of the root equation; the
    // rho partials reuse the seeded finite differences
    d.dF_dmu.fq = [sym, t](double q, double p) {
        const auto rd = rho_derivs(sym, q, p, t);
        require_slope(rd.rho);
        const std::array<double, 1> qa{q}, pa{p};
        std::array<double, 1> grad{};
        sym.dq(qa, pa, t, -rd.e, grad);
        const double eq = grad[0] / sym.du(qa, pa, t, -rd.e);
        return -(eq * rd.rho + rd.e * rd.rho_q);
    };
    d.dF_dmu.fp = [sym, t](double q, double p) {
        const auto rd = rho_derivs(sym, q, p, t);
        require_slope(rd.rho);
        const std::array<double, 1> qa{q}, pa{p};
        std::array<double, 1> grad{};
        sym.dp(qa, pa, t, -rd.e, grad);
        const double ep = grad[0] / sym.du(qa, pa, t, -rd.e);
        return -(ep * rd.rho + rd.e * rd.rho_p);
    };
    return d;
}

MarkerChart perturb_chart(const MarkerChart& chart, const TangentPerturbation& v, double a) {
    check_dim(chart);
    const std::size_t n = chart.size();
    const auto tw = trapezoid_weights(chart);
    std::vector<double> dq(n), dp(n), ell(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double q = chart.q[i];
        const double p = chart.p[i];
        const double fpv = ev(v.dg.fp, q, p);
        dq[i] = fpv;
        dp[i] = -ev(v.dg.fq, q, p);
        ell[i] = p * fpv - ev(v.dg.f, q, p);
    }
    const std::size_t b = chart.base_index;
    MarkerChart out = chart;
    for (std::size_t i = 0; i < n; ++i) {
        out.q[i] += a * dq[i];
        out.p[i] += a * dp[i];
        out.phases[i] += a * (v.dphi + (ell[i] - ell[b]));
        out.weights[i] += a * component(v.dmu, i, n, "dmu") / tw[i];
    }
    return out;
}

double theta_eval_discrete(const MarkerChart& chart, const DispersionSymbol& sym, double t,
                           std::span<const double> dzq, std::span<const double> ds,
                           int threads) {
    check_dim(chart);
    const std::size_t n = chart.size();
    if (dzq.size() != n || ds.size() != n)
        fail(Errc::invalid_argument, "discrete tangent has wrong length");
    const auto tw = trapezoid_weights(chart);
    std::vector<double> rho(n), mass(n);
    parallel_for(n, threads, [&](std::size_t a, std::size_t b) {
        for (std::size_t i = a; i < b; ++i) {
            rho[i] = frequency_data(sym, chart.q_at(i), chart.p_at(i), t).rho;
            mass[i] = chart.weights[i] * tw[i];
        }
    });
    const std::size_t b = chart.base_index;
    double s = 0.0;
    double pphi = 0.0;
    const double gb = chart.p[b] * dzq[b]; // the ds terms cancel at the base
    for (std::size_t i = 0; i < n; ++i) {
        const double gi = chart.p[i] * dzq[i] - ds[i] + ds[b];
        s += rho[i] * mass[i] * (gb - gi);
        pphi += rho[i] * mass[i];
    }
    return s + pphi * (ds[b] - chart.p[b] * dzq[b]);
}

FrozenInReport frozen_in_check(const MarkerChart& chart, const DispersionSymbol& sym,
                               const TangentPerturbation& v, double t0, double t1, double h,
                               double s) {
    check_dim(chart);
    const std::size_t n = chart.size();
    const auto tw = trapezoid_weights(chart);
    double vmax = std::abs(v.dphi);
    for (std::size_t i = 0; i < n; ++i) {
        const double q = chart.q[i];
        const double p = chart.p[i];
        vmax = std::max({vmax, std::abs(ev(v.dg.fq, q, p)), std::abs(ev(v.dg.fp, q, p)),
                         std::abs(component(v.dmu, i, n, "dmu")) / tw[i]});
    }
    const double seff = s / std::max(1.0, vmax);

    EvolveSettings es;
    es.scheme = Scheme::rk4;
    es.h = h;
    es.t0 = t0;
    es.t1 = t1;
    const MarkerChart end = evolve(chart, sym, es).frames.back();

    auto transported = [&](double amp) {
        const MarkerChart plus = evolve(perturb_chart(chart, v, amp), sym, es).frames.back();
        const MarkerChart minus = evolve(perturb_chart(chart, v, -amp), sym, es).frames.back();
        std::vector<double> dzq(n), ds(n);
        for (std::size_t i = 0; i < n; ++i) {
            dzq[i] = (plus.q[i] - minus.q[i]) / (2.0 * amp);
            ds[i] = (plus.phases[i] - minus.phases[i]) / (2.0 * amp);
        }
        return theta_eval_discrete(end, sym, t1, dzq, ds);
    };

    FrozenInReport r;
    r.theta_t0 = theta_eval(chart, sym, t0, v);
    const double coarse = transported(seff);
    r.theta_t1 = transported(0.5 * seff);
    r.defect = r.theta_t1 - r.theta_t0;
    r.fd_spread = std::abs(r.theta_t1 - coarse);
    return r;
}

TangentPerturbation gauge_tangent_circle(const MarkerChart& chart, const PhaseFunction& a) {
    check_dim(chart);
    const std::size_t n = chart.size();
    const auto tw = trapezoid_weights(chart);
    const std::size_t b = chart.base_index;
    const double r2 = chart.q[b] * chart.q[b] + chart.p[b] * chart.p[b];
    PhaseFunction circle;
    circle.f = [r2](double q, double p) { return 0.5 * (q * q + p * p - r2); };
    circle.fq = [](double q, double) { return q; };
    circle.fp = [](double, double p) { return p; };
    TangentPerturbation v;
    v.dg = pf_product(a, circle);
    v.dmu.resize(n);
    // transport of the (uniform) density along the field: label velocity of
    // a X_C on the circle is +-a, and the flux derivative collapses to
    // w d(a o chart)/dx regardless of orientation
    for (std::size_t i = 0; i < n; ++i) {
        const double q = chart.q[i];
        const double p = chart.p[i];
        v.dmu[i] = tw[i] * chart.weights[i] * (ev(a.fq, q, p) * p - ev(a.fp, q, p) * q);
    }
    v.dphi = chart.p[b] * v.dg.fp(chart.q[b], chart.p[b]) - v.dg.f(chart.q[b], chart.p[b]);
    return v;
}

} // namespace kmw

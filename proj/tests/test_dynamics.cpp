#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <vector>

#include "core/dynamics.hpp"

using namespace kmw;

namespace {

constexpr double pi = std::numbers::pi;

MarkerChart two_marker_line(double q0, double p0) {
    MarkerChart c;
    c.labels = {0.0, 1.0};
    c.q = {q0, q0 + 0.01};
    c.p = {p0, p0};
    c.weights = {1.0, 1.0};
    c.phases = {0.0, 0.0};
    c.maslov = {0, 0};
    c.epsilon = 0.1;
    validate(c);
    return c;
}

// slope varies with position, so the reweighting is a real test
DispersionSymbol bent_slope_symbol() {
    DispersionSymbol sym;
    sym.label = "bent-slope";
    sym.eval = [](std::span<const double> q, std::span<const double> p, double, double u) {
        return -u * (1.0 + 0.3 * q[0] * q[0]) - 0.5 * p[0] * p[0] - 0.1 * std::pow(q[0], 4);
    };
    sym.du = [](std::span<const double> q, std::span<const double>, double, double) {
        return -(1.0 + 0.3 * q[0] * q[0]);
    };
    sym.dq = [](std::span<const double> q, std::span<const double>, double, double u,
                std::span<double> out) {
        out[0] = -0.6 * u * q[0] - 0.4 * std::pow(q[0], 3);
    };
    sym.dp = [](std::span<const double>, std::span<const double> p, double, double,
                std::span<double> out) { out[0] = -p[0]; };
    sym.dt = [](std::span<const double>, std::span<const double>, double, double) { return 0.0; };
    return sym;
}

} // namespace

TEST_CASE("quarter period carries a marker from (1,0) to (0,-1)") {
    auto sym = make_harmonic(1.0);
    EvolveSettings s;
    s.scheme = Scheme::rk4;
    s.h = 1e-3;
    s.t0 = 0.0;
    s.t1 = 0.5 * pi;
    auto traj = evolve(two_marker_line(1.0, 0.0), sym, s);
    const auto& c = traj.frames.back();
    CHECK(std::abs(c.q[0] - 0.0) <= 1e-9);
    CHECK(std::abs(c.p[0] - (-1.0)) <= 1e-9);
    CHECK(traj.times.back() == 0.5 * pi);
}

TEST_CASE("free motion accumulates phase at half the squared momentum") {
    auto sym = make_schrodinger();
    auto c = two_marker_line(0.0, 1.0);
    step(c, sym, 0.0, 0.1, Scheme::rk4);
    CHECK(c.phases[0] == doctest::Approx(0.05).epsilon(1e-15));
    CHECK(c.q[0] == doctest::Approx(0.1).epsilon(1e-14));
}

TEST_CASE("densities follow the slope ratio along each ray") {
    auto sym = bent_slope_symbol();
    auto c = init_from_phase_function([](double q) { return 0.3 * q * q; },
                                      [](double q) { return 0.6 * q; },
                                      [](double q) { return std::exp(-0.5 * q * q); }, -1.0, 1.0,
                                      64, 0.05);
    auto c0 = c;
    const double wa0 = wave_action(c, sym, 0.0);
    EvolveSettings s;
    s.scheme = Scheme::rk4;
    s.h = 0.01;
    s.t1 = 0.5;
    auto traj = evolve(c, sym, s);
    const auto& cf = traj.frames.back();
    for (std::size_t i = 0; i < cf.size(); ++i) {
        const double rho0 = frequency_data(sym, c0.q_at(i), c0.p_at(i), 0.0).rho;
        const double rho1 = frequency_data(sym, cf.q_at(i), cf.p_at(i), 0.5).rho;
        CHECK(cf.weights[i] == doctest::Approx(rho0 * c0.weights[i] / rho1).epsilon(1e-12));
    }
    CHECK(wave_action(cf, sym, 0.5) == doctest::Approx(wa0).epsilon(1e-13));
    for (const auto& rec : traj.diagnostics)
        CHECK(rec.wave_action == doctest::Approx(wa0).epsilon(1e-12));
}

TEST_CASE("a full turn plus a little returns the circle and counts four folds twice") {
    auto sym = make_harmonic(1.0);
    auto c = init_circle(0.8, 128, 0.05);
    const double wa0 = wave_action(c, sym, 0.0);
    const double we0 = wave_energy(c, sym, 0.0);
    EvolveSettings s;
    s.scheme = Scheme::rk4;
    s.h = 2.0 * pi / 2000.0;
    s.t1 = 2.0 * pi + 0.1;
    s.threads = 4;
    auto traj = evolve(c, sym, s);
    const auto& cf = traj.frames.back();
    const double T = s.t1;
    for (std::size_t i : {32u, 96u}) {
        const double angle = c.labels[i] + T;
        CHECK(cf.q[i] == doctest::Approx(0.8 * std::cos(angle)).epsilon(1e-9));
        CHECK(cf.p[i] == doctest::Approx(-0.8 * std::sin(angle)).epsilon(1e-9));
    }
    CHECK(std::abs(wave_action(cf, sym, T) - wa0) <= 1e-13);
    CHECK(std::abs(wave_energy(cf, sym, T) - we0) <= 1e-10);
    CHECK(cf.maslov[32] - c.maslov[32] == 2);
    CHECK(cf.maslov[96] - c.maslov[96] == 2);
    CHECK(quantization_data(cf).maslov_index == 2);
    CHECK(phase_coherence_residual(cf) <= 1e-3);
    // phases return after one period: the loop integral of p dq - E dt closes
    auto one_period = evolve(c, sym, [] {
        EvolveSettings s2;
        s2.scheme = Scheme::rk4;
        s2.h = 2.0 * pi / 2000.0;
        s2.t1 = 2.0 * pi;
        s2.threads = 4;
        return s2;
    }());
    const auto& cp = one_period.frames.back();
    for (std::size_t i : {5u, 50u, 100u})
        CHECK(cp.phases[i] == doctest::Approx(c.phases[i]).epsilon(1e-8));
}

TEST_CASE("every marker of a collapsing line chart crosses the fold once") {
    auto sym = make_schrodinger();
    auto c = init_from_phase_function([](double q) { return -0.5 * q * q; },
                                      [](double q) { return -q; },
                                      [](double q) { return std::exp(-q * q); }, -2.0, 2.0, 41,
                                      0.01);
    EvolveSettings s;
    s.h = 0.01;
    s.t1 = 1.1;
    auto traj = evolve(c, sym, s);
    const auto& cf = traj.frames.back();
    for (std::size_t i = 0; i < cf.size(); ++i) {
        CHECK(cf.maslov[i] == 1);
        CHECK(cf.q[i] == doctest::Approx(-0.1 * c.q[i]).epsilon(1e-12));
    }
}

TEST_CASE("implicit midpoint and the variational step agree on a quadratic symbol") {
    auto sym = make_harmonic(1.3);
    auto a = init_circle(1.0, 32, 0.1);
    auto b = a;
    double t = 0.0;
    for (int k = 0; k < 10; ++k, t += 0.05) {
        step(a, sym, t, 0.05, Scheme::midpoint);
        step(b, sym, t, 0.05, Scheme::variational);
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(std::abs(a.q[i] - b.q[i]) <= 1e-11);
        CHECK(std::abs(a.p[i] - b.p[i]) <= 1e-11);
        CHECK(std::abs(a.phases[i] - b.phases[i]) <= 1e-11);
    }
}

TEST_CASE("the implicit schemes hold the loop action where rk4 leaks") {
    auto sym = make_harmonic(1.0);
    auto c0 = init_circle(0.8, 64, 0.05);
    const double a0 = loop_action(c0);

    EvolveSettings s;
    s.h = 0.05;
    s.t1 = 100.0;
    s.threads = 4;

    s.scheme = Scheme::midpoint;
    auto mid = evolve(c0, sym, s);
    CHECK(std::abs(loop_action(mid.frames.back()) - a0) <= 1e-11);

    s.scheme = Scheme::rk4;
    auto rk = evolve(c0, sym, s);
    CHECK(std::abs(loop_action(rk.frames.back()) - a0) >= 1e-8);
}

TEST_CASE("helmholtz rays keep the action integral on a steady branch") {
    auto sym = make_helmholtz(Polynomial{{1.0, 0.0, 0.05}});
    auto c = init_from_phase_function([](double q) { return 1.5 * q + 0.2 * q * q; },
                                      [](double q) { return 1.5 + 0.4 * q; },
                                      [](double q) { return std::exp(-q * q); }, -1.0, 1.0, 64,
                                      0.01);
    const double wa0 = wave_action(c, sym, 0.0);
    EvolveSettings s;
    s.h = 0.005;
    s.t1 = 0.5;
    auto traj = evolve(c, sym, s);
    CHECK(std::abs(traj.diagnostics.back().wave_action - wa0) <= 1e-13 * std::abs(wa0) + 1e-15);
    for (std::size_t i = 0; i < traj.frames.back().size(); ++i)
        CHECK(traj.frames.back().p[i] > 0.0);
}

TEST_CASE("evolve lands exactly on the end time and saves strided frames") {
    auto sym = make_schrodinger();
    auto c = two_marker_line(0.0, 1.0);
    EvolveSettings s;
    s.h = 0.1;
    s.t1 = 0.35;
    s.frame_stride = 2;
    auto traj = evolve(c, sym, s);
    CHECK(traj.diagnostics.size() == 5);
    CHECK(traj.times.size() == 3);
    CHECK(traj.times[0] == 0.0);
    CHECK(traj.times[1] == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(traj.times.back() == 0.35);
    CHECK(std::isnan(traj.diagnostics.back().bs_residual));

    s.t1 = -1.0;
    try {
        evolve(c, sym, s);
        FAIL("backwards span accepted");
    } catch (const Error& err) {
        CHECK(err.code() == Errc::invalid_argument);
    }
    s.t1 = 1.0;
    s.h = -0.1;
    CHECK_THROWS_AS(evolve(c, sym, s), Error);
}

TEST_CASE("spreading charts pick up markers mid-run without losing mass") {
    auto sym = make_schrodinger();
    auto c = init_from_phase_function([](double q) { return 0.5 * q * q; },
                                      [](double q) { return q; },
                                      [](double q) { return std::exp(-q * q); }, -1.0, 1.0, 21,
                                      0.05);
    const double wa0 = wave_action(c, sym, 0.0);
    EvolveSettings s;
    s.h = 0.05;
    s.t1 = 1.0;
    s.refine_every = 5;
    s.max_spacing = 0.15;
    auto traj = evolve(c, sym, s);
    CHECK(traj.frames.back().size() > 21);
    CHECK(std::abs(traj.diagnostics.back().wave_action - wa0) <= 1e-12);
}

TEST_CASE("a step back undoes a step forward") {
    auto sym = make_harmonic(1.0);
    for (Scheme scheme : {Scheme::rk4, Scheme::midpoint}) {
        auto c = two_marker_line(0.7, 0.3);
        step(c, sym, 0.0, 0.01, scheme);
        step(c, sym, 0.01, -0.01, scheme);
        CHECK(std::abs(c.q[0] - 0.7) <= 1e-11);
        CHECK(std::abs(c.p[0] - 0.3) <= 1e-11);
        CHECK(std::abs(c.phases[0]) <= 1e-11);
        CHECK(c.maslov[0] == 0);
    }
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <vector>

#include "core/chart.hpp"

using namespace kmw;

namespace {

constexpr double pi = std::numbers::pi;

MarkerChart offset_circle(double offset, std::size_t n, double epsilon) {
    MarkerChart c;
    c.dim = 1;
    c.topology = Topology::circle;
    c.period = 2.0 * pi;
    c.epsilon = epsilon;
    const double dx = c.period / static_cast<double>(n);
    const double r0 = std::fmod(offset, dx);
    c.labels.resize(n);
    c.q.resize(n);
    c.p.resize(n);
    c.weights.assign(n, 1.0 / c.period);
    c.phases.assign(n, 0.0);
    c.maslov.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = r0 + dx * static_cast<double>(i);
        c.labels[i] = x;
        c.q[i] = std::cos(x);
        c.p[i] = -std::sin(x);
    }
    for (std::size_t i = 0; i + 1 < n; ++i)
        c.phases[i + 1] = c.phases[i] + 0.5 * (c.p[i] + c.p[i + 1]) * (c.q[i + 1] - c.q[i]);
    const auto segj = segment_projection_jacobians(c);
    const auto pd = marker_momentum_jacobians(c);
    for (std::size_t i = 1; i < n; ++i)
        c.maslov[i] = c.maslov[i - 1] + fold_jump(segj[i - 1], segj[i], pd[i]);
    validate(c);
    return c;
}

} // namespace

TEST_CASE("trapezoid weights on an uneven open grid") {
    MarkerChart c;
    c.labels = {0.0, 1.0, 3.0};
    c.q = {0.0, 0.1, 0.2};
    c.p = {1.0, 1.0, 1.0};
    c.weights = {1.0, 1.0, 1.0};
    c.phases = {0.0, 0.1, 0.3};
    c.maslov = {0, 0, 0};
    const auto tw = trapezoid_weights(c);
    CHECK(tw[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(tw[1] == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(tw[2] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(total_weight(c) == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("fold jumps combine the jacobian flip with the momentum direction") {
    CHECK(fold_jump(-1.0, 1.0, 2.0) == 1);
    CHECK(fold_jump(1.0, -1.0, 2.0) == -1);
    CHECK(fold_jump(1.0, -1.0, -2.0) == 1);
    CHECK(fold_jump(-1.0, 1.0, -2.0) == -1);
    CHECK(fold_jump(1.0, 2.0, -2.0) == 0);
    CHECK(fold_jump(-0.5, -2.0, 1.0) == 0);
}

TEST_CASE("circle chart carries unit weight, coherent phases, and two folds") {
    auto c = init_circle(1.0, 256, 1.0 / 3.0);
    CHECK(total_weight(c) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(phase_coherence_residual(c) <= 1e-12);
    CHECK(c.maslov[0] == 0);
    CHECK(c.maslov[127] == 0);
    CHECK(c.maslov[128] == 1);
    CHECK(c.maslov[255] == 1);
    const auto qd = quantization_data(c);
    CHECK(qd.maslov_index == 2);
    CHECK(qd.loop_action == doctest::Approx(pi).epsilon(1e-4));
}

TEST_CASE("unit circle at epsilon one third sits exactly on a level") {
    auto c = init_circle(1.0, 8192, 1.0 / 3.0);
    const auto qd = quantization_data(c);
    CHECK(qd.n == 2);
    CHECK(qd.bs_residual <= 1e-6);
}

TEST_CASE("circle level spacing matches the odd-multiple rule") {
    const double eps = 0.05;
    auto c = init_circle(std::sqrt(3.0 * eps), 4096, eps);
    const auto qd = quantization_data(c);
    CHECK(qd.maslov_index == 2);
    CHECK(qd.bs_residual <= 1e-6);
}

TEST_CASE("odd marker counts still see both folds") {
    auto c = init_circle(0.7, 255, 0.1);
    CHECK(quantization_data(c).maslov_index == 2);
}

TEST_CASE("phase-function chart samples s, s', and the squared amplitude") {
    auto s = [](double q) { return -0.5 * q * q; };
    auto sp = [](double q) { return -q; };
    auto amp = [](double q) { return std::exp(-q * q); };
    auto c = init_from_phase_function(s, sp, amp, -2.0, 2.0, 41, 0.01);
    CHECK(c.size() == 41);
    CHECK(c.topology == Topology::line);
    CHECK(c.q[0] == doctest::Approx(-2.0).epsilon(1e-15));
    CHECK(c.p[0] == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(c.weights[20] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(c.phases[40] == doctest::Approx(-2.0).epsilon(1e-15));
    CHECK(c.maslov[10] == 0);
    CHECK(phase_coherence_residual(c) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("phase-function chart differentiates s when s' is not given") {
    auto s = [](double q) { return std::sin(q); };
    auto c = init_from_phase_function(s, nullptr, [](double) { return 1.0; }, -1.5, 1.5, 31, 0.1);
    for (std::size_t i = 0; i < c.size(); ++i)
        CHECK(c.p[i] == doctest::Approx(std::cos(c.q[i])).epsilon(1e-9));
}

TEST_CASE("chart validation rejects broken inputs") {
    auto good = init_circle(1.0, 16, 0.1);

    auto c = good;
    c.weights[3] = 0.0;
    try {
        validate(c);
        FAIL("zero density accepted");
    } catch (const Error& err) {
        CHECK(err.code() == Errc::zero_weight);
    }

    c = good;
    c.labels[5] = c.labels[4];
    try {
        validate(c);
        FAIL("non-increasing labels accepted");
    } catch (const Error& err) {
        CHECK(err.code() == Errc::invalid_argument);
    }

    c = good;
    c.base_index = c.size();
    CHECK_THROWS_AS(validate(c), Error);

    c = good;
    c.labels.back() = c.period + 0.1;
    CHECK_THROWS_AS(validate(c), Error);

    c = good;
    CHECK_THROWS_AS(loop_action(init_from_phase_function(
                        [](double q) { return q; }, nullptr, [](double) { return 1.0; }, 0.0, 1.0,
                        8, 0.1)),
                    Error);
}

TEST_CASE("circle rotation preserves loop data and chain coherence") {
    auto c = init_circle(0.9, 256, 0.07);
    GaugeMap g;
    g.circle_shift = 37;
    auto r = gauge_transform(c, g);
    CHECK(r.base_index == (256 - 37) % 256);
    CHECK(r.labels == c.labels);
    CHECK(quantization_data(r).maslov_index == quantization_data(c).maslov_index);
    CHECK(loop_action(r) == doctest::Approx(loop_action(c)).epsilon(1e-13));
    CHECK(total_weight(r) == doctest::Approx(total_weight(c)).epsilon(1e-13));
    CHECK(phase_coherence_residual(r) <= 1e-12);

    GaugeMap g2;
    g2.circle_shift = 101;
    GaugeMap g12;
    g12.circle_shift = 138;
    auto two_step = gauge_transform(r, g2);
    auto one_step = gauge_transform(c, g12);
    for (std::size_t i = 0; i < c.size(); ++i) {
        // the second rotation re-sums the loop action in rotated order, so the
        // lifted phases agree only to rounding
        CHECK(two_step.phases[i] == doctest::Approx(one_step.phases[i]).epsilon(1e-13));
        CHECK(two_step.maslov[i] == one_step.maslov[i]);
        CHECK(two_step.q[i] == one_step.q[i]);
    }
}

TEST_CASE("line relabeling keeps the markers and the total weight") {
    auto c = init_from_phase_function([](double q) { return 0.2 * q * q * q; },
                                      [](double q) { return 0.6 * q * q; },
                                      [](double q) { return std::exp(-0.5 * q * q); }, -2.0, 2.0,
                                      33, 0.1);
    GaugeMap g;
    g.relabel = [](double x) { return x + 0.4 * std::sin(0.7 * x); };
    auto r = gauge_transform(c, g);
    CHECK(r.q == c.q);
    CHECK(r.p == c.p);
    CHECK(r.phases == c.phases);
    CHECK(total_weight(r) == doctest::Approx(total_weight(c)).epsilon(1e-13));

    GaugeMap bad;
    bad.relabel = [](double x) { return -x; };
    try {
        gauge_transform(c, bad);
        FAIL("orientation-reversing map accepted");
    } catch (const Error& err) {
        CHECK(err.code() == Errc::orientation);
    }
}

TEST_CASE("refinement tightens spacing and preserves mass and coherence") {
    auto c = init_from_phase_function([](double q) { return -0.5 * q * q; },
                                      [](double q) { return -q; },
                                      [](double q) { return std::exp(-q * q); }, -1.0, 1.0, 11,
                                      0.01);
    const double before = total_weight(c);
    refine(c, 0.15);
    CHECK(c.size() > 11);
    const auto segj = segment_projection_jacobians(c);
    for (std::size_t i = 0; i + 1 < c.size(); ++i) {
        CHECK(std::abs(c.q[i + 1] - c.q[i]) <= 0.15);
        CHECK(std::abs(c.p[i + 1] - c.p[i]) <= 0.15);
    }
    CHECK(segj.size() == c.size() - 1);
    CHECK(total_weight(c) == doctest::Approx(before).epsilon(1e-13));
    CHECK(phase_coherence_residual(c) <= 1e-13);
}

TEST_CASE("refinement on a circle splits the wrap segment too") {
    auto c = init_circle(1.0, 32, 0.1);
    const double before = total_weight(c);
    refine(c, 0.1);
    CHECK(c.size() >= 64);
    const auto segj = segment_projection_jacobians(c);
    CHECK(segj.size() == c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
        const std::size_t j = (i + 1) % c.size();
        CHECK(std::abs(c.q[j] - c.q[i]) <= 0.1);
        CHECK(std::abs(c.p[j] - c.p[i]) <= 0.1);
    }
    CHECK(total_weight(c) == doctest::Approx(before).epsilon(1e-12));
    CHECK(quantization_data(c).maslov_index == 2);
    // positions interpolated onto the unit circle to cubic accuracy
    for (std::size_t i = 0; i < c.size(); ++i)
        CHECK(std::hypot(c.q[i], c.p[i]) == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("wrap midpoints falling below the first label join the front coherently") {
    auto c = offset_circle(3.0, 64, 0.1);
    REQUIRE(c.labels[0] > 0.5 * (c.period - c.labels.back() + c.labels[0]) - 1e-12);
    const double before = total_weight(c);
    const double dx = c.labels[1] - c.labels[0];
    const double old_first = c.labels[0];
    refine(c, 1.3 * std::sin(0.5 * dx));
    CHECK(c.size() == 128);
    CHECK(c.labels[0] < old_first);
    CHECK(total_weight(c) == doctest::Approx(before).epsilon(1e-12));
    CHECK(phase_coherence_residual(c) <= 5e-3);
    CHECK(c.maslov[0] == 0);
    CHECK(quantization_data(c).maslov_index == 2);
    validate(c);
}

TEST_CASE("refinement stops at the marker cap") {
    auto c = init_circle(1.0, 32, 0.1);
    try {
        refine(c, 1e-4, 2000);
        FAIL("cap ignored");
    } catch (const Error& err) {
        CHECK(err.code() == Errc::refinement_explosion);
    }
}

TEST_CASE("chart csv round-trip is exact") {
    auto c = init_circle(std::sqrt(2.0), 64, 1.0 / 3.0);
    c.base_index = 17;
    const auto text = chart_to_csv(c);
    const auto back = chart_from_csv(text);
    CHECK(back.topology == c.topology);
    CHECK(back.dim == c.dim);
    CHECK(back.base_index == c.base_index);
    CHECK(back.epsilon == c.epsilon);
    CHECK(back.period == c.period);
    CHECK(back.labels == c.labels);
    CHECK(back.q == c.q);
    CHECK(back.p == c.p);
    CHECK(back.weights == c.weights);
    CHECK(back.phases == c.phases);
    CHECK(back.maslov == c.maslov);
}

TEST_CASE("chart csv parser reports broken input") {
    try {
        chart_from_csv("label,q,p\n0,0,0\n");
        FAIL("missing metadata accepted");
    } catch (const Error& err) {
        CHECK(err.code() == Errc::parse_error);
    }
    auto c = init_circle(1.0, 8, 0.1);
    auto text = chart_to_csv(c);
    text += "0.1,0.2\n";
    try {
        chart_from_csv(text);
        FAIL("short row accepted");
    } catch (const Error& err) {
        CHECK(err.code() == Errc::parse_error);
    }
}

TEST_CASE("gridded families are flagged by the plaquette circulation") {
    const std::size_t n0 = 21, n1 = 21;
    std::vector<double> q(n0 * n1 * 2), p(n0 * n1 * 2);
    for (std::size_t i = 0; i < n0; ++i) {
        for (std::size_t j = 0; j < n1; ++j) {
            const double a = -1.0 + 0.1 * static_cast<double>(i);
            const double b = -1.0 + 0.1 * static_cast<double>(j);
            const std::size_t k = (i * n1 + j) * 2;
            q[k] = a;
            q[k + 1] = b;
            // gradient of a*a*b + 0.3*b^3
            p[k] = 2.0 * a * b;
            p[k + 1] = a * a + 0.9 * b * b;
        }
    }
    CHECK(lagrangian_plaquette_residual(q, p, n0, n1, 2) <= 1e-4);
    for (std::size_t i = 0; i < n0; ++i) {
        for (std::size_t j = 0; j < n1; ++j) {
            const std::size_t k = (i * n1 + j) * 2;
            p[k] = -q[k + 1];
            p[k + 1] = q[k];
        }
    }
    CHECK(lagrangian_plaquette_residual(q, p, n0, n1, 2) >= 0.019);
}

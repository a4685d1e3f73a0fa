#include "core/chart.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"

namespace kmw {

namespace {

int sgn(double x) { return x >= 0.0 ? 1 : -1; }

double wrap_gap(const MarkerChart& c) {
    return c.period - c.labels.back() + c.labels.front();
}

// Lagrange interpolation through up to four (x, y) nodes.
double lagrange(std::span<const double> xs, std::span<const double> ys, double x) {
    double acc = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        double term = ys[k];
        for (std::size_t m = 0; m < xs.size(); ++m) {
            if (m == k) continue;
            term *= (x - xs[m]) / (xs[k] - xs[m]);
        }
        acc += term;
    }
    return acc;
}

} // namespace

void validate(const MarkerChart& c) {
    const std::size_t n = c.size();
    if (c.dim < 1) fail(Errc::invalid_argument, "chart dimension must be at least 1");
    const std::size_t min_n = c.topology == Topology::circle ? 3 : 2;
    if (n < min_n) fail(Errc::invalid_argument, "chart needs at least " + std::to_string(min_n) + " markers");
    if (c.q.size() != n * c.dim || c.p.size() != n * c.dim)
        fail(Errc::invalid_argument, "marker position arrays disagree with label count");
    if (c.weights.size() != n || c.phases.size() != n || c.maslov.size() != n)
        fail(Errc::invalid_argument, "marker attribute arrays disagree with label count");
    if (c.base_index >= n) fail(Errc::invalid_argument, "base index out of range");
    if (!(c.epsilon > 0.0) || !std::isfinite(c.epsilon))
        fail(Errc::invalid_argument, "epsilon must be positive");
    for (std::size_t i = 0; i + 1 < n; ++i)
        if (!(c.labels[i] < c.labels[i + 1]))
            fail(Errc::invalid_argument, "labels must increase strictly");
    if (c.topology == Topology::circle) {
        if (!(c.period > 0.0)) fail(Errc::invalid_argument, "circle charts need a positive period");
        if (c.labels.front() < 0.0 || c.labels.back() >= c.period)
            fail(Errc::invalid_argument, "circle labels must lie in [0, period)");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (c.weights[i] == 0.0)
            fail(Errc::zero_weight, "marker " + std::to_string(i) + " carries zero density");
        if (!(c.weights[i] > 0.0))
            fail(Errc::invalid_argument, "marker densities must be positive");
    }
}

std::vector<double> trapezoid_weights(const MarkerChart& c) {
    const std::size_t n = c.size();
    std::vector<double> tw(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double half = 0.5 * (c.labels[i + 1] - c.labels[i]);
        tw[i] += half;
        tw[i + 1] += half;
    }
    if (c.topology == Topology::circle) {
        const double half = 0.5 * wrap_gap(c);
        tw[n - 1] += half;
        tw[0] += half;
    }
    return tw;
}

double total_weight(const MarkerChart& c) {
    const auto tw = trapezoid_weights(c);
    double acc = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) acc += tw[i] * c.weights[i];
    return acc;
}

std::vector<double> segment_projection_jacobians(const MarkerChart& c) {
    if (c.dim != 1) fail(Errc::invalid_argument, "segment jacobians need one configuration dimension");
    const std::size_t n = c.size();
    const bool circle = c.topology == Topology::circle;
    std::vector<double> j(circle ? n : n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i)
        j[i] = (c.q[i + 1] - c.q[i]) / (c.labels[i + 1] - c.labels[i]);
    if (circle) j[n - 1] = (c.q[0] - c.q[n - 1]) / wrap_gap(c);
    return j;
}

namespace {

std::vector<double> marker_label_derivs(const MarkerChart& c, const std::vector<double>& v) {
    if (c.dim != 1) fail(Errc::invalid_argument, "marker jacobians need one configuration dimension");
    const std::size_t n = c.size();
    std::vector<double> d(n);
    if (c.topology == Topology::circle) {
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t il = (i + n - 1) % n;
            const std::size_t ir = (i + 1) % n;
            const double xl = i == 0 ? c.labels[il] - c.period : c.labels[il];
            const double xr = i == n - 1 ? c.labels[ir] + c.period : c.labels[ir];
            d[i] = (v[ir] - v[il]) / (xr - xl);
        }
    } else {
        d[0] = (v[1] - v[0]) / (c.labels[1] - c.labels[0]);
        d[n - 1] = (v[n - 1] - v[n - 2]) / (c.labels[n - 1] - c.labels[n - 2]);
        for (std::size_t i = 1; i + 1 < n; ++i)
            d[i] = (v[i + 1] - v[i - 1]) / (c.labels[i + 1] - c.labels[i - 1]);
    }
    return d;
}

} // namespace

std::vector<double> marker_projection_jacobians(const MarkerChart& c) {
    return marker_label_derivs(c, c.q);
}

std::vector<double> marker_momentum_jacobians(const MarkerChart& c) {
    return marker_label_derivs(c, c.p);
}

int fold_jump(double j_before, double j_after, double p_deriv) {
    const int sb = sgn(j_before);
    const int sa = sgn(j_after);
    if (sb == sa) return 0;
    return sgn(p_deriv) * (sa - sb) / 2;
}

double loop_action(const MarkerChart& c) {
    if (c.topology != Topology::circle)
        fail(Errc::open_topology, "loop action needs a closed chart");
    const std::size_t n = c.size();
    double a = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = (i + 1) % n;
        for (std::size_t d = 0; d < c.dim; ++d)
            a += 0.5 * (c.p[i * c.dim + d] + c.p[j * c.dim + d]) *
                 (c.q[j * c.dim + d] - c.q[i * c.dim + d]);
    }
    return a;
}

QuantizationData quantization_data(const MarkerChart& c) {
    if (c.topology != Topology::circle)
        fail(Errc::open_topology, "quantization data needs a closed chart");
    if (c.dim != 1) fail(Errc::invalid_argument, "quantization data needs one configuration dimension");
    const std::size_t n = c.size();
    const auto segj = segment_projection_jacobians(c);
    const auto pd = marker_momentum_jacobians(c);
    QuantizationData out;
    out.loop_action = loop_action(c);
    long m = 0;
    for (std::size_t i = 0; i < n; ++i)
        m += fold_jump(segj[(i + n - 1) % n], segj[i], pd[i]);
    out.maslov_index = m;
    const double two_pi_eps = 2.0 * std::numbers::pi * c.epsilon;
    out.bs_value = out.loop_action + 0.25 * two_pi_eps * static_cast<double>(m);
    out.n = std::llround(out.bs_value / two_pi_eps);
    out.bs_residual = std::abs(out.bs_value - two_pi_eps * static_cast<double>(out.n));
    return out;
}

double phase_coherence_residual(const MarkerChart& c) {
    const std::size_t n = c.size();
    auto increment = [&](std::size_t i, std::size_t j) {
        double inc = 0.0;
        for (std::size_t d = 0; d < c.dim; ++d)
            inc += 0.5 * (c.p[i * c.dim + d] + c.p[j * c.dim + d]) *
                   (c.q[j * c.dim + d] - c.q[i * c.dim + d]);
        return inc;
    };
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i)
        worst = std::max(worst, std::abs(c.phases[i + 1] - c.phases[i] - increment(i, i + 1)));
    if (c.topology == Topology::circle) {
        const double a = loop_action(c);
        worst = std::max(worst,
                         std::abs(c.phases[0] + a - c.phases[n - 1] - increment(n - 1, 0)));
    }
    return worst;
}

MarkerChart init_from_phase_function(const std::function<double(double)>& s,
                                     const std::function<double(double)>& s_prime,
                                     const std::function<double(double)>& amp, double q_min,
                                     double q_max, std::size_t n, double epsilon) {
    if (!s || !amp) fail(Errc::invalid_argument, "phase-function chart needs s and amp");
    if (!(q_min < q_max)) fail(Errc::invalid_argument, "phase-function chart needs q_min < q_max");
    if (n < 2) fail(Errc::invalid_argument, "phase-function chart needs at least 2 markers");
    MarkerChart c;
    c.dim = 1;
    c.topology = Topology::line;
    c.epsilon = epsilon;
    c.labels.resize(n);
    c.q.resize(n);
    c.p.resize(n);
    c.weights.resize(n);
    c.phases.resize(n);
    c.maslov.assign(n, 0);
    const double dx = (q_max - q_min) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = q_min + dx * static_cast<double>(i);
        c.labels[i] = x;
        c.q[i] = x;
        if (s_prime) {
            c.p[i] = s_prime(x);
        } else {
            const double h = 1e-5 * std::max(1.0, std::abs(x));
            c.p[i] = (-s(x + 2 * h) + 8 * s(x + h) - 8 * s(x - h) + s(x - 2 * h)) / (12 * h);
        }
        const double a = amp(x);
        c.weights[i] = a * a;
        c.phases[i] = s(x);
    }
    validate(c);
    return c;
}

MarkerChart init_circle(double radius, std::size_t n, double epsilon, double total) {
    if (!(radius > 0.0)) fail(Errc::invalid_argument, "circle chart needs a positive radius");
    if (n < 3) fail(Errc::invalid_argument, "circle chart needs at least 3 markers");
    if (!(total > 0.0)) fail(Errc::invalid_argument, "circle chart needs positive total weight");
    MarkerChart c;
    c.dim = 1;
    c.topology = Topology::circle;
    c.period = 2.0 * std::numbers::pi;
    c.epsilon = epsilon;
    c.labels.resize(n);
    c.q.resize(n);
    c.p.resize(n);
    c.weights.assign(n, total / c.period);
    c.phases.resize(n);
    c.maslov.assign(n, 0);
    const double dx = c.period / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = dx * static_cast<double>(i);
        c.labels[i] = x;
        c.q[i] = radius * std::cos(x);
        c.p[i] = -radius * std::sin(x);
    }
    c.phases[0] = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i)
        c.phases[i + 1] = c.phases[i] + 0.5 * (c.p[i] + c.p[i + 1]) * (c.q[i + 1] - c.q[i]);
    const auto segj = segment_projection_jacobians(c);
    const auto pd = marker_momentum_jacobians(c);
    for (std::size_t i = 1; i < n; ++i)
        c.maslov[i] = c.maslov[i - 1] + fold_jump(segj[i - 1], segj[i], pd[i]);
    validate(c);
    return c;
}

MarkerChart gauge_transform(const MarkerChart& c, const GaugeMap& map) {
    validate(c);
    MarkerChart out = c;
    const std::size_t n = c.size();
    if (c.topology == Topology::circle) {
        if (map.relabel) fail(Errc::invalid_argument, "closed charts relabel by rotation only");
        if (c.dim != 1) fail(Errc::invalid_argument, "circle rotation needs one configuration dimension");
        const long nl = static_cast<long>(n);
        const long k = ((map.circle_shift % nl) + nl) % nl;
        if (k == 0) return out;
        const double dx0 = c.labels[1] - c.labels[0];
        for (std::size_t i = 0; i + 1 < n; ++i)
            if (std::abs(c.labels[i + 1] - c.labels[i] - dx0) > 1e-12 * c.period)
                fail(Errc::invalid_argument, "circle rotation needs a uniform label grid");
        if (std::abs(wrap_gap(c) - dx0) > 1e-12 * c.period)
            fail(Errc::invalid_argument, "circle rotation needs a uniform label grid");
        const double a = loop_action(c);
        const long m = quantization_data(c).maslov_index;
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t jo = (j + static_cast<std::size_t>(k)) % n;
            const bool wrapped = jo < static_cast<std::size_t>(k);
            out.q[j] = c.q[jo];
            out.p[j] = c.p[jo];
            out.weights[j] = c.weights[jo];
            out.phases[j] = c.phases[jo] + (wrapped ? a : 0.0);
            out.maslov[j] = c.maslov[jo] + (wrapped ? static_cast<int>(m) : 0);
        }
        out.base_index = (c.base_index + n - static_cast<std::size_t>(k)) % n;
        validate(out);
        return out;
    }
    if (!map.relabel) fail(Errc::invalid_argument, "open charts relabel by a label map");
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = map.relabel(c.labels[i]);
    for (std::size_t i = 0; i + 1 < n; ++i)
        if (!(y[i] < y[i + 1]))
            fail(Errc::orientation, "label map must increase strictly along the chart");
    // Discrete Jacobian on the same stencil as the trapezoid weights keeps the
    // total weight exactly fixed.
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t il = i == 0 ? 0 : i - 1;
        const std::size_t ir = i + 1 == n ? n - 1 : i + 1;
        out.weights[i] = c.weights[i] * (c.labels[ir] - c.labels[il]) / (y[ir] - y[il]);
    }
    out.labels = std::move(y);
    validate(out);
    return out;
}

void refine(MarkerChart& c, double max_spacing, std::size_t marker_cap) {
    validate(c);
    if (!(max_spacing > 0.0)) fail(Errc::invalid_argument, "max_spacing must be positive");
    const bool circle = c.topology == Topology::circle;
    for (;;) {
        const std::size_t n = c.size();
        const std::size_t n_seg = circle ? n : n - 1;
        std::vector<char> split(n_seg, 0);
        std::size_t n_new = 0;
        for (std::size_t i = 0; i < n_seg; ++i) {
            const std::size_t j = (i + 1) % n;
            double gap = 0.0;
            for (std::size_t d = 0; d < c.dim; ++d) {
                gap = std::max(gap, std::abs(c.q[j * c.dim + d] - c.q[i * c.dim + d]));
                gap = std::max(gap, std::abs(c.p[j * c.dim + d] - c.p[i * c.dim + d]));
            }
            if (gap > max_spacing) {
                split[i] = 1;
                ++n_new;
            }
        }
        if (n_new == 0) break;
        if (n + n_new > marker_cap)
            fail(Errc::refinement_explosion,
                 "refinement would exceed the marker cap near a developing fold");

        // Interpolation nodes around segment i: up to four nearest markers in
        // chain order with labels unwrapped so they increase monotonically.
        auto interpolate_marker = [&](std::size_t i, double& xm, std::vector<double>& qm,
                                      std::vector<double>& pm) {
            const std::size_t j = (i + 1) % n;
            std::vector<std::size_t> idx;
            if (circle) {
                for (std::size_t off = 0; off < 4; ++off) {
                    const std::size_t k = (i + n - 1 + off) % n;
                    if (std::find(idx.begin(), idx.end(), k) == idx.end()) idx.push_back(k);
                }
            } else {
                for (long off = -1; off <= 2; ++off) {
                    const long k = static_cast<long>(i) + off;
                    if (k >= 0 && k < static_cast<long>(n)) idx.push_back(static_cast<std::size_t>(k));
                }
            }
            std::vector<double> xs(idx.size());
            xs[0] = c.labels[idx[0]];
            for (std::size_t k = 1; k < idx.size(); ++k) {
                xs[k] = c.labels[idx[k]];
                if (circle)
                    while (xs[k] <= xs[k - 1]) xs[k] += c.period;
            }
            // the unwrapped coordinates of the segment ends
            double xi = 0.0, xj = 0.0;
            for (std::size_t k = 0; k < idx.size(); ++k) {
                if (idx[k] == i) xi = xs[k];
                if (idx[k] == j) xj = xs[k];
            }
            if (circle && i == n - 1) xj = xi + wrap_gap(c);
            xm = 0.5 * (xi + xj);
            std::vector<double> ys(idx.size());
            qm.resize(c.dim);
            pm.resize(c.dim);
            for (std::size_t d = 0; d < c.dim; ++d) {
                for (std::size_t k = 0; k < idx.size(); ++k) ys[k] = c.q[idx[k] * c.dim + d];
                qm[d] = lagrange(xs, ys, xm);
                for (std::size_t k = 0; k < idx.size(); ++k) ys[k] = c.p[idx[k] * c.dim + d];
                pm[d] = lagrange(xs, ys, xm);
            }
            if (circle && xm >= c.period) xm -= c.period;
        };

        MarkerChart next;
        next.dim = c.dim;
        next.topology = c.topology;
        next.period = c.period;
        next.epsilon = c.epsilon;
        const std::size_t total = n + n_new;
        next.labels.reserve(total);
        next.q.reserve(total * c.dim);
        next.p.reserve(total * c.dim);
        next.weights.reserve(total);
        next.phases.reserve(total);
        next.maslov.reserve(total);

        auto push_existing = [&](std::size_t i) {
            next.labels.push_back(c.labels[i]);
            for (std::size_t d = 0; d < c.dim; ++d) next.q.push_back(c.q[i * c.dim + d]);
            for (std::size_t d = 0; d < c.dim; ++d) next.p.push_back(c.p[i * c.dim + d]);
            next.weights.push_back(c.weights[i]);
            next.phases.push_back(c.phases[i]);
            next.maslov.push_back(c.maslov[i]);
        };
        auto push_mid = [&](std::size_t i, double xm, const std::vector<double>& qm,
                            const std::vector<double>& pm) {
            const std::size_t j = (i + 1) % n;
            next.labels.push_back(xm);
            for (std::size_t d = 0; d < c.dim; ++d) next.q.push_back(qm[d]);
            for (std::size_t d = 0; d < c.dim; ++d) next.p.push_back(pm[d]);
            next.weights.push_back(0.5 * (c.weights[i] + c.weights[j]));
            double inc = 0.0;
            for (std::size_t d = 0; d < c.dim; ++d)
                inc += 0.5 * (c.p[i * c.dim + d] + pm[d]) * (qm[d] - c.q[i * c.dim + d]);
            next.phases.push_back(c.phases[i] + inc);
            next.maslov.push_back(c.maslov[i]);
        };

        std::size_t base_shift = 0;
        // A split wrap segment may land its midpoint below the first label.
        bool wrap_front = false;
        double wxm = 0.0;
        std::vector<double> wqm, wpm;
        if (circle && split[n - 1]) {
            interpolate_marker(n - 1, wxm, wqm, wpm);
            wrap_front = wxm < c.labels[0];
            if (wrap_front) {
                // The midpoint crosses the seam, so anchoring its phase and
                // fold count from the last marker overshoots by one full loop.
                push_mid(n - 1, wxm, wqm, wpm);
                next.phases.back() -= loop_action(c);
                if (c.dim == 1)
                    next.maslov.back() -= static_cast<int>(quantization_data(c).maslov_index);
                ++base_shift;
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            push_existing(i);
            if (i < n_seg && split[i]) {
                if (circle && i == n - 1) {
                    if (!wrap_front) push_mid(i, wxm, wqm, wpm);
                } else {
                    double xm = 0.0;
                    std::vector<double> qm, pm;
                    interpolate_marker(i, xm, qm, pm);
                    push_mid(i, xm, qm, pm);
                    if (i < c.base_index) ++base_shift;
                }
            }
        }
        next.base_index = c.base_index + base_shift;
        c = std::move(next);
        validate(c);
    }
}

std::string chart_to_csv(const MarkerChart& c) {
    validate(c);
    nlohmann::json meta;
    meta["topology"] = c.topology == Topology::circle ? "circle" : "line";
    meta["base_index"] = c.base_index;
    meta["dim"] = c.dim;
    meta["epsilon"] = c.epsilon;
    meta["period"] = c.period;
    std::string out = "# " + meta.dump() + "\n";
    out += "label";
    if (c.dim == 1) {
        out += ",q,p";
    } else {
        for (std::size_t d = 0; d < c.dim; ++d) out += ",q" + std::to_string(d);
        for (std::size_t d = 0; d < c.dim; ++d) out += ",p" + std::to_string(d);
    }
    out += ",weight,phase,maslov\n";
    for (std::size_t i = 0; i < c.size(); ++i) {
        out += format_shortest(c.labels[i]);
        for (std::size_t d = 0; d < c.dim; ++d) out += "," + format_shortest(c.q[i * c.dim + d]);
        for (std::size_t d = 0; d < c.dim; ++d) out += "," + format_shortest(c.p[i * c.dim + d]);
        out += "," + format_shortest(c.weights[i]);
        out += "," + format_shortest(c.phases[i]);
        out += "," + std::to_string(c.maslov[i]);
        out += "\n";
    }
    return out;
}

MarkerChart chart_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("#", 0) != 0)
        fail(Errc::parse_error, "chart csv must open with a '# {...}' metadata line");
    MarkerChart c;
    try {
        const auto meta = nlohmann::json::parse(line.substr(1));
        const std::string topo = meta.at("topology").get<std::string>();
        if (topo == "circle")
            c.topology = Topology::circle;
        else if (topo == "line")
            c.topology = Topology::line;
        else
            fail(Errc::parse_error, "unknown topology '" + topo + "'");
        c.base_index = meta.at("base_index").get<std::size_t>();
        c.dim = meta.at("dim").get<std::size_t>();
        c.epsilon = meta.at("epsilon").get<double>();
        c.period = meta.at("period").get<double>();
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::parse_error, std::string("chart csv metadata: ") + e.what());
    }
    if (c.dim < 1) fail(Errc::parse_error, "chart csv metadata: dim must be at least 1");
    std::string header = "label";
    if (c.dim == 1) {
        header += ",q,p";
    } else {
        for (std::size_t d = 0; d < c.dim; ++d) header += ",q" + std::to_string(d);
        for (std::size_t d = 0; d < c.dim; ++d) header += ",p" + std::to_string(d);
    }
    header += ",weight,phase,maslov";
    if (!std::getline(in, line) || line != header)
        fail(Errc::parse_error, "chart csv header row must be '" + header + "'");
    const std::size_t n_cols = 2 * c.dim + 4;
    std::size_t line_no = 2;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<double> vals;
        vals.reserve(n_cols);
        const char* s = line.c_str();
        for (;;) {
            char* end = nullptr;
            const double v = std::strtod(s, &end);
            if (end == s)
                fail(Errc::parse_error, "chart csv line " + std::to_string(line_no) +
                                            ": expected a number");
            vals.push_back(v);
            s = end;
            if (*s == ',') {
                ++s;
            } else if (*s == '\0' || *s == '\r') {
                break;
            } else {
                fail(Errc::parse_error, "chart csv line " + std::to_string(line_no) +
                                            ": unexpected character '" + *s + "'");
            }
        }
        if (vals.size() != n_cols)
            fail(Errc::parse_error, "chart csv line " + std::to_string(line_no) + ": expected " +
                                        std::to_string(n_cols) + " columns, got " +
                                        std::to_string(vals.size()));
        c.labels.push_back(vals[0]);
        for (std::size_t d = 0; d < c.dim; ++d) c.q.push_back(vals[1 + d]);
        for (std::size_t d = 0; d < c.dim; ++d) c.p.push_back(vals[1 + c.dim + d]);
        c.weights.push_back(vals[1 + 2 * c.dim]);
        c.phases.push_back(vals[2 + 2 * c.dim]);
        c.maslov.push_back(static_cast<int>(std::llround(vals[3 + 2 * c.dim])));
    }
    validate(c);
    return c;
}

void save_chart_csv(const MarkerChart& c, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(Errc::io_error, "cannot open '" + path + "' for writing");
    out << chart_to_csv(c);
    if (!out) fail(Errc::io_error, "short write to '" + path + "'");
}

MarkerChart load_chart_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::io_error, "cannot open '" + path + "' for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    return chart_from_csv(buf.str());
}

double lagrangian_plaquette_residual(std::span<const double> q, std::span<const double> p,
                                     std::size_t n0, std::size_t n1, std::size_t dim) {
    if (n0 < 2 || n1 < 2) fail(Errc::invalid_argument, "plaquette residual needs a 2x2 grid at least");
    if (q.size() != n0 * n1 * dim || p.size() != n0 * n1 * dim)
        fail(Errc::invalid_argument, "plaquette arrays disagree with the grid shape");
    auto edge = [&](std::size_t a, std::size_t b) {
        double acc = 0.0;
        for (std::size_t d = 0; d < dim; ++d)
            acc += 0.5 * (p[a * dim + d] + p[b * dim + d]) * (q[b * dim + d] - q[a * dim + d]);
        return acc;
    };
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < n0; ++i) {
        for (std::size_t j = 0; j + 1 < n1; ++j) {
            const std::size_t a = i * n1 + j;
            const std::size_t b = (i + 1) * n1 + j;
            const std::size_t cidx = (i + 1) * n1 + (j + 1);
            const std::size_t e = i * n1 + (j + 1);
            const double circ = edge(a, b) + edge(b, cidx) + edge(cidx, e) + edge(e, a);
            worst = std::max(worst, std::abs(circ));
        }
    }
    return worst;
}

} // namespace kmw

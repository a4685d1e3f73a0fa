#include "core/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>

#include "core/common.hpp"

namespace kmw {
namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;
constexpr double half_pi = 0.5 * std::numbers::pi;

int sgn(double x) { return x >= 0.0 ? 1 : -1; }

// quintic ramp, flat to second order at both ends
double smoothstep(double t) { return t * t * t * (10.0 + t * (6.0 * t - 15.0)); }

// Chart arrays laid out as one open chain. Circles carry a ghost copy of the
// first marker at the far end with the loop action and loop fold index folded
// in, so every physical segment s runs between chain entries s and s+1.
struct ChainView {
    bool circle = false;
    std::size_t n = 0;        // chain entries (markers, plus ghost on circles)
    std::size_t n_markers = 0;
    std::size_t n_seg = 0;
    double loop_a = 0.0;
    long loop_m = 0;
    std::vector<double> x, q, p, w, s, amp;
    std::vector<double> tw;     // label-space trapezoid weights, no ghost entry
    std::vector<double> jc, pc; // centered dq/dx, dp/dx at the markers
    std::vector<int> sigma;
    std::vector<double> jseg; // per-segment dq/dx, wrap segment last on circles
};

ChainView make_view(const MarkerChart& chart) {
    validate(chart);
    if (chart.dim != 1)
        fail(Errc::invalid_argument, "field reconstruction needs one configuration dimension");
    ChainView v;
    v.circle = chart.topology == Topology::circle;
    v.n_markers = chart.size();
    v.n = v.circle ? v.n_markers + 1 : v.n_markers;
    v.jseg = segment_projection_jacobians(chart);
    v.n_seg = v.jseg.size();
    v.x = chart.labels;
    v.q = chart.q;
    v.p = chart.p;
    v.w = chart.weights;
    v.s = chart.phases;
    v.sigma = chart.maslov;
    v.tw = trapezoid_weights(chart);
    v.jc = marker_projection_jacobians(chart);
    v.pc = marker_momentum_jacobians(chart);
    if (v.circle) {
        const auto qd = quantization_data(chart);
        v.loop_a = qd.loop_action;
        v.loop_m = qd.maslov_index;
        v.x.push_back(chart.labels[0] + chart.period);
        v.q.push_back(chart.q[0]);
        v.p.push_back(chart.p[0]);
        v.w.push_back(chart.weights[0]);
        v.s.push_back(chart.phases[0] + v.loop_a);
        v.sigma.push_back(chart.maslov[0] + static_cast<int>(v.loop_m));
        v.jc.push_back(v.jc[0]);
        v.pc.push_back(v.pc[0]);
    }
    v.amp.resize(v.n);
    for (std::size_t i = 0; i < v.n; ++i)
        v.amp[i] = std::sqrt(v.w[i] / std::max(std::abs(v.jc[i]), 1e-300));
    return v;
}

double resolve_threshold(const ChainView& v, const ReconstructOptions& opt) {
    if (opt.caustic_threshold >= 0.0) return opt.caustic_threshold;
    std::vector<double> mags(v.n_seg);
    for (std::size_t s = 0; s < v.n_seg; ++s) mags[s] = std::abs(v.jseg[s]);
    std::nth_element(mags.begin(), mags.begin() + mags.size() / 2, mags.end());
    return 0.1 * mags[mags.size() / 2];
}

// A segment is folded when its projection slope is under the threshold, or
// when the slope changes sign into the next segment: the fold then sits
// inside the pair even if both magnitudes look healthy.
std::vector<char> folded_segments(const ChainView& v, double threshold) {
    std::vector<char> f(v.n_seg, 0);
    for (std::size_t s = 0; s < v.n_seg; ++s)
        if (std::abs(v.jseg[s]) < threshold) f[s] = 1;
    if (v.n_seg > 1) {
        const std::size_t pairs = v.circle ? v.n_seg : v.n_seg - 1;
        for (std::size_t s = 0; s < pairs; ++s) {
            const std::size_t t = (s + 1) % v.n_seg;
            if (sgn(v.jseg[s]) != sgn(v.jseg[t])) {
                f[s] = 1;
                f[t] = 1;
            }
        }
    }
    return f;
}

std::vector<Branch> collect_branches(const ChainView& v, double q) {
    std::vector<Branch> out;
    for (std::size_t s = 0; s < v.n_seg; ++s) {
        const double ql = v.q[s], qr = v.q[s + 1];
        if (ql == qr) continue;
        if (!(q >= std::min(ql, qr) && q < std::max(ql, qr))) continue;
        const double alpha = (q - ql) / (qr - ql);
        Branch b;
        b.segment_index = s;
        b.q = q;
        b.p = v.p[s] + alpha * (v.p[s + 1] - v.p[s]);
        b.amplitude = v.amp[s] + alpha * (v.amp[s + 1] - v.amp[s]);
        b.phase = v.s[s] + 0.5 * (v.p[s] + b.p) * (q - ql);
        b.maslov = v.sigma[s];
        out.push_back(b);
    }
    return out;
}

std::complex<double> sum_branches(const std::vector<Branch>& branches, double eps) {
    std::complex<double> acc{0.0, 0.0};
    for (const auto& b : branches)
        acc += std::polar(b.amplitude, b.phase / eps - half_pi * static_cast<double>(b.maslov));
    return acc;
}

// Maximal runs of segments whose momentum difference keeps one strict sign.
// On circles a run may continue through the wrap, so the walk starts at a
// sign boundary when one exists.
std::vector<std::pair<std::size_t, std::size_t>> monotone_runs(const ChainView& v) {
    std::vector<int> sign(v.n_seg);
    for (std::size_t s = 0; s < v.n_seg; ++s) {
        const double d = v.p[s + 1] - v.p[s];
        sign[s] = d > 0.0 ? 1 : (d < 0.0 ? -1 : 0);
    }
    std::vector<std::pair<std::size_t, std::size_t>> runs;
    if (!v.circle) {
        std::size_t s = 0;
        while (s < v.n_seg) {
            if (sign[s] == 0) {
                ++s;
                continue;
            }
            std::size_t e = s + 1;
            while (e < v.n_seg && sign[e] == sign[s]) ++e;
            runs.emplace_back(s, e - s);
            s = e;
        }
        return runs;
    }
    std::size_t start = v.n_seg;
    for (std::size_t s = 0; s < v.n_seg; ++s) {
        const std::size_t prev = (s + v.n_seg - 1) % v.n_seg;
        if (sign[s] != 0 && sign[s] != sign[prev]) {
            start = s;
            break;
        }
    }
    if (start == v.n_seg) {
        if (sign[0] != 0) runs.emplace_back(0, v.n_seg);
        return runs;
    }
    std::size_t walked = 0;
    std::size_t s = start;
    while (walked < v.n_seg) {
        if (sign[s] == 0) {
            s = (s + 1) % v.n_seg;
            ++walked;
            continue;
        }
        std::size_t len = 1;
        while (len < v.n_seg - walked) {
            if (sign[(s + len) % v.n_seg] != sign[s]) break;
            ++len;
        }
        runs.emplace_back(s, len);
        walked += len;
        s = (s + len) % v.n_seg;
    }
    return runs;
}

// Momentum-side eikonal data over one monotone-momentum stretch of the chart,
// parametrized by marker index u. Per unit index, w*tw/du is the weight mass
// and m the momentum slope; both survive relabeling unchanged, so the
// quadrature is exactly gauge invariant. The integrand sqrt(mass * |m|)
// vanishes smoothly at turning points where the momentum-space amplitude
// diverges, and each stationary point keeps its full Fresnel tail instead of
// having it tapered off.
struct Window {
    std::vector<double> p, qn, theta, m, g;
    double p_lo = 0.0, p_hi = 0.0;
    double taper_lo = 0.0, taper_hi = 0.0; // fold-zone ramp widths in index units
    int sigma_hat = 0;                     // fold counter seen from the momentum side
    std::size_t first_seg = 0, len = 0;
};

// Width, in marker-index units, of the momentum-side fold zone at a turning
// end of a window. Within it the momentum amplitude grows like d^(-1/4) and
// is outside its validity, so it gets ramped off smoothly; the width follows
// the local cubic phase of the turning point and is capped so the two ends
// never consume the window interior.
double fold_taper_width(const Window& w, bool lo, double eps) {
    const std::size_t n = w.p.size();
    const std::size_t e0 = lo ? 0 : n - 1;
    const std::size_t e1 = lo ? 1 : n - 2;
    const double mp = std::max(std::abs(w.m[e1] - w.m[e0]), 1e-300);
    const double ju = std::max(std::abs(w.qn[e1] - w.qn[e0]), 1e-300);
    const double cubic = (2.0 / 3.0) * ju * std::sqrt(2.0 / mp);
    const double d_airy = std::pow(eps / cubic, 2.0 / 3.0);
    const double u_airy = std::sqrt(2.0 * d_airy / mp);
    return std::min(3.0 * u_airy, 0.25 * static_cast<double>(n - 1));
}

bool window_covers(const Window& w, std::size_t seg, const ChainView& v) {
    if (!v.circle) return seg >= w.first_seg && seg < w.first_seg + w.len;
    return (seg + v.n_seg - w.first_seg) % v.n_seg < w.len;
}

std::vector<Window> build_windows(const ChainView& v, double eps) {
    std::vector<Window> windows;
    for (const auto& [first, len] : monotone_runs(v)) {
        if (len < 3) continue;
        Window w;
        w.first_seg = first;
        w.len = len;
        const std::size_t count = len + 1;
        w.p.resize(count);
        w.qn.resize(count);
        w.theta.resize(count);
        w.m.resize(count);
        w.g.resize(count);
        std::vector<int> sig(count);
        std::vector<double> jcv(count), pcv(count);
        for (std::size_t k = 0; k < count; ++k) {
            const std::size_t raw = first + k;
            const std::size_t i = raw % v.n_markers;
            const double wraps = static_cast<double>(raw / v.n_markers);
            w.p[k] = v.p[i];
            w.qn[k] = v.q[i];
            w.theta[k] = v.s[i] + wraps * v.loop_a - v.p[i] * v.q[i];
            double du = 1.0;
            if (v.circle) {
                const std::size_t up = (i + 1) % v.n_markers;
                const std::size_t dn = (i + v.n_markers - 1) % v.n_markers;
                w.m[k] = 0.5 * (v.p[up] - v.p[dn]);
            } else if (i == 0) {
                w.m[k] = v.p[1] - v.p[0];
                du = 0.5;
            } else if (i + 1 == v.n_markers) {
                w.m[k] = v.p[i] - v.p[i - 1];
                du = 0.5;
            } else {
                w.m[k] = 0.5 * (v.p[i + 1] - v.p[i - 1]);
            }
            w.g[k] = std::sqrt(v.w[i] * v.tw[i] / du * std::abs(w.m[k]));
            sig[k] = v.sigma[i] + static_cast<int>(wraps) * static_cast<int>(v.loop_m);
            jcv[k] = v.jc[i];
            pcv[k] = v.pc[i];
        }
        // the fold counter minus the momentum-side indicator is constant
        // along the window, so any marker with a steady dp/dx sign serves
        double m_peak = 0.0;
        for (double mk : w.m) m_peak = std::max(m_peak, std::abs(mk));
        std::size_t pick = count;
        for (std::size_t k = 0; k < count; ++k) {
            if (std::abs(w.m[k]) >= 0.05 * m_peak) {
                pick = k;
                break;
            }
        }
        if (pick == count) continue;
        w.sigma_hat = sig[pick] - (jcv[pick] * pcv[pick] > 0.0 ? 1 : 0);
        const auto [lo, hi] = std::minmax_element(w.p.begin(), w.p.end());
        w.p_lo = *lo;
        w.p_hi = *hi;
        if (!(w.p_hi > w.p_lo)) continue;
        if (v.circle || first > 0) w.taper_lo = fold_taper_width(w, true, eps);
        if (v.circle || first + len < v.n_seg) w.taper_hi = fold_taper_width(w, false, eps);
        windows.push_back(std::move(w));
    }
    return windows;
}

std::complex<double> window_field(const Window& w, double q, double eps,
                                  const ReconstructOptions& opt) {
    const std::size_t count = w.p.size();
    const double span = static_cast<double>(count - 1);
    double cycles = 0.0;
    for (std::size_t k = 0; k < count; ++k) {
        const double rate = std::abs(q - w.qn[k]) * std::abs(w.m[k]);
        cycles += (k == 0 || k + 1 == count) ? 0.5 * rate : rate;
    }
    cycles /= two_pi * eps;
    const double want = std::max({64.0, 4.0 * span + 1.0,
                                  static_cast<double>(opt.points_per_cycle) * cycles});
    const auto nf = static_cast<std::size_t>(
        std::min(want, static_cast<double>(opt.max_quadrature_points)));
    const double du = span / static_cast<double>(nf - 1);
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t j = 0; j < nf; ++j) {
        const double uj = (j + 1 == nf) ? span : du * static_cast<double>(j);
        const std::size_t k = std::min(static_cast<std::size_t>(uj), count - 2);
        const double t = uj - static_cast<double>(k);
        const double t2 = t * t, t3 = t2 * t;
        const double h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        const double h10 = t3 - 2.0 * t2 + t;
        const double h01 = 3.0 * t2 - 2.0 * t3;
        const double h11 = t3 - t2;
        const double th = h00 * w.theta[k] - h10 * w.qn[k] * w.m[k] + h01 * w.theta[k + 1] -
                          h11 * w.qn[k + 1] * w.m[k + 1];
        const double pj = h00 * w.p[k] + h10 * w.m[k] + h01 * w.p[k + 1] + h11 * w.m[k + 1];
        double a = w.g[k] + t * (w.g[k + 1] - w.g[k]);
        if (w.taper_lo > 0.0 && uj < w.taper_lo) a *= smoothstep(uj / w.taper_lo);
        if (w.taper_hi > 0.0 && span - uj < w.taper_hi) a *= smoothstep((span - uj) / w.taper_hi);
        if (j == 0 || j + 1 == nf) a *= 0.5;
        acc += std::polar(a, (th + pj * q) / eps);
    }
    acc *= du;
    const double ang = -0.25 * std::numbers::pi - half_pi * static_cast<double>(w.sigma_hat);
    return acc * std::polar(1.0 / std::sqrt(two_pi * eps), ang);
}

struct Zone {
    double lo = 0.0, hi = 0.0;
    bool unresolved = false;
};

// Configuration intervals around folded segment clusters, padded by the
// fold's diffraction width (eps^2 / |dJ/dx|)^(1/3): inside them the branch
// amplitudes are unreliable and the momentum integral takes over.
std::vector<Zone> build_zones(const ChainView& v, const std::vector<char>& folded,
                              const std::vector<Window>& windows, double eps) {
    std::vector<std::vector<std::size_t>> clusters;
    std::size_t s = 0;
    while (s < v.n_seg) {
        if (!folded[s]) {
            ++s;
            continue;
        }
        std::vector<std::size_t> run;
        while (s < v.n_seg && folded[s]) run.push_back(s++);
        clusters.push_back(std::move(run));
    }
    if (v.circle && clusters.size() > 1 && folded[0] && folded[v.n_seg - 1]) {
        auto tail = std::move(clusters.back());
        clusters.pop_back();
        tail.insert(tail.end(), clusters.front().begin(), clusters.front().end());
        clusters.front() = std::move(tail);
    }
    std::vector<Zone> zones;
    for (const auto& members : clusters) {
        Zone z;
        double q_lo = v.q[members.front()], q_hi = q_lo;
        double span_x = 0.0, dq_max = 0.0;
        for (std::size_t m : members) {
            q_lo = std::min({q_lo, v.q[m], v.q[m + 1]});
            q_hi = std::max({q_hi, v.q[m], v.q[m + 1]});
            span_x += v.x[m + 1] - v.x[m];
            dq_max = std::max(dq_max, std::abs(v.q[m + 1] - v.q[m]));
            if (!z.unresolved) {
                bool covered = false;
                for (const auto& w : windows)
                    if (window_covers(w, m, v)) {
                        covered = true;
                        break;
                    }
                z.unresolved = !covered;
            }
        }
        double j_edge = 0.0, x_edge = 0.0;
        if (members.size() < v.n_seg) {
            const std::size_t before = (members.front() + v.n_seg - 1) % v.n_seg;
            const std::size_t after = (members.back() + 1) % v.n_seg;
            if (v.circle || members.front() > 0) {
                j_edge += std::abs(v.jseg[before]);
                x_edge += 0.5 * (v.x[before + 1] - v.x[before]);
            }
            if (v.circle || members.back() + 1 < v.n_seg) {
                j_edge += std::abs(v.jseg[after]);
                x_edge += 0.5 * (v.x[after + 1] - v.x[after]);
            }
        }
        const double j_rate = j_edge / std::max(span_x + x_edge, 1e-300);
        const double pad = std::cbrt(eps * eps / std::max(j_rate, 1e-8)) + 2.0 * dq_max;
        z.lo = q_lo - pad;
        z.hi = q_hi + pad;
        zones.push_back(z);
    }
    std::sort(zones.begin(), zones.end(), [](const Zone& a, const Zone& b) { return a.lo < b.lo; });
    std::vector<Zone> merged;
    for (const auto& z : zones) {
        if (!merged.empty() && z.lo <= merged.back().hi) {
            merged.back().hi = std::max(merged.back().hi, z.hi);
            merged.back().unresolved = merged.back().unresolved || z.unresolved;
        } else {
            merged.push_back(z);
        }
    }
    return merged;
}

const Zone* find_zone(const std::vector<Zone>& zones, double q) {
    for (const auto& z : zones)
        if (q >= z.lo && q <= z.hi) return &z;
    return nullptr;
}

std::complex<double> momentum_field(const std::vector<Window>& windows, double q, double eps,
                                    const ReconstructOptions& opt) {
    std::complex<double> acc{0.0, 0.0};
    for (const auto& w : windows) acc += window_field(w, q, eps, opt);
    return acc;
}

} // namespace

std::vector<Branch> branches_at(const MarkerChart& chart, double q,
                                const ReconstructOptions& opt) {
    (void)opt;
    return collect_branches(make_view(chart), q);
}

FieldSample field_at(const MarkerChart& chart, double q, FieldMethod method,
                     const ReconstructOptions& opt) {
    const ChainView v = make_view(chart);
    const double thr = resolve_threshold(v, opt);
    const auto folded = folded_segments(v, thr);
    FieldSample smp;
    smp.q = q;
    smp.method = method;
    bool hit_fold = false;
    for (auto& b : collect_branches(v, q)) {
        if (folded[b.segment_index])
            hit_fold = true;
        else
            smp.branches.push_back(std::move(b));
    }
    if (method == FieldMethod::branch_sum) {
        if (hit_fold)
            fail(Errc::caustic_at_query,
                 "query point crosses a folded segment; the profile path handles folds");
        smp.value = sum_branches(smp.branches, chart.epsilon);
    } else {
        const auto windows = build_windows(v, chart.epsilon);
        if (windows.empty())
            fail(Errc::unresolved_caustic, "chart has no monotone momentum window");
        smp.value = momentum_field(windows, q, chart.epsilon, opt);
    }
    return smp;
}

std::vector<FieldSample> field_profile(const MarkerChart& chart, std::span<const double> q_grid,
                                       const ReconstructOptions& opt) {
    const ChainView v = make_view(chart);
    const double thr = resolve_threshold(v, opt);
    const auto folded = folded_segments(v, thr);
    const auto windows = build_windows(v, chart.epsilon);
    const auto zones = build_zones(v, folded, windows, chart.epsilon);
    std::vector<FieldSample> out(q_grid.size());
    parallel_for(q_grid.size(), opt.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const double q = q_grid[i];
            FieldSample smp;
            smp.q = q;
            for (auto& b : collect_branches(v, q))
                if (!folded[b.segment_index]) smp.branches.push_back(std::move(b));
            if (const Zone* z = find_zone(zones, q)) {
                if (z->unresolved)
                    fail(Errc::unresolved_caustic,
                         "folded chart region has no monotone momentum window");
                smp.method = FieldMethod::momentum_integral;
                smp.value = momentum_field(windows, q, chart.epsilon, opt);
            } else {
                smp.method = FieldMethod::branch_sum;
                smp.value = sum_branches(smp.branches, chart.epsilon);
            }
            out[i] = std::move(smp);
        }
    });
    return out;
}

} // namespace kmw

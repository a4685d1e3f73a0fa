#include "core/runner.hpp"

#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "core/common.hpp"
#include "core/reconstruct.hpp"
#include "core/structure.hpp"

namespace kmw {
namespace {

using json = nlohmann::ordered_json;

constexpr double two_pi = 6.283185307179586476925286766559;

std::string zero6(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%06zu", i);
    return buf;
}

void write_text(const std::string& path, const std::string& text, RunReport& rep) {
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(Errc::io_error, "cannot open " + path + " for writing");
    f << text;
    f.close();
    if (!f) fail(Errc::io_error, "short write to " + path);
    rep.files.push_back(path);
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
    return (std::filesystem::path(cfg.outputs.dir) / name).string();
}

void prepare_out_dir(const RunConfig& cfg) {
    if (cfg.outputs.dir.empty())
        fail(Errc::validation_error, "outputs.dir is empty; pass --out or set outputs.dir");
    std::error_code ec;
    std::filesystem::create_directories(cfg.outputs.dir, ec);
    if (ec) fail(Errc::io_error, "cannot create " + cfg.outputs.dir + ": " + ec.message());
}

std::vector<double> make_grid(const GridConfig& g) {
    std::vector<double> q(g.n);
    for (std::size_t i = 0; i < g.n; ++i)
        q[i] = g.n == 1 ? g.min
                        : g.min + (g.max - g.min) * static_cast<double>(i) /
                                      static_cast<double>(g.n - 1);
    return q;
}

std::string diagnostics_csv(const Trajectory& traj) {
    std::ostringstream os;
    os << "t,wave_action,energy,coherence,bs_residual,n_markers\n";
    for (const auto& d : traj.diagnostics)
        os << format_shortest(d.t) << ',' << format_shortest(d.wave_action) << ','
           << format_shortest(d.energy) << ',' << format_shortest(d.coherence) << ','
           << format_shortest(d.bs_residual) << ',' << d.n_markers << '\n';
    return os.str();
}

std::string profile_csv(const std::vector<double>& grid, const std::vector<FieldSample>& samples) {
    std::ostringstream os;
    os << "q,re,im,abs,n_branches\n";
    for (std::size_t i = 0; i < samples.size(); ++i)
        os << format_shortest(grid[i]) << ',' << format_shortest(samples[i].value.real()) << ','
           << format_shortest(samples[i].value.imag()) << ','
           << format_shortest(std::abs(samples[i].value)) << ',' << samples[i].branches.size()
           << '\n';
    return os.str();
}

Trajectory run_evolve(const RunConfig& cfg, int threads, RunReport& rep) {
    const DispersionSymbol sym = build_symbol(cfg.symbol);
    MarkerChart chart = build_initial_chart(cfg.initial, cfg.epsilon);
    EvolveSettings es = cfg.evolve;
    es.frame_stride = cfg.outputs.save_every;
    es.threads = threads;
    Trajectory traj = evolve(std::move(chart), sym, es);

    std::ostringstream manifest;
    manifest << "frame,time,file,n_markers\n";
    for (std::size_t i = 0; i < traj.frames.size(); ++i) {
        const std::string name = "chart_" + zero6(i) + ".csv";
        save_chart_csv(traj.frames[i], out_path(cfg, name));
        rep.files.push_back(out_path(cfg, name));
        manifest << i << ',' << format_shortest(traj.times[i]) << ',' << name << ','
                 << traj.frames[i].size() << '\n';
    }
    write_text(out_path(cfg, "frames.csv"), manifest.str(), rep);
    write_text(out_path(cfg, "diagnostics.csv"), diagnostics_csv(traj), rep);
    return traj;
}

RunReport do_evolve(const RunConfig& cfg, int threads, bool with_profiles) {
    RunReport rep;
    prepare_out_dir(cfg);
    Trajectory traj = run_evolve(cfg, threads, rep);
    if (with_profiles) {
        const std::vector<double> grid = make_grid(cfg.outputs.q_grid);
        ReconstructOptions opt;
        opt.caustic_threshold = cfg.evolve.caustic_threshold;
        opt.threads = threads;
        for (std::size_t i = 0; i < traj.frames.size(); ++i) {
            const auto samples = field_profile(traj.frames[i], grid, opt);
            write_text(out_path(cfg, "profile_" + zero6(i) + ".csv"), profile_csv(grid, samples),
                       rep);
        }
    }
    std::ostringstream msg;
    msg << (with_profiles ? "reconstruct" : "evolve") << ": " << traj.frames.size()
        << " frames to t = " << format_shortest(traj.times.back()) << ", "
        << traj.frames.back().size() << " markers";
    rep.message = msg.str();
    return rep;
}

RunReport do_quantize(const RunConfig& cfg) {
    RunReport rep;
    prepare_out_dir(cfg);
    const QuantizeConfig& qz = cfg.quantize;
    auto bs_at = [&](double r) {
        return quantization_data(init_circle(r, qz.markers, cfg.epsilon)).bs_value;
    };
    const double lo_v = bs_at(qz.radius_min);
    const double hi_v = bs_at(qz.radius_max);
    const double unit = two_pi * cfg.epsilon;
    // bs_value grows monotonically with the radius, so each level is a
    // bisection between the range ends
    long m0 = static_cast<long>(std::ceil(lo_v / unit - 1e-9));
    if (unit * static_cast<double>(m0) < lo_v) ++m0;
    const long m_last = m0 + static_cast<long>(qz.n_levels) - 1;
    if (unit * static_cast<double>(m_last) > hi_v)
        fail(Errc::validation_error,
             "quantize.radius_max too small: the range holds fewer than " +
                 std::to_string(qz.n_levels) + " levels");

    std::ostringstream os;
    os << "n,radius,radius_sq,bs_value,bs_residual\n";
    for (std::size_t k = 0; k < qz.n_levels; ++k) {
        const double target = unit * static_cast<double>(m0 + static_cast<long>(k));
        double lo = qz.radius_min, hi = qz.radius_max;
        for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, lo); ++it) {
            const double mid = 0.5 * (lo + hi);
            (bs_at(mid) < target ? lo : hi) = mid;
        }
        const double r = 0.5 * (lo + hi);
        const auto data = quantization_data(init_circle(r, qz.markers, cfg.epsilon));
        os << k << ',' << format_shortest(r) << ',' << format_shortest(r * r) << ','
           << format_shortest(data.bs_value) << ',' << format_shortest(data.bs_residual) << '\n';
    }
    write_text(out_path(cfg, "levels.csv"), os.str(), rep);
    rep.message = "quantize: " + std::to_string(qz.n_levels) + " levels in [" +
                  format_shortest(qz.radius_min) + ", " + format_shortest(qz.radius_max) + "]";
    return rep;
}

TangentPerturbation draw_tangent(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    std::vector<Monomial> ms;
    const int shapes[][2] = {{1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}, {2, 1}};
    for (const auto& sh : shapes) ms.push_back({u(rng), sh[0], sh[1]});
    TangentPerturbation v;
    v.dg = pf_poly(ms);
    v.dmu.resize(n);
    for (auto& x : v.dmu) x = u(rng) / static_cast<double>(n);
    v.dphi = u(rng);
    return v;
}

FunctionalDerivative draw_functional(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    std::vector<Monomial> ms;
    const int shapes[][2] = {{1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}};
    for (const auto& sh : shapes) ms.push_back({u(rng), sh[0], sh[1]});
    FunctionalDerivative d;
    d.dF_dmu = pf_poly(ms);
    d.dF_dg.resize(n);
    double mean = 0.0;
    for (auto& x : d.dF_dg) {
        x = u(rng) / static_cast<double>(n);
        mean += x;
    }
    mean /= static_cast<double>(n);
    for (auto& x : d.dF_dg) x -= mean; // functionals cannot see constant generators
    return d;
}

void require_circle(const MarkerChart& chart, const std::string& property) {
    if (chart.topology != Topology::circle)
        fail(Errc::validation_error,
             "verify property " + property + " needs a circle initial block");
}

double measure_property(const std::string& name, const MarkerChart& chart,
                        const DispersionSymbol& sym, double t, std::uint64_t seeds, int threads) {
    double defect = 0.0;
    for (std::uint64_t k = 0; k < seeds; ++k) {
        std::mt19937_64 rng(0x6b6d77a0 + k);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        if (name == "theta_constant_gauge") {
            TangentPerturbation v;
            v.dg = pf_constant(u(rng));
            defect = std::max(defect, std::abs(theta_eval(chart, sym, t, v, threads)));
        } else if (name == "dtheta_antisymmetry") {
            auto v1 = draw_tangent(rng, chart.size());
            auto v2 = draw_tangent(rng, chart.size());
            const double ab = dtheta_eval(chart, sym, t, v1, v2, threads);
            const double ba = dtheta_eval(chart, sym, t, v2, v1, threads);
            defect = std::max(defect, std::abs(ab + ba));
            defect = std::max(defect, std::abs(dtheta_eval(chart, sym, t, v1, v1, threads)));
        } else if (name == "gauge_kernel") {
            require_circle(chart, name);
            auto v1 = draw_tangent(rng, chart.size());
            std::vector<Monomial> ms;
            const int shapes[][2] = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
            for (const auto& sh : shapes) ms.push_back({u(rng), sh[0], sh[1]});
            auto gauge = gauge_tangent_circle(chart, pf_poly(ms));
            defect = std::max(defect, std::abs(theta_eval(chart, sym, t, gauge, threads)));
            defect = std::max(defect, std::abs(dtheta_eval(chart, sym, t, v1, gauge, threads)));
        } else if (name == "bracket_pairing_triangle") {
            auto dF = draw_functional(rng, chart.size());
            auto dG = draw_functional(rng, chart.size());
            const double fg = poisson_bracket(chart, sym, t, dF, dG, threads);
            auto xF = hamiltonian_vector(chart, sym, t, dF, false, threads);
            auto xG = hamiltonian_vector(chart, sym, t, dG, false, threads);
            defect = std::max(defect, std::abs(fg + pairing_eval(chart, dG, xF)));
            defect = std::max(defect, std::abs(fg - pairing_eval(chart, dF, xG)));
        } else if (name == "energy_field") {
            auto xE = hamiltonian_vector(chart, sym, t, energy_functional(sym, t), true, threads);
            for (std::size_t i = 0; i < chart.size(); ++i) {
                const auto fd = frequency_data(sym, chart.q_at(i), chart.p_at(i), t);
                const double q = chart.q[i], p = chart.p[i];
                defect = std::max(defect, std::abs(xE.dg.f(q, p) - fd.e));
                defect = std::max(defect, std::abs(xE.dg.fp(q, p) - fd.qdot[0]));
                defect = std::max(defect, std::abs(-xE.dg.fq(q, p) - fd.pdot[0]));
            }
            break; // seed-independent
        } else if (name == "frozen_in") {
            require_circle(chart, name);
            TangentPerturbation v;
            v.dg = pf_poly({{1.0, 1, 0}});
            const auto r = frozen_in_check(chart, sym, v, t, t + 1.0, 1e-3, 1e-5);
            defect = std::abs(r.defect);
            break; // seed-independent
        } else {
            fail(Errc::validation_error, "verify.properties: unknown property \"" + name + "\"");
        }
    }
    return defect;
}

double property_tolerance(const std::string& name) {
    if (name == "theta_constant_gauge" || name == "dtheta_antisymmetry") return 0.0;
    if (name == "gauge_kernel") return 1e-6;
    if (name == "bracket_pairing_triangle") return 1e-8;
    if (name == "energy_field") return 1e-8;
    return 1e-4; // frozen_in
}

RunReport do_verify(const RunConfig& cfg, int threads) {
    RunReport rep;
    prepare_out_dir(cfg);
    const DispersionSymbol sym = build_symbol(cfg.symbol);
    const MarkerChart chart = build_initial_chart(cfg.initial, cfg.epsilon);
    const std::vector<std::string>& props =
        cfg.verify.properties.empty() ? verify_property_names() : cfg.verify.properties;

    json results = json::array();
    bool all_pass = true;
    std::string failing;
    for (const auto& name : props) {
        const double defect =
            measure_property(name, chart, sym, cfg.verify.t, cfg.verify.seeds, threads);
        const double tol = property_tolerance(name);
        const bool pass = defect <= tol;
        all_pass = all_pass && pass;
        if (!pass) failing += (failing.empty() ? "" : ", ") + name;
        results.push_back({{"property", name},
                           {"defect", defect},
                           {"tolerance", tol},
                           {"pass", pass}});
    }
    json report;
    report["symbol"] = cfg.symbol.kind;
    report["t"] = cfg.verify.t;
    report["seeds"] = cfg.verify.seeds;
    report["results"] = results;
    report["pass"] = all_pass;
    write_text(out_path(cfg, "verify_report.json"), report.dump(2) + "\n", rep);
    rep.exit_code = all_pass ? 0 : 1;
    rep.message = all_pass
                      ? "verify: " + std::to_string(props.size()) + "/" +
                            std::to_string(props.size()) + " properties within tolerance"
                      : "verify: outside tolerance: " + failing;
    return rep;
}

} // namespace

RunReport run_command(const std::string& subcommand, const RunConfig& cfg, int threads) {
    if (threads < 1) fail(Errc::validation_error, "threads must be >= 1");
    if (subcommand == "evolve") return do_evolve(cfg, threads, false);
    if (subcommand == "reconstruct") return do_evolve(cfg, threads, true);
    if (subcommand == "quantize") return do_quantize(cfg);
    if (subcommand == "verify") return do_verify(cfg, threads);
    fail(Errc::validation_error,
         "subcommand must be evolve, reconstruct, quantize, or verify (got \"" + subcommand +
             "\")");
}

} // namespace kmw

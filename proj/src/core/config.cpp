#include "core/config.hpp"

#include <cmath>
#include <initializer_list>

#include <json.hpp>

#include "core/common.hpp"

namespace kmw {
namespace {

using json = nlohmann::ordered_json;

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                known = true;
                break;
            }
        if (!known) fail(Errc::parse_error, "unknown key \"" + it.key() + "\" in " + where);
    }
}

const json* child(const json& obj, const char* key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

double as_double(const json& v, const std::string& field) {
    if (!v.is_number()) fail(Errc::validation_error, field + " must be a number");
    return v.get<double>();
}

std::size_t as_index(const json& v, const std::string& field) {
    if (!v.is_number_integer() && !v.is_number_unsigned())
        fail(Errc::validation_error, field + " must be a non-negative integer");
    const long long x = v.get<long long>();
    if (x < 0) fail(Errc::validation_error, field + " must be a non-negative integer");
    return static_cast<std::size_t>(x);
}

std::string as_string(const json& v, const std::string& field) {
    if (!v.is_string()) fail(Errc::validation_error, field + " must be a string");
    return v.get<std::string>();
}

std::vector<double> as_coeffs(const json& v, const std::string& field) {
    if (!v.is_array()) fail(Errc::validation_error, field + " must be an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) out.push_back(as_double(x, field));
    return out;
}

void require_positive(double x, const std::string& field) {
    if (!(x > 0.0) || !std::isfinite(x)) fail(Errc::validation_error, field + " must be > 0");
}

void parse_symbol(const json& obj, SymbolConfig& out) {
    check_keys(obj, "symbol", {"kind", "params", "branch_hint"});
    if (const json* v = child(obj, "kind")) out.kind = as_string(*v, "symbol.kind");
    if (out.kind != "schrodinger" && out.kind != "harmonic" && out.kind != "helmholtz")
        fail(Errc::validation_error, "symbol.kind must be schrodinger, harmonic, or helmholtz");
    if (const json* params = child(obj, "params")) {
        if (out.kind == "schrodinger") {
            check_keys(*params, "symbol.params", {"potential"});
            if (const json* v = child(*params, "potential"))
                out.potential = as_coeffs(*v, "symbol.params.potential");
        } else if (out.kind == "harmonic") {
            check_keys(*params, "symbol.params", {"omega"});
            if (const json* v = child(*params, "omega")) {
                out.omega = as_double(*v, "symbol.params.omega");
                require_positive(out.omega, "symbol.params.omega");
            }
        } else {
            check_keys(*params, "symbol.params", {"speed"});
            if (const json* v = child(*params, "speed")) {
                out.speed = as_coeffs(*v, "symbol.params.speed");
                if (out.speed.empty())
                    fail(Errc::validation_error, "symbol.params.speed must not be empty");
            }
        }
    }
    if (const json* v = child(obj, "branch_hint")) {
        out.branch_hint = as_double(*v, "symbol.branch_hint");
        if (!std::isfinite(out.branch_hint))
            fail(Errc::validation_error, "symbol.branch_hint must be finite");
    }
}

void parse_amplitude(const json& obj, AmplitudeConfig& out) {
    check_keys(obj, "initial.phase_function.amp", {"kind", "value", "coeffs", "alpha", "center"});
    if (const json* v = child(obj, "kind"))
        out.kind = as_string(*v, "initial.phase_function.amp.kind");
    if (out.kind == "constant") {
        if (const json* v = child(obj, "value")) {
            out.value = as_double(*v, "initial.phase_function.amp.value");
            require_positive(out.value, "initial.phase_function.amp.value");
        }
    } else if (out.kind == "poly") {
        if (const json* v = child(obj, "coeffs"))
            out.coeffs = as_coeffs(*v, "initial.phase_function.amp.coeffs");
        if (out.coeffs.empty())
            fail(Errc::validation_error, "initial.phase_function.amp.coeffs must not be empty");
    } else if (out.kind == "gaussian") {
        if (const json* v = child(obj, "alpha")) {
            out.alpha = as_double(*v, "initial.phase_function.amp.alpha");
            require_positive(out.alpha, "initial.phase_function.amp.alpha");
        }
        if (const json* v = child(obj, "center"))
            out.center = as_double(*v, "initial.phase_function.amp.center");
    } else {
        fail(Errc::validation_error,
             "initial.phase_function.amp.kind must be constant, poly, or gaussian");
    }
}

void parse_initial(const json& obj, InitialConfig& out) {
    check_keys(obj, "initial", {"circle", "phase_function"});
    const json* circle = child(obj, "circle");
    const json* pf = child(obj, "phase_function");
    if ((circle != nullptr) == (pf != nullptr))
        fail(Errc::validation_error, "initial must hold exactly one of circle, phase_function");
    if (circle) {
        out.kind = "circle";
        check_keys(*circle, "initial.circle", {"radius", "n", "total_weight"});
        if (const json* v = child(*circle, "radius")) {
            out.radius = as_double(*v, "initial.circle.radius");
            require_positive(out.radius, "initial.circle.radius");
        }
        if (const json* v = child(*circle, "n")) {
            out.n = as_index(*v, "initial.circle.n");
            if (out.n < 4) fail(Errc::validation_error, "initial.circle.n must be >= 4");
        }
        if (const json* v = child(*circle, "total_weight")) {
            out.total_weight = as_double(*v, "initial.circle.total_weight");
            require_positive(out.total_weight, "initial.circle.total_weight");
        }
    } else {
        out.kind = "phase_function";
        check_keys(*pf, "initial.phase_function", {"s_coeffs", "amp", "grid"});
        if (const json* v = child(*pf, "s_coeffs"))
            out.s_coeffs = as_coeffs(*v, "initial.phase_function.s_coeffs");
        if (const json* v = child(*pf, "amp")) parse_amplitude(*v, out.amp);
        if (const json* grid = child(*pf, "grid")) {
            check_keys(*grid, "initial.phase_function.grid", {"min", "max", "n"});
            if (const json* v = child(*grid, "min"))
                out.q_min = as_double(*v, "initial.phase_function.grid.min");
            if (const json* v = child(*grid, "max"))
                out.q_max = as_double(*v, "initial.phase_function.grid.max");
            if (const json* v = child(*grid, "n"))
                out.grid_n = as_index(*v, "initial.phase_function.grid.n");
        }
        if (!(out.q_min < out.q_max))
            fail(Errc::validation_error, "initial.phase_function.grid.min must be < max");
        if (out.grid_n < 2)
            fail(Errc::validation_error, "initial.phase_function.grid.n must be >= 2");
    }
}

void parse_evolve(const json& obj, EvolveSettings& out) {
    check_keys(obj, "evolve",
               {"scheme", "h", "t0", "t1", "refine_every", "max_spacing", "caustic_threshold",
                "marker_cap"});
    if (const json* v = child(obj, "scheme"))
        out.scheme = scheme_from_name(as_string(*v, "evolve.scheme"));
    if (const json* v = child(obj, "h")) {
        out.h = as_double(*v, "evolve.h");
        require_positive(out.h, "evolve.h");
    }
    if (const json* v = child(obj, "t0")) out.t0 = as_double(*v, "evolve.t0");
    if (const json* v = child(obj, "t1")) out.t1 = as_double(*v, "evolve.t1");
    if (!(out.t1 > out.t0)) fail(Errc::validation_error, "evolve.t1 must be > t0");
    if (const json* v = child(obj, "refine_every"))
        out.refine_every = as_index(*v, "evolve.refine_every");
    if (const json* v = child(obj, "max_spacing")) {
        out.max_spacing = as_double(*v, "evolve.max_spacing");
        require_positive(out.max_spacing, "evolve.max_spacing");
    }
    if (const json* v = child(obj, "caustic_threshold"))
        out.caustic_threshold = as_double(*v, "evolve.caustic_threshold");
    if (const json* v = child(obj, "marker_cap")) {
        out.marker_cap = as_index(*v, "evolve.marker_cap");
        if (out.marker_cap < 4) fail(Errc::validation_error, "evolve.marker_cap must be >= 4");
    }
}

void parse_grid(const json& obj, GridConfig& out) {
    check_keys(obj, "outputs.q_grid", {"min", "max", "n"});
    if (const json* v = child(obj, "min")) out.min = as_double(*v, "outputs.q_grid.min");
    if (const json* v = child(obj, "max")) out.max = as_double(*v, "outputs.q_grid.max");
    if (const json* v = child(obj, "n")) out.n = as_index(*v, "outputs.q_grid.n");
    if (!(out.min < out.max)) fail(Errc::validation_error, "outputs.q_grid.min must be < max");
    if (out.n < 1) fail(Errc::validation_error, "outputs.q_grid.n must be >= 1");
}

void parse_outputs(const json& obj, OutputsConfig& out) {
    check_keys(obj, "outputs", {"dir", "save_every", "q_grid"});
    if (const json* v = child(obj, "dir")) out.dir = as_string(*v, "outputs.dir");
    if (const json* v = child(obj, "save_every")) out.save_every = as_index(*v, "outputs.save_every");
    if (const json* v = child(obj, "q_grid")) parse_grid(*v, out.q_grid);
}

void parse_quantize(const json& obj, QuantizeConfig& out) {
    check_keys(obj, "quantize", {"radius_min", "radius_max", "n_levels", "markers"});
    if (const json* v = child(obj, "radius_min")) {
        out.radius_min = as_double(*v, "quantize.radius_min");
        require_positive(out.radius_min, "quantize.radius_min");
    }
    if (const json* v = child(obj, "radius_max"))
        out.radius_max = as_double(*v, "quantize.radius_max");
    if (!(out.radius_min < out.radius_max))
        fail(Errc::validation_error, "quantize.radius_min must be < radius_max");
    if (const json* v = child(obj, "n_levels")) {
        out.n_levels = as_index(*v, "quantize.n_levels");
        if (out.n_levels < 1) fail(Errc::validation_error, "quantize.n_levels must be >= 1");
    }
    if (const json* v = child(obj, "markers")) {
        out.markers = as_index(*v, "quantize.markers");
        if (out.markers < 16) fail(Errc::validation_error, "quantize.markers must be >= 16");
    }
}

void parse_verify(const json& obj, VerifyConfig& out) {
    check_keys(obj, "verify", {"properties", "seeds", "t"});
    if (const json* v = child(obj, "properties")) {
        if (!v->is_array())
            fail(Errc::validation_error, "verify.properties must be an array of names");
        out.properties.clear();
        const auto& known = verify_property_names();
        for (const auto& x : *v) {
            const std::string name = as_string(x, "verify.properties");
            bool ok = false;
            for (const auto& k : known)
                if (k == name) {
                    ok = true;
                    break;
                }
            if (!ok)
                fail(Errc::validation_error, "verify.properties: unknown property \"" + name + "\"");
            out.properties.push_back(name);
        }
    }
    if (const json* v = child(obj, "seeds")) {
        out.seeds = as_index(*v, "verify.seeds");
        if (out.seeds < 1) fail(Errc::validation_error, "verify.seeds must be >= 1");
    }
    if (const json* v = child(obj, "t")) {
        out.t = as_double(*v, "verify.t");
        if (!std::isfinite(out.t)) fail(Errc::validation_error, "verify.t must be finite");
    }
}

json emit_amplitude(const AmplitudeConfig& amp) {
    json j;
    j["kind"] = amp.kind;
    if (amp.kind == "constant") j["value"] = amp.value;
    if (amp.kind == "poly") j["coeffs"] = amp.coeffs;
    if (amp.kind == "gaussian") {
        j["alpha"] = amp.alpha;
        j["center"] = amp.center;
    }
    return j;
}

} // namespace

RunConfig parse_config(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        fail(Errc::parse_error, e.what());
    }
    if (!root.is_object()) fail(Errc::parse_error, "top level must be an object");
    check_keys(root, "the top level",
               {"symbol", "epsilon", "initial", "evolve", "outputs", "quantize", "verify"});

    RunConfig cfg;
    if (const json* v = child(root, "symbol")) parse_symbol(*v, cfg.symbol);
    if (const json* v = child(root, "epsilon")) {
        cfg.epsilon = as_double(*v, "epsilon");
        require_positive(cfg.epsilon, "epsilon");
    }
    if (const json* v = child(root, "initial")) parse_initial(*v, cfg.initial);
    if (const json* v = child(root, "evolve")) parse_evolve(*v, cfg.evolve);
    if (const json* v = child(root, "outputs")) parse_outputs(*v, cfg.outputs);
    if (const json* v = child(root, "quantize")) parse_quantize(*v, cfg.quantize);
    if (const json* v = child(root, "verify")) parse_verify(*v, cfg.verify);
    return cfg;
}

std::string emit_config(const RunConfig& cfg) {
    json j;
    j["symbol"]["kind"] = cfg.symbol.kind;
    if (cfg.symbol.kind == "schrodinger") j["symbol"]["params"]["potential"] = cfg.symbol.potential;
    if (cfg.symbol.kind == "harmonic") j["symbol"]["params"]["omega"] = cfg.symbol.omega;
    if (cfg.symbol.kind == "helmholtz") j["symbol"]["params"]["speed"] = cfg.symbol.speed;
    j["symbol"]["branch_hint"] = cfg.symbol.branch_hint;
    j["epsilon"] = cfg.epsilon;
    if (cfg.initial.kind == "circle") {
        json c;
        c["radius"] = cfg.initial.radius;
        c["n"] = cfg.initial.n;
        c["total_weight"] = cfg.initial.total_weight;
        j["initial"]["circle"] = c;
    } else {
        json p;
        p["s_coeffs"] = cfg.initial.s_coeffs;
        p["amp"] = emit_amplitude(cfg.initial.amp);
        p["grid"]["min"] = cfg.initial.q_min;
        p["grid"]["max"] = cfg.initial.q_max;
        p["grid"]["n"] = cfg.initial.grid_n;
        j["initial"]["phase_function"] = p;
    }
    j["evolve"]["scheme"] = scheme_name(cfg.evolve.scheme);
    j["evolve"]["h"] = cfg.evolve.h;
    j["evolve"]["t0"] = cfg.evolve.t0;
    j["evolve"]["t1"] = cfg.evolve.t1;
    j["evolve"]["refine_every"] = cfg.evolve.refine_every;
    j["evolve"]["max_spacing"] = cfg.evolve.max_spacing;
    j["evolve"]["caustic_threshold"] = cfg.evolve.caustic_threshold;
    j["evolve"]["marker_cap"] = cfg.evolve.marker_cap;
    j["outputs"]["dir"] = cfg.outputs.dir;
    j["outputs"]["save_every"] = cfg.outputs.save_every;
    j["outputs"]["q_grid"]["min"] = cfg.outputs.q_grid.min;
    j["outputs"]["q_grid"]["max"] = cfg.outputs.q_grid.max;
    j["outputs"]["q_grid"]["n"] = cfg.outputs.q_grid.n;
    j["quantize"]["radius_min"] = cfg.quantize.radius_min;
    j["quantize"]["radius_max"] = cfg.quantize.radius_max;
    j["quantize"]["n_levels"] = cfg.quantize.n_levels;
    j["quantize"]["markers"] = cfg.quantize.markers;
    j["verify"]["properties"] =
        cfg.verify.properties.empty() ? verify_property_names() : cfg.verify.properties;
    j["verify"]["seeds"] = cfg.verify.seeds;
    j["verify"]["t"] = cfg.verify.t;
    return j.dump(2) + "\n";
}

DispersionSymbol build_symbol(const SymbolConfig& cfg) {
    if (cfg.kind == "schrodinger")
        return make_schrodinger(Polynomial{cfg.potential}, cfg.branch_hint);
    if (cfg.kind == "harmonic") return make_harmonic(cfg.omega, cfg.branch_hint);
    if (cfg.kind == "helmholtz") return make_helmholtz(Polynomial{cfg.speed}, cfg.branch_hint);
    fail(Errc::validation_error, "symbol.kind must be schrodinger, harmonic, or helmholtz");
}

MarkerChart build_initial_chart(const InitialConfig& cfg, double epsilon) {
    if (cfg.kind == "circle") return init_circle(cfg.radius, cfg.n, epsilon, cfg.total_weight);
    const Polynomial s{cfg.s_coeffs};
    const Polynomial sp = s.derivative();
    std::function<double(double)> amp;
    if (cfg.amp.kind == "constant") {
        const double v = cfg.amp.value;
        amp = [v](double) { return v; };
    } else if (cfg.amp.kind == "poly") {
        const Polynomial a{cfg.amp.coeffs};
        amp = [a](double q) { return a(q); };
    } else {
        const double alpha = cfg.amp.alpha, center = cfg.amp.center;
        amp = [alpha, center](double q) { return std::exp(-alpha * (q - center) * (q - center)); };
    }
    return init_from_phase_function([s](double q) { return s(q); },
                                    [sp](double q) { return sp(q); }, amp, cfg.q_min, cfg.q_max,
                                    cfg.grid_n, epsilon);
}

const char* scheme_name(Scheme scheme) {
    switch (scheme) {
    case Scheme::rk4: return "rk4";
    case Scheme::midpoint: return "midpoint";
    case Scheme::variational: return "variational";
    }
    return "rk4";
}

Scheme scheme_from_name(const std::string& name) {
    if (name == "rk4") return Scheme::rk4;
    if (name == "midpoint") return Scheme::midpoint;
    if (name == "variational") return Scheme::variational;
    fail(Errc::validation_error, "evolve.scheme must be rk4, midpoint, or variational");
}

const std::vector<std::string>& verify_property_names() {
    static const std::vector<std::string> names = {
        "theta_constant_gauge",   "dtheta_antisymmetry", "gauge_kernel",
        "bracket_pairing_triangle", "energy_field",      "frozen_in",
    };
    return names;
}

} // namespace kmw

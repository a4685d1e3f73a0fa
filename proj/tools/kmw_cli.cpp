// Command-line front end over the shared-library C API. Reads a JSON run
// configuration, dispatches one subcommand, and reports module errors as JSON
// on stderr so scripted callers can tell what failed.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <kmw.h>

namespace {

std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 8);
    for (char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\r': out += "\\r"; break;
        case '\t': out += "\\t"; break;
        default:
            if (static_cast<unsigned char>(c) < 0x20) {
                char buf[8];
                std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                out += buf;
            } else {
                out += c;
            }
        }
    }
    return out;
}

const char* status_name(kmw_status s) {
    switch (s) {
    case KMW_OK: return "ok";
    case KMW_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case KMW_ERR_PARSE: return "parse";
    case KMW_ERR_VALIDATION: return "validation";
    case KMW_ERR_NUMERIC: return "numeric";
    case KMW_ERR_IO: return "io";
    case KMW_ERR_INTERNAL: return "internal";
    }
    return "internal";
}

int fail_with(kmw_status status, const std::string& message) {
    std::fprintf(stderr, "{\"error\": {\"status\": %d, \"name\": \"%s\", \"message\": \"%s\"}}\n",
                 static_cast<int>(status), status_name(status), json_escape(message).c_str());
    const bool usage = status == KMW_ERR_PARSE || status == KMW_ERR_VALIDATION ||
                       status == KMW_ERR_INVALID_ARGUMENT;
    return usage ? 2 : 1;
}

int run_one(const std::string& subcommand, const std::string& config_path,
            const std::string& out_dir, int threads) {
    std::ifstream f(config_path, std::ios::binary);
    if (!f) return fail_with(KMW_ERR_IO, "cannot read " + config_path);
    std::ostringstream text;
    text << f.rdbuf();

    kmw_config* cfg = nullptr;
    kmw_status status = kmw_config_parse(text.str().c_str(), &cfg);
    if (status != KMW_OK) return fail_with(status, kmw_last_error());

    if (!out_dir.empty()) {
        status = kmw_config_set_output_dir(cfg, out_dir.c_str());
        if (status != KMW_OK) {
            const int code = fail_with(status, kmw_last_error());
            kmw_config_free(cfg);
            return code;
        }
    }

    int exit_code = 0;
    char* message = nullptr;
    status = kmw_run(cfg, subcommand.c_str(), threads, &exit_code, &message);
    if (status != KMW_OK) {
        const int code = fail_with(status, kmw_last_error());
        kmw_config_free(cfg);
        return code;
    }
    if (message) {
        std::printf("%s\n", message);
        kmw_string_free(message);
    }
    kmw_config_free(cfg);
    return exit_code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"wave-chart simulator: ray-phase-space evolution, field "
                 "reconstruction, quantization, and structure verification"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    int threads = 1;
    bool strict = true;

    for (const char* name : {"evolve", "reconstruct", "quantize", "verify"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "JSON run configuration")
            ->required();
        sub->add_option("--out", out_dir, "output directory (overrides outputs.dir)");
        sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
        sub->add_flag("--strict,!--no-strict", strict, "reject unknown config keys (default)");
    }

    CLI11_PARSE(app, argc, argv);

    if (!strict)
        return fail_with(KMW_ERR_VALIDATION, "only strict config parsing is supported");
    return run_one(app.get_subcommands().front()->get_name(), config_path, out_dir, threads);
}

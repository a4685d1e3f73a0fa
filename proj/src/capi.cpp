#include "kmw.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "core/common.hpp"
#include "core/config.hpp"
#include "core/runner.hpp"

namespace {

thread_local std::string g_error;

kmw_status map_errc(kmw::Errc code) {
    switch (code) {
    case kmw::Errc::invalid_argument: return KMW_ERR_INVALID_ARGUMENT;
    case kmw::Errc::parse_error: return KMW_ERR_PARSE;
    case kmw::Errc::validation_error: return KMW_ERR_VALIDATION;
    case kmw::Errc::io_error: return KMW_ERR_IO;
    case kmw::Errc::internal: return KMW_ERR_INTERNAL;
    default: return KMW_ERR_NUMERIC;
    }
}

char* dup_string(const std::string& s) {
    char* p = static_cast<char*>(std::malloc(s.size() + 1));
    if (p) std::memcpy(p, s.c_str(), s.size() + 1);
    return p;
}

template <class Fn>
kmw_status guard(Fn&& fn) {
    try {
        fn();
        g_error.clear();
        return KMW_OK;
    } catch (const kmw::Error& e) {
        g_error = e.what();
        return map_errc(e.code());
    } catch (const std::exception& e) {
        g_error = e.what();
        return KMW_ERR_INTERNAL;
    }
}

kmw_status reject_null(const char* what) {
    g_error = std::string(what) + " must not be NULL";
    return KMW_ERR_INVALID_ARGUMENT;
}

} // namespace

struct kmw_config {
    kmw::RunConfig cfg;
};

extern "C" {

const char* kmw_last_error(void) { return g_error.c_str(); }

kmw_status kmw_config_parse(const char* text, kmw_config** out) {
    if (!text) return reject_null("text");
    if (!out) return reject_null("out");
    *out = nullptr;
    return guard([&] { *out = new kmw_config{kmw::parse_config(text)}; });
}

void kmw_config_free(kmw_config* cfg) { delete cfg; }

kmw_status kmw_config_emit(const kmw_config* cfg, char** out) {
    if (!cfg) return reject_null("cfg");
    if (!out) return reject_null("out");
    *out = nullptr;
    return guard([&] {
        *out = dup_string(kmw::emit_config(cfg->cfg));
        if (!*out) kmw::fail(kmw::Errc::internal, "out of memory");
    });
}

kmw_status kmw_config_set_output_dir(kmw_config* cfg, const char* dir) {
    if (!cfg) return reject_null("cfg");
    if (!dir) return reject_null("dir");
    cfg->cfg.outputs.dir = dir;
    g_error.clear();
    return KMW_OK;
}

kmw_status kmw_run(const kmw_config* cfg, const char* subcommand, int threads, int* exit_code,
                   char** message) {
    if (!cfg) return reject_null("cfg");
    if (!subcommand) return reject_null("subcommand");
    if (!exit_code) return reject_null("exit_code");
    if (message) *message = nullptr;
    return guard([&] {
        const kmw::RunReport rep = kmw::run_command(subcommand, cfg->cfg, threads);
        *exit_code = rep.exit_code;
        if (message) {
            *message = dup_string(rep.message);
            if (!*message) kmw::fail(kmw::Errc::internal, "out of memory");
        }
    });
}

void kmw_string_free(char* s) { std::free(s); }

} // extern "C"

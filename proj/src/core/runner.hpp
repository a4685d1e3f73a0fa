#pragma once
// Orchestration of the four run modes over a parsed RunConfig: evolve writes
// chart frames and diagnostics, reconstruct adds field profiles at the saved
// frames, quantize scans a radius range for quantized circles, verify
// re-derives the structural identities and reports them as JSON.

#include <string>
#include <vector>

#include "core/config.hpp"

namespace kmw {

struct RunReport {
    int exit_code = 0;
    std::string message;            // one line per notable outcome
    std::vector<std::string> files; // paths written, in emission order
};

// subcommand is one of evolve, reconstruct, quantize, verify. Outputs land in
// cfg.outputs.dir, which must be non-empty. threads caps worker parallelism;
// outputs are byte-identical across thread counts.
RunReport run_command(const std::string& subcommand, const RunConfig& cfg, int threads = 1);

} // namespace kmw

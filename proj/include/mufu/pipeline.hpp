#pragma once

#include <json.hpp>

#include <ostream>
#include <string>
#include <vector>

namespace mufu {

// Declarative run configuration. Paths are resolved relative to the config
// file; all randomness comes from the explicit "seeds" object.
struct RunConfig {
    nlohmann::json raw;
    std::string base_dir;
    std::string outdir;

    std::string resolve(const std::string& path) const;
    std::uint64_t seed(const std::string& name) const; // throws if absent
};

RunConfig load_run_config(const std::string& path);

const std::vector<std::string>& known_stages();

// Runs one stage of the DAG. With dry_run, validates config and upstream
// manifests and reports what would run without writing. With resume, a stage
// whose manifest still matches its inputs and outputs is skipped.
void run_stage(const RunConfig& config, const std::string& stage, bool resume,
               bool dry_run, std::ostream& log);

} // namespace mufu

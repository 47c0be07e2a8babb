#pragma once

#include <json.hpp>

#include <map>
#include <string>

namespace mufu {

inline constexpr const char* kToolVersion = "mufu 0.1.0";

// Written by every pipeline stage; deterministic (no wall-clock fields) so a
// rerun with unchanged inputs produces byte-identical files. Volatile run
// statistics go to a separate stats.json next to it.
struct StageManifest {
    std::string stage;
    std::string tool_version = kToolVersion;
    std::map<std::string, std::string> inputs;  // path -> content digest
    std::map<std::string, std::string> outputs; // path -> content digest
    nlohmann::json params;                      // seeds and stage parameters
};

void write_manifest(const std::string& stage_dir, const StageManifest& manifest);
StageManifest read_manifest(const std::string& stage_dir);

// Loads the upstream manifest and re-digests its recorded outputs. A missing
// manifest or a digest mismatch raises DependencyError naming the stage.
StageManifest require_upstream(const std::string& outdir, const std::string& stage);

void write_stage_stats(const std::string& stage_dir, const nlohmann::json& stats);
nlohmann::json read_stage_stats(const std::string& stage_dir);

} // namespace mufu

#include "mufu/manifest.hpp"

#include "mufu/digest.hpp"
#include "mufu/error.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace mufu {

namespace fs = std::filesystem;

void write_manifest(const std::string& stage_dir, const StageManifest& manifest) {
    fs::create_directories(stage_dir);
    nlohmann::ordered_json j;
    j["stage"] = manifest.stage;
    j["tool_version"] = manifest.tool_version;
    j["inputs"] = manifest.inputs;
    j["outputs"] = manifest.outputs;
    j["params"] = manifest.params;
    std::ofstream out(stage_dir + "/manifest.json", std::ios::binary);
    if (!out) throw IoError("cannot write manifest in " + stage_dir);
    out << j.dump(2) << '\n';
}

StageManifest read_manifest(const std::string& stage_dir) {
    const std::string path = stage_dir + "/manifest.json";
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    StageManifest m;
    m.stage = j.value("stage", "");
    m.tool_version = j.value("tool_version", "");
    m.inputs = j.value("inputs", std::map<std::string, std::string>{});
    m.outputs = j.value("outputs", std::map<std::string, std::string>{});
    m.params = j.value("params", nlohmann::json::object());
    return m;
}

StageManifest require_upstream(const std::string& outdir, const std::string& stage) {
    const std::string stage_dir = outdir + "/" + stage;
    if (!fs::exists(stage_dir + "/manifest.json")) {
        throw DependencyError("missing upstream manifest for stage '" + stage +
                              "'; run it first");
    }
    StageManifest m = read_manifest(stage_dir);
    for (const auto& [path, digest] : m.outputs) {
        if (!fs::exists(path)) {
            throw DependencyError("stale manifest for stage '" + stage + "': output " + path +
                                  " is missing");
        }
        if (digest_file(path) != digest) {
            throw DependencyError("stale manifest for stage '" + stage + "': output " + path +
                                  " changed since the stage ran");
        }
    }
    return m;
}

void write_stage_stats(const std::string& stage_dir, const nlohmann::json& stats) {
    fs::create_directories(stage_dir);
    std::ofstream out(stage_dir + "/stats.json", std::ios::binary);
    if (!out) throw IoError("cannot write stats in " + stage_dir);
    out << stats.dump(2) << '\n';
}

nlohmann::json read_stage_stats(const std::string& stage_dir) {
    std::ifstream in(stage_dir + "/stats.json");
    if (!in) throw IoError("cannot open stats in " + stage_dir);
    std::ostringstream ss;
    ss << in.rdbuf();
    return nlohmann::json::parse(ss.str());
}

} // namespace mufu

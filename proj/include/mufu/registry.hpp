#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace mufu {

enum class ResourceLevel { VeryLow, Low, Medium, High };

const char* to_string(ResourceLevel level); // "VL" "L" "M" "H"
ResourceLevel parse_resource_level(const std::string& s);

struct LanguageSpec {
    std::string code;         // stable identifier, e.g. "ace_Latn"
    std::string display_name; // exactly as written into prompts
    std::string script;
    std::optional<ResourceLevel> resource_level;
    bool in_distance_table = false;
};

// Languages keyed by code; insertion order preserved for deterministic output.
class LanguageRegistry {
public:
    void add(LanguageSpec spec);

    bool contains(const std::string& code) const;
    const LanguageSpec& at(const std::string& code) const; // throws CoverageError
    const LanguageSpec* find(const std::string& code) const;

    const std::vector<std::string>& codes() const { return order_; }
    std::size_t size() const { return order_.size(); }

    // TSV with header: code, display_name, script, resource_level.
    static LanguageRegistry load_tsv(const std::string& path);

private:
    std::unordered_map<std::string, LanguageSpec> by_code_;
    std::vector<std::string> order_;
};

} // namespace mufu

#include "mufu/registry.hpp"

#include "mufu/error.hpp"
#include "mufu/text.hpp"

#include <fstream>
#include <sstream>

namespace mufu {

const char* to_string(ResourceLevel level) {
    switch (level) {
        case ResourceLevel::VeryLow: return "VL";
        case ResourceLevel::Low: return "L";
        case ResourceLevel::Medium: return "M";
        case ResourceLevel::High: return "H";
    }
    return "?";
}

ResourceLevel parse_resource_level(const std::string& s) {
    if (s == "VL") return ResourceLevel::VeryLow;
    if (s == "L") return ResourceLevel::Low;
    if (s == "M") return ResourceLevel::Medium;
    if (s == "H") return ResourceLevel::High;
    throw ParseError("unknown resource level: '" + s + "'");
}

void LanguageRegistry::add(LanguageSpec spec) {
    if (spec.code.empty()) throw ValidationError("language code must be non-empty");
    if (spec.display_name.empty()) {
        throw ValidationError("display name must be non-empty for " + spec.code);
    }
    if (by_code_.count(spec.code)) {
        throw ValidationError("duplicate language code in registry: " + spec.code);
    }
    order_.push_back(spec.code);
    by_code_.emplace(spec.code, std::move(spec));
}

bool LanguageRegistry::contains(const std::string& code) const {
    return by_code_.count(code) != 0;
}

const LanguageSpec& LanguageRegistry::at(const std::string& code) const {
    auto it = by_code_.find(code);
    if (it == by_code_.end()) throw CoverageError("language not in registry: " + code);
    return it->second;
}

const LanguageSpec* LanguageRegistry::find(const std::string& code) const {
    auto it = by_code_.find(code);
    return it == by_code_.end() ? nullptr : &it->second;
}

LanguageRegistry LanguageRegistry::load_tsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open registry: " + path);
    LanguageRegistry reg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (lineno == 1 && line.rfind("code\t", 0) == 0) continue; // header
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string col;
        while (std::getline(ss, col, '\t')) cols.push_back(col);
        if (cols.size() < 3 || cols.size() > 4) {
            throw ParseError(path + ":" + std::to_string(lineno) +
                             ": expected 3-4 tab-separated columns");
        }
        LanguageSpec spec;
        spec.code = text::trim(cols[0]);
        spec.display_name = text::trim(cols[1]);
        spec.script = text::trim(cols[2]);
        if (cols.size() == 4) {
            const std::string lvl = text::trim(cols[3]);
            if (!lvl.empty()) spec.resource_level = parse_resource_level(lvl);
        }
        try {
            reg.add(std::move(spec));
        } catch (const ValidationError& e) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return reg;
}

} // namespace mufu

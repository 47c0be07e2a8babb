#include "mufu/langdist.hpp"

#include "mufu/error.hpp"
#include "mufu/rng.hpp"
#include "mufu/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace mufu {

const std::vector<std::string> kFixedHrlCodes = {
    "nld_Latn", "rus_Cyrl", "fra_Latn", "zho_Hans", "spa_Latn",
};
const std::string kArabicCode = "arb_Arab";

const std::vector<DistanceEntry> DistanceTable::kEmpty{};

double combined_distance(double genetic, double geographic) {
    if (!(genetic >= 0.0 && genetic <= 1.0)) {
        throw ValidationError("genetic distance out of [0,1]: " + std::to_string(genetic));
    }
    if (!(geographic >= 0.0 && geographic <= 1.0)) {
        throw ValidationError("geographic distance out of [0,1]: " + std::to_string(geographic));
    }
    return (genetic + geographic) / 2.0;
}

void DistanceTable::add(const std::string& target, const std::string& candidate,
                        double genetic, double geographic) {
    if (target == candidate) {
        throw ValidationError("distance entry with target == candidate: " + target);
    }
    DistanceEntry e;
    e.target = target;
    e.candidate = candidate;
    e.genetic = genetic;
    e.geographic = geographic;
    e.combined = combined_distance(genetic, geographic);
    by_target_[target].push_back(std::move(e));
}

bool DistanceTable::has_target(const std::string& target) const {
    auto it = by_target_.find(target);
    return it != by_target_.end() && !it->second.empty();
}

const std::vector<DistanceEntry>& DistanceTable::entries_for(const std::string& target) const {
    auto it = by_target_.find(target);
    return it == by_target_.end() ? kEmpty : it->second;
}

DistanceTable DistanceTable::load_tsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open distance table: " + path);
    DistanceTable table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (lineno == 1 && line.rfind("target\t", 0) == 0) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string col;
        while (std::getline(ss, col, '\t')) cols.push_back(col);
        if (cols.size() != 4) {
            throw ParseError(path + ":" + std::to_string(lineno) +
                             ": expected 4 tab-separated columns");
        }
        try {
            table.add(text::trim(cols[0]), text::trim(cols[1]),
                      std::stod(cols[2]), std::stod(cols[3]));
        } catch (const std::exception& e) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return table;
}

const char* to_string(PlanKind kind) {
    switch (kind) {
        case PlanKind::DistanceRanked: return "distance_ranked";
        case PlanKind::RandomFallback: return "random_fallback";
        case PlanKind::FixedHrl: return "fixed_hrl";
        case PlanKind::MergedHrl: return "merged_hrl";
        case PlanKind::Registry: return "registry";
    }
    return "?";
}

namespace {

// Base language identity for script-variant exclusion: the code up to the
// first underscore ("ace" for both ace_Latn and ace_Arab).
std::string base_language(const std::string& code) {
    const auto pos = code.find('_');
    return pos == std::string::npos ? code : code.substr(0, pos);
}

// Candidates of `target` present in the registry, sorted closest first;
// ties break by ascending code.
std::vector<DistanceEntry> ranked_candidates(const std::string& target,
                                             const DistanceTable& distances,
                                             const LanguageRegistry& registry) {
    std::vector<DistanceEntry> ranked;
    for (const auto& e : distances.entries_for(target)) {
        if (e.candidate != target && registry.contains(e.candidate)) {
            ranked.push_back(e);
        }
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.combined != b.combined) return a.combined < b.combined;
        return a.candidate < b.candidate;
    });
    return ranked;
}

std::vector<std::string> fallback_pool(const std::string& target,
                                       const LanguageRegistry& registry) {
    const std::string base = base_language(target);
    std::vector<std::string> pool;
    for (const auto& code : registry.codes()) {
        if (code != target && base_language(code) != base) pool.push_back(code);
    }
    std::sort(pool.begin(), pool.end());
    return pool;
}

} // namespace

LanguageRegistry annotate_distance_coverage(const LanguageRegistry& registry,
                                            const DistanceTable& distances) {
    LanguageRegistry out;
    for (const auto& code : registry.codes()) {
        LanguageSpec spec = registry.at(code);
        spec.in_distance_table = distances.has_target(code);
        out.add(std::move(spec));
    }
    return out;
}

AuxPlan select_auxiliaries(const std::string& target, std::size_t k,
                           const DistanceTable& distances,
                           const LanguageRegistry& registry, std::uint64_t seed) {
    if (k < 1) throw ValidationError("select_auxiliaries: k must be >= 1");
    if (!registry.contains(target)) {
        throw ValidationError("select_auxiliaries: target not in registry: " + target);
    }
    if (k > registry.size() - 1) {
        throw ValidationError("select_auxiliaries: k exceeds registry size - 1");
    }

    AuxPlan plan;
    plan.target = target;
    if (distances.has_target(target)) {
        auto ranked = ranked_candidates(target, distances, registry);
        if (ranked.size() < k) {
            throw InsufficientCandidatesError(
                "only " + std::to_string(ranked.size()) + " distance candidates for " +
                target + ", need " + std::to_string(k));
        }
        ranked.resize(k);
        // farthest first: descending combined, ties by ascending code
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            if (a.combined != b.combined) return a.combined > b.combined;
            return a.candidate < b.candidate;
        });
        for (const auto& e : ranked) plan.auxiliaries.push_back(e.candidate);
        plan.provenance.kind = PlanKind::DistanceRanked;
    } else {
        auto pool = fallback_pool(target, registry);
        if (pool.size() < k) {
            throw InsufficientCandidatesError(
                "only " + std::to_string(pool.size()) + " fallback candidates for " +
                target + ", need " + std::to_string(k));
        }
        DeterministicRng rng(seed);
        plan.auxiliaries = sample_without_replacement(std::move(pool), k, rng);
        plan.provenance.kind = PlanKind::RandomFallback;
        plan.provenance.seed = seed;
        plan.provenance.random_marker = true;
    }
    return plan;
}

AuxPlan truncate_plan(const AuxPlan& plan, std::size_t k) {
    if (k > plan.auxiliaries.size()) {
        throw InsufficientCandidatesError(
            "truncate_plan: need " + std::to_string(k) + " auxiliaries, plan for " +
            plan.target + " has " + std::to_string(plan.auxiliaries.size()));
    }
    AuxPlan out = plan;
    out.auxiliaries.assign(plan.auxiliaries.end() - static_cast<std::ptrdiff_t>(k),
                           plan.auxiliaries.end());
    return out;
}

AuxPlan fixed_hrl_plan(const std::string& target, const LanguageRegistry& registry) {
    if (!registry.contains(target)) {
        throw CoverageError("fixed_hrl_plan: target not in registry: " + target);
    }
    AuxPlan plan;
    plan.target = target;
    plan.provenance.kind = PlanKind::FixedHrl;
    for (const auto& code : kFixedHrlCodes) {
        plan.auxiliaries.push_back(code == target ? kArabicCode : code);
    }
    return plan;
}

AuxPlan merge_hrl_plan(const AuxPlan& base, const std::string& target,
                       const DistanceTable& distances,
                       const LanguageRegistry& registry, std::uint64_t seed) {
    if (base.auxiliaries.size() != 20) {
        throw ValidationError("merge_hrl_plan: base plan must have 20 auxiliaries, got " +
                              std::to_string(base.auxiliaries.size()));
    }
    const AuxPlan hrl = fixed_hrl_plan(target, registry);
    std::set<std::string> used(hrl.auxiliaries.begin(), hrl.auxiliaries.end());

    std::vector<std::string> base_section;
    for (const auto& code : base.auxiliaries) {
        if (used.insert(code).second) base_section.push_back(code);
    }

    constexpr std::size_t kMergedSize = 25;
    std::vector<std::string> refill;
    std::size_t need = kMergedSize - used.size();
    if (need > 0) {
        if (distances.has_target(target)) {
            // next closest unused; collected closest-first, emitted farthest-first
            for (const auto& e : ranked_candidates(target, distances, registry)) {
                if (refill.size() == need) break;
                if (!used.count(e.candidate)) {
                    used.insert(e.candidate);
                    refill.push_back(e.candidate);
                }
            }
            std::reverse(refill.begin(), refill.end());
        } else {
            std::vector<std::string> pool;
            for (const auto& code : fallback_pool(target, registry)) {
                if (!used.count(code)) pool.push_back(code);
            }
            if (pool.size() >= need) {
                DeterministicRng rng(seed);
                refill = sample_without_replacement(std::move(pool), need, rng);
                for (const auto& code : refill) used.insert(code);
            }
        }
        if (refill.size() < need) {
            throw InsufficientCandidatesError(
                "merge_hrl_plan: registry exhausted for " + target + ", short by " +
                std::to_string(need - refill.size()));
        }
    }

    AuxPlan out;
    out.target = target;
    out.provenance.kind = PlanKind::MergedHrl;
    out.provenance.seed = seed;
    out.auxiliaries = hrl.auxiliaries;
    out.auxiliaries.insert(out.auxiliaries.end(), refill.begin(), refill.end());
    out.auxiliaries.insert(out.auxiliaries.end(), base_section.begin(), base_section.end());
    return out;
}

namespace {

std::map<std::string, AuxPlan> read_plans_impl(const std::string& path,
                                               bool require_twenty) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open auxiliary registry: " + path);
    std::map<std::string, AuxPlan> plans;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (lineno == 1 && line.rfind("target\t", 0) == 0) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string col;
        while (std::getline(ss, col, '\t')) cols.push_back(col);
        if (cols.size() != 3) {
            throw ParseError(path + ":" + std::to_string(lineno) +
                             ": expected 3 tab-separated columns");
        }
        AuxPlan plan;
        plan.target = text::trim(cols[0]);
        std::stringstream as(cols[1]);
        std::string aux;
        std::set<std::string> seen;
        while (std::getline(as, aux, '|')) {
            aux = text::trim(aux);
            if (aux == plan.target) {
                throw ParseError(path + ":" + std::to_string(lineno) + ": row '" +
                                 plan.target + "' lists the target as its own auxiliary");
            }
            if (!seen.insert(aux).second) {
                throw ParseError(path + ":" + std::to_string(lineno) + ": row '" +
                                 plan.target + "' has duplicate auxiliary " + aux);
            }
            plan.auxiliaries.push_back(aux);
        }
        if (require_twenty && plan.auxiliaries.size() != 20) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": row '" + plan.target +
                             "' has " + std::to_string(plan.auxiliaries.size()) +
                             " auxiliaries, expected 20");
        }
        const std::string flag = text::trim(cols[2]);
        if (flag != "0" && flag != "1") {
            throw ParseError(path + ":" + std::to_string(lineno) + ": row '" + plan.target +
                             "' has bad random_flag '" + flag + "'");
        }
        plan.provenance.kind = PlanKind::Registry;
        plan.provenance.random_marker = (flag == "1");
        if (plans.count(plan.target)) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": duplicate target '" +
                             plan.target + "'");
        }
        plans.emplace(plan.target, std::move(plan));
    }
    return plans;
}

} // namespace

std::map<std::string, AuxPlan> load_aux_registry(const std::string& path) {
    return read_plans_impl(path, /*require_twenty=*/true);
}

std::map<std::string, AuxPlan> read_aux_plans_tsv(const std::string& path) {
    return read_plans_impl(path, /*require_twenty=*/false);
}

void write_aux_plans_tsv(const std::string& path,
                         const std::map<std::string, AuxPlan>& plans) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write plans: " + path);
    out << "target\tauxiliaries\trandom_flag\n";
    for (const auto& [target, plan] : plans) {
        out << target << '\t';
        for (std::size_t i = 0; i < plan.auxiliaries.size(); ++i) {
            if (i) out << '|';
            out << plan.auxiliaries[i];
        }
        out << '\t' << (plan.provenance.random_marker ? 1 : 0) << '\n';
    }
}

} // namespace mufu

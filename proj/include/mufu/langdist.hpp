#pragma once

#include "mufu/registry.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mufu {

// Equal-weight mean of the two component distances. Inputs must lie in [0,1].
double combined_distance(double genetic, double geographic);

struct DistanceEntry {
    std::string target;
    std::string candidate;
    double genetic = 0.0;
    double geographic = 0.0;
    double combined = 0.0;
};

// Per-pair typological distances, looked up by target language.
class DistanceTable {
public:
    void add(const std::string& target, const std::string& candidate,
             double genetic, double geographic);

    bool has_target(const std::string& target) const;
    const std::vector<DistanceEntry>& entries_for(const std::string& target) const;

    // TSV: target <TAB> candidate <TAB> genetic <TAB> geographic
    static DistanceTable load_tsv(const std::string& path);

private:
    std::map<std::string, std::vector<DistanceEntry>> by_target_;
    static const std::vector<DistanceEntry> kEmpty;
};

enum class PlanKind {
    DistanceRanked,
    RandomFallback,
    FixedHrl,
    MergedHrl,
    Registry,
};

const char* to_string(PlanKind kind);

struct Provenance {
    PlanKind kind = PlanKind::Registry;
    std::uint64_t seed = 0;       // meaningful for RandomFallback / MergedHrl
    bool random_marker = false;   // registry rows flagged as randomly assigned
};

// Ordered auxiliary-language list for one target. Position 0 is the farthest
// language, the last element the closest.
struct AuxPlan {
    std::string target;
    std::vector<std::string> auxiliaries;
    Provenance provenance;
};

// Copy of the registry with in_distance_table set for languages the table
// covers as targets.
LanguageRegistry annotate_distance_coverage(const LanguageRegistry& registry,
                                            const DistanceTable& distances);

// Picks the k closest candidates for `target` and orders them farthest ->
// closest. Targets absent from the distance table fall back to a seeded
// uniform sample of the registry (excluding the target and its script
// variants). Ties in combined distance break by ascending language code.
AuxPlan select_auxiliaries(const std::string& target, std::size_t k,
                           const DistanceTable& distances,
                           const LanguageRegistry& registry, std::uint64_t seed);

// Keeps the k closest auxiliaries (the tail of the list), preserving order.
AuxPlan truncate_plan(const AuxPlan& plan, std::size_t k);

// The fixed five high-resource auxiliaries. When the target is one of the
// five, Arabic takes that slot.
AuxPlan fixed_hrl_plan(const std::string& target, const LanguageRegistry& registry);

extern const std::vector<std::string> kFixedHrlCodes;
extern const std::string kArabicCode;

// Union of a 20-language plan with the fixed five, refilled to exactly 25
// distinct auxiliaries. Layout: the HRL five first, then refill picks, then
// the base plan's remaining members in their farthest -> closest order.
AuxPlan merge_hrl_plan(const AuxPlan& base, const std::string& target,
                       const DistanceTable& distances,
                       const LanguageRegistry& registry, std::uint64_t seed);

// TSV: target <TAB> aux1|aux2|...|aux20 <TAB> random_flag
std::map<std::string, AuxPlan> load_aux_registry(const std::string& path);

// Same format without the 20-auxiliary requirement (pipeline plan files may
// hold plans of any length).
std::map<std::string, AuxPlan> read_aux_plans_tsv(const std::string& path);

void write_aux_plans_tsv(const std::string& path,
                         const std::map<std::string, AuxPlan>& plans);

} // namespace mufu

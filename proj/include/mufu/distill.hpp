#pragma once

#include "mufu/corpus.hpp"
#include "mufu/registry.hpp"

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace mufu {

struct KDRecord {
    std::string source;
    std::string target_language; // code
    std::string teacher_output;  // post-parse single-line translation
    std::string variant;         // variant used to elicit the output
};

struct KDOptions {
    double coverage_floor = 0.95;
    std::size_t min_output_codepoints = 2; // shorter outputs are degenerate
};

struct KDDataset {
    std::vector<KDRecord> records; // clean records only
    std::size_t expected_pairs = 0;
    std::size_t covered_pairs = 0;
    std::size_t flagged_empty = 0; // covered but degenerate, excluded
    double coverage = 0.0;
    std::vector<std::string> missing; // "index:target" keys without output
};

using KDTeacherLookup =
    std::function<std::optional<std::string>(std::size_t sentence_index,
                                             const std::string& target)>;

// One record per covered (sentence, target); gaps are logged and coverage
// below the floor is a hard failure carrying the coverage ratio.
KDDataset make_kd_dataset(const DistillPool& pool,
                          const std::vector<std::string>& targets,
                          const KDTeacherLookup& teacher_outputs,
                          const std::string& elicited_variant,
                          const KDOptions& options = {});

// JSON-lines export pairing each record with a BASELINE prompt, so the
// distilled student runs at baseline inference cost. Schema matches
// write_finetune_jsonl with origin "kd".
void export_kd_jsonl(std::ostream& out, const KDDataset& dataset,
                     const LanguageRegistry& registry);

} // namespace mufu

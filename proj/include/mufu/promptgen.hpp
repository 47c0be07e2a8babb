#pragma once

#include "mufu/registry.hpp"

#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace mufu {

enum class PromptKind { Baseline, Postedit, Mufu, MufuTranslate, TeacherFewshot };
enum class LabelStyle { AutomaticCorrected, CandidateReference };
enum class InstructionStyle { ListLanguages, AsSpecified };

struct PromptVariant {
    PromptKind kind = PromptKind::Baseline;
    std::size_t k = 0;       // auxiliary count for Mufu / MufuTranslate
    std::size_t n_shots = 0; // exemplar count for TeacherFewshot
    LabelStyle label_style = LabelStyle::AutomaticCorrected;
    InstructionStyle instruction_style = InstructionStyle::ListLanguages;
};

// "baseline", "postedit", "mufu5", "mufu5tr", "fewshot5"
std::string variant_name(const PromptVariant& variant);
PromptVariant parse_variant_name(const std::string& name);

struct PromptInstance {
    PromptVariant variant;
    std::string source_text;
    std::string source_language_name = "English";
    LanguageSpec target;
    // auxiliary candidates, farthest -> closest
    std::vector<std::pair<LanguageSpec, std::string>> candidates;
    std::optional<std::string> postedit_candidate;
    // (source, reference) exemplars for the teacher few-shot template
    std::vector<std::pair<std::string, std::string>> fewshot_examples;
};

struct RenderedPrompt {
    std::string text;              // ends exactly with completion_prefix
    std::string completion_prefix; // the label line the model continues after
    std::string digest;            // sha256 of text
};

// Renders the instance to its exact prompt text. Line separator is "\n",
// there is no trailing newline after the completion prefix, and content
// lines put one space after the colon.
RenderedPrompt render(const PromptInstance& instance);

RenderedPrompt render_teacher_fewshot(
    const LanguageSpec& target,
    const std::vector<std::pair<std::string, std::string>>& fewshot,
    const std::string& source_text,
    const std::string& source_language_name = "English");

// Recovers the translation from a raw completion: drops an echoed
// completion prefix, truncates at the first newline, trims whitespace.
// Empty output is legal.
std::string parse_completion(const std::string& raw, const std::string& completion_prefix);

struct FinetuneRecord {
    std::string prompt;
    std::string target; // " " + reference
    std::string pair;   // target language code
    std::string variant;
};

// One supervised record per (instance, reference). Throws on a missing
// (empty) reference.
std::vector<FinetuneRecord> build_finetune_records(
    const std::vector<std::pair<PromptInstance, std::string>>& instances_with_references);

// JSON-lines export; extra "origin" field appended when non-empty.
void write_finetune_jsonl(std::ostream& out, const std::vector<FinetuneRecord>& records,
                          const std::string& origin = "");

} // namespace mufu

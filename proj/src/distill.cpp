#include "mufu/distill.hpp"

#include "mufu/error.hpp"
#include "mufu/promptgen.hpp"
#include "mufu/text.hpp"

#include <cmath>

namespace mufu {

KDDataset make_kd_dataset(const DistillPool& pool,
                          const std::vector<std::string>& targets,
                          const KDTeacherLookup& teacher_outputs,
                          const std::string& elicited_variant,
                          const KDOptions& options) {
    KDDataset out;
    out.expected_pairs = pool.sentences.size() * targets.size();
    for (std::size_t i = 0; i < pool.sentences.size(); ++i) {
        for (const auto& target : targets) {
            auto output = teacher_outputs(i, target);
            if (!output) {
                out.missing.push_back(std::to_string(i) + ":" + target);
                continue;
            }
            ++out.covered_pairs;
            if (text::decode_utf8(*output).size() < options.min_output_codepoints) {
                ++out.flagged_empty;
                continue;
            }
            KDRecord rec;
            rec.source = pool.sentences[i];
            rec.target_language = target;
            rec.teacher_output = std::move(*output);
            rec.variant = elicited_variant;
            out.records.push_back(std::move(rec));
        }
    }
    out.coverage = out.expected_pairs == 0
                       ? 1.0
                       : static_cast<double>(out.covered_pairs) / out.expected_pairs;
    if (out.coverage < options.coverage_floor) {
        throw CoverageError("KD coverage " + std::to_string(out.coverage) +
                            " is below the floor " + std::to_string(options.coverage_floor) +
                            " (" + std::to_string(out.covered_pairs) + "/" +
                            std::to_string(out.expected_pairs) + " pairs)");
    }
    return out;
}

void export_kd_jsonl(std::ostream& out, const KDDataset& dataset,
                     const LanguageRegistry& registry) {
    std::vector<FinetuneRecord> records;
    records.reserve(dataset.records.size());
    for (const auto& rec : dataset.records) {
        PromptInstance instance;
        instance.variant.kind = PromptKind::Baseline;
        instance.source_text = rec.source;
        instance.target = registry.at(rec.target_language);
        FinetuneRecord ft;
        ft.prompt = render(instance).text;
        ft.target = " " + rec.teacher_output;
        ft.pair = rec.target_language;
        ft.variant = variant_name(instance.variant);
        records.push_back(std::move(ft));
    }
    write_finetune_jsonl(out, records, "kd");
}

} // namespace mufu

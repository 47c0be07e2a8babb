#include "mufu/promptgen.hpp"

#include "mufu/digest.hpp"
#include "mufu/error.hpp"
#include "mufu/text.hpp"

#include <json.hpp>

#include <sstream>

namespace mufu {

std::string variant_name(const PromptVariant& variant) {
    switch (variant.kind) {
        case PromptKind::Baseline: return "baseline";
        case PromptKind::Postedit: return "postedit";
        case PromptKind::Mufu: return "mufu" + std::to_string(variant.k);
        case PromptKind::MufuTranslate: return "mufu" + std::to_string(variant.k) + "tr";
        case PromptKind::TeacherFewshot: return "fewshot" + std::to_string(variant.n_shots);
    }
    return "?";
}

PromptVariant parse_variant_name(const std::string& name) {
    PromptVariant v;
    if (name == "baseline") {
        v.kind = PromptKind::Baseline;
    } else if (name == "postedit") {
        v.kind = PromptKind::Postedit;
    } else if (name.rfind("fewshot", 0) == 0) {
        v.kind = PromptKind::TeacherFewshot;
        v.n_shots = std::stoull(name.substr(7));
    } else if (name.rfind("mufu", 0) == 0) {
        std::string rest = name.substr(4);
        if (rest.size() >= 2 && rest.substr(rest.size() - 2) == "tr") {
            v.kind = PromptKind::MufuTranslate;
            rest = rest.substr(0, rest.size() - 2);
        } else {
            v.kind = PromptKind::Mufu;
        }
        v.k = std::stoull(rest);
    } else {
        throw ParseError("unknown prompt variant: '" + name + "'");
    }
    return v;
}

namespace {

// "A", "A and B", "A, B and C", ...
std::string join_language_list(const std::vector<std::string>& names) {
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i > 0) out += (i + 1 == names.size()) ? " and " : ", ";
        out += names[i];
    }
    return out;
}

void check_display_names(const PromptInstance& inst) {
    if (inst.target.display_name.empty()) {
        throw ValidationError("target display name is empty");
    }
    for (const auto& [spec, candidate] : inst.candidates) {
        (void)candidate;
        if (spec.display_name.empty()) {
            throw ValidationError("auxiliary display name is empty");
        }
    }
}

void check_instance(const PromptInstance& inst) {
    check_display_names(inst);
    const auto& v = inst.variant;
    switch (v.kind) {
        case PromptKind::Mufu:
            if (v.k < 1) throw ValidationError("mufu variant requires k >= 1");
            if (inst.candidates.size() != v.k) {
                throw ValidationError("mufu" + std::to_string(v.k) + " instance has " +
                                      std::to_string(inst.candidates.size()) + " candidates");
            }
            if (!inst.postedit_candidate) {
                throw ValidationError("mufu instance is missing its postediting candidate");
            }
            break;
        case PromptKind::Postedit:
            if (!inst.candidates.empty()) {
                throw ValidationError("postedit instance must not carry auxiliary candidates");
            }
            if (!inst.postedit_candidate) {
                throw ValidationError("postedit instance is missing its postediting candidate");
            }
            break;
        case PromptKind::MufuTranslate:
            if (v.k < 1) throw ValidationError("mufu-translate variant requires k >= 1");
            if (inst.candidates.size() != v.k) {
                throw ValidationError("mufu" + std::to_string(v.k) + "tr instance has " +
                                      std::to_string(inst.candidates.size()) + " candidates");
            }
            if (inst.postedit_candidate) {
                throw ValidationError("mufu-translate instance must not carry a postediting candidate");
            }
            break;
        case PromptKind::Baseline:
            if (!inst.candidates.empty() || inst.postedit_candidate) {
                throw ValidationError("baseline instance must not carry candidates");
            }
            break;
        case PromptKind::TeacherFewshot:
            if (!inst.candidates.empty() || inst.postedit_candidate) {
                throw ValidationError("teacher few-shot instance must not carry candidates");
            }
            if (inst.fewshot_examples.empty()) {
                throw ValidationError("teacher few-shot instance needs at least one exemplar");
            }
            if (inst.variant.n_shots != 0 &&
                inst.variant.n_shots != inst.fewshot_examples.size()) {
                throw ValidationError("teacher few-shot instance exemplar count mismatch");
            }
            break;
    }
}

RenderedPrompt finish(std::string text, std::string prefix) {
    RenderedPrompt out;
    out.digest = sha256_hex(text);
    out.text = std::move(text);
    out.completion_prefix = std::move(prefix);
    return out;
}

} // namespace

RenderedPrompt render(const PromptInstance& inst) {
    check_instance(inst);
    const auto& v = inst.variant;
    const std::string& src = inst.source_language_name;
    const std::string& tgt = inst.target.display_name;

    if (v.kind == PromptKind::TeacherFewshot) {
        return render_teacher_fewshot(inst.target, inst.fewshot_examples,
                                      inst.source_text, src);
    }

    if (v.kind == PromptKind::Baseline) {
        std::string prefix = tgt + ":";
        std::string text = "Translate from " + src + " to " + tgt + ".\n" +
                           src + ": " + inst.source_text + "\n" + prefix;
        return finish(std::move(text), std::move(prefix));
    }

    const bool corrected = v.kind != PromptKind::MufuTranslate;
    const char* auto_label =
        v.label_style == LabelStyle::AutomaticCorrected ? "Automatic" : "Candidate";
    const char* corrected_label =
        v.label_style == LabelStyle::AutomaticCorrected ? "Corrected" : "Reference";

    std::string language_list;
    if (v.instruction_style == InstructionStyle::AsSpecified) {
        language_list = "several languages as specified";
    } else {
        std::vector<std::string> names;
        for (const auto& [spec, candidate] : inst.candidates) {
            (void)candidate;
            names.push_back(spec.display_name);
        }
        names.push_back(tgt);
        language_list = join_language_list(names);
    }
    std::string instruction = "The " + src + " sentence has been translated into " +
                              language_list + ". These translations may contain errors. ";
    instruction += corrected
                       ? "Correct the translation from " + src + " to " + tgt + "."
                       : "Translate from " + src + " to " + tgt + ".";

    std::string text = instruction + "\n" + src + ": " + inst.source_text;
    for (const auto& [spec, candidate] : inst.candidates) {
        text += "\n" + std::string(auto_label) + " " + spec.display_name + ": " + candidate;
    }
    if (v.kind != PromptKind::MufuTranslate) {
        text += "\n" + std::string(auto_label) + " " + tgt + ": " + *inst.postedit_candidate;
    }
    std::string prefix = corrected ? std::string(corrected_label) + " " + tgt + ":"
                                   : tgt + ":";
    text += "\n" + prefix;
    return finish(std::move(text), std::move(prefix));
}

RenderedPrompt render_teacher_fewshot(
    const LanguageSpec& target,
    const std::vector<std::pair<std::string, std::string>>& fewshot,
    const std::string& source_text, const std::string& source_language_name) {
    if (fewshot.empty()) {
        throw ValidationError("teacher few-shot prompt needs at least one exemplar");
    }
    if (target.display_name.empty()) {
        throw ValidationError("target display name is empty");
    }
    const std::string& src = source_language_name;
    const std::string& tgt = target.display_name;

    std::string text = "Translate from " + src + " to " + tgt + ".";
    for (const auto& [example_source, reference] : fewshot) {
        text += "\n\n" + src + ": " + example_source + "\n" + tgt + ": " + reference;
    }
    std::string prefix = tgt + ":";
    text += "\n\n" + src + ": " + source_text + "\n" + prefix;
    return finish(std::move(text), std::move(prefix));
}

std::string parse_completion(const std::string& raw, const std::string& completion_prefix) {
    std::string s = raw;
    if (!completion_prefix.empty() && s.rfind(completion_prefix, 0) == 0) {
        s = s.substr(completion_prefix.size());
    }
    const auto nl = s.find('\n');
    if (nl != std::string::npos) s = s.substr(0, nl);
    return text::trim(s);
}

std::vector<FinetuneRecord> build_finetune_records(
    const std::vector<std::pair<PromptInstance, std::string>>& instances_with_references) {
    std::vector<FinetuneRecord> records;
    records.reserve(instances_with_references.size());
    for (const auto& [instance, reference] : instances_with_references) {
        if (reference.empty()) {
            throw ValidationError("finetune record for " + instance.target.code +
                                  " is missing its reference");
        }
        FinetuneRecord rec;
        rec.prompt = render(instance).text;
        rec.target = " " + reference;
        rec.pair = instance.target.code;
        rec.variant = variant_name(instance.variant);
        records.push_back(std::move(rec));
    }
    return records;
}

void write_finetune_jsonl(std::ostream& out, const std::vector<FinetuneRecord>& records,
                          const std::string& origin) {
    for (const auto& rec : records) {
        nlohmann::ordered_json j;
        j["prompt"] = rec.prompt;
        j["target"] = rec.target;
        j["pair"] = rec.pair;
        j["variant"] = rec.variant;
        if (!origin.empty()) j["origin"] = origin;
        out << j.dump() << '\n';
    }
}

} // namespace mufu

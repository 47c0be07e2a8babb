#include "mufu/pipeline.hpp"

#include "mufu/attnviz.hpp"
#include "mufu/corpus.hpp"
#include "mufu/digest.hpp"
#include "mufu/distill.hpp"
#include "mufu/error.hpp"
#include "mufu/langdist.hpp"
#include "mufu/llmclient.hpp"
#include "mufu/manifest.hpp"
#include "mufu/metrics.hpp"
#include "mufu/promptgen.hpp"
#include "mufu/registry.hpp"
#include "mufu/rng.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace mufu {

namespace fs = std::filesystem;

std::string RunConfig::resolve(const std::string& path) const {
    if (path.empty() || fs::path(path).is_absolute()) return path;
    return (fs::path(base_dir) / path).lexically_normal().string();
}

std::uint64_t RunConfig::seed(const std::string& name) const {
    if (!raw.contains("seeds") || !raw["seeds"].contains(name)) {
        throw ValidationError("config is missing seeds." + name +
                              " (all randomness must be explicitly seeded)");
    }
    return raw["seeds"][name].get<std::uint64_t>();
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    RunConfig config;
    try {
        config.raw = nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    // anchor at the config file so stage manifests stay valid across cwds
    config.base_dir = fs::absolute(fs::path(path)).parent_path().lexically_normal().string();
    if (!config.raw.contains("outdir")) throw ValidationError("config needs an outdir");
    config.outdir = config.resolve(config.raw["outdir"].get<std::string>());

    // referenced input paths must exist at validation time
    for (const char* key : {"registry", "aux_registry", "distance_table", "corpus_dir"}) {
        if (config.raw.contains(key)) {
            const std::string p = config.resolve(config.raw[key].get<std::string>());
            if (!fs::exists(p)) {
                throw ValidationError(std::string("config.") + key + " does not exist: " + p);
            }
        }
    }
    return config;
}

const std::vector<std::string>& known_stages() {
    static const std::vector<std::string> stages = {
        "plan",         "split",    "teacher-run", "build-prompts", "student-run",
        "export-finetune", "evaluate", "report",      "kd-export",     "attn-report",
    };
    return stages;
}

namespace {

std::string stage_dir(const RunConfig& config, const std::string& stage) {
    return config.outdir + "/" + stage;
}

const std::map<std::string, std::vector<std::string>>& stage_dependencies() {
    static const std::map<std::string, std::vector<std::string>> deps = {
        {"plan", {}},
        {"split", {}},
        {"teacher-run", {"plan", "split"}},
        {"build-prompts", {"plan", "split", "teacher-run"}},
        {"student-run", {"build-prompts"}},
        {"export-finetune", {"plan", "split", "teacher-run"}},
        {"evaluate", {"split", "student-run"}},
        {"report", {}}, // needs evaluate only when no score files are configured
        {"kd-export", {}},
        {"attn-report", {}},
    };
    return deps;
}

void require_stage_deps(const RunConfig& config, const std::string& stage) {
    for (const auto& dep : stage_dependencies().at(stage)) {
        require_upstream(config.outdir, dep);
    }
    if (stage == "report") {
        const auto report_cfg = config.raw.value("report", nlohmann::json::object());
        if (!report_cfg.contains("scores") || report_cfg["scores"].empty()) {
            require_upstream(config.outdir, "evaluate");
        }
    }
}

LanguageRegistry load_registry(const RunConfig& config) {
    if (!config.raw.contains("registry")) throw ValidationError("config needs a registry");
    return LanguageRegistry::load_tsv(config.resolve(config.raw["registry"].get<std::string>()));
}

std::vector<std::string> target_codes(const RunConfig& config) {
    if (!config.raw.contains("targets")) throw ValidationError("config needs targets");
    return config.raw["targets"].get<std::vector<std::string>>();
}

std::string source_code(const RunConfig& config) {
    return config.raw.value("source_language", std::string("eng_Latn"));
}

PromptVariant config_variant(const RunConfig& config) {
    if (!config.raw.contains("variant")) return PromptVariant{};
    const auto& v = config.raw["variant"];
    if (v.is_string()) return parse_variant_name(v.get<std::string>());
    PromptVariant out;
    const std::string kind = v.value("kind", "baseline");
    if (kind == "baseline") out.kind = PromptKind::Baseline;
    else if (kind == "postedit") out.kind = PromptKind::Postedit;
    else if (kind == "mufu") out.kind = PromptKind::Mufu;
    else if (kind == "mufu_translate") out.kind = PromptKind::MufuTranslate;
    else throw ValidationError("unknown variant kind: " + kind);
    out.k = v.value("k", std::size_t{0});
    if (v.value("label_style", "automatic_corrected") == std::string("candidate_reference")) {
        out.label_style = LabelStyle::CandidateReference;
    }
    if (v.value("instruction_style", "list_languages") == std::string("as_specified")) {
        out.instruction_style = InstructionStyle::AsSpecified;
    }
    return out;
}

EndpointConfig config_endpoint(const RunConfig& config, const std::string& role) {
    if (!config.raw.contains("endpoints") || !config.raw["endpoints"].contains(role)) {
        throw ValidationError("config needs endpoints." + role);
    }
    const auto& e = config.raw["endpoints"][role];
    EndpointConfig out;
    out.name = e.value("name", role);
    out.url = e.at("url").get<std::string>();
    out.auth_token_env = e.value("auth_token_env", "");
    out.max_concurrency = e.value("max_concurrency", std::size_t{4});
    out.timeout = std::chrono::milliseconds(e.value("timeout_ms", 30000));
    if (e.contains("retry")) {
        out.retry.max_attempts = e["retry"].value("max_attempts", std::size_t{3});
        out.retry.backoff_base =
            std::chrono::milliseconds(e["retry"].value("backoff_ms", 200));
    }
    return out;
}

DecodeParams config_decode(const RunConfig& config) {
    DecodeParams params;
    if (config.raw.contains("decode")) {
        const auto& d = config.raw["decode"];
        params.temperature = d.value("temperature", 0.0);
        params.max_new_tokens = d.value("max_new_tokens", std::size_t{256});
        if (d.contains("stop")) params.stop_sequences = d["stop"].get<std::vector<std::string>>();
    }
    return params;
}

std::shared_ptr<Transport> make_transport(const RunConfig& config, const EndpointConfig& e) {
    constexpr const char* kMockScheme = "mock://";
    if (e.url.rfind(kMockScheme, 0) == 0) {
        return std::make_shared<MockTableTransport>(
            config.resolve(e.url.substr(std::string(kMockScheme).size())));
    }
    return make_http_transport();
}

std::shared_ptr<GenerationCache> open_cache(const RunConfig& config) {
    const std::string path =
        config.raw.contains("cache")
            ? config.resolve(config.raw["cache"].get<std::string>())
            : config.outdir + "/cache.jsonl";
    fs::create_directories(fs::path(path).parent_path());
    return std::make_shared<GenerationCache>(path);
}

// Plans truncated to the auxiliary count the variant actually uses.
std::map<std::string, AuxPlan> plans_for_variant(std::map<std::string, AuxPlan> plans,
                                                 const PromptVariant& variant) {
    const std::size_t k =
        (variant.kind == PromptKind::Mufu || variant.kind == PromptKind::MufuTranslate)
            ? variant.k
            : 0;
    for (auto& [target, plan] : plans) plan = truncate_plan(plan, k);
    return plans;
}

bool inputs_unchanged(const StageManifest& manifest) {
    for (const auto& [path, digest] : manifest.inputs) {
        if (!fs::exists(path) || digest_file(path) != digest) return false;
    }
    for (const auto& [path, digest] : manifest.outputs) {
        if (!fs::exists(path) || digest_file(path) != digest) return false;
    }
    return true;
}

struct StageIo {
    std::map<std::string, std::string> inputs;
    std::map<std::string, std::string> outputs;

    void input(const std::string& path) { inputs[path] = digest_file(path); }
    void output(const std::string& path) { outputs[path] = digest_file(path); }
};

void finish_stage(const RunConfig& config, const std::string& stage, StageIo io,
                  nlohmann::json params) {
    StageManifest manifest;
    manifest.stage = stage;
    manifest.inputs = std::move(io.inputs);
    manifest.outputs = std::move(io.outputs);
    manifest.params = std::move(params);
    write_manifest(stage_dir(config, stage), manifest);
}

// ---- stages ----

void stage_plan(const RunConfig& config, std::ostream& log) {
    const std::string dir = stage_dir(config, "plan");
    fs::create_directories(dir);
    StageIo io;
    const LanguageRegistry registry = load_registry(config);
    io.input(config.resolve(config.raw["registry"].get<std::string>()));
    const auto targets = target_codes(config);
    const auto plan_cfg = config.raw.value("plan", nlohmann::json::object());
    const std::size_t plan_k = plan_cfg.value("k", std::size_t{20});

    std::map<std::string, AuxPlan> plans;
    nlohmann::json params;
    params["k"] = plan_k;
    if (plan_cfg.value("fixed_hrl", false)) {
        for (const auto& target : targets) plans[target] = fixed_hrl_plan(target, registry);
        params["mode"] = "fixed_hrl";
    } else if (config.raw.contains("aux_registry")) {
        const std::string path = config.resolve(config.raw["aux_registry"].get<std::string>());
        io.input(path);
        auto registry_plans = load_aux_registry(path);
        for (const auto& target : targets) {
            auto it = registry_plans.find(target);
            if (it == registry_plans.end()) {
                throw CoverageError("auxiliary registry has no row for target " + target);
            }
            plans[target] = it->second;
        }
        params["mode"] = "registry";
    } else if (config.raw.contains("distance_table")) {
        const std::string path = config.resolve(config.raw["distance_table"].get<std::string>());
        io.input(path);
        const DistanceTable table = DistanceTable::load_tsv(path);
        const LanguageRegistry annotated = annotate_distance_coverage(registry, table);
        const std::uint64_t fallback_seed = config.seed("plan_fallback");
        std::size_t fallbacks = 0;
        for (const auto& target : targets) {
            plans[target] =
                select_auxiliaries(target, plan_k, table, annotated, fallback_seed);
            if (!annotated.at(target).in_distance_table) ++fallbacks;
        }
        params["mode"] = "distances";
        params["seed"] = fallback_seed;
        params["random_fallback_targets"] = fallbacks;
    } else {
        throw ValidationError("plan stage needs aux_registry, distance_table or fixed_hrl");
    }

    if (plan_cfg.value("merge_hrl", false)) {
        DistanceTable table;
        if (config.raw.contains("distance_table")) {
            table = DistanceTable::load_tsv(
                config.resolve(config.raw["distance_table"].get<std::string>()));
        }
        const std::uint64_t merge_seed = config.seed("plan_fallback");
        for (auto& [target, plan] : plans) {
            plan = merge_hrl_plan(plan, target, table, registry, merge_seed);
        }
        params["merge_hrl"] = true;
    }

    const std::string out_path = dir + "/plans.tsv";
    write_aux_plans_tsv(out_path, plans);
    io.output(out_path);
    finish_stage(config, "plan", std::move(io), std::move(params));
    log << "plan: wrote " << plans.size() << " plans\n";
}

void stage_split(const RunConfig& config, std::ostream& log) {
    const std::string dir = stage_dir(config, "split");
    fs::create_directories(dir);
    StageIo io;
    const std::string source_path =
        config.resolve(config.raw["corpus_dir"].get<std::string>()) + "/" +
        source_code(config) + ".txt";
    io.input(source_path);
    const std::size_t n = read_lines(source_path).size();

    SplitSizes sizes;
    if (config.raw.contains("split_sizes")) {
        const auto v = config.raw["split_sizes"].get<std::vector<std::size_t>>();
        if (v.size() != 4) throw ValidationError("split_sizes must have 4 entries");
        sizes = {v[0], v[1], v[2], v[3]};
    }
    const std::uint64_t split_seed = config.seed("split");
    const SplitAssignment assignment = split_dev(n, sizes, split_seed);
    const std::string split_path = dir + "/split.tsv";
    write_split_tsv(split_path, assignment);
    io.output(split_path);

    const std::size_t n_shots = config.raw.value("n_shots", std::size_t{5});
    const std::uint64_t fewshot_seed = config.seed("fewshot");
    const auto fewshot = sample_fewshot(assignment, n_shots, fewshot_seed);
    const std::string fewshot_path = dir + "/fewshot.tsv";
    {
        std::ofstream out(fewshot_path, std::ios::binary);
        out << "index\n";
        for (std::size_t i : fewshot) out << i << '\n';
    }
    io.output(fewshot_path);

    nlohmann::json params;
    params["n"] = n;
    params["sizes"] = {sizes.train, sizes.validation, sizes.prompt_selection,
                       sizes.fewshot_reserve};
    params["seed"] = split_seed;
    params["fewshot_seed"] = fewshot_seed;
    params["n_shots"] = n_shots;
    params["rng"] = DeterministicRng::kAlgorithm;
    finish_stage(config, "split", std::move(io), std::move(params));
    log << "split: " << n << " sentences -> " << sizes.train << "/" << sizes.validation << "/"
        << sizes.prompt_selection << "/" << sizes.fewshot_reserve << "\n";
}

std::vector<std::size_t> read_fewshot(const std::string& path) {
    std::vector<std::size_t> out;
    bool first = true;
    for (const auto& line : read_lines(path)) {
        if (line.empty()) continue;
        if (first && line == "index") {
            first = false;
            continue;
        }
        first = false;
        out.push_back(std::stoull(line));
    }
    return out;
}

ParallelCorpus load_pipeline_corpus(const RunConfig& config,
                                    const std::map<std::string, AuxPlan>& plans) {
    std::set<std::string> langs;
    langs.insert(source_code(config));
    for (const auto& target : target_codes(config)) langs.insert(target);
    for (const auto& [target, plan] : plans) {
        for (const auto& aux : plan.auxiliaries) langs.insert(aux);
    }
    return load_corpus(config.resolve(config.raw["corpus_dir"].get<std::string>()),
                       {langs.begin(), langs.end()});
}

void stage_teacher_run(const RunConfig& config, std::ostream& log) {
    const std::string dir = stage_dir(config, "teacher-run");
    fs::create_directories(dir);
    StageIo io;
    const std::string plans_path = stage_dir(config, "plan") + "/plans.tsv";
    const std::string split_path = stage_dir(config, "split") + "/split.tsv";
    const std::string fewshot_path = stage_dir(config, "split") + "/fewshot.tsv";
    io.input(plans_path);
    io.input(split_path);
    io.input(fewshot_path);

    const LanguageRegistry registry = load_registry(config);
    const auto plans = plans_for_variant(read_aux_plans_tsv(plans_path), config_variant(config));
    const auto splits = read_split_tsv(split_path);
    const auto fewshot = read_fewshot(fewshot_path);
    const ParallelCorpus corpus = load_pipeline_corpus(config, plans);

    const EndpointConfig endpoint = config_endpoint(config, "teacher");
    LlmClient client(endpoint, make_transport(config, endpoint), open_cache(config));
    const DecodeParams decode = config_decode(config);

    const auto result = teacher_pass(corpus, splits, plans, fewshot, registry,
                                     source_code(config), client, decode);

    const std::string out_path = dir + "/candidates.jsonl";
    write_candidate_store_jsonl(out_path, result.store);
    io.output(out_path);

    nlohmann::json params;
    params["variant"] = variant_name(config_variant(config));
    params["decode"] = {{"temperature", decode.temperature},
                        {"max_new_tokens", decode.max_new_tokens}};
    finish_stage(config, "teacher-run", std::move(io), std::move(params));

    nlohmann::json stats;
    stats["attempted"] = result.attempted;
    stats["succeeded"] = result.succeeded;
    stats["completion_ratio"] = result.completion_ratio;
    stats["failures"] = result.failures;
    stats["transport_calls"] = client.transport_calls();
    stats["cache_hits"] = client.cache_hits();
    write_stage_stats(dir, stats);
    log << "teacher-run: " << result.succeeded << "/" << result.attempted
        << " candidates (completion " << result.completion_ratio << ")\n";
}

void stage_build_prompts(const RunConfig& config, std::ostream& log) {
    const std::string dir = stage_dir(config, "build-prompts");
    fs::create_directories(dir);
    StageIo io;
    const std::string plans_path = stage_dir(config, "plan") + "/plans.tsv";
    const std::string split_path = stage_dir(config, "split") + "/split.tsv";
    const std::string cands_path = stage_dir(config, "teacher-run") + "/candidates.jsonl";
    io.input(plans_path);
    io.input(split_path);
    io.input(cands_path);

    const LanguageRegistry registry = load_registry(config);
    const PromptVariant variant = config_variant(config);
    const auto plans = plans_for_variant(read_aux_plans_tsv(plans_path), variant);
    const auto splits = read_split_tsv(split_path);
    const auto store = read_candidate_store_jsonl(cands_path);
    const ParallelCorpus corpus = load_pipeline_corpus(config, plans);
    const auto& sources = corpus.sentences(source_code(config));
    const Split eval_split = parse_split(config.raw.value("eval_split", "validation"));

    const std::string out_path = dir + "/prompts.jsonl";
    std::ofstream out(out_path, std::ios::binary);
    std::size_t written = 0, skipped = 0;
    for (std::size_t i : splits.indices_for(eval_split)) {
        for (const auto& target : target_codes(config)) {
            PromptInstance instance;
            instance.variant = variant;
            instance.source_text = sources.at(i);
            instance.target = registry.at(target);
            bool complete = true;
            if (variant.kind == PromptKind::Mufu || variant.kind == PromptKind::MufuTranslate) {
                for (const auto& aux : plans.at(target).auxiliaries) {
                    auto it = store.find({i, aux});
                    if (it == store.end()) {
                        complete = false;
                        break;
                    }
                    instance.candidates.emplace_back(registry.at(aux), it->second);
                }
            }
            if (variant.kind == PromptKind::Mufu || variant.kind == PromptKind::Postedit) {
                auto it = store.find({i, target});
                if (it == store.end()) complete = false;
                else instance.postedit_candidate = it->second;
            }
            if (!complete) {
                ++skipped;
                continue;
            }
            const RenderedPrompt rendered = render(instance);
            nlohmann::ordered_json j;
            j["index"] = i;
            j["pair"] = target;
            j["variant"] = variant_name(variant);
            j["text"] = rendered.text;
            j["completion_prefix"] = rendered.completion_prefix;
            j["digest"] = rendered.digest;
            out << j.dump() << '\n';
            ++written;
        }
    }
    out.close();
    io.output(out_path);

    nlohmann::json params;
    params["variant"] = variant_name(variant);
    params["eval_split"] = to_string(eval_split);
    params["skipped_incomplete"] = skipped;
    finish_stage(config, "build-prompts", std::move(io), std::move(params));
    log << "build-prompts: " << written << " prompts";
    if (skipped) log << " (" << skipped << " skipped, missing candidates)";
    log << "\n";
}

void stage_student_run(const RunConfig& config, std::ostream& log) {
    const std::string dir = stage_dir(config, "student-run");
    fs::create_directories(dir);
    StageIo io;
    const std::string prompts_path = stage_dir(config, "build-prompts") + "/prompts.jsonl";
    io.input(prompts_path);

    std::vector<RenderedPrompt> prompts;
    std::vector<std::pair<std::size_t, std::string>> meta; // sentence index, pair
    for (const auto& line : read_lines(prompts_path)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        RenderedPrompt p;
        p.text = j.at("text").get<std::string>();
        p.completion_prefix = j.at("completion_prefix").get<std::string>();
        p.digest = j.at("digest").get<std::string>();
        prompts.push_back(std::move(p));
        meta.emplace_back(j.at("index").get<std::size_t>(), j.at("pair").get<std::string>());
    }

    const EndpointConfig endpoint = config_endpoint(config, "student");
    LlmClient client(endpoint, make_transport(config, endpoint), open_cache(config));
    const DecodeParams decode = config_decode(config);
    const auto generations = client.generate_many(prompts, decode);

    const std::string out_path = dir + "/results.jsonl";
    std::ofstream out(out_path, std::ios::binary);
    std::size_t failures = 0;
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        nlohmann::ordered_json j;
        j["index"] = meta[i].first;
        j["pair"] = meta[i].second;
        if (generations[i].record) {
            j["translation"] =
                parse_completion(generations[i].record->output, prompts[i].completion_prefix);
            j["error"] = "";
        } else {
            j["translation"] = "";
            j["error"] = generations[i].error;
            ++failures;
        }
        out << j.dump() << '\n';
    }
    out.close();
    io.output(out_path);

    nlohmann::json params;
    params["decode"] = {{"temperature", decode.temperature},
                        {"max_new_tokens", decode.max_new_tokens}};
    finish_stage(config, "student-run", std::move(io), std::move(params));

    nlohmann::json stats;
    stats["prompts"] = prompts.size();
    stats["failures"] = failures;
    stats["transport_calls"] = client.transport_calls();
    stats["cache_hits"] = client.cache_hits();
    write_stage_stats(dir, stats);
    log << "student-run: " << prompts.size() - failures << "/" << prompts.size()
        << " translations\n";
}

void stage_export_finetune(const RunConfig& config, std::ostream& log) {
    const std::string dir = stage_dir(config, "export-finetune");
    fs::create_directories(dir);
    StageIo io;
    const std::string plans_path = stage_dir(config, "plan") + "/plans.tsv";
    const std::string split_path = stage_dir(config, "split") + "/split.tsv";
    const std::string cands_path = stage_dir(config, "teacher-run") + "/candidates.jsonl";
    io.input(plans_path);
    io.input(split_path);
    io.input(cands_path);

    const LanguageRegistry registry = load_registry(config);
    const PromptVariant variant = config_variant(config);
    const auto plans = plans_for_variant(read_aux_plans_tsv(plans_path), variant);
    const auto splits = read_split_tsv(split_path);
    const auto store = read_candidate_store_jsonl(cands_path);
    const ParallelCorpus corpus = load_pipeline_corpus(config, plans);
    const auto& sources = corpus.sentences(source_code(config));

    std::vector<std::pair<PromptInstance, std::string>> with_refs;
    std::size_t skipped = 0;
    for (std::size_t i : splits.indices_for(Split::Train)) {
        for (const auto& target : target_codes(config)) {
            PromptInstance instance;
            instance.variant = variant;
            instance.source_text = sources.at(i);
            instance.target = registry.at(target);
            bool complete = true;
            if (variant.kind == PromptKind::Mufu || variant.kind == PromptKind::MufuTranslate) {
                for (const auto& aux : plans.at(target).auxiliaries) {
                    auto it = store.find({i, aux});
                    if (it == store.end()) {
                        complete = false;
                        break;
                    }
                    instance.candidates.emplace_back(registry.at(aux), it->second);
                }
            }
            if (variant.kind == PromptKind::Mufu || variant.kind == PromptKind::Postedit) {
                auto it = store.find({i, target});
                if (it == store.end()) complete = false;
                else instance.postedit_candidate = it->second;
            }
            if (!complete) {
                ++skipped;
                continue;
            }
            with_refs.emplace_back(std::move(instance), corpus.sentences(target).at(i));
        }
    }
    const auto records = build_finetune_records(with_refs);
    const std::string out_path = dir + "/finetune.jsonl";
    {
        std::ofstream out(out_path, std::ios::binary);
        write_finetune_jsonl(out, records);
    }
    io.output(out_path);

    nlohmann::json params;
    params["variant"] = variant_name(variant);
    params["records"] = records.size();
    params["skipped_incomplete"] = skipped;
    finish_stage(config, "export-finetune", std::move(io), std::move(params));
    log << "export-finetune: " << records.size() << " records\n";
}

void stage_evaluate(const RunConfig& config, std::ostream& log) {
    const std::string dir = stage_dir(config, "evaluate");
    fs::create_directories(dir);
    StageIo io;
    const std::string results_path = stage_dir(config, "student-run") + "/results.jsonl";
    io.input(results_path);

    const ParallelCorpus corpus =
        load_corpus(config.resolve(config.raw["corpus_dir"].get<std::string>()),
                    [&] {
                        auto codes = target_codes(config);
                        codes.push_back(source_code(config));
                        return codes;
                    }());

    std::map<std::string, std::vector<std::pair<std::string, std::string>>> by_pair;
    for (const auto& line : read_lines(results_path)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        const std::string pair = j.at("pair").get<std::string>();
        const std::size_t index = j.at("index").get<std::size_t>();
        by_pair[pair].emplace_back(j.at("translation").get<std::string>(),
                                   corpus.sentences(pair).at(index));
    }

    const bool with_bleu =
        config.raw.contains("metrics") && config.raw["metrics"].value("bleu", false);
    ChrfParams chrf_params;
    if (config.raw.contains("metrics") && config.raw["metrics"].contains("chrf")) {
        const auto& c = config.raw["metrics"]["chrf"];
        chrf_params.max_ngram = c.value("max_ngram", std::size_t{6});
        chrf_params.beta = c.value("beta", 2.0);
        chrf_params.whitespace_in_ngrams = c.value("whitespace_in_ngrams", false);
    }

    const std::string system = config.raw.value("system_name", std::string("student"));
    std::vector<PairResult> rows;
    for (const auto& [pair, pairs] : by_pair) {
        PairResult r;
        r.pair = pair;
        r.system = system;
        r.chrf = chrf_corpus(pairs, chrf_params);
        if (with_bleu) r.bleu = bleu_corpus(pairs);
        r.n_sentences = pairs.size();
        rows.push_back(std::move(r));
    }
    const std::string out_path = dir + "/scores.csv";
    write_score_csv(out_path, rows);
    io.output(out_path);

    nlohmann::json params;
    params["system"] = system;
    params["chrf"] = {{"max_ngram", chrf_params.max_ngram},
                      {"beta", chrf_params.beta},
                      {"whitespace_in_ngrams", chrf_params.whitespace_in_ngrams}};
    params["bleu"] = with_bleu;
    finish_stage(config, "evaluate", std::move(io), std::move(params));
    log << "evaluate: " << rows.size() << " pairs\n";
}

void stage_report(const RunConfig& config, std::ostream& log) {
    const std::string dir = stage_dir(config, "report");
    fs::create_directories(dir);
    StageIo io;

    std::vector<std::string> score_paths;
    const auto report_cfg = config.raw.value("report", nlohmann::json::object());
    if (report_cfg.contains("scores") && !report_cfg["scores"].empty()) {
        for (const auto& p : report_cfg["scores"]) {
            score_paths.push_back(config.resolve(p.get<std::string>()));
        }
    } else {
        score_paths.push_back(stage_dir(config, "evaluate") + "/scores.csv");
    }

    std::map<std::string, std::map<std::string, double>> by_system; // system -> pair -> chrf
    std::vector<std::string> system_order;
    for (const auto& path : score_paths) {
        io.input(path);
        for (const auto& row : read_score_csv(path)) {
            if (!by_system.count(row.system)) system_order.push_back(row.system);
            by_system[row.system][row.pair] = row.chrf;
        }
    }

    const LanguageRegistry registry = load_registry(config);
    std::vector<std::string> benchmarks;
    if (report_cfg.contains("benchmarks")) {
        benchmarks = report_cfg["benchmarks"].get<std::vector<std::string>>();
        for (const auto& b : benchmarks) {
            if (!by_system.count(b)) throw CoverageError("benchmark system not in scores: " + b);
        }
    }

    auto lowvl_subset = [&](const std::vector<std::string>& pairs) {
        std::vector<std::string> out;
        for (const auto& p : pairs) {
            const auto* spec = registry.find(p);
            if (spec && spec->resource_level &&
                (*spec->resource_level == ResourceLevel::VeryLow ||
                 *spec->resource_level == ResourceLevel::Low)) {
                out.push_back(p);
            }
        }
        return out;
    };
    auto shared_pairs = [&](const std::string& a, const std::string& b) {
        std::vector<std::string> out;
        for (const auto& [pair, score] : by_system[a]) {
            (void)score;
            if (by_system[b].count(pair)) out.push_back(pair);
        }
        return out;
    };

    std::ostringstream md;
    md.precision(10);
    md << "# Aggregate report\n";

    // mean chrF plus win% columns, one row per system
    const std::string mean_path = dir + "/report_mean.csv";
    {
        std::ofstream out(mean_path, std::ios::binary);
        out.precision(10);
        out << "system,n,mean_chrf";
        for (const auto& b : benchmarks) out << ",win_vs_" << b;
        out << "\n";
        md << "\n## Mean chrF and win percentages\n\n| system | n | mean chrF |";
        for (const auto& b : benchmarks) md << " win% vs " << b << " |";
        md << "\n|---|---|---|";
        for (std::size_t i = 0; i < benchmarks.size(); ++i) md << "---|";
        md << "\n";
        for (const auto& system : system_order) {
            const auto& scores = by_system[system];
            double sum = 0.0;
            for (const auto& [pair, score] : scores) sum += score;
            const double mean = scores.empty() ? 0.0 : sum / scores.size();
            out << system << ',' << scores.size() << ',' << mean;
            md << "| " << system << " | " << scores.size() << " | " << mean << " |";
            for (const auto& b : benchmarks) {
                if (system == b) {
                    out << ',';
                    md << " - |";
                    continue;
                }
                const auto pairs = shared_pairs(system, b);
                const double win = pairs.empty()
                                       ? 0.0
                                       : win_percent(by_system[system], by_system[b], pairs);
                out << ',' << win;
                md << ' ' << win << " |";
            }
            out << '\n';
            md << '\n';
        }
    }
    io.output(mean_path);

    // win% restricted to low and very-low resource pairs
    const std::string lowvl_path = dir + "/report_win_lowvl.csv";
    {
        std::ofstream out(lowvl_path, std::ios::binary);
        out.precision(10);
        out << "system,benchmark,n,win_percent\n";
        md << "\n## Win percentages over low and very-low resource pairs\n\n"
           << "| system | benchmark | n | win% |\n|---|---|---|---|\n";
        for (const auto& system : system_order) {
            for (const auto& b : benchmarks) {
                if (system == b) continue;
                const auto pairs = lowvl_subset(shared_pairs(system, b));
                if (pairs.empty()) continue;
                const double win = win_percent(by_system[system], by_system[b], pairs);
                out << system << ',' << b << ',' << pairs.size() << ',' << win << '\n';
                md << "| " << system << " | " << b << " | " << pairs.size() << " | " << win
                   << " |\n";
            }
        }
    }
    io.output(lowvl_path);

    // per-resource-level means with 95% CIs
    const std::string strata_path = dir + "/report_strata.csv";
    {
        std::ofstream out(strata_path, std::ios::binary);
        out.precision(10);
        out << "system,level,n,mean,ci95_halfwidth\n";
        md << "\n## Resource-stratified means (95% CI half-widths)\n\n"
           << "| system | level | n | mean | ci95 |\n|---|---|---|---|---|\n";
        for (const auto& system : system_order) {
            // restrict to pairs with known levels so mixed fixtures work
            std::map<std::string, double> leveled;
            for (const auto& [pair, score] : by_system[system]) {
                const auto* spec = registry.find(pair);
                if (spec && spec->resource_level) leveled[pair] = score;
            }
            if (leveled.empty()) continue;
            for (const auto& stats : stratified_report(leveled, registry)) {
                out << system << ',' << to_string(stats.level) << ',' << stats.n << ','
                    << stats.mean << ',' << stats.ci_halfwidth << '\n';
                md << "| " << system << " | " << to_string(stats.level) << " | " << stats.n
                   << " | " << stats.mean << " | " << stats.ci_halfwidth << " |\n";
            }
        }
    }
    io.output(strata_path);

    // per-pair matrix, one column per system
    const std::string pairs_path = dir + "/report_pairs.csv";
    {
        std::set<std::string> all_pairs;
        for (const auto& [system, scores] : by_system) {
            for (const auto& [pair, score] : scores) all_pairs.insert(pair);
        }
        std::ofstream out(pairs_path, std::ios::binary);
        out.precision(10);
        out << "pair,resource_level";
        for (const auto& system : system_order) out << ',' << system;
        out << '\n';
        for (const auto& pair : all_pairs) {
            const auto* spec = registry.find(pair);
            out << pair << ','
                << (spec && spec->resource_level ? to_string(*spec->resource_level) : "");
            for (const auto& system : system_order) {
                out << ',';
                auto it = by_system[system].find(pair);
                if (it != by_system[system].end()) out << it->second;
            }
            out << '\n';
        }
    }
    io.output(pairs_path);

    const std::string md_path = dir + "/report.md";
    {
        std::ofstream out(md_path, std::ios::binary);
        out << md.str();
    }
    io.output(md_path);

    nlohmann::json params;
    params["benchmarks"] = benchmarks;
    params["sources"] = score_paths;
    finish_stage(config, "report", std::move(io), std::move(params));
    log << "report: " << system_order.size() << " systems\n";
}

void stage_kd_export(const RunConfig& config, std::ostream& log) {
    if (!config.raw.contains("kd")) throw ValidationError("config needs a kd section");
    const auto& kd = config.raw["kd"];
    const std::string dir = stage_dir(config, "kd-export");
    fs::create_directories(dir);
    StageIo io;

    const std::string seed_path = config.resolve(kd.at("seed_sentences").get<std::string>());
    const std::string wmt_path = config.resolve(kd.at("wmt_sentences").get<std::string>());
    const std::string excluded_path = config.resolve(kd.at("excluded").get<std::string>());
    io.input(seed_path);
    io.input(wmt_path);
    io.input(excluded_path);

    const auto excluded_lines = read_lines(excluded_path);
    const DistillPool pool = build_distill_pool(
        read_lines(seed_path), read_lines(wmt_path),
        std::set<std::string>(excluded_lines.begin(), excluded_lines.end()),
        kd.at("target_wmt").get<std::size_t>(), config.seed("kd_sample"));

    // teacher outputs over the pool, in student-run results format
    const std::string outputs_path = config.resolve(kd.at("outputs").get<std::string>());
    io.input(outputs_path);
    std::map<std::pair<std::size_t, std::string>, std::string> outputs;
    for (const auto& line : read_lines(outputs_path)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        if (!j.value("error", std::string()).empty()) continue;
        outputs[{j.at("index").get<std::size_t>(), j.at("pair").get<std::string>()}] =
            j.at("translation").get<std::string>();
    }

    KDOptions options;
    options.coverage_floor = kd.value("coverage_floor", 0.95);
    const auto targets = kd.contains("targets")
                             ? kd["targets"].get<std::vector<std::string>>()
                             : target_codes(config);
    const std::string elicited = kd.value("variant", std::string("mufu20"));
    const KDDataset dataset = make_kd_dataset(
        pool, targets,
        [&](std::size_t index, const std::string& target) -> std::optional<std::string> {
            auto it = outputs.find({index, target});
            if (it == outputs.end()) return std::nullopt;
            return it->second;
        },
        elicited, options);

    const LanguageRegistry registry = load_registry(config);
    const std::string out_path = dir + "/kd.jsonl";
    {
        std::ofstream out(out_path, std::ios::binary);
        export_kd_jsonl(out, dataset, registry);
    }
    io.output(out_path);

    nlohmann::json params;
    params["pool_size"] = pool.sentences.size();
    params["coverage"] = dataset.coverage;
    params["records"] = dataset.records.size();
    params["flagged_empty"] = dataset.flagged_empty;
    params["seed"] = config.seed("kd_sample");
    finish_stage(config, "kd-export", std::move(io), std::move(params));
    log << "kd-export: " << dataset.records.size() << " records (coverage "
        << dataset.coverage << ", " << dataset.flagged_empty << " degenerate)\n";
}

void stage_attn_report(const RunConfig& config, std::ostream& log) {
    if (!config.raw.contains("attn")) throw ValidationError("config needs an attn section");
    const std::string dumps_path =
        config.resolve(config.raw["attn"].at("dumps").get<std::string>());
    const std::string dir = stage_dir(config, "attn-report");
    fs::create_directories(dir);
    StageIo io;
    io.input(dumps_path);

    std::vector<std::pair<std::string, std::vector<SegmentMass>>> per_example;
    std::size_t lineno = 0;
    for (const auto& line : read_lines(dumps_path)) {
        ++lineno;
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        const std::string key = j.value("pair", std::string("all"));
        try {
            per_example.emplace_back(key, aggregate_segments(parse_attention_dump(line)));
        } catch (const std::exception& e) {
            throw ValidationError(dumps_path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    const AttributionReport report = render_attribution_report(per_example);
    for (const auto& warning : report.warnings) log << "attn-report: " << warning << "\n";

    const std::string out_path = dir + "/attn_report.csv";
    {
        std::ofstream out(out_path, std::ios::binary);
        write_attribution_csv(out, report);
    }
    io.output(out_path);

    nlohmann::json params;
    params["examples"] = per_example.size();
    params["groups"] = report.groups.size();
    finish_stage(config, "attn-report", std::move(io), std::move(params));
    log << "attn-report: " << report.groups.size() << " groups over " << per_example.size()
        << " examples\n";
}

} // namespace

void run_stage(const RunConfig& config, const std::string& stage, bool resume, bool dry_run,
               std::ostream& log) {
    const auto& stages = known_stages();
    if (std::find(stages.begin(), stages.end(), stage) == stages.end()) {
        throw ValidationError("unknown stage: '" + stage + "'");
    }
    if (resume && fs::exists(stage_dir(config, stage) + "/manifest.json")) {
        const StageManifest manifest = read_manifest(stage_dir(config, stage));
        if (inputs_unchanged(manifest)) {
            log << stage << ": up to date, skipped\n";
            return;
        }
    }
    require_stage_deps(config, stage);
    if (dry_run) {
        log << stage << ": dry run, would write to " << stage_dir(config, stage) << "\n";
        return;
    }
    if (stage == "plan") stage_plan(config, log);
    else if (stage == "split") stage_split(config, log);
    else if (stage == "teacher-run") stage_teacher_run(config, log);
    else if (stage == "build-prompts") stage_build_prompts(config, log);
    else if (stage == "student-run") stage_student_run(config, log);
    else if (stage == "export-finetune") stage_export_finetune(config, log);
    else if (stage == "evaluate") stage_evaluate(config, log);
    else if (stage == "report") stage_report(config, log);
    else if (stage == "kd-export") stage_kd_export(config, log);
    else if (stage == "attn-report") stage_attn_report(config, log);
}

} // namespace mufu

#include "mufu/corpus.hpp"

#include "mufu/error.hpp"
#include "mufu/rng.hpp"
#include "mufu/text.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

namespace mufu {

const std::vector<std::string>& ParallelCorpus::sentences(const std::string& code) const {
    auto it = languages.find(code);
    if (it == languages.end()) throw CoverageError("corpus has no language: " + code);
    return it->second;
}

bool ParallelCorpus::has_language(const std::string& code) const {
    return languages.count(code) != 0;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

ParallelCorpus load_corpus(const std::string& directory,
                           const std::vector<std::string>& codes) {
    ParallelCorpus corpus;
    std::string first_file;
    for (const auto& code : codes) {
        const std::string path = directory + "/" + code + ".txt";
        auto lines = read_lines(path);
        for (std::size_t i = 0; i < lines.size(); ++i) {
            std::size_t bad = 0;
            if (!text::validate_utf8(lines[i], &bad)) {
                throw ParseError(path + ":" + std::to_string(i + 1) +
                                 ": invalid UTF-8 at byte " + std::to_string(bad));
            }
            // strip trailing whitespace only; leading spaces may be content
            const std::u32string u = text::decode_utf8(lines[i]);
            std::size_t e = u.size();
            while (e > 0 && text::is_space(u[e - 1])) --e;
            lines[i] = text::encode_utf8(std::u32string_view(u).substr(0, e));
        }
        if (corpus.languages.empty()) {
            corpus.n_sentences = lines.size();
            first_file = path;
        } else if (lines.size() != corpus.n_sentences) {
            throw ParseError("alignment error: " + first_file + " has " +
                             std::to_string(corpus.n_sentences) + " lines but " + path +
                             " has " + std::to_string(lines.size()));
        }
        corpus.languages.emplace(code, std::move(lines));
    }
    return corpus;
}

const char* to_string(Split split) {
    switch (split) {
        case Split::Train: return "train";
        case Split::Validation: return "validation";
        case Split::PromptSelection: return "prompt_selection";
        case Split::FewshotReserve: return "fewshot_reserve";
    }
    return "?";
}

Split parse_split(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "validation") return Split::Validation;
    if (s == "prompt_selection") return Split::PromptSelection;
    if (s == "fewshot_reserve") return Split::FewshotReserve;
    throw ParseError("unknown split name: '" + s + "'");
}

std::vector<std::size_t> SplitAssignment::indices_for(Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        if (assignment[i] == split) out.push_back(i);
    }
    return out;
}

std::size_t SplitAssignment::count(Split split) const {
    return static_cast<std::size_t>(
        std::count(assignment.begin(), assignment.end(), split));
}

SplitAssignment split_dev(std::size_t n, const SplitSizes& sizes, std::uint64_t seed) {
    if (sizes.total() != n) {
        throw ValidationError("split sizes sum to " + std::to_string(sizes.total()) +
                              " but corpus has " + std::to_string(n) + " sentences");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    DeterministicRng rng(seed);
    fisher_yates_shuffle(order, rng);

    SplitAssignment out;
    out.seed = seed;
    out.assignment.resize(n, Split::Train);
    std::size_t pos = 0;
    const std::pair<Split, std::size_t> blocks[] = {
        {Split::Train, sizes.train},
        {Split::Validation, sizes.validation},
        {Split::PromptSelection, sizes.prompt_selection},
        {Split::FewshotReserve, sizes.fewshot_reserve},
    };
    for (const auto& [split, count] : blocks) {
        for (std::size_t i = 0; i < count; ++i) out.assignment[order[pos++]] = split;
    }
    return out;
}

void write_split_tsv(const std::string& path, const SplitAssignment& assignment) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write split: " + path);
    out << "index\tsplit\n";
    for (std::size_t i = 0; i < assignment.assignment.size(); ++i) {
        out << i << '\t' << to_string(assignment.assignment[i]) << '\n';
    }
}

SplitAssignment read_split_tsv(const std::string& path) {
    SplitAssignment out;
    std::size_t lineno = 0;
    for (const auto& line : read_lines(path)) {
        ++lineno;
        if (line.empty()) continue;
        if (lineno == 1 && line.rfind("index\t", 0) == 0) continue;
        std::stringstream ss(line);
        std::string idx, split;
        if (!std::getline(ss, idx, '\t') || !std::getline(ss, split, '\t')) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": bad split row");
        }
        if (std::stoull(idx) != out.assignment.size()) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": indices not contiguous");
        }
        out.assignment.push_back(parse_split(split));
    }
    return out;
}

std::vector<std::size_t> sample_fewshot(const SplitAssignment& assignment,
                                        std::size_t n_shots, std::uint64_t seed) {
    auto reserve = assignment.indices_for(Split::FewshotReserve);
    if (n_shots > reserve.size()) {
        throw InsufficientCandidatesError(
            "sample_fewshot: requested " + std::to_string(n_shots) + " shots from reserve of " +
            std::to_string(reserve.size()));
    }
    DeterministicRng rng(seed);
    return sample_without_replacement(std::move(reserve), n_shots, rng);
}

DistillPool build_distill_pool(const std::vector<std::string>& seed_sentences,
                               const std::vector<std::string>& wmt_sentences,
                               const std::set<std::string>& excluded,
                               std::size_t target_wmt, std::uint64_t seed) {
    std::set<std::string> excluded_keys;
    for (const auto& s : excluded) excluded_keys.insert(text::normalize_for_match(s));

    std::vector<std::string> eligible;
    for (const auto& s : wmt_sentences) {
        if (!excluded_keys.count(text::normalize_for_match(s))) eligible.push_back(s);
    }
    if (eligible.size() < target_wmt) {
        throw InsufficientCandidatesError(
            "distill pool: only " + std::to_string(eligible.size()) +
            " WMT sentences remain after exclusion, need " + std::to_string(target_wmt));
    }
    DeterministicRng rng(seed);
    auto sampled = sample_without_replacement(std::move(eligible), target_wmt, rng);

    DistillPool pool;
    pool.sentences = seed_sentences;
    pool.origins.assign(seed_sentences.size(), PoolOrigin::SeedCorpus);
    pool.n_seed = seed_sentences.size();
    for (auto& s : sampled) {
        pool.sentences.push_back(std::move(s));
        pool.origins.push_back(PoolOrigin::WmtPool);
    }
    pool.n_wmt = target_wmt;
    return pool;
}

} // namespace mufu

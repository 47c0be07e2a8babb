#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace mufu {

// Sentence-aligned multilingual corpus. Every language holds the same number
// of sentences; row i is the same content across languages.
struct ParallelCorpus {
    std::map<std::string, std::vector<std::string>> languages;
    std::size_t n_sentences = 0;

    const std::vector<std::string>& sentences(const std::string& code) const;
    bool has_language(const std::string& code) const;
};

// One file per language at <dir>/<code>.txt, one sentence per line, UTF-8.
// Trailing whitespace is stripped. Mismatched line counts raise an alignment
// error naming both files; invalid encoding raises a decode error.
ParallelCorpus load_corpus(const std::string& directory,
                           const std::vector<std::string>& codes);

enum class Split { Train, Validation, PromptSelection, FewshotReserve };

const char* to_string(Split split);
Split parse_split(const std::string& s);

struct SplitSizes {
    std::size_t train = 787;
    std::size_t validation = 100;
    std::size_t prompt_selection = 100;
    std::size_t fewshot_reserve = 10;

    std::size_t total() const { return train + validation + prompt_selection + fewshot_reserve; }
};

struct SplitAssignment {
    std::vector<Split> assignment; // index -> split
    std::uint64_t seed = 0;

    std::vector<std::size_t> indices_for(Split split) const;
    std::size_t count(Split split) const;
};

// Seeded Fisher-Yates shuffle of 0..n-1 assigned in order train, validation,
// prompt_selection, fewshot_reserve. Identical inputs give identical output.
SplitAssignment split_dev(std::size_t n, const SplitSizes& sizes, std::uint64_t seed);

void write_split_tsv(const std::string& path, const SplitAssignment& assignment);
SplitAssignment read_split_tsv(const std::string& path);

// Seeded sample without replacement from the fewshot reserve.
std::vector<std::size_t> sample_fewshot(const SplitAssignment& assignment,
                                        std::size_t n_shots, std::uint64_t seed);

enum class PoolOrigin { SeedCorpus, WmtPool };

struct DistillPool {
    std::vector<std::string> sentences;
    std::vector<PoolOrigin> origins;
    std::size_t n_seed = 0;
    std::size_t n_wmt = 0;
};

// All seed sentences plus target_wmt seeded-sampled WMT sentences. WMT
// sentences matching the excluded set (on normalize_for_match keys) are
// filtered out before sampling.
DistillPool build_distill_pool(const std::vector<std::string>& seed_sentences,
                               const std::vector<std::string>& wmt_sentences,
                               const std::set<std::string>& excluded,
                               std::size_t target_wmt, std::uint64_t seed);

std::vector<std::string> read_lines(const std::string& path);

} // namespace mufu

#pragma once

#include "mufu/registry.hpp"

#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace mufu {

struct ChrfParams {
    std::size_t max_ngram = 6;
    double beta = 2.0;
    bool whitespace_in_ngrams = false;
};

// Character n-gram F-score in [0,100]. With whitespace_in_ngrams=false all
// whitespace is removed before n-gram extraction; otherwise the text is
// trimmed and internal runs collapse to one space. Per-order F scores are
// averaged over orders that have at least one reference n-gram.
double chrf_sentence(const std::string& hypothesis, const std::string& reference,
                     const ChrfParams& params = {});

// Corpus-level chrF: matched/hypothesis/reference counts accumulate over all
// pairs per order before the F formula is applied.
double chrf_corpus(const std::vector<std::pair<std::string, std::string>>& pairs,
                   const ChrfParams& params = {});

// Language-agnostic BLEU tokenizer: NFC, split on whitespace, punctuation
// split off as single tokens, ideographic/abugida code points isolated.
std::vector<std::string> bleu_tokenize(const std::string& s);

// Corpus BLEU in [0,100]: geometric mean of clipped token n-gram precisions
// (orders 1..max_order) times the brevity penalty. Orders with zero matches
// use add-1 smoothing: p = 1 / (total + 1).
double bleu_corpus(const std::vector<std::pair<std::string, std::string>>& pairs,
                   std::size_t max_order = 4);

// 100 * |{p : system[p] > benchmark[p]}| / |pair_set|. Ties are not wins.
double win_percent(const std::map<std::string, double>& system_scores,
                   const std::map<std::string, double>& benchmark_scores,
                   const std::vector<std::string>& pair_set);

struct StratumStats {
    ResourceLevel level;
    std::size_t n = 0;
    double mean = 0.0;
    double ci_halfwidth = 0.0; // 1.96 * sample stddev / sqrt(n); 0 when n == 1
    bool degenerate = false;   // n == 1
};

// Per-resource-level mean and normal-approximation 95% CI. Every scored pair
// must have a resource level in the registry.
std::vector<StratumStats> stratified_report(const std::map<std::string, double>& scores,
                                            const LanguageRegistry& registry);

struct PairResult {
    std::string pair;
    std::string system;
    double chrf = 0.0;
    std::optional<double> bleu;
    std::size_t n_sentences = 0;
};

// CSV with header pair,system,chrf,bleu,n
std::vector<PairResult> read_score_csv(const std::string& path);
void write_score_csv(const std::string& path, const std::vector<PairResult>& rows);

} // namespace mufu

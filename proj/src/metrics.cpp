#include "mufu/metrics.hpp"

#include "mufu/error.hpp"
#include "mufu/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace mufu {

namespace {

struct OrderCounts {
    std::size_t matched = 0;
    std::size_t hyp_total = 0;
    std::size_t ref_total = 0;
};

std::u32string chrf_prepare(const std::string& s, const ChrfParams& params) {
    const std::string cleaned = params.whitespace_in_ngrams
                                    ? text::collapse_whitespace(s)
                                    : text::strip_all_whitespace(s);
    return text::decode_utf8(cleaned);
}

std::unordered_map<std::u32string, std::size_t> ngram_counts(const std::u32string& s,
                                                             std::size_t n) {
    std::unordered_map<std::u32string, std::size_t> counts;
    if (s.size() >= n) {
        for (std::size_t i = 0; i + n <= s.size(); ++i) ++counts[s.substr(i, n)];
    }
    return counts;
}

void accumulate_chrf(const std::u32string& hyp, const std::u32string& ref,
                     std::vector<OrderCounts>& per_order) {
    for (std::size_t n = 1; n <= per_order.size(); ++n) {
        auto& oc = per_order[n - 1];
        const auto hyp_counts = ngram_counts(hyp, n);
        const auto ref_counts = ngram_counts(ref, n);
        for (const auto& [gram, count] : hyp_counts) {
            oc.hyp_total += count;
            auto it = ref_counts.find(gram);
            if (it != ref_counts.end()) oc.matched += std::min(count, it->second);
        }
        for (const auto& [gram, count] : ref_counts) oc.ref_total += count;
    }
}

double chrf_from_counts(const std::vector<OrderCounts>& per_order, double beta) {
    const double beta2 = beta * beta;
    double f_sum = 0.0;
    std::size_t orders = 0;
    for (const auto& oc : per_order) {
        if (oc.ref_total == 0) continue; // no reference n-grams at this order
        ++orders;
        const double precision =
            oc.hyp_total == 0 ? 0.0 : static_cast<double>(oc.matched) / oc.hyp_total;
        const double recall = static_cast<double>(oc.matched) / oc.ref_total;
        if (precision + recall > 0.0) {
            f_sum += (1.0 + beta2) * precision * recall / (beta2 * precision + recall);
        }
    }
    return orders == 0 ? 0.0 : 100.0 * f_sum / static_cast<double>(orders);
}

void validate_chrf_params(const ChrfParams& params) {
    if (params.max_ngram < 1) throw ValidationError("chrF max_ngram must be >= 1");
    if (!(params.beta > 0.0)) throw ValidationError("chrF beta must be > 0");
}

} // namespace

double chrf_sentence(const std::string& hypothesis, const std::string& reference,
                     const ChrfParams& params) {
    validate_chrf_params(params);
    const std::u32string ref = chrf_prepare(reference, params);
    if (ref.empty()) throw ValidationError("chrF reference is empty after normalization");
    const std::u32string hyp = chrf_prepare(hypothesis, params);
    std::vector<OrderCounts> per_order(params.max_ngram);
    accumulate_chrf(hyp, ref, per_order);
    return chrf_from_counts(per_order, params.beta);
}

double chrf_corpus(const std::vector<std::pair<std::string, std::string>>& pairs,
                   const ChrfParams& params) {
    validate_chrf_params(params);
    if (pairs.empty()) throw ValidationError("chrF corpus is empty");
    std::vector<OrderCounts> per_order(params.max_ngram);
    for (const auto& [hypothesis, reference] : pairs) {
        const std::u32string ref = chrf_prepare(reference, params);
        if (ref.empty()) throw ValidationError("chrF reference is empty after normalization");
        accumulate_chrf(chrf_prepare(hypothesis, params), ref, per_order);
    }
    return chrf_from_counts(per_order, params.beta);
}

namespace {

enum class CharClass { Regular, Whitespace, Punctuation, Isolate };

struct Range {
    char32_t lo, hi;
};

// Punctuation: ASCII/Latin-1 plus the general and script-specific punctuation
// blocks that appear in the evaluated languages (Arabic, Devanagari danda,
// Ethiopic, Myanmar, Khmer, Tibetan, CJK, fullwidth forms).
constexpr Range kPunctRanges[] = {
    {0x0021, 0x002F}, {0x003A, 0x0040}, {0x005B, 0x0060}, {0x007B, 0x007E},
    {0x00A1, 0x00A7}, {0x00AB, 0x00AB}, {0x00B6, 0x00B7}, {0x00BB, 0x00BB},
    {0x00BF, 0x00BF}, {0x060C, 0x060C}, {0x061B, 0x061B}, {0x061F, 0x061F},
    {0x066A, 0x066D}, {0x06D4, 0x06D4}, {0x0700, 0x070D}, {0x0964, 0x0965},
    {0x0E4F, 0x0E4F}, {0x0E5A, 0x0E5B}, {0x0F04, 0x0F12}, {0x0F3A, 0x0F3D},
    {0x104A, 0x104F}, {0x1360, 0x1368}, {0x166D, 0x166E}, {0x16EB, 0x16ED},
    {0x17D4, 0x17DA}, {0x1800, 0x180A}, {0x1AA0, 0x1AA6}, {0x2010, 0x2027},
    {0x2030, 0x205E}, {0x2E00, 0x2E7F}, {0x3001, 0x3003}, {0x3008, 0x3011},
    {0x3014, 0x301F}, {0x30FB, 0x30FB}, {0xFE50, 0xFE6F}, {0xFF01, 0xFF0F},
    {0xFF1A, 0xFF20}, {0xFF3B, 0xFF40}, {0xFF5B, 0xFF65},
};

// Ideographic and abugida blocks whose code points become single tokens.
constexpr Range kIsolateRanges[] = {
    {0x0E00, 0x0E4E}, {0x0E50, 0x0E59}, {0x0E80, 0x0EFF}, // Thai, Lao
    {0x0F13, 0x0F39}, {0x0F3E, 0x0FFF},                   // Tibetan
    {0x1000, 0x1049}, {0x1050, 0x109F},                   // Myanmar
    {0x1780, 0x17D3}, {0x17E0, 0x17FF}, {0x19E0, 0x19FF}, // Khmer
    {0x3040, 0x30FA}, {0x30FC, 0x30FF},                   // kana
    {0x3400, 0x4DBF}, {0x4E00, 0x9FFF},                   // CJK unified
    {0xA000, 0xA48F},                                     // Yi
    {0xAA60, 0xAA7F},                                     // Myanmar extended
    {0xF900, 0xFAFF},                                     // CJK compatibility
};

bool in_ranges(char32_t c, const Range* ranges, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        if (c >= ranges[i].lo && c <= ranges[i].hi) return true;
    }
    return false;
}

CharClass classify(char32_t c) {
    if (text::is_space(c)) return CharClass::Whitespace;
    if (in_ranges(c, kPunctRanges, std::size(kPunctRanges))) return CharClass::Punctuation;
    if (in_ranges(c, kIsolateRanges, std::size(kIsolateRanges))) return CharClass::Isolate;
    if (c >= 0x20000 && c <= 0x2FA1F) return CharClass::Isolate; // CJK extensions
    return CharClass::Regular;
}

} // namespace

std::vector<std::string> bleu_tokenize(const std::string& s) {
    const std::u32string u = text::decode_utf8(text::nfc(s));
    std::vector<std::string> tokens;
    std::u32string current;
    auto flush = [&] {
        if (!current.empty()) {
            tokens.push_back(text::encode_utf8(current));
            current.clear();
        }
    };
    for (char32_t c : u) {
        switch (classify(c)) {
            case CharClass::Whitespace:
                flush();
                break;
            case CharClass::Punctuation:
            case CharClass::Isolate:
                flush();
                tokens.push_back(text::encode_utf8(std::u32string(1, c)));
                break;
            case CharClass::Regular:
                current.push_back(c);
                break;
        }
    }
    flush();
    return tokens;
}

double bleu_corpus(const std::vector<std::pair<std::string, std::string>>& pairs,
                   std::size_t max_order) {
    if (pairs.empty()) throw ValidationError("BLEU corpus is empty");
    if (max_order < 1) throw ValidationError("BLEU max_order must be >= 1");

    std::vector<OrderCounts> per_order(max_order);
    std::size_t hyp_len = 0, ref_len = 0;
    for (const auto& [hypothesis, reference] : pairs) {
        const auto hyp = bleu_tokenize(hypothesis);
        const auto ref = bleu_tokenize(reference);
        hyp_len += hyp.size();
        ref_len += ref.size();
        for (std::size_t n = 1; n <= max_order; ++n) {
            auto& oc = per_order[n - 1];
            std::map<std::vector<std::string>, std::size_t> hyp_counts, ref_counts;
            for (std::size_t i = 0; i + n <= hyp.size(); ++i) {
                ++hyp_counts[{hyp.begin() + i, hyp.begin() + i + n}];
            }
            for (std::size_t i = 0; i + n <= ref.size(); ++i) {
                ++ref_counts[{ref.begin() + i, ref.begin() + i + n}];
            }
            for (const auto& [gram, count] : hyp_counts) {
                oc.hyp_total += count;
                auto it = ref_counts.find(gram);
                if (it != ref_counts.end()) oc.matched += std::min(count, it->second);
            }
        }
    }
    if (hyp_len == 0) return 0.0;

    double log_sum = 0.0;
    for (const auto& oc : per_order) {
        const double p = oc.matched > 0
                             ? static_cast<double>(oc.matched) / oc.hyp_total
                             : 1.0 / (static_cast<double>(oc.hyp_total) + 1.0);
        log_sum += std::log(p);
    }
    const double brevity =
        std::exp(std::min(0.0, 1.0 - static_cast<double>(ref_len) / hyp_len));
    return 100.0 * brevity * std::exp(log_sum / static_cast<double>(max_order));
}

double win_percent(const std::map<std::string, double>& system_scores,
                   const std::map<std::string, double>& benchmark_scores,
                   const std::vector<std::string>& pair_set) {
    if (pair_set.empty()) throw ValidationError("win_percent over an empty pair set");
    std::size_t wins = 0;
    for (const auto& pair : pair_set) {
        auto sys = system_scores.find(pair);
        if (sys == system_scores.end()) {
            throw CoverageError("system scores missing pair: " + pair);
        }
        auto bench = benchmark_scores.find(pair);
        if (bench == benchmark_scores.end()) {
            throw CoverageError("benchmark scores missing pair: " + pair);
        }
        if (sys->second > bench->second) ++wins;
    }
    return 100.0 * static_cast<double>(wins) / static_cast<double>(pair_set.size());
}

std::vector<StratumStats> stratified_report(const std::map<std::string, double>& scores,
                                            const LanguageRegistry& registry) {
    std::map<ResourceLevel, std::vector<double>> by_level;
    for (const auto& [pair, score] : scores) {
        const LanguageSpec& spec = registry.at(pair);
        if (!spec.resource_level) {
            throw CoverageError("pair has no resource level: " + pair);
        }
        by_level[*spec.resource_level].push_back(score);
    }
    std::vector<StratumStats> out;
    for (ResourceLevel level : {ResourceLevel::VeryLow, ResourceLevel::Low,
                                ResourceLevel::Medium, ResourceLevel::High}) {
        auto it = by_level.find(level);
        if (it == by_level.end()) continue;
        const auto& values = it->second;
        StratumStats stats;
        stats.level = level;
        stats.n = values.size();
        double sum = 0.0;
        for (double v : values) sum += v;
        stats.mean = sum / static_cast<double>(values.size());
        if (values.size() > 1) {
            double ss = 0.0;
            for (double v : values) ss += (v - stats.mean) * (v - stats.mean);
            const double stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
            stats.ci_halfwidth = 1.96 * stddev / std::sqrt(static_cast<double>(values.size()));
        } else {
            stats.degenerate = true;
        }
        out.push_back(stats);
    }
    return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cols;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cols.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    cols.push_back(cur);
    return cols;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

} // namespace

std::vector<PairResult> read_score_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open score table: " + path);
    std::vector<PairResult> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (lineno == 1 && line.rfind("pair,", 0) == 0) continue;
        const auto cols = split_csv_line(line);
        if (cols.size() != 5) {
            throw ParseError(path + ":" + std::to_string(lineno) +
                             ": expected 5 columns (pair,system,chrf,bleu,n)");
        }
        PairResult r;
        r.pair = cols[0];
        r.system = cols[1];
        try {
            r.chrf = std::stod(cols[2]);
            if (!cols[3].empty()) r.bleu = std::stod(cols[3]);
            r.n_sentences = cols[4].empty() ? 0 : std::stoull(cols[4]);
        } catch (const std::exception&) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": bad numeric field");
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

void write_score_csv(const std::string& path, const std::vector<PairResult>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write score table: " + path);
    out << "pair,system,chrf,bleu,n\n";
    out.precision(10);
    for (const auto& r : rows) {
        out << csv_escape(r.pair) << ',' << csv_escape(r.system) << ',' << r.chrf << ',';
        if (r.bleu) out << *r.bleu;
        out << ',' << r.n_sentences << '\n';
    }
}

} // namespace mufu

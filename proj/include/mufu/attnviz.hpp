#pragma once

#include <cstddef>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace mufu {

struct SegmentRange {
    std::string name;
    std::size_t begin = 0; // inclusive token index
    std::size_t end = 0;   // exclusive
};

// Attention weights already reduced over heads and layers by the producer.
// Rows are generated tokens, columns run over context tokens followed by the
// generated tokens themselves. Segments partition the full column range.
// `reduction` declares the producer's layer reduction: "layer_mean"
// (default) or "layer_sum".
struct AttentionDump {
    std::vector<std::string> context_tokens;
    std::vector<std::string> generated_tokens;
    std::vector<std::vector<double>> weights;
    std::vector<SegmentRange> segments;
    std::string reduction = "layer_mean";

    std::size_t n_columns() const { return context_tokens.size() + generated_tokens.size(); }
};

// One JSON object: {"context_tokens": [...], "generated_tokens": [...],
// "segments": {"name": [begin, end], ...}, "weights": [[...], ...]}
AttentionDump parse_attention_dump(const std::string& json_text);
std::vector<AttentionDump> read_attention_dumps_jsonl(const std::string& path);

struct SegmentMass {
    std::string name;
    double raw = 0.0;        // summed weight into the segment over all rows
    double normalized = 0.0; // raw / segment token count
    std::size_t token_count = 0;
    bool self_attention = false; // segment lies in the generated token range
};

// Validates the dump (row sums <= 1 + 1e-6, segments partition the columns)
// and sums weight mass per segment.
std::vector<SegmentMass> aggregate_segments(const AttentionDump& dump);

struct HighlightBucket {
    std::vector<double> thresholds{0.01, 0.06, 0.13, 0.22};
    std::vector<std::string> labels{"white", "light-gray", "dark-gray", "black", "max"};
};

// Class index for one mass: the number of thresholds <= m, clamped to the
// last label. Monotone in m.
std::size_t bucket_index(double mass, const HighlightBucket& bucket);
std::vector<std::string> bucket_tokens(const std::vector<double>& per_token_mass,
                                       const HighlightBucket& bucket = {});

struct AttributionGroup {
    std::string key;       // e.g. the language pair
    std::size_t n_examples = 0;
    std::vector<SegmentMass> mean_masses;
};

struct AttributionReport {
    std::vector<AttributionGroup> groups;
    std::vector<std::string> warnings;
};

// Mean normalized mass per segment within each group; empty groups are
// skipped with a warning.
AttributionReport render_attribution_report(
    const std::vector<std::pair<std::string, std::vector<SegmentMass>>>& per_example);

// group,segment,tokens,mean_raw,mean_normalized (stacked-bar ready)
void write_attribution_csv(std::ostream& out, const AttributionReport& report);

} // namespace mufu

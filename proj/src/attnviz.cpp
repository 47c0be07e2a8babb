#include "mufu/attnviz.hpp"

#include "mufu/corpus.hpp"
#include "mufu/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>

namespace mufu {

AttentionDump parse_attention_dump(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("attention dump is not valid JSON: ") + e.what());
    }
    AttentionDump dump;
    try {
        dump.context_tokens = j.at("context_tokens").get<std::vector<std::string>>();
        dump.generated_tokens = j.at("generated_tokens").get<std::vector<std::string>>();
        dump.weights = j.at("weights").get<std::vector<std::vector<double>>>();
        for (const auto& [name, range] : j.at("segments").items()) {
            if (!range.is_array() || range.size() != 2) {
                throw ParseError("segment '" + name + "' range must be [begin, end)");
            }
            dump.segments.push_back({name, range[0].get<std::size_t>(),
                                     range[1].get<std::size_t>()});
        }
        dump.reduction = j.value("reduction", std::string("layer_mean"));
        if (dump.reduction != "layer_mean" && dump.reduction != "layer_sum") {
            throw ParseError("unknown reduction '" + dump.reduction +
                             "' (layer_mean or layer_sum)");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("attention dump has a bad field: ") + e.what());
    }
    // keep segments in token order regardless of JSON key order
    std::sort(dump.segments.begin(), dump.segments.end(),
              [](const auto& a, const auto& b) { return a.begin < b.begin; });
    return dump;
}

std::vector<AttentionDump> read_attention_dumps_jsonl(const std::string& path) {
    std::vector<AttentionDump> dumps;
    std::size_t lineno = 0;
    for (const auto& line : read_lines(path)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            dumps.push_back(parse_attention_dump(line));
        } catch (const ParseError& e) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return dumps;
}

namespace {

void validate_dump(const AttentionDump& dump) {
    const std::size_t n_cols = dump.n_columns();
    if (dump.weights.size() != dump.generated_tokens.size()) {
        throw ValidationError("weight rows (" + std::to_string(dump.weights.size()) +
                              ") do not match generated tokens (" +
                              std::to_string(dump.generated_tokens.size()) + ")");
    }
    for (const auto& row : dump.weights) {
        if (row.size() != n_cols) {
            throw ValidationError("weight row width " + std::to_string(row.size()) +
                                  " does not match token count " + std::to_string(n_cols));
        }
        double sum = 0.0;
        for (double w : row) {
            if (w < 0.0) throw ValidationError("negative attention weight");
            sum += w;
        }
        // layer-summed rows legitimately exceed 1; the bound applies to means
        if (dump.reduction != "layer_sum" && sum > 1.0 + 1e-6) {
            throw ValidationError("attention row sums to " + std::to_string(sum) + " > 1");
        }
    }
    auto sorted = dump.segments;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.begin < b.begin; });
    std::size_t cursor = 0;
    for (const auto& seg : sorted) {
        if (seg.end <= seg.begin) {
            throw ValidationError("segment '" + seg.name + "' is empty or reversed");
        }
        if (seg.begin < cursor) {
            throw ValidationError("segment '" + seg.name + "' overlaps the previous segment");
        }
        if (seg.begin > cursor) {
            throw ValidationError("gap in segments before '" + seg.name + "'");
        }
        cursor = seg.end;
    }
    if (cursor != n_cols) {
        throw ValidationError("segments cover " + std::to_string(cursor) + " of " +
                              std::to_string(n_cols) + " tokens");
    }
}

} // namespace

std::vector<SegmentMass> aggregate_segments(const AttentionDump& dump) {
    validate_dump(dump);
    const std::size_t generated_begin = dump.context_tokens.size();
    std::vector<SegmentMass> out;
    out.reserve(dump.segments.size());
    for (const auto& seg : dump.segments) {
        SegmentMass mass;
        mass.name = seg.name;
        mass.token_count = seg.end - seg.begin;
        for (const auto& row : dump.weights) {
            for (std::size_t c = seg.begin; c < seg.end; ++c) mass.raw += row[c];
        }
        mass.normalized = mass.raw / static_cast<double>(mass.token_count);
        mass.self_attention = seg.end > generated_begin;
        out.push_back(std::move(mass));
    }
    return out;
}

std::size_t bucket_index(double mass, const HighlightBucket& bucket) {
    if (bucket.labels.size() != bucket.thresholds.size() + 1) {
        throw ValidationError("highlight bucket needs |labels| == |thresholds| + 1");
    }
    for (std::size_t i = 1; i < bucket.thresholds.size(); ++i) {
        if (!(bucket.thresholds[i] > bucket.thresholds[i - 1])) {
            throw ValidationError("highlight thresholds must be strictly ascending");
        }
    }
    std::size_t idx = 0;
    for (double t : bucket.thresholds) {
        if (t <= mass) ++idx;
    }
    return std::min(idx, bucket.labels.size() - 1);
}

std::vector<std::string> bucket_tokens(const std::vector<double>& per_token_mass,
                                       const HighlightBucket& bucket) {
    std::vector<std::string> out;
    out.reserve(per_token_mass.size());
    for (double m : per_token_mass) {
        if (m < 0.0) throw ValidationError("token mass must be >= 0");
        out.push_back(bucket.labels[bucket_index(m, bucket)]);
    }
    return out;
}

AttributionReport render_attribution_report(
    const std::vector<std::pair<std::string, std::vector<SegmentMass>>>& per_example) {
    std::map<std::string, std::vector<const std::vector<SegmentMass>*>> grouped;
    std::vector<std::string> group_order;
    for (const auto& [key, masses] : per_example) {
        if (!grouped.count(key)) group_order.push_back(key);
        grouped[key].push_back(&masses);
    }

    AttributionReport report;
    for (const auto& key : group_order) {
        const auto& examples = grouped[key];
        if (examples.empty() || examples.front()->empty()) {
            report.warnings.push_back("group '" + key + "' has no attributions; skipped");
            continue;
        }
        AttributionGroup group;
        group.key = key;
        group.n_examples = examples.size();
        // segment order of the first example; later examples must match by name
        std::map<std::string, std::pair<double, double>> sums; // raw, normalized
        std::map<std::string, std::size_t> tokens;
        std::vector<std::string> seg_order;
        for (const auto& mass : *examples.front()) seg_order.push_back(mass.name);
        for (const auto* example : examples) {
            for (const auto& mass : *example) {
                sums[mass.name].first += mass.raw;
                sums[mass.name].second += mass.normalized;
                tokens[mass.name] = mass.token_count;
            }
        }
        for (const auto& name : seg_order) {
            SegmentMass mean;
            mean.name = name;
            mean.raw = sums[name].first / static_cast<double>(group.n_examples);
            mean.normalized = sums[name].second / static_cast<double>(group.n_examples);
            mean.token_count = tokens[name];
            group.mean_masses.push_back(std::move(mean));
        }
        report.groups.push_back(std::move(group));
    }
    return report;
}

void write_attribution_csv(std::ostream& out, const AttributionReport& report) {
    out << "group,segment,tokens,mean_raw,mean_normalized\n";
    out.precision(10);
    for (const auto& group : report.groups) {
        for (const auto& mass : group.mean_masses) {
            out << group.key << ',' << mass.name << ',' << mass.token_count << ','
                << mass.raw << ',' << mass.normalized << '\n';
        }
    }
}

} // namespace mufu

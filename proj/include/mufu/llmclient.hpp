#pragma once

#include "mufu/corpus.hpp"
#include "mufu/langdist.hpp"
#include "mufu/promptgen.hpp"
#include "mufu/registry.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace mufu {

struct RetryPolicy {
    std::size_t max_attempts = 3;
    std::chrono::milliseconds backoff_base{200}; // doubles per attempt
};

struct EndpointConfig {
    std::string name;
    std::string url;
    std::string auth_token_env; // env var holding the bearer token, if any
    std::size_t max_concurrency = 4;
    std::chrono::milliseconds timeout{30000};
    RetryPolicy retry;
};

struct DecodeParams {
    double temperature = 0.0; // evaluation default: greedy
    std::size_t max_new_tokens = 256;
    std::vector<std::string> stop_sequences{"\n"};

    std::string digest() const;
};

struct GenerationRecord {
    std::string endpoint;
    std::string prompt_digest;
    std::string params_digest;
    std::string output;
    std::int64_t latency_ms = 0;
    std::size_t attempts = 0;
    std::int64_t timestamp_ms = 0;
};

// One request/response exchange. `ok` means a response arrived at all;
// endpoint-level failures surface through `status`.
struct TransportReply {
    bool ok = false;
    int status = 0;
    std::string body;
    std::string error; // transport-level failure description
};

class Transport {
public:
    virtual ~Transport() = default;
    virtual TransportReply send(const EndpointConfig& endpoint,
                                const std::string& body_json) = 0;
};

// POST {url} with body {"prompt","temperature","max_tokens","stop"};
// expects {"text": ...} back.
std::shared_ptr<Transport> make_http_transport();

// Offline stand-in speaking the same wire format. Looks completions up by
// (source sentence, language display name) parsed out of the prompt: the
// source is the last "English: " line, the language comes from the final
// label line. Rows: {"source":..., "language":..., "text":...}.
class MockTableTransport : public Transport {
public:
    MockTableTransport() = default;
    explicit MockTableTransport(const std::string& table_jsonl_path);

    void add(const std::string& source, const std::string& language,
             const std::string& text);
    void set_source_label(std::string label) { source_label_ = std::move(label); }

    // fault injection: fail this many sends (transport-level) before working
    void fail_next(std::size_t n) { failures_remaining_ = n; }

    TransportReply send(const EndpointConfig& endpoint, const std::string& body_json) override;

    std::size_t calls() const { return calls_.load(); }
    std::size_t max_in_flight() const { return max_in_flight_.load(); }

private:
    std::map<std::pair<std::string, std::string>, std::string> table_;
    std::string source_label_ = "English";
    std::atomic<std::size_t> calls_{0};
    std::atomic<std::size_t> in_flight_{0};
    std::atomic<std::size_t> max_in_flight_{0};
    std::atomic<std::size_t> failures_remaining_{0};
    std::mutex mutex_;
};

// Append-only JSON-lines ledger with an in-memory index, so interrupted runs
// resume. Identical keys are last-write-wins.
class GenerationCache {
public:
    GenerationCache() = default; // in-memory only
    explicit GenerationCache(const std::string& ledger_path);

    std::optional<GenerationRecord> get(const std::string& endpoint,
                                        const std::string& prompt_digest,
                                        const std::string& params_digest) const;
    void put(const GenerationRecord& record);

    std::size_t size() const;

private:
    static std::string key(const std::string& endpoint, const std::string& prompt_digest,
                           const std::string& params_digest);
    mutable std::mutex mutex_;
    std::map<std::string, GenerationRecord> records_;
    std::string ledger_path_;
};

class LlmClient {
public:
    LlmClient(EndpointConfig endpoint, std::shared_ptr<Transport> transport,
              std::shared_ptr<GenerationCache> cache);

    // Returns the cached record when present; otherwise performs the request
    // with retries and exponential backoff, persists and returns it.
    GenerationRecord generate(const RenderedPrompt& prompt, const DecodeParams& params);

    struct ManyResult {
        std::optional<GenerationRecord> record;
        std::string error; // set when the item failed
    };
    // Runs generate over all prompts with at most max_concurrency in flight.
    // Results are positional (input order).
    std::vector<ManyResult> generate_many(const std::vector<RenderedPrompt>& prompts,
                                          const DecodeParams& params);

    std::size_t transport_calls() const { return transport_calls_.load(); }
    std::size_t cache_hits() const { return cache_hits_.load(); }
    const EndpointConfig& endpoint() const { return endpoint_; }

private:
    GenerationRecord request_with_retries(const RenderedPrompt& prompt,
                                          const DecodeParams& params);

    EndpointConfig endpoint_;
    std::shared_ptr<Transport> transport_;
    std::shared_ptr<GenerationCache> cache_;
    std::atomic<std::size_t> transport_calls_{0};
    std::atomic<std::size_t> cache_hits_{0};
};

// Teacher-generated candidates keyed by (sentence index, language code).
using CandidateStore = std::map<std::pair<std::size_t, std::string>, std::string>;

void write_candidate_store_jsonl(const std::string& path, const CandidateStore& store);
CandidateStore read_candidate_store_jsonl(const std::string& path);

struct TeacherPassResult {
    CandidateStore store;
    std::size_t attempted = 0;
    std::size_t succeeded = 0;
    std::vector<std::string> failures; // "index/language: error"
    double completion_ratio = 1.0;
};

// First iteration: for every non-reserve sentence and every target, one
// candidate per auxiliary language plus a draft in the target language, via
// few-shot prompting. A candidate for (sentence, language) is generated once
// and reused wherever that language appears.
TeacherPassResult teacher_pass(const ParallelCorpus& corpus,
                               const SplitAssignment& splits,
                               const std::map<std::string, AuxPlan>& plans,
                               const std::vector<std::size_t>& fewshot_indices,
                               const LanguageRegistry& registry,
                               const std::string& source_code, LlmClient& client,
                               const DecodeParams& params);

struct StudentResult {
    std::size_t index = 0;    // position in the input stream
    std::string pair;         // target language code
    std::string translation;  // parsed; empty on failure
    std::string error;        // failure metadata, empty on success
};

// Second iteration: render, generate and parse each instance, preserving
// input order. Failures yield an empty translation with error metadata.
std::vector<StudentResult> student_pass(const std::vector<PromptInstance>& instances,
                                        LlmClient& client, const DecodeParams& params);

} // namespace mufu

#include "mufu/llmclient.hpp"

#include "mufu/digest.hpp"
#include "mufu/error.hpp"

#include <httplib.h>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <set>
#include <thread>

namespace mufu {

std::string DecodeParams::digest() const {
    nlohmann::json j;
    j["temperature"] = temperature;
    j["max_tokens"] = max_new_tokens;
    j["stop"] = stop_sequences;
    return sha256_hex(j.dump());
}

namespace {

std::string request_body(const std::string& prompt_text, const DecodeParams& params) {
    nlohmann::json j;
    j["prompt"] = prompt_text;
    j["temperature"] = params.temperature;
    j["max_tokens"] = params.max_new_tokens;
    j["stop"] = params.stop_sequences;
    return j.dump();
}

std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

class HttpTransport : public Transport {
public:
    TransportReply send(const EndpointConfig& endpoint, const std::string& body_json) override {
        TransportReply reply;
        // split url into host part and path
        std::string url = endpoint.url;
        std::string path = "/";
        auto scheme_end = url.find("://");
        if (scheme_end != std::string::npos) {
            auto path_start = url.find('/', scheme_end + 3);
            if (path_start != std::string::npos) {
                path = url.substr(path_start);
                url = url.substr(0, path_start);
            }
        }
        httplib::Client client(url);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(endpoint.timeout);
        client.set_connection_timeout(secs.count(), 0);
        client.set_read_timeout(secs.count(), 0);
        client.set_write_timeout(secs.count(), 0);
        httplib::Headers headers;
        if (!endpoint.auth_token_env.empty()) {
            if (const char* token = std::getenv(endpoint.auth_token_env.c_str())) {
                headers.emplace("Authorization", std::string("Bearer ") + token);
            }
        }
        auto res = client.Post(path, headers, body_json, "application/json");
        if (!res) {
            reply.error = httplib::to_string(res.error());
            return reply;
        }
        reply.ok = true;
        reply.status = res->status;
        reply.body = res->body;
        return reply;
    }
};

} // namespace

std::shared_ptr<Transport> make_http_transport() {
    return std::make_shared<HttpTransport>();
}

MockTableTransport::MockTableTransport(const std::string& table_jsonl_path) {
    for (const auto& line : read_lines(table_jsonl_path)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        add(j.at("source").get<std::string>(), j.at("language").get<std::string>(),
            j.at("text").get<std::string>());
    }
}

void MockTableTransport::add(const std::string& source, const std::string& language,
                             const std::string& text) {
    table_[{source, language}] = text;
}

TransportReply MockTableTransport::send(const EndpointConfig&, const std::string& body_json) {
    calls_.fetch_add(1);
    const std::size_t now = in_flight_.fetch_add(1) + 1;
    std::size_t seen = max_in_flight_.load();
    while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
    }
    // brief stall so overlapping requests are observable
    std::this_thread::sleep_for(std::chrono::milliseconds(1));

    TransportReply reply;
    auto finish = [&](TransportReply r) {
        in_flight_.fetch_sub(1);
        return r;
    };

    std::size_t remaining = failures_remaining_.load();
    while (remaining > 0 &&
           !failures_remaining_.compare_exchange_weak(remaining, remaining - 1)) {
    }
    if (remaining > 0) {
        reply.error = "injected transport failure";
        return finish(reply);
    }

    std::string prompt;
    try {
        prompt = nlohmann::json::parse(body_json).at("prompt").get<std::string>();
    } catch (const nlohmann::json::exception&) {
        reply.ok = true;
        reply.status = 400;
        reply.body = R"({"error":"bad request body"})";
        return finish(reply);
    }

    // source: last "<source_label>: " line before the final label line
    std::vector<std::string> prompt_lines;
    std::string cur;
    for (char c : prompt) {
        if (c == '\n') {
            prompt_lines.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    prompt_lines.push_back(cur);
    const std::string source_prefix = source_label_ + ": ";
    std::string source;
    for (const auto& line : prompt_lines) {
        if (line.rfind(source_prefix, 0) == 0) source = line.substr(source_prefix.size());
    }
    std::string label = prompt_lines.empty() ? "" : prompt_lines.back();
    if (!label.empty() && label.back() == ':') label.pop_back();
    for (const char* tag : {"Corrected ", "Reference ", "Automatic ", "Candidate "}) {
        if (label.rfind(tag, 0) == 0) {
            label = label.substr(std::string(tag).size());
            break;
        }
    }

    std::lock_guard<std::mutex> lock(mutex_);
    auto it = table_.find({source, label});
    if (it == table_.end()) {
        reply.ok = true;
        reply.status = 404;
        nlohmann::json err;
        err["error"] = "no table entry for language '" + label + "'";
        reply.body = err.dump();
        return finish(reply);
    }
    reply.ok = true;
    reply.status = 200;
    nlohmann::json body;
    body["text"] = it->second;
    reply.body = body.dump();
    return finish(reply);
}

std::string GenerationCache::key(const std::string& endpoint, const std::string& prompt_digest,
                                 const std::string& params_digest) {
    return endpoint + "\x1f" + prompt_digest + "\x1f" + params_digest;
}

GenerationCache::GenerationCache(const std::string& ledger_path) : ledger_path_(ledger_path) {
    std::ifstream in(ledger_path);
    if (!in) return; // fresh ledger
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception&) {
            continue; // a torn tail line from an interrupted run
        }
        GenerationRecord rec;
        rec.endpoint = j.value("endpoint", "");
        rec.prompt_digest = j.value("prompt_digest", "");
        rec.params_digest = j.value("params_digest", "");
        rec.output = j.value("output", "");
        rec.latency_ms = j.value("latency_ms", 0);
        rec.attempts = j.value("attempts", std::size_t{0});
        rec.timestamp_ms = j.value("timestamp_ms", 0);
        records_[key(rec.endpoint, rec.prompt_digest, rec.params_digest)] = std::move(rec);
    }
}

std::optional<GenerationRecord> GenerationCache::get(const std::string& endpoint,
                                                     const std::string& prompt_digest,
                                                     const std::string& params_digest) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = records_.find(key(endpoint, prompt_digest, params_digest));
    if (it == records_.end()) return std::nullopt;
    return it->second;
}

void GenerationCache::put(const GenerationRecord& record) {
    std::lock_guard<std::mutex> lock(mutex_);
    records_[key(record.endpoint, record.prompt_digest, record.params_digest)] = record;
    if (ledger_path_.empty()) return;
    std::ofstream out(ledger_path_, std::ios::app | std::ios::binary);
    if (!out) throw IoError("cannot append to cache ledger: " + ledger_path_);
    nlohmann::ordered_json j;
    j["endpoint"] = record.endpoint;
    j["prompt_digest"] = record.prompt_digest;
    j["params_digest"] = record.params_digest;
    j["output"] = record.output;
    j["latency_ms"] = record.latency_ms;
    j["attempts"] = record.attempts;
    j["timestamp_ms"] = record.timestamp_ms;
    out << j.dump() << '\n';
}

std::size_t GenerationCache::size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return records_.size();
}

LlmClient::LlmClient(EndpointConfig endpoint, std::shared_ptr<Transport> transport,
                     std::shared_ptr<GenerationCache> cache)
    : endpoint_(std::move(endpoint)), transport_(std::move(transport)),
      cache_(std::move(cache)) {
    if (endpoint_.max_concurrency < 1) {
        throw ValidationError("endpoint max_concurrency must be >= 1");
    }
    if (endpoint_.retry.max_attempts < 1) {
        throw ValidationError("endpoint retry.max_attempts must be >= 1");
    }
    if (!cache_) cache_ = std::make_shared<GenerationCache>();
}

GenerationRecord LlmClient::request_with_retries(const RenderedPrompt& prompt,
                                                 const DecodeParams& params) {
    const std::string body = request_body(prompt.text, params);
    std::vector<std::string> history;
    const std::int64_t started = now_ms();
    for (std::size_t attempt = 1; attempt <= endpoint_.retry.max_attempts; ++attempt) {
        if (attempt > 1) {
            const auto delay = endpoint_.retry.backoff_base * (1u << (attempt - 2));
            std::this_thread::sleep_for(delay);
        }
        transport_calls_.fetch_add(1);
        const TransportReply reply = transport_->send(endpoint_, body);
        if (!reply.ok) {
            history.push_back("attempt " + std::to_string(attempt) + ": " + reply.error);
            continue;
        }
        if (reply.status >= 200 && reply.status < 300) {
            std::string output;
            try {
                output = nlohmann::json::parse(reply.body).at("text").get<std::string>();
            } catch (const nlohmann::json::exception& e) {
                history.push_back("attempt " + std::to_string(attempt) +
                                  ": unparseable 2xx body: " + e.what());
                continue;
            }
            GenerationRecord rec;
            rec.endpoint = endpoint_.name;
            rec.prompt_digest = prompt.digest;
            rec.params_digest = params.digest();
            rec.output = std::move(output);
            rec.latency_ms = now_ms() - started;
            rec.attempts = attempt;
            rec.timestamp_ms = now_ms();
            return rec;
        }
        // non-2xx: parseable body means the endpoint spoke; report it directly
        if (nlohmann::json::accept(reply.body)) {
            throw EndpointError("endpoint '" + endpoint_.name + "' returned HTTP " +
                                std::to_string(reply.status) + ": " + reply.body);
        }
        history.push_back("attempt " + std::to_string(attempt) + ": HTTP " +
                          std::to_string(reply.status));
    }
    std::string msg = "endpoint '" + endpoint_.name + "' failed after " +
                      std::to_string(endpoint_.retry.max_attempts) + " attempts:";
    for (const auto& h : history) msg += "\n  " + h;
    throw TransportError(msg);
}

GenerationRecord LlmClient::generate(const RenderedPrompt& prompt, const DecodeParams& params) {
    const std::string params_digest = params.digest();
    if (auto cached = cache_->get(endpoint_.name, prompt.digest, params_digest)) {
        cache_hits_.fetch_add(1);
        return *cached;
    }
    GenerationRecord rec = request_with_retries(prompt, params);
    cache_->put(rec);
    return rec;
}

std::vector<LlmClient::ManyResult> LlmClient::generate_many(
    const std::vector<RenderedPrompt>& prompts, const DecodeParams& params) {
    std::vector<ManyResult> results(prompts.size());
    std::atomic<std::size_t> next{0};
    const std::size_t n_workers = std::min(endpoint_.max_concurrency, prompts.size());
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= prompts.size()) return;
            try {
                results[i].record = generate(prompts[i], params);
            } catch (const std::exception& e) {
                results[i].error = e.what();
            }
        }
    };
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(n_workers);
        for (std::size_t i = 0; i < n_workers; ++i) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    return results;
}

void write_candidate_store_jsonl(const std::string& path, const CandidateStore& store) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write candidate store: " + path);
    for (const auto& [key, candidate] : store) {
        nlohmann::ordered_json j;
        j["sentence_index"] = key.first;
        j["language"] = key.second;
        j["text"] = candidate;
        out << j.dump() << '\n';
    }
}

CandidateStore read_candidate_store_jsonl(const std::string& path) {
    CandidateStore store;
    for (const auto& line : read_lines(path)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        store[{j.at("sentence_index").get<std::size_t>(),
               j.at("language").get<std::string>()}] = j.at("text").get<std::string>();
    }
    return store;
}

TeacherPassResult teacher_pass(const ParallelCorpus& corpus,
                               const SplitAssignment& splits,
                               const std::map<std::string, AuxPlan>& plans,
                               const std::vector<std::size_t>& fewshot_indices,
                               const LanguageRegistry& registry,
                               const std::string& source_code, LlmClient& client,
                               const DecodeParams& params) {
    const auto& source_sentences = corpus.sentences(source_code);

    // distinct (sentence, language) work items; reuse across targets is free
    // because the few-shot prompt depends only on the pair itself
    std::set<std::pair<std::size_t, std::string>> work;
    for (std::size_t i = 0; i < corpus.n_sentences; ++i) {
        if (splits.assignment.at(i) == Split::FewshotReserve) continue;
        for (const auto& [target, plan] : plans) {
            for (const auto& aux : plan.auxiliaries) work.insert({i, aux});
            work.insert({i, target});
        }
    }

    TeacherPassResult result;
    result.attempted = work.size();

    std::vector<std::pair<std::size_t, std::string>> items(work.begin(), work.end());
    std::vector<RenderedPrompt> prompts;
    std::vector<std::size_t> prompt_to_item;
    for (std::size_t idx = 0; idx < items.size(); ++idx) {
        const auto& [sentence, language] = items[idx];
        if (!corpus.has_language(language)) {
            result.failures.push_back(std::to_string(sentence) + "/" + language +
                                      ": language missing from corpus");
            continue;
        }
        std::vector<std::pair<std::string, std::string>> fewshot;
        for (std::size_t shot : fewshot_indices) {
            fewshot.emplace_back(source_sentences.at(shot),
                                 corpus.sentences(language).at(shot));
        }
        try {
            prompts.push_back(render_teacher_fewshot(registry.at(language), fewshot,
                                                     source_sentences.at(sentence)));
            prompt_to_item.push_back(idx);
        } catch (const std::exception& e) {
            result.failures.push_back(std::to_string(sentence) + "/" + language + ": " +
                                      e.what());
        }
    }

    const auto generations = client.generate_many(prompts, params);
    for (std::size_t p = 0; p < generations.size(); ++p) {
        const auto& [sentence, language] = items[prompt_to_item[p]];
        if (!generations[p].record) {
            result.failures.push_back(std::to_string(sentence) + "/" + language + ": " +
                                      generations[p].error);
            continue;
        }
        result.store[{sentence, language}] =
            parse_completion(generations[p].record->output, prompts[p].completion_prefix);
        ++result.succeeded;
    }
    result.completion_ratio =
        result.attempted == 0 ? 1.0
                              : static_cast<double>(result.succeeded) / result.attempted;
    return result;
}

std::vector<StudentResult> student_pass(const std::vector<PromptInstance>& instances,
                                        LlmClient& client, const DecodeParams& params) {
    std::vector<RenderedPrompt> prompts;
    prompts.reserve(instances.size());
    for (const auto& instance : instances) prompts.push_back(render(instance));

    const auto generations = client.generate_many(prompts, params);
    std::vector<StudentResult> results(instances.size());
    for (std::size_t i = 0; i < instances.size(); ++i) {
        results[i].index = i;
        results[i].pair = instances[i].target.code;
        if (generations[i].record) {
            results[i].translation = parse_completion(generations[i].record->output,
                                                      prompts[i].completion_prefix);
        } else {
            results[i].error = generations[i].error;
        }
    }
    return results;
}

} // namespace mufu

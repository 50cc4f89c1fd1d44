#include "biaseval/gateway.hpp"

#include <chrono>
#include <iostream>
#include <random>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace biaseval::gateway {

namespace {

void fnv_string(std::uint64_t& h, const std::string& s) {
    // Length prefix keeps adjacent fields from sharing byte sequences.
    std::uint64_t len = s.size();
    h = fnv1a(&len, sizeof(len), h);
    h = fnv1a(s.data(), s.size(), h);
}

}  // namespace

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t seed) {
    constexpr std::uint64_t kFnvPrime = 1099511628211ull;
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= kFnvPrime;
    }
    return h;
}

std::string to_string(BackendKind k) {
    switch (k) {
        case BackendKind::Http: return "http";
        case BackendKind::Record: return "record";
        case BackendKind::Replay: return "replay";
    }
    return "replay";
}

BackendKind parse_backend_kind(std::string_view s) {
    std::string k(s);
    for (char& c : k) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (k == "http" || k == "live") return BackendKind::Http;
    if (k == "record") return BackendKind::Record;
    if (k == "replay" || k == "fixture") return BackendKind::Replay;
    throw std::invalid_argument("unknown backend kind: " + std::string(s));
}

void BackendConfig::validate() const {
    if (temperature < 0) {
        throw ValidationError("backend temperature must be >= 0");
    }
    if (parallelism <= 0) {
        throw ValidationError("backend parallelism must be positive");
    }
    if (max_tokens <= 0) {
        throw ValidationError("backend max_tokens must be positive");
    }
    if (max_retries < 0) {
        throw ValidationError("backend max_retries must be >= 0");
    }
    if ((kind == BackendKind::Replay || kind == BackendKind::Record) && fixture_path.empty()) {
        throw ValidationError(to_string(kind) + " backend requires a fixture path");
    }
    if (kind != BackendKind::Replay && endpoint.empty()) {
        throw ValidationError(to_string(kind) + " backend requires an endpoint URL");
    }
    if (model.empty()) {
        throw ValidationError("backend model id must be set");
    }
}

std::uint64_t fingerprint_request(const std::vector<Message>& messages,
                                  const std::string& model,
                                  double temperature,
                                  int max_tokens) {
    std::uint64_t h = fnv1a(nullptr, 0);
    for (const Message& m : messages) {
        fnv_string(h, to_string(m.role));
        fnv_string(h, m.content);
    }
    fnv_string(h, model);
    h = fnv1a(&temperature, sizeof(temperature), h);
    std::uint64_t mt = static_cast<std::uint64_t>(max_tokens);
    h = fnv1a(&mt, sizeof(mt), h);
    return h;
}

std::string fingerprint_hex(std::uint64_t fp) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[fp & 0xf];
        fp >>= 4;
    }
    return out;
}

std::uint64_t parse_fingerprint_hex(const std::string& hex) {
    if (hex.empty() || hex.size() > 16) {
        throw std::invalid_argument("bad fingerprint hex: " + hex);
    }
    std::uint64_t fp = 0;
    for (char c : hex) {
        fp <<= 4;
        if (c >= '0' && c <= '9') fp |= static_cast<std::uint64_t>(c - '0');
        else if (c >= 'a' && c <= 'f') fp |= static_cast<std::uint64_t>(c - 'a' + 10);
        else if (c >= 'A' && c <= 'F') fp |= static_cast<std::uint64_t>(c - 'A' + 10);
        else throw std::invalid_argument("bad fingerprint hex: " + hex);
    }
    return fp;
}

FixtureStore::FixtureStore(const std::filesystem::path& file) : file_(file) {
    if (std::filesystem::exists(file)) {
        jsonl::for_each(
            file,
            [&](int line, const nlohmann::json& obj) {
                std::uint64_t fp = parse_fingerprint_hex(obj.at("fingerprint").get<std::string>());
                std::string text = obj.at("raw_text").get<std::string>();
                auto it = entries_.find(fp);
                if (it != entries_.end() && it->second != text) {
                    std::cerr << "warning: " << file.string() << ":" << line
                              << ": duplicate fixture " << fingerprint_hex(fp)
                              << " with different text; keeping the later entry\n";
                }
                entries_[fp] = std::move(text);
            },
            /*tolerate_torn_tail=*/true);
    }
    // The append writer is opened on first put() so replay-only use never
    // creates or touches the file.
}

std::optional<std::string> FixtureStore::lookup(std::uint64_t fp) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = entries_.find(fp);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void FixtureStore::put(std::uint64_t fp, const std::string& model, const std::string& raw_text) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = entries_.find(fp);
    if (it != entries_.end() && it->second != raw_text) {
        std::cerr << "warning: fixture " << fingerprint_hex(fp)
                  << " overwritten with different text\n";
    }
    entries_[fp] = raw_text;
    if (!file_.empty()) {
        if (!writer_) {
            if (!file_.parent_path().empty()) {
                std::filesystem::create_directories(file_.parent_path());
            }
            writer_ = std::make_unique<jsonl::Writer>(file_);
        }
        writer_->write({{"fingerprint", fingerprint_hex(fp)},
                        {"model", model},
                        {"raw_text", raw_text}});
    }
}

std::size_t FixtureStore::size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return entries_.size();
}

std::string HttpTransport::complete(const BackendConfig& config,
                                    const std::vector<Message>& messages) {
    // Split "scheme://host[:port]/path" into client base and request path.
    const std::string& url = config.endpoint;
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw TransportError("endpoint is not a URL: " + url);
    }
    auto path_begin = url.find('/', scheme_end + 3);
    std::string base = path_begin == std::string::npos ? url : url.substr(0, path_begin);
    std::string path = path_begin == std::string::npos ? "/" : url.substr(path_begin);

    httplib::Client client(base);
    client.set_connection_timeout(config.timeout_seconds, 0);
    client.set_read_timeout(config.timeout_seconds, 0);

    httplib::Headers headers;
    if (const char* key = std::getenv(config.api_key_env.c_str()); key && *key) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    nlohmann::json body = {
        {"model", config.model},
        {"messages", nlohmann::json::array()},
        {"temperature", config.temperature},
        {"max_tokens", config.max_tokens},
    };
    for (const Message& m : messages) {
        body["messages"].push_back({{"role", to_string(m.role)}, {"content", m.content}});
    }

    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) {
        throw TransportError("request to " + base + path +
                             " failed: " + httplib::to_string(res.error()));
    }
    if (res->status == 429) {
        throw RateLimited("rate limited by " + base);
    }
    if (res->status != 200) {
        std::string snippet = res->body.substr(0, 200);
        throw TransportError("HTTP " + std::to_string(res->status) + " from " + base + path +
                             ": " + snippet);
    }
    nlohmann::json parsed;
    try {
        parsed = nlohmann::json::parse(res->body);
        return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw TransportError(std::string("malformed completion response: ") + e.what());
    }
}

Gateway::Gateway(BackendConfig config, std::shared_ptr<ChatTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
    config_.validate();
    if (!transport_ && config_.kind != BackendKind::Replay) {
        transport_ = std::make_shared<HttpTransport>();
    }
    if (config_.kind != BackendKind::Http) {
        store_ = std::make_unique<FixtureStore>(config_.fixture_path);
    }
}

std::string Gateway::transport_with_retry(const std::vector<Message>& messages) {
    thread_local std::mt19937 rng{std::random_device{}()};
    for (int attempt = 0;; ++attempt) {
        try {
            stats_.network_calls.fetch_add(1, std::memory_order_relaxed);
            return transport_->complete(config_, messages);
        } catch (const RateLimited&) {
            if (attempt >= config_.max_retries) throw;
            stats_.rate_limit_retries.fetch_add(1, std::memory_order_relaxed);
            long delay = static_cast<long>(config_.retry_base_ms) << attempt;
            std::uniform_int_distribution<long> jitter(0, delay / 2 + 1);
            std::this_thread::sleep_for(std::chrono::milliseconds(delay + jitter(rng)));
        }
    }
}

ModelResponse Gateway::complete(const RenderedPrompt& prompt) {
    if (prompt.messages.empty()) {
        throw ValidationError("cannot complete an empty prompt");
    }
    ModelResponse resp;
    resp.question_id = prompt.question_id;
    resp.strategy = prompt.strategy;
    resp.format = prompt.format;
    resp.model = config_.model;
    resp.fingerprint = fingerprint_request(prompt.messages, config_.model, config_.temperature,
                                           config_.max_tokens);

    auto start = std::chrono::steady_clock::now();
    switch (config_.kind) {
        case BackendKind::Replay: {
            auto hit = store_->lookup(resp.fingerprint);
            if (!hit) throw FixtureMissing(resp.fingerprint);
            stats_.fixture_hits.fetch_add(1, std::memory_order_relaxed);
            resp.raw_text = *hit;
            break;
        }
        case BackendKind::Record: {
            if (auto hit = store_->lookup(resp.fingerprint)) {
                stats_.fixture_hits.fetch_add(1, std::memory_order_relaxed);
                resp.raw_text = *hit;
                break;
            }
            resp.raw_text = transport_with_retry(prompt.messages);
            store_->put(resp.fingerprint, config_.model, resp.raw_text);
            stats_.fixture_writes.fetch_add(1, std::memory_order_relaxed);
            break;
        }
        case BackendKind::Http:
            resp.raw_text = transport_with_retry(prompt.messages);
            break;
    }
    auto end = std::chrono::steady_clock::now();
    resp.wall_time_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(end - start).count();
    return resp;
}

ModelResponse Gateway::complete_or_capture(const RenderedPrompt& prompt) {
    try {
        return complete(prompt);
    } catch (const std::exception& e) {
        ModelResponse resp;
        resp.question_id = prompt.question_id;
        resp.strategy = prompt.strategy;
        resp.format = prompt.format;
        resp.model = config_.model;
        resp.fingerprint = fingerprint_request(prompt.messages, config_.model,
                                               config_.temperature, config_.max_tokens);
        resp.error = e.what();
        return resp;
    }
}

std::vector<ModelResponse> Gateway::complete_batch(const std::vector<RenderedPrompt>& prompts) {
    std::vector<ModelResponse> out(prompts.size());
    if (prompts.empty()) return out;

    std::size_t workers = std::min<std::size_t>(
        static_cast<std::size_t>(config_.parallelism), prompts.size());
    if (workers <= 1) {
        for (std::size_t i = 0; i < prompts.size(); ++i) {
            out[i] = complete_or_capture(prompts[i]);
        }
        return out;
    }

    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            while (true) {
                std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
                if (i >= prompts.size()) break;
                out[i] = complete_or_capture(prompts[i]);
            }
        });
    }
    for (std::thread& t : pool) t.join();
    return out;
}

}  // namespace biaseval::gateway

#include "scene2prompt/client.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <random>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "scene2prompt/util.hpp"

namespace s2p {

namespace {

using nlohmann::json;

struct SplitUrl {
    std::string origin;  // scheme://host:port
    std::string prefix;  // path prefix, no trailing slash
};

SplitUrl split_base_url(const std::string& base_url) {
    const auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos) {
        throw std::invalid_argument("base_url needs a scheme: " + base_url);
    }
    const auto path_start = base_url.find('/', scheme_end + 3);
    SplitUrl out;
    if (path_start == std::string::npos) {
        out.origin = base_url;
    } else {
        out.origin = base_url.substr(0, path_start);
        out.prefix = base_url.substr(path_start);
        while (!out.prefix.empty() && out.prefix.back() == '/') {
            out.prefix.pop_back();
        }
    }
    return out;
}

struct ParsedAnswer {
    bool ok = false;
    std::string answer;
    std::string error;
};

ParsedAnswer parse_answer(const std::string& body) {
    ParsedAnswer out;
    json doc = json::parse(body, nullptr, false);
    if (doc.is_discarded()) {
        out.error = "response body is not valid JSON";
        return out;
    }
    if (!doc.contains("choices") || !doc["choices"].is_array() ||
        doc["choices"].empty()) {
        out.error = "response has no choices";
        return out;
    }
    const auto& msg = doc["choices"][0];
    if (!msg.contains("message") || !msg["message"].contains("content") ||
        !msg["message"]["content"].is_string()) {
        out.error = "response choice has no message content";
        return out;
    }
    out.ok = true;
    out.answer = trim(msg["message"]["content"].get<std::string>());
    return out;
}

std::filesystem::path cache_path(const EndpointConfig& config, const std::string& key) {
    return config.cache_dir / (key + ".json");
}

void cache_store(const EndpointConfig& config, const std::string& key,
                 const std::string& body) {
    std::filesystem::create_directories(config.cache_dir);
    // temp + rename keeps concurrent writers of the same key safe
    static std::atomic<std::uint64_t> counter{0};
    const auto tmp = config.cache_dir /
                     (key + ".tmp" + std::to_string(counter.fetch_add(1)));
    write_file(tmp, body);
    std::error_code ec;
    std::filesystem::rename(tmp, cache_path(config, key), ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
    }
}

}  // namespace

std::string api_key_from_env() {
    const char* v = std::getenv("SCENE2PROMPT_API_KEY");
    return v ? v : "";
}

AskResult ask(const PromptBundle& bundle, const EndpointConfig& config) {
    const auto started = std::chrono::steady_clock::now();
    AskResult result;

    const std::string body = render_chat_request(bundle, config.wire);
    const std::string key = sha256_hex(body);

    if (!config.cache_bypass) {
        const auto path = cache_path(config, key);
        std::error_code ec;
        if (std::filesystem::exists(path, ec)) {
            const std::string cached = read_file(path);
            const ParsedAnswer parsed = parse_answer(cached);
            if (parsed.ok) {
                result.ok = true;
                result.answer = parsed.answer;
                result.raw_response = cached;
                result.from_cache = true;
                return result;
            }
            // unreadable cache entry: fall through to the network
        }
    }

    SplitUrl url;
    try {
        url = split_base_url(config.base_url);
    } catch (const std::exception& e) {
        result.error = AskError::Transport;
        result.error_message = e.what();
        return result;
    }

    httplib::Client cli(url.origin);
    const auto timeout = std::chrono::duration<double>(config.timeout_s);
    cli.set_connection_timeout(
        std::chrono::duration_cast<std::chrono::milliseconds>(timeout));
    cli.set_read_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(timeout));
    cli.set_write_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(timeout));

    std::string api_key = config.api_key.empty() ? api_key_from_env() : config.api_key;
    httplib::Headers headers;
    if (!api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + api_key);
    }

    std::mt19937_64 rng(config.jitter_seed != 0
                            ? config.jitter_seed ^ fnv1a64(key.data(), key.size())
                            : std::random_device{}());
    std::uniform_real_distribution<double> jitter(0.8, 1.2);

    const std::string target = url.prefix + "/chat/completions";
    for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
        AttemptRecord record;
        if (attempt > 0) {
            const double nominal = config.backoff_base_s * std::pow(2.0, attempt - 1);
            record.backoff_before_s = nominal * jitter(rng);
            std::this_thread::sleep_for(
                std::chrono::duration<double>(record.backoff_before_s));
        }

        auto res = cli.Post(target, headers, body, "application/json");
        if (!res) {
            record.error = httplib::to_string(res.error());
            result.attempts.push_back(record);
            continue;  // transport failure: retry
        }
        record.status = res->status;
        if (res->status >= 500) {
            record.error = "server error";
            result.attempts.push_back(record);
            continue;
        }
        result.attempts.push_back(record);
        if (res->status < 200 || res->status >= 300) {
            result.error = AskError::Transport;
            result.error_message =
                "HTTP " + std::to_string(res->status) + " (not retryable)";
            result.latency_s =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                    .count();
            return result;
        }

        const ParsedAnswer parsed = parse_answer(res->body);
        result.latency_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                .count();
        if (!parsed.ok) {
            result.error = AskError::Protocol;
            result.error_message = parsed.error;
            result.raw_response = res->body;
            return result;
        }
        result.ok = true;
        result.answer = parsed.answer;
        result.raw_response = res->body;
        if (!config.cache_bypass) {
            cache_store(config, key, res->body);
        }
        return result;
    }

    result.error = AskError::Transport;
    result.error_message = "exhausted " + std::to_string(config.max_retries + 1) +
                           " attempts against " + config.base_url;
    result.latency_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

std::vector<AskResult> ask_batch(const std::vector<PromptBundle>& bundles,
                                 const EndpointConfig& config) {
    std::vector<AskResult> results(bundles.size());
    if (bundles.empty()) {
        return results;
    }
    const int workers = std::max(1, std::min<int>(config.parallelism,
                                                  int(bundles.size())));
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= bundles.size()) {
                    return;
                }
                results[i] = ask(bundles[i], config);
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    return results;
}

}  // namespace s2p

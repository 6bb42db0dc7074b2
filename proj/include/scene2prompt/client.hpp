#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "scene2prompt/prompt.hpp"

namespace s2p {

struct EndpointConfig {
    std::string base_url;           // e.g. http://127.0.0.1:8080 or .../v1
    std::string api_key;            // filled from SCENE2PROMPT_API_KEY when empty
    double timeout_s = 60.0;
    int max_retries = 3;            // retries after the first attempt
    int parallelism = 4;
    double backoff_base_s = 1.0;    // doubles per retry, +/-20% jitter
    std::filesystem::path cache_dir = "cache";
    bool cache_bypass = false;
    std::uint64_t jitter_seed = 0;  // 0 = nondeterministic
    WireConfig wire;
};

/// Reads SCENE2PROMPT_API_KEY; empty when unset.
std::string api_key_from_env();

struct AttemptRecord {
    int status = 0;           // HTTP status, 0 for transport failures
    std::string error;        // transport/protocol detail when failed
    double backoff_before_s = 0.0;  // delay slept before this attempt
};

enum class AskError { None, Transport, Protocol };

struct AskResult {
    bool ok = false;
    std::string answer;       // first assistant message, trimmed
    std::string raw_response;
    double latency_s = 0.0;
    bool from_cache = false;
    AskError error = AskError::None;
    std::string error_message;
    std::vector<AttemptRecord> attempts;
};

/// Sends one assembled bundle to {base_url}/chat/completions. Retries
/// 5xx/timeouts with exponential backoff; 4xx fails immediately.
/// Successful responses are cached under cache_dir keyed by the request
/// body hash, and reruns are served from the cache.
AskResult ask(const PromptBundle& bundle, const EndpointConfig& config);

/// Bounded-parallel ask over many bundles; at most config.parallelism
/// requests in flight, results in input order, per-item failures recorded
/// without aborting the batch.
std::vector<AskResult> ask_batch(const std::vector<PromptBundle>& bundles,
                                 const EndpointConfig& config);

}  // namespace s2p

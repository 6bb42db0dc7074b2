#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <mutex>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "scene2prompt/client.hpp"
#include "scene2prompt/util.hpp"

using namespace s2p;

namespace {

// In-process chat endpoint with request instrumentation.
class MockServer {
public:
    std::atomic<int> requests{0};
    std::atomic<int> in_flight{0};
    std::atomic<int> max_in_flight{0};
    std::vector<int> status_plan;  // per-request status; empty -> always 200
    std::string answer = "brown";
    int handler_delay_ms = 0;
    std::mutex body_mutex;
    std::vector<std::string> bodies;

    MockServer() {
        server_.Post("/chat/completions", [this](const httplib::Request& req,
                                                 httplib::Response& res) {
            const int current = in_flight.fetch_add(1) + 1;
            int seen = max_in_flight.load();
            while (current > seen && !max_in_flight.compare_exchange_weak(seen, current)) {
            }
            if (handler_delay_ms > 0) {
                std::this_thread::sleep_for(std::chrono::milliseconds(handler_delay_ms));
            }
            {
                std::lock_guard<std::mutex> lock(body_mutex);
                bodies.push_back(req.body);
            }
            const int idx = requests.fetch_add(1);
            int status = 200;
            if (idx < int(status_plan.size())) {
                status = status_plan[idx];
            }
            if (status == 200) {
                nlohmann::json body;
                body["choices"] = {{{"message", {{"content", answer}}}}};
                res.set_content(body.dump(), "application/json");
            } else {
                res.status = status;
                res.set_content("{}", "application/json");
            }
            in_flight.fetch_sub(1);
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this]() { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~MockServer() {
        server_.stop();
        thread_.join();
    }

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

PromptBundle text_bundle(const std::string& question) {
    return assemble_prompt("scene_t", question, AblationMode::CT, std::nullopt,
                           "<desk> at [0.15, 1.17, 0.38].", {});
}

EndpointConfig fast_config(const MockServer& server,
                           const std::filesystem::path& cache_dir) {
    EndpointConfig config;
    config.base_url = server.url();
    config.timeout_s = 5.0;
    config.backoff_base_s = 0.02;
    config.jitter_seed = 99;
    config.cache_dir = cache_dir;
    return config;
}

std::filesystem::path fresh_cache(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "s2p_client_tests" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("happy path returns the trimmed answer") {
    MockServer server;
    server.answer = "  brown \n";
    const auto config = fast_config(server, fresh_cache("happy"));
    const auto result = ask(text_bundle("What color is the desk?"), config);
    REQUIRE(result.ok);
    CHECK(result.answer == "brown");
    CHECK_FALSE(result.from_cache);
    CHECK(result.attempts.size() == 1);
    CHECK(result.attempts[0].status == 200);
}

TEST_CASE("5xx retries with exponential backoff, then succeeds") {
    MockServer server;
    server.status_plan = {500, 500, 200};
    const auto config = fast_config(server, fresh_cache("retry"));
    const auto result = ask(text_bundle("q1?"), config);
    REQUIRE(result.ok);
    CHECK(result.attempts.size() == 3);
    CHECK(result.attempts[0].backoff_before_s == 0.0);
    // nominal delays 0.02 and 0.04 with +/-20% jitter
    CHECK(result.attempts[1].backoff_before_s >= 0.02 * 0.8);
    CHECK(result.attempts[1].backoff_before_s <= 0.02 * 1.2);
    CHECK(result.attempts[2].backoff_before_s >= 0.04 * 0.8);
    CHECK(result.attempts[2].backoff_before_s <= 0.04 * 1.2);
    CHECK(server.requests.load() == 3);
}

TEST_CASE("exhausted retries surface a transport error with the attempt log") {
    MockServer server;
    server.status_plan = {500, 503, 500, 502};
    auto config = fast_config(server, fresh_cache("exhaust"));
    config.max_retries = 3;
    const auto result = ask(text_bundle("q2?"), config);
    CHECK_FALSE(result.ok);
    CHECK(result.error == AskError::Transport);
    CHECK(result.attempts.size() == 4);
}

TEST_CASE("4xx fails immediately with exactly one attempt") {
    MockServer server;
    server.status_plan = {401};
    const auto config = fast_config(server, fresh_cache("auth"));
    const auto result = ask(text_bundle("q3?"), config);
    CHECK_FALSE(result.ok);
    CHECK(result.error == AskError::Transport);
    CHECK(result.attempts.size() == 1);
    CHECK(server.requests.load() == 1);
}

TEST_CASE("retried request bodies are byte-identical") {
    MockServer server;
    server.status_plan = {500, 200};
    const auto config = fast_config(server, fresh_cache("bodies"));
    const auto result = ask(text_bundle("q4?"), config);
    REQUIRE(result.ok);
    REQUIRE(server.bodies.size() == 2);
    CHECK(server.bodies[0] == server.bodies[1]);
}

TEST_CASE("malformed response body is a protocol error") {
    httplib::Server raw;
    raw.Post("/chat/completions", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("{\"unexpected\": true}", "application/json");
    });
    const int port = raw.bind_to_any_port("127.0.0.1");
    std::thread t([&]() { raw.listen_after_bind(); });
    raw.wait_until_ready();

    EndpointConfig config;
    config.base_url = "http://127.0.0.1:" + std::to_string(port);
    config.cache_dir = fresh_cache("protocol");
    config.backoff_base_s = 0.01;
    const auto result = ask(text_bundle("q5?"), config);
    CHECK_FALSE(result.ok);
    CHECK(result.error == AskError::Protocol);
    raw.stop();
    t.join();
}

TEST_CASE("batch holds the parallelism bound and preserves order") {
    MockServer server;
    server.handler_delay_ms = 40;
    auto config = fast_config(server, fresh_cache("batch"));
    config.parallelism = 4;
    config.cache_bypass = true;

    std::vector<PromptBundle> bundles;
    for (int i = 0; i < 10; ++i) {
        bundles.push_back(text_bundle("question " + std::to_string(i) + "?"));
    }
    const auto results = ask_batch(bundles, config);
    REQUIRE(results.size() == 10);
    for (const auto& r : results) {
        CHECK(r.ok);
    }
    CHECK(server.max_in_flight.load() <= 4);
    CHECK(server.max_in_flight.load() >= 2);
    CHECK(server.requests.load() == 10);
}

TEST_CASE("batch records per-item failures without aborting") {
    MockServer server;
    // third request fails hard (404: no retry)
    server.status_plan = {200, 200, 404, 200};
    auto config = fast_config(server, fresh_cache("partial"));
    config.parallelism = 1;  // deterministic request order
    std::vector<PromptBundle> bundles;
    for (int i = 0; i < 4; ++i) {
        bundles.push_back(text_bundle("ordered " + std::to_string(i) + "?"));
    }
    const auto results = ask_batch(bundles, config);
    REQUIRE(results.size() == 4);
    CHECK(results[0].ok);
    CHECK(results[1].ok);
    CHECK_FALSE(results[2].ok);
    CHECK(results[3].ok);
}

TEST_CASE("empty batch returns an empty result") {
    MockServer server;
    const auto config = fast_config(server, fresh_cache("emptyb"));
    CHECK(ask_batch({}, config).empty());
}

TEST_CASE("cache serves reruns without touching the network") {
    MockServer server;
    const auto config = fast_config(server, fresh_cache("cache"));
    const auto bundle = text_bundle("cached question?");

    const auto first = ask(bundle, config);
    REQUIRE(first.ok);
    CHECK_FALSE(first.from_cache);
    CHECK(server.requests.load() == 1);

    const auto second = ask(bundle, config);
    REQUIRE(second.ok);
    CHECK(second.from_cache);
    CHECK(second.answer == first.answer);
    CHECK(server.requests.load() == 1);

    // bypass flag goes back to the network
    auto bypass = config;
    bypass.cache_bypass = true;
    const auto third = ask(bundle, bypass);
    REQUIRE(third.ok);
    CHECK_FALSE(third.from_cache);
    CHECK(server.requests.load() == 2);
}

TEST_CASE("cache files are keyed by the request body hash") {
    MockServer server;
    const auto cache_dir = fresh_cache("keys");
    const auto config = fast_config(server, cache_dir);
    const auto bundle = text_bundle("key question?");
    ask(bundle, config);
    const auto expected =
        cache_dir / (sha256_hex(render_chat_request(bundle, config.wire)) + ".json");
    CHECK(std::filesystem::exists(expected));
}

TEST_CASE("unreachable endpoint exhausts retries as a transport error") {
    EndpointConfig config;
    config.base_url = "http://127.0.0.1:9";  // discard port: nothing listens
    config.max_retries = 1;
    config.backoff_base_s = 0.01;
    config.timeout_s = 0.5;
    config.cache_dir = fresh_cache("unreachable");
    const auto result = ask(text_bundle("q?"), config);
    CHECK_FALSE(result.ok);
    CHECK(result.error == AskError::Transport);
    CHECK(result.attempts.size() == 2);
}

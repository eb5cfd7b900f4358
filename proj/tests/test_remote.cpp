#include <atomic>
#include <doctest.h>
#include <thread>

#include <httplib.h>

#include "iwsi/errors.hpp"
#include "iwsi/remote.hpp"

using namespace iwsi;

namespace {

// In-process mock of the inference-server protocol.
struct MockServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::atomic<int> score_requests{0};
    std::atomic<int> generate_requests{0};
    std::atomic<int> fail_next{0}; // respond 500 to this many requests

    MockServer() {
        server.Post("/v1/score", [this](const httplib::Request& req, httplib::Response& res) {
            ++score_requests;
            if (fail_next.fetch_sub(1) > 0) {
                res.status = 500;
                return;
            }
            auto body = nlohmann::json::parse(req.body);
            nlohmann::json losses = nlohmann::json::array();
            nlohmann::json counts = nlohmann::json::array();
            for (const auto& item : body.at("items")) {
                // loss encodes the target length so ordering is observable
                losses.push_back(static_cast<double>(item.at("target").get<std::string>().size()));
                counts.push_back(1);
            }
            res.set_content(
                nlohmann::json{{"losses", losses}, {"token_counts", counts}}.dump(),
                "application/json");
        });
        server.Post("/v1/generate", [this](const httplib::Request& req, httplib::Response& res) {
            ++generate_requests;
            if (fail_next.fetch_sub(1) > 0) {
                res.status = 500;
                return;
            }
            auto body = nlohmann::json::parse(req.body);
            int n = body.at("n").get<int>();
            nlohmann::json completions = nlohmann::json::array();
            for (int i = 0; i < n; ++i)
                completions.push_back("completion " + std::to_string(i) + ". The answer is " +
                                      std::to_string(i) + ".");
            res.set_content(nlohmann::json{{"completions", completions}}.dump(),
                            "application/json");
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }

    ~MockServer() {
        server.stop();
        thread.join();
    }

    RemoteEndpoint endpoint(int max_batch = 16, int retries = 0) const {
        RemoteEndpoint e;
        e.base_url = "http://127.0.0.1:" + std::to_string(port);
        e.max_batch = max_batch;
        e.retries = retries;
        e.backoff = std::chrono::milliseconds(1);
        return e;
    }
};

std::vector<ScoreItem> items_of_lengths(const std::vector<int>& lengths) {
    std::vector<ScoreItem> items;
    for (int len : lengths) items.push_back({"ctx", std::string(static_cast<std::size_t>(len), 'x')});
    return items;
}

} // namespace

TEST_CASE("score chunks by max_batch and preserves order") {
    MockServer mock;
    RemoteBackend backend(mock.endpoint(2));

    auto losses = backend.score(items_of_lengths({1, 2, 3, 4, 5}));
    CHECK(mock.score_requests.load() == 3); // ceil(5 / 2)
    CHECK(losses == std::vector<double>{1.0, 2.0, 3.0, 4.0, 5.0});

    CHECK(backend.score({}).empty());
    CHECK(mock.score_requests.load() == 3); // empty batch sends nothing
}

TEST_CASE("transient failures are retried with backoff") {
    MockServer mock;
    RemoteBackend backend(mock.endpoint(16, 2));
    mock.fail_next = 1;
    auto losses = backend.score(items_of_lengths({3}));
    CHECK(losses == std::vector<double>{3.0});
    CHECK(mock.score_requests.load() == 2); // one failure, one success
}

TEST_CASE("exhausted retries raise RemoteError with the failed indices") {
    MockServer mock;
    RemoteBackend backend(mock.endpoint(2, 1));
    mock.fail_next = 100;
    try {
        backend.score(items_of_lengths({1, 2, 3}));
        FAIL("expected RemoteError");
    } catch (const RemoteError& e) {
        CHECK(e.failed_indices() == std::vector<std::size_t>{0, 1});
        CHECK(e.exit_code() == ExitCode::backend);
    }
    CHECK(mock.score_requests.load() == 2); // retries + 1 attempts on the first chunk
}

TEST_CASE("generate returns n completions and validates the count") {
    MockServer mock;
    RemoteBackend backend(mock.endpoint());
    auto completions = backend.complete("prompt text", 3, 1.1, 42);
    REQUIRE(completions.size() == 3);
    CHECK(completions[0] == "completion 0. The answer is 0.");
    CHECK(mock.generate_requests.load() == 1);
}

TEST_CASE("unreachable servers fail after retries") {
    RemoteEndpoint e;
    e.base_url = "http://127.0.0.1:1"; // nothing listens here
    e.retries = 1;
    e.backoff = std::chrono::milliseconds(1);
    e.timeout = std::chrono::milliseconds(200);
    RemoteBackend backend(e);
    CHECK_THROWS_AS(backend.complete("x", 1, 1.0, 0), RemoteError);
}

TEST_CASE("endpoint validation") {
    RemoteEndpoint e;
    e.max_batch = 0;
    CHECK_THROWS_AS(RemoteBackend{e}, Error);
}

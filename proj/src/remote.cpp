#include "iwsi/remote.hpp"

#include <thread>

#include <httplib.h>

#include "iwsi/errors.hpp"

namespace iwsi {

void RemoteEndpoint::validate() const {
    if (base_url.empty()) throw Error(ExitCode::precondition, "remote base_url must be set");
    if (max_batch < 1) throw Error(ExitCode::precondition, "max_batch must be >= 1");
    if (retries < 0) throw Error(ExitCode::precondition, "retries must be >= 0");
    // doubling keeps the retry delays strictly increasing only from a
    // positive base
    if (backoff.count() < 1) throw Error(ExitCode::precondition, "backoff must be >= 1ms");
}

RemoteBackend::RemoteBackend(RemoteEndpoint endpoint) : endpoint_(std::move(endpoint)) {
    endpoint_.validate();
}

ordered_json RemoteBackend::post_json(const std::string& path, const ordered_json& body) const {
    std::string payload = body.dump();
    std::string last_error;
    auto delay = endpoint_.backoff;

    for (int attempt = 0; attempt <= endpoint_.retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(delay);
            delay *= 2;
        }
        httplib::Client client(endpoint_.base_url);
        client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(
                                          endpoint_.timeout).count(),
                                      (endpoint_.timeout.count() % 1000) * 1000);
        client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(
                                    endpoint_.timeout).count(),
                                (endpoint_.timeout.count() % 1000) * 1000);

        auto res = client.Post(path, payload, "application/json");
        if (!res) {
            last_error = "connection failed: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP " + std::to_string(res->status) + " from " + path;
            continue;
        }
        ordered_json parsed = ordered_json::parse(res->body, nullptr, false);
        if (parsed.is_discarded()) {
            last_error = "invalid JSON body from " + path;
            continue;
        }
        return parsed;
    }
    throw RemoteError("request to " + endpoint_.base_url + path + " failed after " +
                      std::to_string(endpoint_.retries + 1) + " attempts: " + last_error);
}

std::vector<std::string> RemoteBackend::complete(const std::string& prompt, int n,
                                                 double temperature, std::uint64_t seed) const {
    if (n < 1) throw Error(ExitCode::precondition, "need at least one completion");
    ordered_json body{{"prompt", prompt}, {"n", n}, {"temperature", temperature}, {"seed", seed}};
    ordered_json res = post_json("/v1/generate", body);
    if (!res.contains("completions") || !res["completions"].is_array())
        throw RemoteError("/v1/generate response missing completions array");
    auto completions = res["completions"].get<std::vector<std::string>>();
    if (completions.size() != static_cast<std::size_t>(n))
        throw RemoteError("/v1/generate returned " + std::to_string(completions.size()) +
                          " completions, expected " + std::to_string(n));
    return completions;
}

std::vector<double> RemoteBackend::score(const std::vector<ScoreItem>& items) const {
    std::vector<double> losses;
    losses.reserve(items.size());

    for (std::size_t begin = 0; begin < items.size();
         begin += static_cast<std::size_t>(endpoint_.max_batch)) {
        std::size_t end =
            std::min(items.size(), begin + static_cast<std::size_t>(endpoint_.max_batch));
        ordered_json chunk = ordered_json::array();
        for (std::size_t i = begin; i < end; ++i)
            chunk.push_back(ordered_json{{"context", items[i].context}, {"target", items[i].target}});

        ordered_json res;
        try {
            res = post_json("/v1/score", ordered_json{{"items", std::move(chunk)}});
        } catch (const RemoteError& e) {
            std::vector<std::size_t> failed;
            for (std::size_t i = begin; i < end; ++i) failed.push_back(i);
            throw RemoteError(e.what(), std::move(failed));
        }
        if (!res.contains("losses") || !res["losses"].is_array())
            throw RemoteError("/v1/score response missing losses array");
        auto chunk_losses = res["losses"].get<std::vector<double>>();
        if (chunk_losses.size() != end - begin)
            throw RemoteError("/v1/score returned " + std::to_string(chunk_losses.size()) +
                              " losses for " + std::to_string(end - begin) + " items");
        losses.insert(losses.end(), chunk_losses.begin(), chunk_losses.end());
    }
    return losses;
}

} // namespace iwsi

#pragma once

#include <chrono>
#include <cstdint>
#include <string>

#include "iwsi/backend.hpp"

namespace iwsi {

struct RemoteEndpoint {
    std::string base_url = "http://127.0.0.1:8080";
    std::chrono::milliseconds timeout{5000};
    int max_batch = 16;
    int retries = 2;
    std::chrono::milliseconds backoff{100}; // doubles per attempt

    void validate() const;
};

// HTTP client for an inference server speaking the /v1/score and /v1/generate
// protocol (JSON bodies). Failed requests retry with strictly increasing
// backoff; once retries are exhausted the stage aborts, since partially
// scored pools would bias the valid mean.
class RemoteBackend : public Backend {
public:
    explicit RemoteBackend(RemoteEndpoint endpoint);

    const RemoteEndpoint& endpoint() const { return endpoint_; }

    // POST /v1/generate {"prompt","n","temperature","seed"}
    //   -> {"completions":["..."]}
    std::vector<std::string> complete(const std::string& prompt, int n, double temperature,
                                      std::uint64_t seed) const override;

    // POST /v1/score {"items":[{"context","target"}]}
    //   -> {"losses":[...],"token_counts":[...]}
    // Items are sent in chunks of max_batch, in order; results are
    // concatenated positionally. A failing chunk reports the indices of the
    // items it carried.
    std::vector<double> score(const std::vector<ScoreItem>& items) const override;

private:
    ordered_json post_json(const std::string& path, const ordered_json& body) const;

    RemoteEndpoint endpoint_;
};

} // namespace iwsi

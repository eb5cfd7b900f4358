#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "iwsi/records.hpp"
#include "iwsi/remote.hpp"
#include "iwsi/tokenizer.hpp"

namespace iwsi {

struct ToyConfig {
    int order = 3;
    double alpha = 0.05;
    TokenizerMode tokenizer = TokenizerMode::word;
    int max_tokens = 160;
};

// Resolved run configuration. Precedence: CLI flags > IWSI_* environment >
// config file > defaults. The config file is plain `key = value` lines with
// '#' comments; keys mirror the json layout (backend, remote.base_url,
// remote.timeout_ms, remote.max_batch, remote.retries, remote.backoff_ms,
// toy.order, toy.alpha, toy.tokenizer, toy.max_tokens, template, seed).
struct RunConfig {
    std::string backend = "toy"; // toy | remote
    RemoteEndpoint remote;
    ToyConfig toy;
    std::optional<std::string> template_path;
    std::optional<std::uint64_t> seed;

    void apply_file(const std::filesystem::path& path);
    void apply_env(); // IWSI_BACKEND, IWSI_REMOTE_BASE_URL, ...
    void set_key(const std::string& key, const std::string& value);

    ordered_json to_json() const; // recorded in manifests
    static RunConfig from_json(const ordered_json& j); // replay path
};

} // namespace iwsi

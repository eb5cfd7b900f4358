#include "iwsi/config.hpp"

#include <cstdlib>
#include <fstream>

#include "iwsi/errors.hpp"

namespace iwsi {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

long long parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw Error(ExitCode::precondition, "config key " + key + ": not an integer: " + value);
    }
}

double parse_float(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw Error(ExitCode::precondition, "config key " + key + ": not a number: " + value);
    }
}

} // namespace

void RunConfig::set_key(const std::string& key, const std::string& value) {
    if (key == "backend") {
        if (value != "toy" && value != "remote")
            throw Error(ExitCode::precondition, "backend must be toy or remote");
        backend = value;
    } else if (key == "remote.base_url") {
        remote.base_url = value;
    } else if (key == "remote.timeout_ms") {
        remote.timeout = std::chrono::milliseconds(parse_int(key, value));
    } else if (key == "remote.max_batch") {
        remote.max_batch = static_cast<int>(parse_int(key, value));
    } else if (key == "remote.retries") {
        remote.retries = static_cast<int>(parse_int(key, value));
    } else if (key == "remote.backoff_ms") {
        remote.backoff = std::chrono::milliseconds(parse_int(key, value));
    } else if (key == "toy.order") {
        toy.order = static_cast<int>(parse_int(key, value));
    } else if (key == "toy.alpha") {
        toy.alpha = parse_float(key, value);
    } else if (key == "toy.tokenizer") {
        toy.tokenizer = tokenizer_mode_from_string(value);
    } else if (key == "toy.max_tokens") {
        toy.max_tokens = static_cast<int>(parse_int(key, value));
    } else if (key == "template") {
        template_path = value;
    } else if (key == "seed") {
        seed = static_cast<std::uint64_t>(parse_int(key, value));
    } else {
        throw Error(ExitCode::precondition, "unknown config key: " + key);
    }
}

void RunConfig::apply_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string stripped = trim(line);
        if (stripped.empty() || stripped.front() == '#') continue;
        std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw Error(ExitCode::precondition, "config line " + std::to_string(lineno) +
                                                    ": expected key = value");
        set_key(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
    }
}

void RunConfig::apply_env() {
    static const std::pair<const char*, const char*> mapping[] = {
        {"IWSI_BACKEND", "backend"},
        {"IWSI_REMOTE_BASE_URL", "remote.base_url"},
        {"IWSI_REMOTE_TIMEOUT_MS", "remote.timeout_ms"},
        {"IWSI_REMOTE_MAX_BATCH", "remote.max_batch"},
        {"IWSI_REMOTE_RETRIES", "remote.retries"},
        {"IWSI_REMOTE_BACKOFF_MS", "remote.backoff_ms"},
        {"IWSI_TOY_ORDER", "toy.order"},
        {"IWSI_TOY_ALPHA", "toy.alpha"},
        {"IWSI_TOY_TOKENIZER", "toy.tokenizer"},
        {"IWSI_TOY_MAX_TOKENS", "toy.max_tokens"},
        {"IWSI_TEMPLATE", "template"},
        {"IWSI_SEED", "seed"},
    };
    for (const auto& [env, key] : mapping) {
        const char* value = std::getenv(env);
        if (value != nullptr && *value != '\0') set_key(key, value);
    }
}

ordered_json RunConfig::to_json() const {
    ordered_json j{{"backend", backend}};
    j["remote"] = ordered_json{{"base_url", remote.base_url},
                               {"timeout_ms", remote.timeout.count()},
                               {"max_batch", remote.max_batch},
                               {"retries", remote.retries},
                               {"backoff_ms", remote.backoff.count()}};
    j["toy"] = ordered_json{{"order", toy.order},
                            {"alpha", toy.alpha},
                            {"tokenizer", to_string(toy.tokenizer)},
                            {"max_tokens", toy.max_tokens}};
    j["template"] = template_path ? ordered_json(*template_path) : ordered_json(nullptr);
    j["seed"] = seed ? ordered_json(*seed) : ordered_json(nullptr);
    return j;
}

RunConfig RunConfig::from_json(const ordered_json& j) {
    RunConfig cfg;
    cfg.backend = j.at("backend").get<std::string>();
    const auto& r = j.at("remote");
    cfg.remote.base_url = r.at("base_url").get<std::string>();
    cfg.remote.timeout = std::chrono::milliseconds(r.at("timeout_ms").get<long long>());
    cfg.remote.max_batch = r.at("max_batch").get<int>();
    cfg.remote.retries = r.at("retries").get<int>();
    cfg.remote.backoff = std::chrono::milliseconds(r.at("backoff_ms").get<long long>());
    const auto& t = j.at("toy");
    cfg.toy.order = t.at("order").get<int>();
    cfg.toy.alpha = t.at("alpha").get<double>();
    cfg.toy.tokenizer = tokenizer_mode_from_string(t.at("tokenizer").get<std::string>());
    cfg.toy.max_tokens = t.at("max_tokens").get<int>();
    if (!j.at("template").is_null()) cfg.template_path = j.at("template").get<std::string>();
    if (!j.at("seed").is_null()) cfg.seed = j.at("seed").get<std::uint64_t>();
    return cfg;
}

} // namespace iwsi

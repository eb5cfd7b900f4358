#include "iwsi/manifest.hpp"

#include <fstream>
#include <memory>
#include <sstream>

#include <openssl/evp.h>

#include "iwsi/errors.hpp"
#include "iwsi/version.hpp"

namespace iwsi {

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + " for hashing");

    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                                EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
        throw Error(ExitCode::internal, "sha256 init failed");

    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        std::streamsize got = in.gcount();
        if (got > 0 && EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(got)) != 1)
            throw Error(ExitCode::internal, "sha256 update failed");
    }
    if (in.bad()) throw IoError("read failure on " + path.string());

    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
        throw Error(ExitCode::internal, "sha256 final failed");

    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

void RunManifest::add_input(const std::filesystem::path& path) {
    inputs.push_back({path.string(), sha256_file(path)});
}

void RunManifest::add_output(const std::filesystem::path& path) {
    outputs.push_back({path.string(), sha256_file(path)});
}

namespace {

ordered_json hashes_to_json(const std::vector<FileHash>& hashes) {
    ordered_json arr = ordered_json::array();
    for (const FileHash& h : hashes)
        arr.push_back(ordered_json{{"path", h.path}, {"sha256", h.sha256}});
    return arr;
}

std::vector<FileHash> hashes_from_json(const ordered_json& arr) {
    std::vector<FileHash> out;
    for (const auto& j : arr)
        out.push_back({j.at("path").get<std::string>(), j.at("sha256").get<std::string>()});
    return out;
}

} // namespace

ordered_json RunManifest::to_json() const {
    return ordered_json{{"tool_version", tool_version.empty() ? version_string() : tool_version},
                        {"command", command},
                        {"params", params},
                        {"inputs", hashes_to_json(inputs)},
                        {"outputs", hashes_to_json(outputs)}};
}

RunManifest RunManifest::from_json(const ordered_json& j) {
    RunManifest m;
    m.tool_version = j.at("tool_version").get<std::string>();
    m.command = j.at("command").get<std::string>();
    m.params = j.at("params");
    m.inputs = hashes_from_json(j.at("inputs"));
    m.outputs = hashes_from_json(j.at("outputs"));
    return m;
}

void RunManifest::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << to_json().dump(2) << '\n';
    if (!out) throw IoError("write failure on " + path.string());
}

RunManifest RunManifest::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    ordered_json j = ordered_json::parse(ss.str(), nullptr, false);
    if (j.is_discarded()) throw SchemaError("invalid JSON in " + path.string());
    return from_json(j);
}

std::filesystem::path manifest_path_for(const std::filesystem::path& primary_output) {
    std::filesystem::path p = primary_output;
    p += ".manifest.json";
    return p;
}

} // namespace iwsi

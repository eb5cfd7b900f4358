#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "iwsi/records.hpp"

namespace iwsi {

std::string sha256_file(const std::filesystem::path& path);

struct FileHash {
    std::string path;
    std::string sha256;
};

// Everything needed to re-run a CLI stage and check its outputs byte for
// byte: the resolved parameters plus input and output hashes.
struct RunManifest {
    std::string tool_version;
    std::string command;
    ordered_json params = ordered_json::object();
    std::vector<FileHash> inputs;
    std::vector<FileHash> outputs;

    void add_input(const std::filesystem::path& path);
    void add_output(const std::filesystem::path& path);

    ordered_json to_json() const;
    static RunManifest from_json(const ordered_json& j);
    void save(const std::filesystem::path& path) const;
    static RunManifest load(const std::filesystem::path& path);
};

std::filesystem::path manifest_path_for(const std::filesystem::path& primary_output);

} // namespace iwsi

#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace iwsi {

// Shortest representation that round-trips the exact double; keeps CSV
// outputs byte-reproducible.
std::string format_double(double value);

void write_csv(const std::filesystem::path& path, const std::string& header,
               const std::vector<std::vector<std::string>>& rows);

} // namespace iwsi

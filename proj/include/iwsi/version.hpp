#pragma once

#include <string>

namespace iwsi {

inline std::string version_string() { return "iwsi 0.1.0"; }

} // namespace iwsi

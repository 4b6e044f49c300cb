// cli.hpp
//
// Command-line pipeline: analyze | classify | policy | simulate | table2.
// Kept in the library so the stages are callable in-process from tests.

#pragma once

#include <string>
#include <vector>

namespace echoscope::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

int run(const std::vector<std::string>& args);
int run(int argc, const char* const* argv);

} // namespace echoscope::cli

#pragma once

#include <string>
#include <vector>

namespace omrsc::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode { ok = 0, failure = 1, bad_arguments = 2, format_error = 3, numerical_failure = 4 };

// Runs one subcommand; args excludes the program name. Every successful
// command also writes <primary output>.manifest.json.
int run(const std::vector<std::string>& args);
int run(int argc, char** argv);

}  // namespace omrsc::cli

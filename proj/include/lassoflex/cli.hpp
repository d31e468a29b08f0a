#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

namespace lfn::cli {

inline constexpr const char* kToolName = "lassoflex";
inline constexpr const char* kToolVersion = "0.1.0";

/// Exit codes: 0 success, 1 internal failure, 2 configuration error, 3 data
/// error, 4 numeric failure.
enum ExitCode : int { kOk = 0, kInternal = 1, kConfig = 2, kData = 3, kNumeric = 4 };

/// Runs the command line (argv[0] is the program name). Data goes to `out`,
/// diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
/// Same, with the arguments after the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Default configuration of the train subcommand for a model kind.
nlohmann::ordered_json train_defaults(const std::string& model);

}  // namespace lfn::cli

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace dppvfx {

/// Command-line entry point. Exit codes: 0 success, 2 invalid input,
/// 3 numeric failure, 4 rejection or size budget, 5 validation failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Same, from an argument list without the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dppvfx

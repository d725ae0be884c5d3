#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dualmc {

inline constexpr const char* kVersion = "0.1.0";

// Entry point behind the dualmc executable. args excludes the program name.
// Returns the process exit code: 0 on success, 2 for usage errors (help text
// goes to err), 1 for any other failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, std::istream& in);

}  // namespace dualmc

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sysfb {

/// Runs one `sysfb` command. `args` excludes the program name. Results go to
/// `out` as a JSON object (the metrics command prints a table first); errors
/// go to `err` as {"ok": false, "error": {"kind", "message"}}.
/// Exit codes: 0 success, 1 failure, 2 configuration or usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sysfb

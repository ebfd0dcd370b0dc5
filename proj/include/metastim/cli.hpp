#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace metastim {

/// Subcommand driver behind the `metastim` binary. `args` excludes the
/// program name. Reports go to `out`; errors go to stderr. Returns 0 on
/// success, 1 for usage or config problems, 2 for runtime or data failures.
int run_cli(const std::vector<std::string>& args, std::ostream& out);

} // namespace metastim

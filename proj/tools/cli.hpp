#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hybridfilt::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kConfigFailure = 1;
inline constexpr int kNumericalFailure = 2;

/*!
 * Runs one subcommand. `args` excludes the program name. Results go to
 * `out` and to files under --out; diagnostics go to `err`.
 */
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Honors HYBRIDFILT_LOG in {error, warn, info, debug}.
void configure_logging();

}  // namespace hybridfilt::cli

#pragma once

#include <iosfwd>

namespace qthr {

/// Command-line entry point. Exit codes: 0 success, 1 validation/usage error,
/// 2 numerical failure.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace qthr

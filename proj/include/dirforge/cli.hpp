#pragma once

#include <ostream>

namespace dirforge {

// Exit codes: 0 success, 1 usage error, 2 runtime failure. On success the
// last line written to `out` is a JSON object listing the output paths.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dirforge

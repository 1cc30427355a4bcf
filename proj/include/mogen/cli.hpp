#pragma once

namespace mogen::cli {

// Entry point behind the mogen binary. Exit codes: 0 success, 1 validation
// error (bad flags, illegal signal combinations), 2 runtime error.
int run(int argc, const char* const* argv);

}  // namespace mogen::cli

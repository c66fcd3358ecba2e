#pragma once

namespace gcs::cli {

// Entry point for the command-line tool. Returns the process exit code:
// 0 success, 2 configuration error, 3 data error, 4 numeric failure.
int run(int argc, const char* const* argv);

} // namespace gcs::cli

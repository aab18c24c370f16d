#pragma once

namespace dbne::cli {

// Full command-line entry point (subcommands: sample, infer, embed,
// evaluate, pipeline, sweep). Returns the process exit code:
// 0 success, 1 usage error, 2 data error, 3 numerical failure.
int run(int argc, const char* const* argv);

}  // namespace dbne::cli

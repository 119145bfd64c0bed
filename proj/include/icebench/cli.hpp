#pragma once

namespace icebench {

// Full command-line entry point; linked into the binary and driven in-process
// by the test suite. Returns the process exit code: 0 success, 1 runtime
// failure, 2 configuration or usage failure.
int cli_main(int argc, const char* const* argv);

}  // namespace icebench

#pragma once

namespace boneage {

/// Full command-line entry point: parses argv, dispatches the subcommand,
/// and maps failures to exit codes. Returns 0 on success, 1 when a command
/// fails (one-line diagnostic on stderr), 2 on argv-level usage errors.
/// Never throws.
int run_cli(int argc, const char* const* argv);

}  // namespace boneage

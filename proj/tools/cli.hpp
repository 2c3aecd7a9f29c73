#ifndef TVPMAI_CLI_HPP
#define TVPMAI_CLI_HPP

namespace tvpmai::cli {

// Full command-line entry point (subcommands: transform, estimate, pool,
// decompose, forecast, simulate). Returns the process exit code:
//   0 success, 1 runtime/numerical failure, 2 validation failure.
int run(int argc, const char* const* argv);

}  // namespace tvpmai::cli

#endif  // TVPMAI_CLI_HPP

#pragma once

#include <iosfwd>

namespace misspec {

enum ExitCode : int {
    kExitOk = 0,
    kExitValidationFailed = 1,
    kExitConfigError = 2,
    kExitIoError = 3,
};

/// Entry point of the command-line tool. Subcommands: analytic, montecarlo,
/// realdata, validate, synthesize. CSV goes to --out (plus a manifest next
/// to it) or to `out` when --out is absent.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace misspec

#pragma once

namespace optlab::harness {

// Entry point shared by the `optlab` binary and the in-process CLI tests.
// Subcommands: run, sweep, compare, plotdata, oracle. Returns the process
// exit code; failures emit a machine-readable error record on stderr.
int cli_main(int argc, char** argv);

}  // namespace optlab::harness

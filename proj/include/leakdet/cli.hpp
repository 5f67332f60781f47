#pragma once

namespace leakdet::cli {

// Entry point for the leakdet command-line tool. Returns the process exit
// status; failures print one "error: <kind>: <message>" line to stderr.
int run(int argc, char** argv);

}  // namespace leakdet::cli

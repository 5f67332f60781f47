#include "leakdet/cli.hpp"

int main(int argc, char** argv) { return leakdet::cli::run(argc, argv); }

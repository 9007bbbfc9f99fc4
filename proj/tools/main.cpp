#include "optlab/harness/cli.hpp"

int main(int argc, char** argv) { return optlab::harness::cli_main(argc, argv); }

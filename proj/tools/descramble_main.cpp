#include "descramble/harness/cli.hpp"

int main(int argc, char** argv) { return descramble::harness::cli_main(argc, argv); }

#pragma once

namespace descramble::harness {

/// Entry point of the `descramble` tool. Exit codes: 0 success or all checks
/// passed, 1 a verification failed, 2 usage or input error.
int cli_main(int argc, char** argv);

}  // namespace descramble::harness

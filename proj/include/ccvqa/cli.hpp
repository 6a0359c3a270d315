#pragma once

#include <atomic>
#include <iosfwd>

namespace ccvqa::app {

// Exit codes: 0 success, 1 runtime failure, 2 usage error or missing input.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Set by the SIGINT handler; runners stop starting new queries once it is true.
std::atomic<bool>& interrupt_flag();

}  // namespace ccvqa::app
